#include "morl/artifacts.hpp"

#include "morl/common.hpp"
#include "morl/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace morl {

std::uint64_t hash_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return fnv1a64(ss.str());
}

RunManifest::RunManifest(std::string dir, std::string subcommand, std::string config_text,
                         std::vector<std::uint64_t> seeds)
    : dir_(std::move(dir)), subcommand_(std::move(subcommand)), config_text_(std::move(config_text)),
      seeds_(std::move(seeds)), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
}

std::string RunManifest::path(const std::string& relative) const {
    const fs::path p = fs::path(dir_) / relative;
    fs::create_directories(p.parent_path());
    return p.string();
}

void RunManifest::add(const std::string& relative) {
    const auto full = (fs::path(dir_) / relative).string();
    ManifestEntry e{fs::path(relative).generic_string(), hash_file(full), fs::file_size(full)};
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const ManifestEntry& x) { return x.path == e.path; });
    if (it != entries_.end())
        *it = e;
    else
        entries_.push_back(e);
}

void RunManifest::add_tree(const std::string& relative) {
    const fs::path root = fs::path(dir_) / relative;
    if (!fs::exists(root)) return;
    std::vector<std::string> files;
    for (const auto& f : fs::recursive_directory_iterator(root))
        if (f.is_regular_file()) files.push_back(fs::relative(f.path(), dir_).generic_string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(f);
}

void RunManifest::note(const std::string& key, const std::string& value) { notes_.emplace_back(key, value); }

std::uint64_t RunManifest::config_hash() const { return fnv1a64(config_text_); }

void RunManifest::finish() {
    {
        std::ofstream f(path("config.ini"), std::ios::binary);
        f << config_text_;
    }
    nlohmann::json j;
    j["subcommand"] = subcommand_;
    j["version"] = kVersion;
    j["config_hash"] = hex64(config_hash());
    j["seeds"] = seeds_;
    j["output_dir"] = fs::absolute(dir_).string();
    j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json files = nlohmann::json::array();
    for (const auto& e : entries_) files.push_back({{"path", e.path}, {"fnv1a64", hex64(e.hash)}, {"bytes", e.bytes}});
    j["files"] = files;
    nlohmann::json notes = nlohmann::json::object();
    for (const auto& [k, v] : notes_) notes[k] = v;
    j["notes"] = notes;
    std::ofstream f(path("manifest.json"));
    f << j.dump(2) << '\n';
}

VerifyReport verify_run(const std::string& dir) {
    VerifyReport rep;
    auto fail = [&](std::string msg) {
        rep.ok = false;
        rep.problems.push_back(std::move(msg));
    };
    const fs::path root(dir);
    std::ifstream mf(root / "manifest.json");
    if (!mf) {
        fail("missing manifest.json");
        return rep;
    }
    nlohmann::json j;
    try {
        mf >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("unreadable manifest: ") + e.what());
        return rep;
    }
    if (!fs::exists(root / "config.ini")) {
        fail("missing config.ini");
    } else {
        std::ifstream cf(root / "config.ini", std::ios::binary);
        std::ostringstream ss;
        ss << cf.rdbuf();
        const std::string text = ss.str();
        if (hex64(fnv1a64(text)) != j.value("config_hash", ""))
            fail("config hash mismatch");
        try {
            if (parse_config(text).serialize() != text) fail("config.ini is not in canonical form");
        } catch (const std::exception& e) {
            fail(std::string("config.ini does not parse: ") + e.what());
        }
    }
    std::set<std::string> listed{"manifest.json", "config.ini"};
    for (const auto& e : j.value("files", nlohmann::json::array())) {
        const std::string p = e.at("path");
        if (!listed.insert(p).second) fail("listed twice: " + p);
        const auto full = root / p;
        if (!fs::exists(full)) {
            fail("missing file: " + p);
            continue;
        }
        if (hex64(hash_file(full.string())) != e.at("fnv1a64").get<std::string>()) fail("hash mismatch: " + p);
    }
    // subdirectories with their own manifest are separate runs (seed batches)
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && fs::exists(it->path() / "manifest.json")) {
            const auto sub = verify_run(it->path().string());
            const auto prefix = fs::relative(it->path(), root).generic_string() + "/";
            for (const auto& p : sub.problems) fail(prefix + p);
            it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        const auto rel = fs::relative(it->path(), root).generic_string();
        if (!listed.count(rel)) fail("unlisted file: " + rel);
    }
    return rep;
}

} // namespace morl
