#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace morl {

inline constexpr const char* kVersion = "0.1.0";

struct ManifestEntry {
    std::string path; ///< relative to the run directory
    std::uint64_t hash = 0;
    std::uintmax_t bytes = 0;
};

/**
 * Record of one subcommand invocation. The run directory holds config.ini
 * (the serialized config) and manifest.json; every other file written by the
 * run is listed exactly once.
 */
class RunManifest {
  public:
    RunManifest(std::string dir, std::string subcommand, std::string config_text,
                std::vector<std::uint64_t> seeds);

    const std::string& dir() const { return dir_; }
    /// Absolute path for a run-relative name; parent directories are created.
    std::string path(const std::string& relative) const;
    /// Hashes the file now; re-adding a path replaces its entry.
    void add(const std::string& relative);
    /// Adds every regular file under `relative` (recursively).
    void add_tree(const std::string& relative);
    void note(const std::string& key, const std::string& value);

    /// Writes config.ini and manifest.json.
    void finish();

    const std::vector<ManifestEntry>& entries() const { return entries_; }
    std::uint64_t config_hash() const;

  private:
    std::string dir_;
    std::string subcommand_;
    std::string config_text_;
    std::vector<std::uint64_t> seeds_;
    std::vector<ManifestEntry> entries_;
    std::vector<std::pair<std::string, std::string>> notes_;
    std::chrono::steady_clock::time_point start_;
};

std::uint64_t hash_file(const std::string& path);

struct VerifyReport {
    bool ok = true;
    std::vector<std::string> problems;
};

/// Recomputes the config hash from config.ini and every listed file's hash;
/// also flags files on disk that the manifest does not list.
VerifyReport verify_run(const std::string& dir);

} // namespace morl
