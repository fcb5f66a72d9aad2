#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace morl {

using Rng = std::mt19937_64;

// *************************************************************************************
// **** Errors
// *************************************************************************************

/// Invalid configuration values (zero horizon, negative rates, malformed files).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller (e.g. stepping a
/// finished episode).
class ContractError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Numerical inputs that fail validation (non-stochastic rows, negative multipliers).
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// The operation is not defined for the given kind of input.
class UnsupportedError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Q-learning produced non-finite parameters.
class TrainingFailure : public std::runtime_error {
  public:
    TrainingFailure(std::size_t episode, const std::string& what)
        : std::runtime_error(what), episode_(episode) {}
    std::size_t episode() const noexcept { return episode_; }

  private:
    std::size_t episode_;
};

// *************************************************************************************
// **** Seeding
// *************************************************************************************

/// SplitMix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for (seed, stream index). Used everywhere a worker,
/// episode or round needs its own generator.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix_seed(seed ^ mix_seed(stream ^ 0xD1B54A32D192ED03ULL));
}

template <class... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    Rest... rest) noexcept {
    return derive_seed(derive_seed(seed, stream), static_cast<std::uint64_t>(rest)...);
}

// *************************************************************************************
// **** Parallel helpers
// *************************************************************************************

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items are handed
/// out by index, so any reduction over per-index results is order independent.
/// The first exception thrown by a worker is rethrown on the calling thread.
template <class Fn> void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex mutex;
    std::size_t next = 0;
    std::exception_ptr failure;
    auto worker = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard lock(mutex);
                if (next >= n || failure) return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace morl
