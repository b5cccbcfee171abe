#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace vnet {

using index_t = std::uint32_t;

/// Layer of a bipartite graph. `top` is the row layer, `bottom` the column layer.
enum class Layer { top, bottom };

constexpr Layer opposite(Layer l) noexcept {
    return l == Layer::top ? Layer::bottom : Layer::top;
}

constexpr std::string_view to_string(Layer l) noexcept {
    return l == Layer::top ? "top" : "bottom";
}

/// Raised when an iterative solver exhausts its iteration budget.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, std::size_t iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double residual_;
    std::size_t iterations_;
};

/// Configuration problems (bad values, unreadable inputs).
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A pipeline stage was asked to run before the stage that produces its inputs.
class DependencyError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Seed derivation. Every random stream in the library is obtained from one
// master seed by hashing a textual stream name into it:
//   derive_seed(master, name) = splitmix64(master ^ fnv1a64(name))
// and numbered sub-streams (run i of a repeated algorithm) use
//   derive_seed(seed, i) = splitmix64(seed + golden * (i + 1)).

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view name) noexcept {
    return splitmix64(master ^ fnv1a64(name));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), n > 0 (rejection sampling).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do v = rng();
    while (v >= limit);
    return v % n;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

template <class T>
void shuffle(std::vector<T>& xs, Rng& rng) {
    for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[uniform_index(rng, i)]);
}

/// Poisson variate (inversion for small means, normal approximation above 500).
inline std::uint64_t poisson(Rng& rng, double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 500.0) {
        const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        return static_cast<std::uint64_t>(std::max(0.0, std::round(mean + std::sqrt(mean) * z)));
    }
    double p = std::exp(-mean), cdf = p;
    const double u = uniform01(rng);
    std::uint64_t k = 0;
    while (u > cdf && k < 10000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

/// Runs `body(i)` for i in [0, n) on a small thread pool. Work items must write
/// to disjoint slots; results are then independent of scheduling.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    }
}

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace vnet
