#ifndef INFERBEAM_MATHUTIL_HPP
#define INFERBEAM_MATHUTIL_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <thread>
#include <vector>

namespace inferbeam {

// Gaussian tail probability Q(x) = P(N(0,1) > x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double log_sum_exp(std::span<const double> v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (x > hi) hi = x;
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

// Accumulating variant: state (hi, sum) folded one term at a time.
class LogSumExpAcc {
  public:
    void add(double x) {
        if (x == -std::numeric_limits<double>::infinity()) return;
        if (x > hi_) {
            sum_ = sum_ * std::exp(hi_ - x) + 1.0;
            hi_ = x;
        } else {
            sum_ += std::exp(x - hi_);
        }
    }
    double value() const {
        if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
        return hi_ + std::log(sum_);
    }

  private:
    double hi_ = -std::numeric_limits<double>::infinity();
    double sum_ = 0.0;
};

// splitmix64: counter-based hashing used to derive independent, replayable
// random streams from (seed, entity ids). Stream identity depends only on the
// ids, never on evaluation order, so parallel sweeps stay reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t a) {
    return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL + a));
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return hash_combine(hash_combine(seed, a), b);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                  std::uint64_t c) {
    return hash_combine(hash_combine(seed, a, b), c);
}

inline double uniform01_from_bits(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// One standard-normal draw per key (Box-Muller, first component).
inline double gaussian_from_key(std::uint64_t key) {
    double u1 = uniform01_from_bits(splitmix64(key));
    double u2 = uniform01_from_bits(splitmix64(key ^ 0xda3e39cb94b95bdbULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Small counter-based generator for per-entity streams.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x853c49e6748fea9bULL)) {}

    std::uint64_t next_u64() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return splitmix64(state_);
    }
    double uniform01() { return uniform01_from_bits(next_u64()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    // upper bound exclusive
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::uint64_t state_;
};

// Runs fn(i) for i in [0, n). Results must be written to per-index slots;
// with that discipline the output is identical for any worker count.
inline void parallel_for(std::size_t n, unsigned n_threads,
                         const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (n_threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    unsigned workers = std::min<std::size_t>(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace inferbeam

#endif
