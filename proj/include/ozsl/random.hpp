#ifndef OZSL_RANDOM_HPP
#define OZSL_RANDOM_HPP

#include "ozsl/matrix.hpp"

#include <cstdint>
#include <random>

namespace ozsl {

/// Seeded generator; every stochastic component takes one by reference.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_{seed} {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>{lo, hi}(engine_); }
    double normal(double mean = 0.0, double stddev = 1.0) { return std::normal_distribution<double>{mean, stddev}(engine_); }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>{0, n - 1}(engine_); }

    Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0) {
        Matrix m{rows, cols};
        std::normal_distribution<double> dist{0.0, stddev};
        for (double &v : m.data()) {
            v = dist(engine_);
        }
        return m;
    }

    Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
        Matrix m{rows, cols};
        std::uniform_real_distribution<double> dist{lo, hi};
        for (double &v : m.data()) {
            v = dist(engine_);
        }
        return m;
    }

    std::uint64_t next_seed() { return engine_(); }

    std::mt19937_64 &engine() noexcept { return engine_; }

  private:
    std::mt19937_64 engine_;
};

/// Independent stream for item `index` of a run seeded with `seed` (splitmix64 mix).
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace ozsl

#endif  // OZSL_RANDOM_HPP
