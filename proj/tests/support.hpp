#ifndef OZSL_TESTS_SUPPORT_HPP
#define OZSL_TESTS_SUPPORT_HPP

// Independent oracles shared by the unit tests and the acceptance runner.

#include "ozsl/autodiff.hpp"
#include "ozsl/dataset.hpp"
#include "ozsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace ozsl::testing {

/// Central finite-difference gradient of a scalar function of `params`.
inline std::vector<Matrix> finite_difference(const std::function<double()> &f, std::vector<ad::Var> params, double h = 1e-5) {
    std::vector<Matrix> out;
    for (auto &p : params) {
        const Matrix base = p.value();
        Matrix g{base.rows(), base.cols()};
        for (std::size_t i = 0; i < base.rows(); ++i) {
            for (std::size_t j = 0; j < base.cols(); ++j) {
                Matrix m = base;
                m(i, j) = base(i, j) + h;
                p.assign(m);
                const double up = f();
                m(i, j) = base(i, j) - h;
                p.assign(m);
                const double down = f();
                g(i, j) = (up - down) / (2.0 * h);
            }
        }
        p.assign(base);
        out.push_back(std::move(g));
    }
    return out;
}

/// Worst per-tensor ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
inline double gradient_error(const std::vector<Matrix> &analytic, const std::vector<Matrix> &numeric, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        double diff = 0.0;
        double na = 0.0;
        double nn = 0.0;
        for (std::size_t i = 0; i < analytic[k].data().size(); ++i) {
            const double a = analytic[k].data()[i];
            const double b = numeric[k].data()[i];
            diff += (a - b) * (a - b);
            na += a * a;
            nn += b * b;
        }
        worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor}));
    }
    return worst;
}

/// Analytic-vs-numeric error of d(build())/d(params).
inline double check_gradient(const std::function<ad::Var()> &build, const std::vector<ad::Var> &params, double h = 1e-5) {
    const auto analytic = ad::gradients(build(), params);
    const auto numeric = finite_difference([&] { return build().scalar(); }, params, h);
    return gradient_error(analytic, numeric);
}

/// Counts written straight from the five tally rules; class -1 is the unknown bin.
struct OracleLedger {
    std::map<Label, std::uint64_t> tp;
    std::map<Label, std::uint64_t> fp;
    std::map<Label, std::uint64_t> fn;
};

inline OracleLedger oracle_tally(const std::vector<Label> &pred, const std::vector<Label> &truth) {
    constexpr Label unknown = -1;
    constexpr Label reject = -1;
    OracleLedger o;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Label p = pred[i];
        const Label t = truth[i];
        if (p != reject && t != unknown && p == t) {
            ++o.tp[p];
        } else if (p != reject && t != unknown) {
            ++o.fp[p];
            ++o.fn[t];
        } else if (p != reject && t == unknown) {
            ++o.fp[p];
            ++o.fn[unknown];
        } else if (p == reject && t == unknown) {
            ++o.tp[unknown];
        } else {
            ++o.fp[unknown];
            ++o.fn[t];
        }
    }
    return o;
}

inline std::uint64_t count_of(const std::map<Label, std::uint64_t> &m, Label c) {
    const auto it = m.find(c);
    return it == m.end() ? 0 : it->second;
}

/// Inverse-CDF draws from Weibull(shape k, scale lambda).
inline std::vector<double> weibull_samples(double k, double lambda, std::size_t n, std::uint64_t seed) {
    Rng rng{seed};
    std::vector<double> out(n);
    for (double &x : out) {
        const double u = rng.uniform();
        x = lambda * std::pow(-std::log1p(-u), 1.0 / k);
    }
    return out;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace ozsl::testing

#endif  // OZSL_TESTS_SUPPORT_HPP
