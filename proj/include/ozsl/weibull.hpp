#ifndef OZSL_WEIBULL_HPP
#define OZSL_WEIBULL_HPP

#include "ozsl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ozsl {

/// Three-parameter Weibull: F(x) = 1 - exp(-((x - shift) / scale)^shape) for x > shift.
struct WeibullModel {
    double shape = 1.0;
    double scale = 1.0;
    double shift = 0.0;
    std::size_t tail_size = 0;

    [[nodiscard]] double cdf(double x) const {
        if (!(x > shift)) {
            return 0.0;
        }
        return -std::expm1(-std::pow((x - shift) / scale, shape));
    }

    [[nodiscard]] double quantile(double p) const { return shift + scale * std::pow(-std::log1p(-p), 1.0 / shape); }

    friend bool operator==(const WeibullModel &, const WeibullModel &) = default;
};

struct WeibullFitOptions {
    double tolerance = 1e-9;
    std::size_t max_iterations = 200;
};

namespace detail {

// Profile score for the shape k on data normalized to max 1:
//   g(k) = sum y^k ln y / sum y^k - 1/k - mean(ln y)
// g is increasing; its root is the MLE. Returns {g, g'}.
inline std::pair<double, double> weibull_profile(std::span<const double> log_y, double mean_log, double k) {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (double ly : log_y) {
        const double w = std::exp(k * ly);
        s0 += w;
        s1 += w * ly;
        s2 += w * ly * ly;
    }
    const double ratio = s1 / s0;
    const double g = ratio - 1.0 / k - mean_log;
    const double dg = s2 / s0 - ratio * ratio + 1.0 / (k * k);
    return {g, dg};
}

}  // namespace detail

/// Two-parameter maximum-likelihood fit to strictly positive samples.
///
/// Newton iterations on the shape profile equation, falling back to bisection
/// whenever a step would leave the current sign-change bracket.
inline WeibullModel fit_weibull_mle(std::span<const double> samples, const WeibullFitOptions &opts = {}) {
    if (samples.size() < 2) {
        throw validation_error("weibull: at least two samples are required");
    }
    const double top = *std::max_element(samples.begin(), samples.end());
    const double bottom = *std::min_element(samples.begin(), samples.end());
    if (!(bottom > 0.0) || !std::isfinite(top)) {
        throw domain_error("weibull: samples must be positive and finite");
    }
    if (bottom == top) {
        throw flat_tail_error("weibull: all tail samples are equal (" + std::to_string(top) + ")");
    }

    std::vector<double> log_y;
    log_y.reserve(samples.size());
    double mean_log = 0.0;
    for (double x : samples) {
        log_y.push_back(std::log(x / top));
        mean_log += log_y.back();
    }
    mean_log /= static_cast<double>(samples.size());

    const auto score = [&](double k) { return detail::weibull_profile(log_y, mean_log, k); };

    double lo = 1.0;
    double hi = 1.0;
    while (score(lo).first > 0.0) {
        lo *= 0.5;
        if (lo < 1e-12) {
            throw flat_tail_error("weibull: shape bracket collapsed");
        }
    }
    while (score(hi).first < 0.0) {
        hi *= 2.0;
        if (hi > 1e12) {
            throw flat_tail_error("weibull: tail too concentrated for a finite shape");
        }
    }

    // Method-of-moments start on the log scale: sd(ln x) ~ 1.2826 / k.
    double var_log = 0.0;
    for (double ly : log_y) {
        var_log += (ly - mean_log) * (ly - mean_log);
    }
    var_log /= static_cast<double>(log_y.size());
    double k = std::clamp(1.2825498301618641 / std::sqrt(var_log), lo, hi);

    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        const auto [g, dg] = score(k);
        if (g == 0.0) {
            break;
        }
        if (g < 0.0) {
            lo = k;
        } else {
            hi = k;
        }
        double next = k - g / dg;
        if (!(next > lo && next < hi) || !std::isfinite(next)) {
            next = 0.5 * (lo + hi);
        }
        const double step = std::abs(next - k);
        k = next;
        if (step < opts.tolerance) {
            break;
        }
    }

    double mean_pow = 0.0;
    for (double ly : log_y) {
        mean_pow += std::exp(k * ly);
    }
    mean_pow /= static_cast<double>(log_y.size());

    WeibullModel m;
    m.shape = k;
    m.scale = top * std::pow(mean_pow, 1.0 / k);
    m.shift = 0.0;
    m.tail_size = samples.size();
    return m;
}

struct TailFitOptions {
    WeibullFitOptions solver{};
    // Tail is shifted so its smallest point sits at `translate` above the origin.
    double translate = 1.0;
};

/// Fits the `tail_size` largest distances, shifted by shift = min(tail) - translate.
inline WeibullModel fit_weibull(std::span<const double> distances, std::size_t tail_size, const TailFitOptions &opts = {}) {
    if (tail_size < 2) {
        throw validation_error("weibull: tail size must be >= 2");
    }
    if (distances.size() < tail_size) {
        throw validation_error("weibull: " + std::to_string(distances.size()) + " distances for tail size " + std::to_string(tail_size));
    }
    if (!(opts.translate > 0.0)) {
        throw validation_error("weibull: translate must be positive");
    }
    std::vector<double> tail(distances.begin(), distances.end());
    std::partial_sort(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail_size), tail.end(), std::greater<>{});
    tail.resize(tail_size);
    const double smallest = tail.back();
    if (smallest == tail.front()) {
        throw flat_tail_error("weibull: the " + std::to_string(tail_size) + " largest distances are all equal");
    }
    const double shift = smallest - opts.translate;
    for (double &d : tail) {
        d -= shift;
    }
    WeibullModel m = fit_weibull_mle(tail, opts.solver);
    m.shift = shift;
    m.tail_size = tail_size;
    return m;
}

}  // namespace ozsl

#endif  // OZSL_WEIBULL_HPP
