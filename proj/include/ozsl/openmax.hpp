#ifndef OZSL_OPENMAX_HPP
#define OZSL_OPENMAX_HPP

// Softmax and Openmax decision heads over per-class activation vectors.
//
// Openmax keeps a mean activation vector (MAV) per class and a Weibull model
// of the largest activation-to-MAV distances. At prediction time the top
// activations are attenuated by the Weibull CDF of their MAV distance and the
// removed mass feeds an extra rejection bin.

#include "ozsl/dataset.hpp"
#include "ozsl/matrix.hpp"
#include "ozsl/weibull.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace ozsl {

/// Plain argmax over K classes, ties to the lowest id; never rejects.
inline Label softmax_predict(std::span<const double> activation) {
    if (activation.empty()) {
        throw dimension_error("softmax_predict: empty activation");
    }
    return static_cast<Label>(std::max_element(activation.begin(), activation.end()) - activation.begin());
}

struct ClassCalibration {
    std::size_t class_id = 0;
    Matrix mav;                           // 1 x activation dim
    std::optional<WeibullModel> weibull;  // empty: too few correct samples, never attenuated
};

struct CalibrationSet {
    std::vector<ClassCalibration> classes;  // indexed by class id
    std::size_t tail_size = 0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t num_classes() const { return classes.size(); }
    [[nodiscard]] std::size_t activation_dim() const { return classes.empty() ? 0 : classes.front().mav.cols(); }
};

/// MAV and tail model per class, from the correctly classified rows only.
///
/// A class with fewer than `tail_size` correct rows falls back to fitting all
/// of them (when there are at least two) and records a warning.
inline CalibrationSet compute_calibrations(const Matrix &activations, std::span<const std::size_t> labels, std::span<const std::size_t> predicted,
                                           std::size_t num_classes, std::size_t tail_size, const TailFitOptions &fit = {}) {
    if (labels.size() != activations.rows() || predicted.size() != activations.rows()) {
        throw dimension_error("compute_calibrations: label count does not match activation rows");
    }
    if (tail_size < 2) {
        throw validation_error("compute_calibrations: tail size must be >= 2");
    }
    CalibrationSet set;
    set.tail_size = tail_size;
    std::vector<std::vector<std::size_t>> correct(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) {
            throw validation_error("compute_calibrations: label out of range");
        }
        if (labels[i] == predicted[i]) {
            correct[labels[i]].push_back(i);
        }
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        ClassCalibration cal;
        cal.class_id = c;
        cal.mav = Matrix{1, activations.cols()};
        const auto &rows = correct[c];
        for (std::size_t r : rows) {
            for (std::size_t j = 0; j < activations.cols(); ++j) {
                cal.mav(0, j) += activations(r, j);
            }
        }
        if (!rows.empty()) {
            cal.mav = (1.0 / static_cast<double>(rows.size())) * cal.mav;
        }
        std::vector<double> distances;
        distances.reserve(rows.size());
        for (std::size_t r : rows) {
            distances.push_back(euclidean_distance(activations.row_span(r), cal.mav.row_span(0)));
        }
        std::size_t eta = tail_size;
        if (distances.size() < tail_size) {
            eta = distances.size();
            if (eta < 2) {
                set.warnings.push_back("class " + std::to_string(c) + ": " + std::to_string(eta) + " correct samples, calibration skipped");
                set.classes.push_back(std::move(cal));
                continue;
            }
            set.warnings.push_back("class " + std::to_string(c) + ": " + std::to_string(eta) + " correct samples, tail size reduced from " +
                                   std::to_string(tail_size));
        }
        cal.weibull = fit_weibull(distances, eta, fit);
        set.classes.push_back(std::move(cal));
    }
    return set;
}

/// K class probabilities followed by the rejection bin.
struct OpenPrediction {
    std::vector<double> probabilities;
    Label decision = reject_label;

    [[nodiscard]] double reject_probability() const { return probabilities.back(); }
};

inline std::size_t default_alpha_top(std::size_t num_classes) { return std::min<std::size_t>(num_classes, 10); }

/// Openmax with caller-supplied MAV distances (one per class).
///
/// For the alpha_top highest activations, rank r (0-based) gets weight
/// (alpha_top - r) / alpha_top. The positive part of each such activation is
/// scaled by weight * CDF(distance) and moved into the rejection score.
inline OpenPrediction openmax_recalibrate(std::span<const double> activation, std::span<const double> distances, const CalibrationSet &cal,
                                          std::size_t alpha_top) {
    const std::size_t k = activation.size();
    if (k != cal.num_classes() || distances.size() != k) {
        throw dimension_error("openmax: activation has " + std::to_string(k) + " entries for " + std::to_string(cal.num_classes()) + " calibrated classes");
    }
    if (alpha_top == 0 || alpha_top > k) {
        throw validation_error("openmax: alpha_top must be in [1, K]");
    }
    std::vector<std::size_t> ranked(k);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return activation[a] > activation[b]; });

    std::vector<double> scores(activation.begin(), activation.end());
    double rejected = 0.0;
    for (std::size_t r = 0; r < alpha_top; ++r) {
        const std::size_t c = ranked[r];
        const auto &model = cal.classes[c].weibull;
        if (!model) {
            continue;
        }
        const double weight = static_cast<double>(alpha_top - r) / static_cast<double>(alpha_top);
        const double moved = std::max(activation[c], 0.0) * weight * model->cdf(distances[c]);
        scores[c] -= moved;
        rejected += moved;
    }
    scores.push_back(rejected);

    const double top = *std::max_element(scores.begin(), scores.end());
    OpenPrediction out;
    out.probabilities.resize(k + 1);
    double total = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        out.probabilities[i] = std::exp(scores[i] - top);
        total += out.probabilities[i];
    }
    for (double &p : out.probabilities) {
        p /= total;
    }
    // Ties go to the rejection bin, then to the lowest class id.
    std::size_t best = k;
    for (std::size_t i = 0; i < k; ++i) {
        if (out.probabilities[i] > out.probabilities[best]) {
            best = i;
        }
    }
    out.decision = best == k ? reject_label : static_cast<Label>(best);
    return out;
}

inline OpenPrediction openmax_predict(std::span<const double> activation, const CalibrationSet &cal, std::size_t alpha_top) {
    if (activation.size() != cal.num_classes() || activation.size() != cal.activation_dim()) {
        throw dimension_error("openmax: activation has " + std::to_string(activation.size()) + " entries, calibration expects " +
                              std::to_string(cal.activation_dim()));
    }
    std::vector<double> distances;
    distances.reserve(activation.size());
    for (const auto &c : cal.classes) {
        distances.push_back(euclidean_distance(activation, c.mav.row_span(0)));
    }
    return openmax_recalibrate(activation, distances, cal, alpha_top);
}

// --- calibration file ------------------------------------------------------------
// "OZSLCAL1" line, "version 1", "classes <n> tail <eta>", then per class a record
// line "class <id> <k> <lambda> <tau> <eta>" (or "class <id> none") and its MAV
// as an OZSLMAT1 blob.

inline void write_calibrations(std::ostream &out, const CalibrationSet &set) {
    out << "OZSLCAL1\nversion 1\nclasses " << set.classes.size() << " tail " << set.tail_size << '\n';
    char buf[160];
    for (const auto &c : set.classes) {
        if (c.weibull) {
            std::snprintf(buf, sizeof(buf), "class %zu %.17g %.17g %.17g %zu\n", c.class_id, c.weibull->shape, c.weibull->scale, c.weibull->shift,
                          c.weibull->tail_size);
        } else {
            std::snprintf(buf, sizeof(buf), "class %zu none\n", c.class_id);
        }
        out << buf;
        write_matrix(out, c.mav);
    }
}

inline CalibrationSet read_calibrations(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != "OZSLCAL1") {
        throw format_error("calibration file: bad magic");
    }
    if (!std::getline(in, line) || line != "version 1") {
        throw format_error("calibration file: unsupported version line '" + line + "'");
    }
    CalibrationSet set;
    std::size_t n = 0;
    {
        std::getline(in, line);
        std::istringstream header{line};
        std::string classes_tag;
        std::string tail_tag;
        if (!(header >> classes_tag >> n >> tail_tag >> set.tail_size) || classes_tag != "classes" || tail_tag != "tail") {
            throw format_error("calibration file: bad header '" + line + "'");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) {
            throw format_error("calibration file: truncated");
        }
        std::istringstream rec{line};
        std::string tag;
        ClassCalibration c;
        rec >> tag >> c.class_id;
        if (tag != "class" || c.class_id != i) {
            throw format_error("calibration file: bad record '" + line + "'");
        }
        std::string first;
        rec >> first;
        if (first != "none") {
            WeibullModel w;
            try {
                w.shape = std::stod(first);
            } catch (const std::exception &) {
                throw format_error("calibration file: bad shape in '" + line + "'");
            }
            if (!(rec >> w.scale >> w.shift >> w.tail_size) || !(w.shape > 0.0) || !(w.scale > 0.0)) {
                throw format_error("calibration file: bad Weibull record '" + line + "'");
            }
            c.weibull = w;
        }
        c.mav = read_matrix(in);
        set.classes.push_back(std::move(c));
    }
    return set;
}

}  // namespace ozsl

#endif  // OZSL_OPENMAX_HPP
