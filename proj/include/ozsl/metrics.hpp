#ifndef OZSL_METRICS_HPP
#define OZSL_METRICS_HPP

// Open-world scoring: confusion accounting with a rejection bin, per-class
// precision/recall/F1, their seen/unseen averages and harmonic means.

#include "ozsl/dataset.hpp"
#include "ozsl/split.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace ozsl {

struct ClassCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t support = 0;  // ground-truth instances

    friend bool operator==(const ClassCounts &, const ClassCounts &) = default;

    ClassCounts &operator+=(const ClassCounts &o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        support += o.support;
        return *this;
    }
};

/// Per known class counts plus the macro "unknown" bin.
struct ConfusionLedger {
    std::vector<std::string> classes;  // seen then unseen
    std::size_t num_seen = 0;
    std::vector<ClassCounts> per_class;
    ClassCounts unknown;
    std::uint64_t instances = 0;

    friend bool operator==(const ConfusionLedger &, const ConfusionLedger &) = default;

    /// Ledgers over disjoint instance ranges of the same class list add up.
    ConfusionLedger &merge(const ConfusionLedger &o) {
        if (o.classes != classes || o.num_seen != num_seen) {
            throw validation_error("ledger merge: class lists differ");
        }
        for (std::size_t c = 0; c < per_class.size(); ++c) {
            per_class[c] += o.per_class[c];
        }
        unknown += o.unknown;
        instances += o.instances;
        return *this;
    }

    /// TP + FN equals support for every bin, and supports sum to the instance count.
    [[nodiscard]] bool conserved() const {
        std::uint64_t total = unknown.support;
        if (unknown.tp + unknown.fn != unknown.support) {
            return false;
        }
        for (const auto &c : per_class) {
            if (c.tp + c.fn != c.support) {
                return false;
            }
            total += c.support;
        }
        return total == instances;
    }
};

inline ConfusionLedger empty_ledger(std::vector<std::string> classes, std::size_t num_seen) {
    ConfusionLedger l;
    l.per_class.resize(classes.size());
    l.classes = std::move(classes);
    l.num_seen = num_seen;
    return l;
}

/// Labels index `classes`; predictions may be reject_label, truth may be unknown_label.
inline ConfusionLedger tally(std::span<const Label> predictions, std::span<const Label> truth, std::vector<std::string> classes, std::size_t num_seen) {
    if (predictions.size() != truth.size()) {
        throw dimension_error("tally: " + std::to_string(predictions.size()) + " predictions for " + std::to_string(truth.size()) + " truths");
    }
    const auto k = static_cast<Label>(classes.size());
    ConfusionLedger l = empty_ledger(std::move(classes), num_seen);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const Label p = predictions[i];
        const Label t = truth[i];
        if (p < reject_label || p >= k) {
            throw validation_error("tally: prediction " + std::to_string(p) + " outside the manifest's known classes");
        }
        if (t < unknown_label || t >= k) {
            throw validation_error("tally: truth " + std::to_string(t) + " outside the manifest");
        }
        ++l.instances;
        ClassCounts &truth_bin = t == unknown_label ? l.unknown : l.per_class[static_cast<std::size_t>(t)];
        ClassCounts &pred_bin = p == reject_label ? l.unknown : l.per_class[static_cast<std::size_t>(p)];
        ++truth_bin.support;
        if (p == t) {
            ++truth_bin.tp;
        } else {
            ++pred_bin.fp;
            ++truth_bin.fn;
        }
    }
    return l;
}

inline ConfusionLedger tally(std::span<const Label> predictions, std::span<const Label> truth, const SplitManifest &manifest) {
    return tally(predictions, truth, manifest.known_classes(), manifest.seen.size());
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// 0/0 is scored as 0 for precision, recall and F1 alike.
inline double safe_ratio(std::uint64_t num, std::uint64_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

/// 2ab / (a + b), and 0 when a + b = 0.
inline double harmonic_mean(double a, double b) { return a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b); }

inline Prf scores_from_counts(const ClassCounts &c) {
    Prf s;
    s.recall = safe_ratio(c.tp, c.tp + c.fn);
    s.precision = safe_ratio(c.tp, c.tp + c.fp);
    s.f1 = harmonic_mean(s.recall, s.precision);
    return s;
}

inline std::vector<Prf> per_class_scores(const ConfusionLedger &l) {
    std::vector<Prf> out;
    out.reserve(l.per_class.size());
    for (const auto &c : l.per_class) {
        out.push_back(scores_from_counts(c));
    }
    return out;
}

struct GroupScores {
    double recall_seen = 0.0;    // R_S
    double recall_unseen = 0.0;  // R_U
    double f1_seen = 0.0;        // F1_S
    double f1_unseen = 0.0;      // F1_U
};

/// Unweighted averages over the seen block [0, num_seen) and unseen block [num_seen, end).
inline GroupScores aggregate(std::span<const Prf> scores, std::size_t num_seen) {
    if (num_seen == 0 || num_seen >= scores.size()) {
        throw validation_error("aggregate: both the seen and the unseen class sets must be non-empty");
    }
    GroupScores g;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (c < num_seen) {
            g.recall_seen += scores[c].recall;
            g.f1_seen += scores[c].f1;
        } else {
            g.recall_unseen += scores[c].recall;
            g.f1_unseen += scores[c].f1;
        }
    }
    const auto ns = static_cast<double>(num_seen);
    const auto nu = static_cast<double>(scores.size() - num_seen);
    g.recall_seen /= ns;
    g.f1_seen /= ns;
    g.recall_unseen /= nu;
    g.f1_unseen /= nu;
    return g;
}

inline double h_gzsl(double recall_seen, double recall_unseen) { return harmonic_mean(recall_seen, recall_unseen); }
inline double h_ozsl(double f1_seen, double f1_unseen) { return harmonic_mean(f1_seen, f1_unseen); }

struct EvalReport {
    ConfusionLedger ledger;
    std::vector<Prf> per_class;
    GroupScores groups;
    double h_gzsl = 0.0;
    double h_ozsl = 0.0;
    Prf unknown;  // P_Omega, R_Omega, F1_Omega from the macro bin
};

inline EvalReport evaluate(const ConfusionLedger &ledger) {
    EvalReport r;
    r.ledger = ledger;
    r.per_class = per_class_scores(ledger);
    r.groups = aggregate(r.per_class, ledger.num_seen);
    r.h_gzsl = h_gzsl(r.groups.recall_seen, r.groups.recall_unseen);
    r.h_ozsl = h_ozsl(r.groups.f1_seen, r.groups.f1_unseen);
    r.unknown = scores_from_counts(ledger.unknown);
    return r;
}

/// Percentage with two decimals, ties rounded to even.
inline std::string format_percent(double fraction) {
    const double hundredths = std::nearbyint(fraction * 10000.0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", hundredths / 100.0);
    return buf;
}

}  // namespace ozsl

#endif  // OZSL_METRICS_HPP
