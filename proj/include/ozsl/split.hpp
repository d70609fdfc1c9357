#ifndef OZSL_SPLIT_HPP
#define OZSL_SPLIT_HPP

// Seen / unseen / unknown partitions and the train/test views they induce.

#include "ozsl/dataset.hpp"
#include "ozsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ozsl {

/// Share of the base unseen classes that stay unseen (the rest become unknown).
enum class Regime { split_20_80, split_50_50, split_80_20 };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::split_20_80: return "20-80";
        case Regime::split_50_50: return "50-50";
        case Regime::split_80_20: return "80-20";
    }
    return "?";
}

inline Regime parse_regime(std::string_view s) {
    if (s == "20-80") {
        return Regime::split_20_80;
    }
    if (s == "50-50") {
        return Regime::split_50_50;
    }
    if (s == "80-20") {
        return Regime::split_80_20;
    }
    throw validation_error("unknown regime '" + std::string{s} + "' (expected 20-80, 50-50 or 80-20)");
}

inline std::size_t unseen_percent(Regime r) {
    switch (r) {
        case Regime::split_20_80: return 20;
        case Regime::split_50_50: return 50;
        case Regime::split_80_20: return 80;
    }
    return 0;
}

/// ceil(percent * n / 100) in integer arithmetic.
inline std::size_t unseen_count(Regime r, std::size_t base_unseen) { return (unseen_percent(r) * base_unseen + 99) / 100; }

enum class ClassRole { seen, unseen, unknown };

inline std::string to_string(ClassRole r) {
    switch (r) {
        case ClassRole::seen: return "seen";
        case ClassRole::unseen: return "unseen";
        case ClassRole::unknown: return "unknown";
    }
    return "?";
}

struct SplitManifest {
    Regime regime = Regime::split_50_50;
    std::vector<std::string> seen;
    std::vector<std::string> unseen;
    std::vector<std::string> unknown;
    std::string provenance = "canonical";

    /// Seen classes followed by unseen ones: the label space of every classifier.
    [[nodiscard]] std::vector<std::string> known_classes() const {
        std::vector<std::string> out = seen;
        out.insert(out.end(), unseen.begin(), unseen.end());
        return out;
    }

    [[nodiscard]] ClassRole role_of(const std::string &name) const {
        if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
            return ClassRole::seen;
        }
        if (std::find(unseen.begin(), unseen.end(), name) != unseen.end()) {
            return ClassRole::unseen;
        }
        if (std::find(unknown.begin(), unknown.end(), name) != unknown.end()) {
            return ClassRole::unknown;
        }
        throw validation_error("class not in manifest: " + name);
    }

    void validate() const {
        std::set<std::string> all;
        for (const auto *group : {&seen, &unseen, &unknown}) {
            for (const auto &n : *group) {
                if (!all.insert(n).second) {
                    throw validation_error("manifest: class listed twice: " + n);
                }
            }
        }
        if (seen.empty()) {
            throw validation_error("manifest: no seen classes");
        }
    }

    /// Every dataset class is covered and every manifest class exists.
    void check_against(const Dataset &d) const {
        validate();
        std::set<std::string> listed;
        for (const auto *group : {&seen, &unseen, &unknown}) {
            for (const auto &n : *group) {
                (void)d.class_index(n);
                listed.insert(n);
            }
        }
        for (const auto &n : d.class_names) {
            if (!listed.contains(n)) {
                throw validation_error("manifest does not assign a role to dataset class " + n);
            }
        }
    }
};

/// Splits the base unseen classes: a seeded shuffle picks which stay unseen.
inline SplitManifest make_split(std::vector<std::string> seen, const std::vector<std::string> &base_unseen, Regime regime, std::uint64_t seed) {
    if (base_unseen.size() < 2) {
        throw validation_error("make_split: at least two base unseen classes are required");
    }
    std::vector<std::size_t> order(base_unseen.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng{seed};
    std::shuffle(order.begin(), order.end(), rng.engine());
    const std::size_t keep = unseen_count(regime, base_unseen.size());
    std::vector<bool> stays(base_unseen.size(), false);
    for (std::size_t i = 0; i < keep; ++i) {
        stays[order[i]] = true;
    }
    SplitManifest m;
    m.regime = regime;
    m.seen = std::move(seen);
    for (std::size_t i = 0; i < base_unseen.size(); ++i) {
        (stays[i] ? m.unseen : m.unknown).push_back(base_unseen[i]);
    }
    m.provenance = "seeded-random seed=" + std::to_string(seed) + " unseen-rounding=ceil";
    m.validate();
    return m;
}

// Text format: "regime <tag>", optional "# provenance <text>", then "<name> <seen|unseen|unknown>" lines.

inline void write_manifest(std::ostream &out, const SplitManifest &m) {
    out << "regime " << to_string(m.regime) << '\n';
    out << "# provenance " << m.provenance << '\n';
    for (const auto &n : m.seen) {
        out << n << " seen\n";
    }
    for (const auto &n : m.unseen) {
        out << n << " unseen\n";
    }
    for (const auto &n : m.unknown) {
        out << n << " unknown\n";
    }
}

inline SplitManifest parse_manifest(std::istream &in) {
    SplitManifest m;
    bool have_regime = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line.starts_with("#")) {
            constexpr std::string_view tag = "# provenance ";
            if (line.starts_with(tag)) {
                m.provenance = line.substr(tag.size());
            }
            continue;
        }
        std::istringstream fields{line};
        std::string first;
        std::string second;
        std::string extra;
        fields >> first >> second;
        if (first.empty() || second.empty() || (fields >> extra)) {
            throw format_error("manifest line " + std::to_string(line_no) + ": expected two fields");
        }
        if (!have_regime) {
            if (first != "regime") {
                throw format_error("manifest: first line must be 'regime <tag>'");
            }
            m.regime = parse_regime(second);
            have_regime = true;
            continue;
        }
        if (second == "seen") {
            m.seen.push_back(first);
        } else if (second == "unseen") {
            m.unseen.push_back(first);
        } else if (second == "unknown") {
            m.unknown.push_back(first);
        } else {
            throw format_error("manifest line " + std::to_string(line_no) + ": unknown role '" + second + "'");
        }
    }
    if (!have_regime) {
        throw format_error("manifest: missing regime line");
    }
    m.validate();
    return m;
}

inline SplitManifest load_manifest(const std::string &path) {
    std::ifstream in{path};
    if (!in) {
        throw format_error("cannot open: " + path);
    }
    return parse_manifest(in);
}

inline void save_manifest(const std::string &path, const SplitManifest &m) {
    std::ofstream out{path, std::ios::trunc};
    if (!out) {
        throw format_error("cannot open for writing: " + path);
    }
    write_manifest(out, m);
}

// --- views ---------------------------------------------------------------------

/// What a learner may see: seen instances and the seen + unseen embeddings.
struct TrainView {
    std::vector<std::string> known_classes;  // seen first, then unseen
    std::size_t num_seen = 0;
    Matrix known_embeddings;                 // rows aligned with known_classes
    Matrix features;                         // seen training instances
    std::vector<std::size_t> labels;         // index into known_classes, always < num_seen

    [[nodiscard]] std::size_t num_unseen() const { return known_classes.size() - num_seen; }
};

/// Held-out seen instances plus every unseen and unknown instance.
struct TestView {
    std::vector<std::string> known_classes;
    std::size_t num_seen = 0;
    Matrix features;
    std::vector<Label> truth;  // index into known_classes, or unknown_label
};

struct ViewOptions {
    double seen_test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct Views {
    TrainView train;
    TestView test;
};

inline Views apply_manifest(const Dataset &d, const SplitManifest &m, const ViewOptions &opts = {}) {
    m.check_against(d);
    if (opts.seen_test_fraction < 0.0 || opts.seen_test_fraction >= 1.0) {
        throw validation_error("seen test fraction must be in [0, 1)");
    }
    Views v;
    v.train.known_classes = m.known_classes();
    v.train.num_seen = m.seen.size();
    v.test.known_classes = v.train.known_classes;
    v.test.num_seen = v.train.num_seen;

    std::vector<Matrix> emb_rows;
    std::unordered_map<std::string, std::size_t> known_index;
    for (std::size_t i = 0; i < v.train.known_classes.size(); ++i) {
        emb_rows.push_back(d.embedding_of(v.train.known_classes[i]));
        known_index.emplace(v.train.known_classes[i], i);
    }
    v.train.known_embeddings = vstack(emb_rows);

    // Per seen class, a seeded subset of instances is held out for testing.
    std::unordered_map<std::string, std::vector<std::size_t>> seen_instances;
    for (std::size_t i = 0; i < d.num_instances(); ++i) {
        if (m.role_of(d.labels[i]) == ClassRole::seen) {
            seen_instances[d.labels[i]].push_back(i);
        }
    }
    std::vector<bool> held_out(d.num_instances(), false);
    Rng rng{opts.seed};
    for (const auto &name : m.seen) {
        auto &idx = seen_instances[name];
        std::vector<std::size_t> shuffled = idx;
        std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
        const auto n_test = static_cast<std::size_t>(std::floor(opts.seen_test_fraction * static_cast<double>(shuffled.size())));
        for (std::size_t k = 0; k < n_test; ++k) {
            held_out[shuffled[k]] = true;
        }
    }

    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < d.num_instances(); ++i) {
        const auto role = m.role_of(d.labels[i]);
        if (role == ClassRole::seen && !held_out[i]) {
            train_rows.push_back(i);
            v.train.labels.push_back(known_index.at(d.labels[i]));
        } else {
            test_rows.push_back(i);
            v.test.truth.push_back(role == ClassRole::unknown ? unknown_label : static_cast<Label>(known_index.at(d.labels[i])));
        }
    }
    v.train.features = gather_rows(d.features, train_rows);
    v.test.features = gather_rows(d.features, test_rows);
    if (v.train.features.rows() == 0) {
        v.train.features = Matrix{0, d.feature_dim()};
    }
    return v;
}

/// Serialized form of a train view; used to prove nothing about unknown classes leaks.
inline void write_train_view(std::ostream &out, const TrainView &v) {
    out << "classes " << v.known_classes.size() << " seen " << v.num_seen << '\n';
    for (const auto &n : v.known_classes) {
        out << n << '\n';
    }
    write_matrix(out, v.known_embeddings);
    write_matrix(out, v.features);
    for (auto l : v.labels) {
        out << l << '\n';
    }
}

}  // namespace ozsl

#endif  // OZSL_SPLIT_HPP
