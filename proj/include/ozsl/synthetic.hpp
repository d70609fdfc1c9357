#ifndef OZSL_SYNTHETIC_HPP
#define OZSL_SYNTHETIC_HPP

// Desk-scale stand-in for a benchmark: class embeddings on a jittered binary
// lattice, features drawn around a fixed linear image of the embeddings.

#include "ozsl/dataset.hpp"
#include "ozsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>

namespace ozsl {

struct SyntheticSpec {
    std::size_t classes = 12;
    std::size_t per_class = 80;
    std::size_t embed_dim = 8;
    std::size_t feature_dim = 16;
    double spread = 0.1;       // per-coordinate std of each class blob
    double separation = 0.25;  // std of the embedding -> feature map entries
    double jitter = 0.05;      // half-width of the uniform lattice jitter
    std::uint64_t seed = 7;

    void validate() const {
        if (classes < 1 || per_class < 1 || embed_dim < 1 || feature_dim < 1) {
            throw validation_error("synthetic: all counts must be >= 1");
        }
        if (embed_dim < 63 && (std::uint64_t{1} << embed_dim) < classes) {
            throw validation_error("synthetic: embed_dim too small for " + std::to_string(classes) + " distinct lattice points");
        }
        if (!(spread > 0.0) || !(separation > 0.0) || jitter < 0.0) {
            throw validation_error("synthetic: spread and separation must be positive, jitter non-negative");
        }
    }
};

struct SyntheticDataset {
    Dataset data;
    Matrix class_means;  // construction means, rows aligned with class_names
};

inline std::string synthetic_class_name(std::size_t i) {
    std::string s = std::to_string(i);
    return "class" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

inline SyntheticDataset generate_synthetic(const SyntheticSpec &spec) {
    spec.validate();
    Rng rng{spec.seed};

    // Distinct lattice vertices.
    std::set<std::vector<int>> used;
    Matrix emb{spec.classes, spec.embed_dim};
    for (std::size_t c = 0; c < spec.classes; ++c) {
        std::vector<int> bits(spec.embed_dim);
        do {
            for (int &b : bits) {
                b = rng.uniform() < 0.5 ? 0 : 1;
            }
        } while (!used.insert(bits).second);
        for (std::size_t j = 0; j < spec.embed_dim; ++j) {
            emb(c, j) = bits[j] + rng.uniform(-spec.jitter, spec.jitter);
        }
    }

    // Feature means: emb * A + offset, offset keeping every mean >= 4 spreads.
    const Matrix map = rng.normal_matrix(spec.embed_dim, spec.feature_dim, spec.separation);
    Matrix means = matmul(emb, map);
    for (std::size_t j = 0; j < spec.feature_dim; ++j) {
        double lowest = means(0, j);
        for (std::size_t c = 1; c < spec.classes; ++c) {
            lowest = std::min(lowest, means(c, j));
        }
        const double shift = 4.0 * spec.spread - lowest;
        for (std::size_t c = 0; c < spec.classes; ++c) {
            means(c, j) += shift;
        }
    }

    SyntheticDataset out;
    out.class_means = means;
    out.data.embeddings = emb;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        out.data.class_names.push_back(synthetic_class_name(c));
    }
    out.data.features = Matrix{spec.classes * spec.per_class, spec.feature_dim};
    for (std::size_t c = 0; c < spec.classes; ++c) {
        for (std::size_t k = 0; k < spec.per_class; ++k) {
            const std::size_t row = c * spec.per_class + k;
            for (std::size_t j = 0; j < spec.feature_dim; ++j) {
                out.data.features(row, j) = means(c, j) + rng.normal(0.0, spec.spread);
            }
            out.data.labels.push_back(out.data.class_names[c]);
        }
    }
    out.data.validate();
    return out;
}

}  // namespace ozsl

#endif  // OZSL_SYNTHETIC_HPP
