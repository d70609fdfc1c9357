#ifndef OZSL_SAMPLING_HPP
#define OZSL_SAMPLING_HPP

// Gaussian regions of the known classes in the sampler's output space, and
// complementary sampling of synthetic unknown class embeddings outside them.

#include "ozsl/dataset.hpp"
#include "ozsl/networks.hpp"
#include "ozsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ozsl {

/// N(mu, sigma_scale * I) around one known class.
struct ClassRegion {
    std::size_t class_id = 0;
    Matrix mu;  // 1 x embed dim
    double sigma_scale = 1.0;
};

/// With sigma = alpha * I this is ||v - mu|| / sqrt(alpha).
inline double mahalanobis(std::span<const double> v, const ClassRegion &region) {
    if (!(region.sigma_scale > 0.0)) {
        throw domain_error("mahalanobis: sigma scale must be positive");
    }
    return euclidean_distance(v, region.mu.row_span(0)) / std::sqrt(region.sigma_scale);
}

/// One region per row of `embeddings`, centred on the sampler's mean output.
inline std::vector<ClassRegion> fit_class_regions(const Sampler &sampler, const Matrix &embeddings, double sigma_scale) {
    if (!(sigma_scale > 0.0)) {
        throw domain_error("fit_class_regions: sigma scale must be positive");
    }
    if (embeddings.rows() == 0) {
        throw validation_error("fit_class_regions: no class embeddings");
    }
    const ad::no_grad_guard guard;
    const Matrix mu = sampler.forward(ad::Var::constant(embeddings)).mu.value();
    std::vector<ClassRegion> regions;
    regions.reserve(mu.rows());
    for (std::size_t c = 0; c < mu.rows(); ++c) {
        regions.push_back({c, mu.row_copy(c), sigma_scale});
    }
    return regions;
}

/// alpha such that balls of radius radius_multiplier * sqrt(alpha) around two
/// means at the 25th-percentile pairwise distance just touch.
inline double default_sigma_scale(const Matrix &means, double radius_multiplier) {
    if (means.rows() < 2) {
        throw validation_error("default_sigma_scale: need at least two means");
    }
    std::vector<double> squared;
    for (std::size_t i = 0; i < means.rows(); ++i) {
        for (std::size_t j = i + 1; j < means.rows(); ++j) {
            const double d = euclidean_distance(means.row_span(i), means.row_span(j));
            squared.push_back(d * d);
        }
    }
    std::sort(squared.begin(), squared.end());
    const double q25 = squared[(squared.size() - 1) / 4];
    if (!(q25 > 0.0)) {
        throw degenerate_geometry_error("default_sigma_scale: coincident class means");
    }
    return q25 / (4.0 * radius_multiplier * radius_multiplier);
}

struct UnknownEmbedding {
    Matrix s;  // 1 x embed dim
    std::size_t endpoint_a = 0;
    std::size_t endpoint_b = 0;
    double t = 0.0;
    double radius_multiplier = 0.0;
    std::size_t attempts = 0;
};

struct ComplementaryOptions {
    double radius_multiplier = 2.0;
    std::size_t retry_budget = 1000;
};

/// True when v is at Mahalanobis distance >= radius from every region.
inline bool in_outer_region(std::span<const double> v, std::span<const ClassRegion> regions, double radius) {
    return std::all_of(regions.begin(), regions.end(), [&](const ClassRegion &r) { return mahalanobis(v, r) >= radius; });
}

/// Draws `count` unknown embeddings.
///
/// Each candidate starts at a uniform point t in [0.25, 0.75] on the segment
/// between a uniformly chosen pair of region means, is displaced by isotropic
/// Gaussian noise of expected norm radius_multiplier * sqrt(alpha) (capped at half
/// the segment length so it stays near the segment), and is kept only if it
/// lies outside every region's radius_multiplier ellipse. Sample i uses its own
/// substream of `seed`.
inline std::vector<UnknownEmbedding> complementary_sample(std::span<const ClassRegion> regions, std::size_t count, const ComplementaryOptions &opts,
                                                          std::uint64_t seed) {
    if (count == 0) {
        return {};
    }
    if (regions.size() < 2) {
        throw validation_error("complementary_sample: at least two class regions are required");
    }
    if (!(opts.radius_multiplier > 1.0)) {
        throw validation_error("complementary_sample: radius multiplier must exceed 1");
    }
    const std::size_t dim = regions.front().mu.cols();
    for (const auto &r : regions) {
        if (r.mu.cols() != dim || r.mu.rows() != 1) {
            throw dimension_error("complementary_sample: regions have different dimensions");
        }
        if (!(r.sigma_scale > 0.0)) {
            throw domain_error("complementary_sample: sigma scale must be positive");
        }
    }

    std::vector<UnknownEmbedding> out;
    out.reserve(count);
    const double per_coord = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng{substream_seed(seed, i)};
        bool placed = false;
        for (std::size_t attempt = 1; attempt <= opts.retry_budget && !placed; ++attempt) {
            const std::size_t a = rng.index(regions.size());
            std::size_t b = rng.index(regions.size() - 1);
            if (b >= a) {
                ++b;
            }
            const auto &ra = regions[a];
            const auto &rb = regions[b];
            const double t = rng.uniform(0.25, 0.75);
            const double noise_scale = opts.radius_multiplier * std::sqrt(std::max(ra.sigma_scale, rb.sigma_scale)) * per_coord;
            const double cap = 0.5 * euclidean_distance(ra.mu.row_span(0), rb.mu.row_span(0));

            Matrix s{1, dim};
            double noise_sq = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double n = rng.normal(0.0, noise_scale);
                noise_sq += n * n;
                s(0, j) = ra.mu(0, j) + t * (rb.mu(0, j) - ra.mu(0, j)) + n;
            }
            if (std::sqrt(noise_sq) > cap || !in_outer_region(s.row_span(0), regions, opts.radius_multiplier)) {
                continue;
            }
            out.push_back({std::move(s), ra.class_id, rb.class_id, t, opts.radius_multiplier, attempt});
            placed = true;
        }
        if (!placed) {
            throw degenerate_geometry_error("complementary_sample: no point outside the class regions after " + std::to_string(opts.retry_budget) +
                                            " attempts (sample " + std::to_string(i) + ")");
        }
    }
    return out;
}

inline Matrix stack_embeddings(std::span<const UnknownEmbedding> unknowns, std::size_t dim) {
    Matrix m{unknowns.size(), dim};
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        std::copy_n(unknowns[i].s.row_span(0).begin(), dim, m.row_span(i).begin());
    }
    return m;
}

/// One structured-text record per unknown embedding (endpoint classes, t, attempts).
inline void write_unknown_provenance(std::ostream &out, std::span<const UnknownEmbedding> unknowns, std::span<const std::string> class_names) {
    char buf[512];
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        const auto &u = unknowns[i];
        const std::string a = u.endpoint_a < class_names.size() ? class_names[u.endpoint_a] : std::to_string(u.endpoint_a);
        const std::string b = u.endpoint_b < class_names.size() ? class_names[u.endpoint_b] : std::to_string(u.endpoint_b);
        std::snprintf(buf, sizeof(buf), "{\"index\":%zu,\"endpoint_a\":\"%s\",\"endpoint_b\":\"%s\",\"t\":%.17g,\"radius_multiplier\":%.17g,\"attempts\":%zu}\n", i,
                      a.c_str(), b.c_str(), u.t, u.radius_multiplier, u.attempts);
        out << buf;
    }
}

struct LabeledFeatures {
    Matrix features;
    std::vector<Label> labels;
};

/// G(s, z) for every unknown embedding, `per_embedding` noise draws each, labelled unknown_label.
inline LabeledFeatures generate_unknown_features(std::span<const UnknownEmbedding> unknowns, const Generator &generator, std::size_t per_embedding,
                                                 std::uint64_t seed) {
    LabeledFeatures out;
    out.features = Matrix{0, generator.feature_dim()};
    if (unknowns.empty() || per_embedding == 0) {
        return out;
    }
    const std::size_t dim = unknowns.front().s.cols();
    if (2 * dim != generator.net.input_dim()) {
        throw dimension_error("generate_unknown_features: embedding dim does not match the generator");
    }
    Rng rng{seed};
    Matrix s{unknowns.size() * per_embedding, dim};
    for (std::size_t u = 0; u < unknowns.size(); ++u) {
        for (std::size_t k = 0; k < per_embedding; ++k) {
            std::copy_n(unknowns[u].s.row_span(0).begin(), dim, s.row_span(u * per_embedding + k).begin());
        }
    }
    const Matrix z = rng.normal_matrix(s.rows(), dim);
    const ad::no_grad_guard guard;
    out.features = generator.forward(ad::Var::constant(s), ad::Var::constant(z)).value();
    out.labels.assign(s.rows(), unknown_label);
    return out;
}

}  // namespace ozsl

#endif  // OZSL_SAMPLING_HPP
