#ifndef OZSL_CHECKPOINT_HPP
#define OZSL_CHECKPOINT_HPP

// Checkpoint file: "OZSLCKP1", "meta <key> <value>" lines, then named sections
// "section <name> <count>" each followed by <count> OZSLMAT1 blobs, then "end".

#include "ozsl/vacwgan.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ozsl {

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::map<std::string, std::vector<Matrix>> sections;

    [[nodiscard]] const std::string &get(const std::string &key) const {
        const auto it = meta.find(key);
        if (it == meta.end()) {
            throw format_error("checkpoint: missing meta key '" + key + "'");
        }
        return it->second;
    }

    [[nodiscard]] std::size_t get_size(const std::string &key) const {
        try {
            return static_cast<std::size_t>(std::stoull(get(key)));
        } catch (const std::logic_error &) {
            throw format_error("checkpoint: meta key '" + key + "' is not a count");
        }
    }

    [[nodiscard]] double get_double(const std::string &key) const {
        try {
            return std::stod(get(key));
        } catch (const std::logic_error &) {
            throw format_error("checkpoint: meta key '" + key + "' is not a number");
        }
    }

    [[nodiscard]] const std::vector<Matrix> &section(const std::string &name) const {
        const auto it = sections.find(name);
        if (it == sections.end()) {
            throw format_error("checkpoint: missing section '" + name + "'");
        }
        return it->second;
    }

    [[nodiscard]] bool has_section(const std::string &name) const { return sections.count(name) != 0; }
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_checkpoint(std::ostream &out, const Checkpoint &ck) {
    out << "OZSLCKP1\n";
    for (const auto &[k, v] : ck.meta) {
        if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw validation_error("checkpoint: meta key/value contains whitespace: '" + k + "'");
        }
        out << "meta " << k << ' ' << v << '\n';
    }
    for (const auto &[name, mats] : ck.sections) {
        out << "section " << name << ' ' << mats.size() << '\n';
        for (const auto &m : mats) {
            write_matrix(out, m);
        }
    }
    out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != "OZSLCKP1") {
        throw format_error("checkpoint: bad magic");
    }
    Checkpoint ck;
    while (std::getline(in, line)) {
        if (line == "end") {
            return ck;
        }
        std::istringstream ls{line};
        std::string tag;
        std::string name;
        ls >> tag >> name;
        if (tag == "meta") {
            std::string value;
            std::getline(ls >> std::ws, value);
            ck.meta[name] = value;
        } else if (tag == "section") {
            std::size_t count = 0;
            if (!(ls >> count)) {
                throw format_error("checkpoint: bad section line '" + line + "'");
            }
            auto &mats = ck.sections[name];
            for (std::size_t i = 0; i < count; ++i) {
                mats.push_back(read_matrix(in));
            }
        } else {
            throw format_error("checkpoint: unexpected line '" + line + "'");
        }
    }
    throw format_error("checkpoint: truncated (no end marker)");
}

inline void save_checkpoint(const std::string &path, const Checkpoint &ck) {
    std::ofstream out{path, std::ios::binary};
    if (!out) {
        throw validation_error("cannot write " + path);
    }
    write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw validation_error("cannot read " + path);
    }
    return read_checkpoint(in);
}

namespace detail {

inline std::vector<Matrix> values_of(const std::vector<ad::Var> &params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto &p : params) {
        out.push_back(p.value());
    }
    return out;
}

inline MlpParams mlp_from(const std::vector<Matrix> &m, double slope, output_activation act, const std::string &name) {
    if (m.size() != 4) {
        throw format_error("checkpoint: section '" + name + "' needs 4 matrices");
    }
    MlpParams p;
    p.w1 = ad::Var::parameter(m[0]);
    p.b1 = ad::Var::parameter(m[1]);
    p.w2 = ad::Var::parameter(m[2]);
    p.b2 = ad::Var::parameter(m[3]);
    p.slope = slope;
    p.out = act;
    if (m[1].rows() != 1 || m[1].cols() != m[0].cols() || m[2].rows() != m[0].cols() || m[3].rows() != 1 || m[3].cols() != m[2].cols()) {
        throw format_error("checkpoint: section '" + name + "' has inconsistent shapes");
    }
    return p;
}

inline Classifier classifier_from(const std::vector<Matrix> &m, const std::string &name) {
    if (m.size() != 2 || m[1].rows() != 1 || m[1].cols() != m[0].cols()) {
        throw format_error("checkpoint: section '" + name + "' is not a classifier");
    }
    return {ad::Var::parameter(m[0]), ad::Var::parameter(m[1])};
}

}  // namespace detail

inline void store_models(Checkpoint &ck, const VacWgan &m) {
    ck.meta["feature_dim"] = std::to_string(m.config.feature_dim);
    ck.meta["embed_dim"] = std::to_string(m.config.embed_dim);
    ck.meta["width_divisor"] = std::to_string(m.config.width_divisor);
    ck.meta["leaky_slope"] = format_double(m.config.leaky_slope);
    ck.meta["sampler_log_sigma_init"] = format_double(m.config.sampler_log_sigma_init);
    ck.sections["sampler"] = detail::values_of(m.sampler.parameters());
    ck.sections["generator"] = detail::values_of(m.generator.parameters());
    ck.sections["critic"] = detail::values_of(m.critic.parameters());
    ck.sections["classifier"] = detail::values_of(m.classifier.parameters());
}

inline VacWgan restore_models(const Checkpoint &ck) {
    VacWgan m;
    m.config.feature_dim = ck.get_size("feature_dim");
    m.config.embed_dim = ck.get_size("embed_dim");
    m.config.width_divisor = ck.get_size("width_divisor");
    m.config.leaky_slope = ck.get_double("leaky_slope");
    m.config.sampler_log_sigma_init = ck.get_double("sampler_log_sigma_init");
    const double slope = m.config.leaky_slope;
    m.sampler = Sampler{detail::mlp_from(ck.section("sampler"), slope, output_activation::none, "sampler"), m.config.embed_dim};
    m.generator = Generator{detail::mlp_from(ck.section("generator"), slope, output_activation::relu, "generator")};
    m.critic = Critic{detail::mlp_from(ck.section("critic"), slope, output_activation::none, "critic")};
    m.classifier = detail::classifier_from(ck.section("classifier"), "classifier");
    if (m.sampler.net.input_dim() != m.config.embed_dim || m.sampler.net.output_dim() != 2 * m.config.embed_dim ||
        m.generator.net.input_dim() != 2 * m.config.embed_dim || m.generator.feature_dim() != m.config.feature_dim ||
        m.critic.net.input_dim() != m.config.feature_dim + m.config.embed_dim || m.critic.net.output_dim() != 1) {
        throw format_error("checkpoint: network shapes disagree with the recorded dimensions");
    }
    return m;
}

inline void store_classifier(Checkpoint &ck, const std::string &name, const Classifier &c) { ck.sections[name] = detail::values_of(c.parameters()); }

inline std::optional<Classifier> restore_classifier(const Checkpoint &ck, const std::string &name) {
    if (!ck.has_section(name)) {
        return std::nullopt;
    }
    return detail::classifier_from(ck.section(name), name);
}

}  // namespace ozsl

#endif  // OZSL_CHECKPOINT_HPP
