#ifndef OZSL_DATASET_HPP
#define OZSL_DATASET_HPP

#include "ozsl/matrix.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace ozsl {

/// Class label as an index into an ordered class list; -1 is the open bin.
using Label = std::int32_t;
/// Prediction that refuses every known class.
inline constexpr Label reject_label = -1;
/// Ground truth of an instance from a class with no embedding.
inline constexpr Label unknown_label = -1;

/// Visual features, per-instance class names, and the class embedding table.
struct Dataset {
    Matrix features;
    std::vector<std::string> labels;
    Matrix embeddings;
    std::vector<std::string> class_names;

    [[nodiscard]] std::size_t num_classes() const { return class_names.size(); }
    [[nodiscard]] std::size_t num_instances() const { return labels.size(); }
    [[nodiscard]] std::size_t feature_dim() const { return features.cols(); }
    [[nodiscard]] std::size_t embed_dim() const { return embeddings.cols(); }

    [[nodiscard]] std::size_t class_index(const std::string &name) const {
        auto it = std::find(class_names.begin(), class_names.end(), name);
        if (it == class_names.end()) {
            throw validation_error("unknown class name: " + name);
        }
        return static_cast<std::size_t>(it - class_names.begin());
    }

    [[nodiscard]] Matrix embedding_of(const std::string &name) const { return embeddings.row_copy(class_index(name)); }

    /// Throws validation_error describing the first broken invariant.
    void validate() const {
        if (class_names.empty()) {
            throw validation_error("dataset: at least one class is required");
        }
        std::unordered_map<std::string, std::size_t> seen;
        for (std::size_t i = 0; i < class_names.size(); ++i) {
            const auto &n = class_names[i];
            if (n.empty() || std::any_of(n.begin(), n.end(), [](char ch) { return ch == ' ' || ch == '\t' || ch == '\r'; })) {
                throw validation_error("dataset: class name must be non-empty and contain no whitespace: '" + n + "'");
            }
            if (!seen.emplace(n, i).second) {
                throw validation_error("dataset: duplicate class name " + n);
            }
        }
        if (embeddings.rows() != class_names.size()) {
            throw dimension_error("dataset: " + std::to_string(embeddings.rows()) + " embedding rows for " + std::to_string(class_names.size()) + " classes");
        }
        if (features.rows() != labels.size()) {
            throw dimension_error("dataset: " + std::to_string(features.rows()) + " feature rows for " + std::to_string(labels.size()) + " labels");
        }
        for (const auto &l : labels) {
            if (!seen.contains(l)) {
                throw validation_error("dataset: label refers to missing class " + l);
            }
        }
    }
};

inline std::vector<std::string> read_lines(const std::string &path) {
    std::ifstream in{path};
    if (!in) {
        throw format_error("cannot open: " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

inline void write_lines(const std::string &path, const std::vector<std::string> &lines) {
    std::ofstream out{path, std::ios::trunc};
    if (!out) {
        throw format_error("cannot open for writing: " + path);
    }
    for (const auto &l : lines) {
        out << l << '\n';
    }
}

inline Dataset load_dataset(const std::string &features_path, const std::string &labels_path, const std::string &embeddings_path, const std::string &names_path) {
    Dataset d;
    d.class_names = read_lines(names_path);
    d.labels = read_lines(labels_path);
    d.embeddings = d.class_names.empty() ? Matrix{} : load_matrix(embeddings_path);
    d.features = d.labels.empty() ? Matrix{} : load_matrix(features_path);
    d.validate();
    return d;
}

/// Standard file names inside a dataset directory.
namespace dataset_files {
inline constexpr const char *features = "features.bin";
inline constexpr const char *labels = "labels.txt";
inline constexpr const char *embeddings = "embeddings.bin";
inline constexpr const char *names = "names.txt";
}  // namespace dataset_files

inline Dataset load_dataset_dir(const std::filesystem::path &dir) {
    return load_dataset((dir / dataset_files::features).string(), (dir / dataset_files::labels).string(), (dir / dataset_files::embeddings).string(),
                        (dir / dataset_files::names).string());
}

inline void save_dataset_dir(const Dataset &d, const std::filesystem::path &dir) {
    d.validate();
    std::filesystem::create_directories(dir);
    save_matrix((dir / dataset_files::features).string(), d.features);
    write_lines((dir / dataset_files::labels).string(), d.labels);
    save_matrix((dir / dataset_files::embeddings).string(), d.embeddings);
    write_lines((dir / dataset_files::names).string(), d.class_names);
}

}  // namespace ozsl

#endif  // OZSL_DATASET_HPP
