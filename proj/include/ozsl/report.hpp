#ifndef OZSL_REPORT_HPP
#define OZSL_REPORT_HPP

// Report records (one JSON object per line), the aligned comparison table and
// per-class precision/recall series for plotting.

#include "ozsl/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ozsl {

struct ReportContext {
    std::string label;     // row name in tables
    std::string rejector;  // softmax | openmax
    std::size_t tail_size = 0;
    std::string regime;
    bool unknown_gen = false;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

inline nlohmann::ordered_json counts_json(const ClassCounts &c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"support", c.support}};
}

inline nlohmann::ordered_json report_json(const EvalReport &r, const ReportContext &ctx) {
    nlohmann::ordered_json j;
    j["label"] = ctx.label;
    j["rejector"] = ctx.rejector;
    j["tail_size"] = ctx.tail_size;
    j["regime"] = ctx.regime;
    j["unknown_gen"] = ctx.unknown_gen;
    j["seed"] = ctx.seed;
    j["instances"] = r.ledger.instances;
    j["F1_U"] = r.groups.f1_unseen;
    j["F1_S"] = r.groups.f1_seen;
    j["H_OZSL"] = r.h_ozsl;
    j["R_U"] = r.groups.recall_unseen;
    j["R_S"] = r.groups.recall_seen;
    j["H_GZSL"] = r.h_gzsl;
    j["P_Omega"] = r.unknown.precision;
    j["R_Omega"] = r.unknown.recall;
    j["F1_Omega"] = r.unknown.f1;
    j["unknown"] = counts_json(r.ledger.unknown);
    auto classes = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        nlohmann::ordered_json e;
        e["name"] = r.ledger.classes[c];
        e["role"] = c < r.ledger.num_seen ? "seen" : "unseen";
        e["precision"] = r.per_class[c].precision;
        e["recall"] = r.per_class[c].recall;
        e["f1"] = r.per_class[c].f1;
        e["counts"] = counts_json(r.ledger.per_class[c]);
        classes.push_back(std::move(e));
    }
    j["per_class"] = std::move(classes);
    j["warnings"] = ctx.warnings;
    return j;
}

/// Parses line-delimited records; blank lines are skipped.
inline std::vector<nlohmann::ordered_json> read_report_records(std::istream &in, const std::string &source) {
    std::vector<nlohmann::ordered_json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            auto j = nlohmann::ordered_json::parse(line);
            for (const char *key : {"label", "F1_U", "F1_S", "H_OZSL", "per_class"}) {
                if (!j.contains(key)) {
                    throw format_error(source + ":" + std::to_string(lineno) + ": record lacks '" + key + "'");
                }
            }
            out.push_back(std::move(j));
        } catch (const nlohmann::json::exception &e) {
            throw format_error(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

/// F1_U, F1_S, H_OZSL first, then the recall and unknown-bin columns.
inline std::string render_table(const std::vector<nlohmann::ordered_json> &records) {
    static const std::vector<std::pair<std::string, std::string>> columns = {
        {"F1_U", "F1_U"}, {"F1_S", "F1_S"},       {"H_OZSL", "H_OZSL"}, {"R_U", "R_U"},          {"R_S", "R_S"},
        {"H_GZSL", "H_GZSL"}, {"P_Omega", "P_Omega"}, {"R_Omega", "R_Omega"}, {"F1_Omega", "F1_Omega"},
    };
    std::size_t label_width = 5;
    for (const auto &r : records) {
        label_width = std::max(label_width, r.at("label").get<std::string>().size());
    }
    std::ostringstream out;
    char buf[64];
    out << std::string(label_width, ' ');
    for (const auto &[key, title] : columns) {
        std::snprintf(buf, sizeof(buf), "  %8s", title.c_str());
        out << buf;
    }
    out << '\n';
    for (const auto &r : records) {
        const auto label = r.at("label").get<std::string>();
        out << label << std::string(label_width - label.size(), ' ');
        for (const auto &[key, title] : columns) {
            const std::string cell = r.contains(key) ? format_percent(r.at(key).get<double>()) : "-";
            std::snprintf(buf, sizeof(buf), "  %8s", cell.c_str());
            out << buf;
        }
        out << '\n';
    }
    out << "\nScores in percent. Precision, recall and F1 with a zero denominator count as 0.\n";
    return out.str();
}

/// Tab-separated per-class precision/recall bars, one row per (report, class).
inline std::string render_series(const std::vector<nlohmann::ordered_json> &records) {
    std::ostringstream out;
    out << "label\tclass\trole\tprecision\trecall\n";
    for (const auto &r : records) {
        const auto label = r.at("label").get<std::string>();
        for (const auto &c : r.at("per_class")) {
            out << label << '\t' << c.at("name").get<std::string>() << '\t' << c.at("role").get<std::string>() << '\t'
                << format_percent(c.at("precision").get<double>()) << '\t' << format_percent(c.at("recall").get<double>()) << '\n';
        }
        if (r.contains("P_Omega")) {
            out << label << "\tunknown\tunknown\t" << format_percent(r.at("P_Omega").get<double>()) << '\t' << format_percent(r.at("R_Omega").get<double>())
                << '\n';
        }
    }
    return out.str();
}

}  // namespace ozsl

#endif  // OZSL_REPORT_HPP
