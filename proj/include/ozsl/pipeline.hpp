#ifndef OZSL_PIPELINE_HPP
#define OZSL_PIPELINE_HPP

// The five commands behind the ozsl executable, callable without a process.
// Every command writes its effective configuration as config.json next to its
// outputs, and refuses to overwrite existing outputs unless forced.

#include "ozsl/checkpoint.hpp"
#include "ozsl/metrics.hpp"
#include "ozsl/openmax.hpp"
#include "ozsl/report.hpp"
#include "ozsl/sampling.hpp"
#include "ozsl/split.hpp"
#include "ozsl/synthetic.hpp"
#include "ozsl/vacwgan.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ozsl {

namespace fs = std::filesystem;

struct SplitSettings {
    std::string regime = "50-50";
    // Base unseen classes: explicit names, else the last `base_unseen_count`
    // registry classes (0 picks ceil(classes / 3)).
    std::vector<std::string> base_unseen;
    std::size_t base_unseen_count = 0;
};

struct TrainSettings {
    TrainConfig config{};
    double seen_test_fraction = 0.2;
};

struct EvalSettings {
    std::string rejector = "openmax";
    std::size_t tail_size = 10;
    bool tail_sweep = false;  // tails 2..10, one report each
    bool unknown_gen = false;
    std::string regime;  // when set, must match the manifest
    std::size_t synth_per_class = 200;
    std::size_t unknown_count = 20;
    std::size_t unknown_per_embedding = 20;
    double radius_multiplier = 2.0;
    std::size_t retry_budget = 1000;
    double sigma_scale = 0.0;    // 0 derives it from the spacing of the class means
    std::size_t alpha_top = 0;   // 0 uses min(K, 10)
    double weibull_translate = 1.0;
    ClassifierTraining classifier{50, 64, {1e-2, 0.9, 0.999, 1e-8}};
};

struct RunConfig {
    std::uint64_t seed = 0;
    SyntheticSpec synthetic{};
    SplitSettings split{};
    TrainSettings train{};
    EvalSettings eval{};
};

/// Desk-scale benchmark: 12 synthetic classes, 50-50 regime, widths divided by 64.
/// Mirrored by configs/desk.json.
inline RunConfig desk_config() {
    RunConfig c;
    c.seed = 1;
    c.synthetic.classes = 12;
    c.synthetic.per_class = 80;
    c.synthetic.embed_dim = 8;
    c.synthetic.feature_dim = 16;
    c.split.regime = "50-50";
    auto &t = c.train.config;
    t.iterations = 1500;
    t.batch_size = 64;
    t.model.width_divisor = 64;
    t.optimizer.learning_rate = 1e-3;
    t.cls_weight = 1.0;
    t.classifier.epochs = 50;
    t.classifier.optimizer.learning_rate = 1e-2;
    c.eval.rejector = "openmax";
    c.eval.tail_size = 10;
    return c;
}

// --- configuration as JSON ----------------------------------------------------------

namespace detail {

using json = nlohmann::ordered_json;

template <class T>
void take(const json &section, const char *key, T &field) {
    if (!section.contains(key)) {
        return;
    }
    try {
        field = section.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw validation_error(std::string{"config: bad value for '"} + key + "': " + e.what());
    }
}

inline void reject_unknown_keys(const json &section, const std::string &name, std::initializer_list<const char *> allowed) {
    if (!section.is_object()) {
        throw validation_error("config: '" + name + "' must be an object");
    }
    for (const auto &item : section.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char *k) { return item.key() == k; }) == allowed.end()) {
            throw validation_error("config: unknown key '" + item.key() + "' in '" + name + "'");
        }
    }
}

}  // namespace detail

inline nlohmann::ordered_json config_to_json(const RunConfig &c) {
    const auto &t = c.train.config;
    const auto &e = c.eval;
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["synthetic"] = {{"classes", c.synthetic.classes},       {"per_class", c.synthetic.per_class}, {"embed_dim", c.synthetic.embed_dim},
                      {"feature_dim", c.synthetic.feature_dim}, {"spread", c.synthetic.spread},       {"separation", c.synthetic.separation},
                      {"jitter", c.synthetic.jitter}};
    j["split"] = {{"regime", c.split.regime}, {"base_unseen", c.split.base_unseen}, {"base_unseen_count", c.split.base_unseen_count}};
    j["train"] = {{"iterations", t.iterations},
                  {"critic_steps", t.critic_steps},
                  {"batch_size", t.batch_size},
                  {"gp_weight", t.gp_weight},
                  {"cls_weight", t.cls_weight},
                  {"learning_rate", t.optimizer.learning_rate},
                  {"beta1", t.optimizer.beta1},
                  {"beta2", t.optimizer.beta2},
                  {"width_divisor", t.model.width_divisor},
                  {"leaky_slope", t.model.leaky_slope},
                  {"sampler_log_sigma_init", t.model.sampler_log_sigma_init},
                  {"sampler_prior_weight", t.sampler_prior_weight},
                  {"sampler_prior_std", t.sampler_prior_std},
                  {"weight_average_decay", t.weight_average_decay},
                  {"final_lr_fraction", t.final_lr_fraction},
                  {"gp_in_generator_update", t.gp_in_generator_update},
                  {"generator_bias_from_data", t.generator_bias_from_data},
                  {"update_sampler", t.update_sampler},
                  {"classifier_epochs", t.classifier.epochs},
                  {"classifier_batch_size", t.classifier.batch_size},
                  {"classifier_learning_rate", t.classifier.optimizer.learning_rate},
                  {"seen_test_fraction", c.train.seen_test_fraction}};
    j["eval"] = {{"rejector", e.rejector},
                 {"tail_size", e.tail_size},
                 {"tail_sweep", e.tail_sweep},
                 {"unknown_gen", e.unknown_gen},
                 {"regime", e.regime},
                 {"synth_per_class", e.synth_per_class},
                 {"unknown_count", e.unknown_count},
                 {"unknown_per_embedding", e.unknown_per_embedding},
                 {"radius_multiplier", e.radius_multiplier},
                 {"retry_budget", e.retry_budget},
                 {"sigma_scale", e.sigma_scale},
                 {"alpha_top", e.alpha_top},
                 {"weibull_translate", e.weibull_translate},
                 {"classifier_epochs", e.classifier.epochs},
                 {"classifier_batch_size", e.classifier.batch_size},
                 {"classifier_learning_rate", e.classifier.optimizer.learning_rate}};
    return j;
}

/// Overrides the fields present in `j`; unknown keys are errors.
inline void apply_config_json(RunConfig &c, const nlohmann::ordered_json &j) {
    using detail::take;
    detail::reject_unknown_keys(j, "config", {"seed", "synthetic", "split", "train", "eval", "command"});
    take(j, "seed", c.seed);
    if (j.contains("synthetic")) {
        const auto &s = j.at("synthetic");
        detail::reject_unknown_keys(s, "synthetic", {"classes", "per_class", "embed_dim", "feature_dim", "spread", "separation", "jitter"});
        take(s, "classes", c.synthetic.classes);
        take(s, "per_class", c.synthetic.per_class);
        take(s, "embed_dim", c.synthetic.embed_dim);
        take(s, "feature_dim", c.synthetic.feature_dim);
        take(s, "spread", c.synthetic.spread);
        take(s, "separation", c.synthetic.separation);
        take(s, "jitter", c.synthetic.jitter);
    }
    if (j.contains("split")) {
        const auto &s = j.at("split");
        detail::reject_unknown_keys(s, "split", {"regime", "base_unseen", "base_unseen_count"});
        take(s, "regime", c.split.regime);
        take(s, "base_unseen", c.split.base_unseen);
        take(s, "base_unseen_count", c.split.base_unseen_count);
    }
    if (j.contains("train")) {
        const auto &s = j.at("train");
        auto &t = c.train.config;
        detail::reject_unknown_keys(s, "train",
                                    {"iterations", "critic_steps", "batch_size", "gp_weight", "cls_weight", "learning_rate", "beta1", "beta2",
                                     "width_divisor", "leaky_slope", "sampler_log_sigma_init", "sampler_prior_weight", "sampler_prior_std",
                                     "weight_average_decay", "final_lr_fraction", "gp_in_generator_update", "generator_bias_from_data", "update_sampler",
                                     "classifier_epochs", "classifier_batch_size", "classifier_learning_rate", "seen_test_fraction"});
        take(s, "iterations", t.iterations);
        take(s, "critic_steps", t.critic_steps);
        take(s, "batch_size", t.batch_size);
        take(s, "gp_weight", t.gp_weight);
        take(s, "cls_weight", t.cls_weight);
        take(s, "learning_rate", t.optimizer.learning_rate);
        take(s, "beta1", t.optimizer.beta1);
        take(s, "beta2", t.optimizer.beta2);
        take(s, "width_divisor", t.model.width_divisor);
        take(s, "leaky_slope", t.model.leaky_slope);
        take(s, "sampler_log_sigma_init", t.model.sampler_log_sigma_init);
        take(s, "sampler_prior_weight", t.sampler_prior_weight);
        take(s, "sampler_prior_std", t.sampler_prior_std);
        take(s, "weight_average_decay", t.weight_average_decay);
        take(s, "final_lr_fraction", t.final_lr_fraction);
        take(s, "gp_in_generator_update", t.gp_in_generator_update);
        take(s, "generator_bias_from_data", t.generator_bias_from_data);
        take(s, "update_sampler", t.update_sampler);
        take(s, "classifier_epochs", t.classifier.epochs);
        take(s, "classifier_batch_size", t.classifier.batch_size);
        take(s, "classifier_learning_rate", t.classifier.optimizer.learning_rate);
        take(s, "seen_test_fraction", c.train.seen_test_fraction);
    }
    if (j.contains("eval")) {
        const auto &s = j.at("eval");
        auto &e = c.eval;
        detail::reject_unknown_keys(s, "eval",
                                    {"rejector", "tail_size", "tail_sweep", "unknown_gen", "regime", "synth_per_class", "unknown_count",
                                     "unknown_per_embedding", "radius_multiplier", "retry_budget", "sigma_scale", "alpha_top", "weibull_translate",
                                     "classifier_epochs", "classifier_batch_size", "classifier_learning_rate"});
        take(s, "rejector", e.rejector);
        take(s, "tail_size", e.tail_size);
        take(s, "tail_sweep", e.tail_sweep);
        take(s, "unknown_gen", e.unknown_gen);
        take(s, "regime", e.regime);
        take(s, "synth_per_class", e.synth_per_class);
        take(s, "unknown_count", e.unknown_count);
        take(s, "unknown_per_embedding", e.unknown_per_embedding);
        take(s, "radius_multiplier", e.radius_multiplier);
        take(s, "retry_budget", e.retry_budget);
        take(s, "sigma_scale", e.sigma_scale);
        take(s, "alpha_top", e.alpha_top);
        take(s, "weibull_translate", e.weibull_translate);
        take(s, "classifier_epochs", e.classifier.epochs);
        take(s, "classifier_batch_size", e.classifier.batch_size);
        take(s, "classifier_learning_rate", e.classifier.optimizer.learning_rate);
    }
}

inline RunConfig load_config_file(const fs::path &path, RunConfig base = {}) {
    std::ifstream in{path};
    if (!in) {
        throw validation_error("cannot read config " + path.string());
    }
    try {
        apply_config_json(base, nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::parse_error &e) {
        throw validation_error("config " + path.string() + ": " + e.what());
    }
    return base;
}

// --- output handling ----------------------------------------------------------

/// Creates `dir` and fails if any of `files` already exists there, unless forced.
inline void prepare_outputs(const fs::path &dir, const std::vector<std::string> &files, bool force) {
    if (dir.empty()) {
        throw validation_error("an output directory is required");
    }
    if (fs::exists(dir) && !fs::is_directory(dir)) {
        throw validation_error("output path " + dir.string() + " is not a directory");
    }
    if (!force) {
        for (const auto &f : files) {
            if (fs::exists(dir / f)) {
                throw validation_error("refusing to overwrite " + (dir / f).string() + " (pass --force)");
            }
        }
    }
    fs::create_directories(dir);
}

inline void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out{path, std::ios::binary};
    if (!out) {
        throw validation_error("cannot write " + path.string());
    }
    out << text;
}

inline void write_effective_config(const fs::path &dir, const RunConfig &c, const std::string &command) {
    auto j = config_to_json(c);
    j["command"] = command;
    write_text(dir / "config.json", j.dump(2) + "\n");
}

// Independent streams derived from the run seed.
enum class stream : std::uint64_t { views = 1, train = 2, synthesis = 3, complementary = 4, unknown_features = 5, classifier = 6 };

inline std::uint64_t stream_seed(std::uint64_t seed, stream s) { return substream_seed(seed, static_cast<std::uint64_t>(s)); }

// --- synth ---------------------------------------------------------------------

inline constexpr const char *class_means_file = "class_means.bin";

inline void cmd_synth(RunConfig cfg, const fs::path &out, bool force) {
    cfg.synthetic.seed = cfg.seed;
    prepare_outputs(out, {dataset_files::features, dataset_files::labels, dataset_files::embeddings, dataset_files::names, class_means_file, "config.json"},
                    force);
    const auto syn = generate_synthetic(cfg.synthetic);
    save_dataset_dir(syn.data, out);
    save_matrix((out / class_means_file).string(), syn.class_means);
    write_effective_config(out, cfg, "synth");
}

// --- split ---------------------------------------------------------------------

inline constexpr const char *manifest_file = "manifest.txt";

inline std::vector<std::string> default_base_unseen(const Dataset &d, const SplitSettings &s) {
    if (!s.base_unseen.empty()) {
        for (const auto &n : s.base_unseen) {
            (void)d.class_index(n);
        }
        return s.base_unseen;
    }
    const std::size_t n = d.num_classes();
    const std::size_t count = s.base_unseen_count != 0 ? s.base_unseen_count : (n + 2) / 3;
    if (count >= n) {
        throw validation_error("split: base unseen count " + std::to_string(count) + " leaves no seen class");
    }
    return {d.class_names.end() - static_cast<std::ptrdiff_t>(count), d.class_names.end()};
}

/// Seeded split of the dataset, or a canonical manifest validated and copied.
inline SplitManifest cmd_split(const RunConfig &cfg, const fs::path &dataset_dir, const fs::path &out, bool force,
                               const std::optional<fs::path> &canonical = std::nullopt) {
    prepare_outputs(out, {manifest_file, "config.json"}, force);
    const Dataset d = load_dataset_dir(dataset_dir);
    SplitManifest m;
    if (canonical) {
        m = load_manifest(canonical->string());
        m.check_against(d);
    } else {
        const auto base = default_base_unseen(d, cfg.split);
        std::vector<std::string> seen;
        for (const auto &n : d.class_names) {
            if (std::find(base.begin(), base.end(), n) == base.end()) {
                seen.push_back(n);
            }
        }
        m = make_split(seen, base, parse_regime(cfg.split.regime), cfg.seed);
    }
    save_manifest((out / manifest_file).string(), m);
    RunConfig effective = cfg;
    effective.split.regime = to_string(m.regime);
    write_effective_config(out, effective, "split");
    return m;
}

// --- train ---------------------------------------------------------------------

inline constexpr const char *checkpoint_file = "checkpoint.ckpt";
inline constexpr const char *train_log_file = "train_log.jsonl";
inline constexpr const char *unknowns_file = "unknowns.jsonl";

/// Final-classifier training data: real seen, synthetic unseen and, with
/// unknown generation, synthetic unknown features under an extra class id K.
struct ClassifierSet {
    Matrix features;
    std::vector<std::size_t> labels;
    std::size_t num_known = 0;
    bool unknown_class = false;
    std::vector<UnknownEmbedding> unknowns;

    [[nodiscard]] std::size_t num_outputs() const { return num_known + (unknown_class ? 1 : 0); }
};

inline ClassifierSet build_classifier_set(const VacWgan &models, const TrainView &view, const EvalSettings &e, std::uint64_t seed) {
    ClassifierSet set;
    set.num_known = view.known_classes.size();
    std::vector<Matrix> parts{view.features};
    set.labels = view.labels;

    std::vector<std::size_t> unseen_ids;
    for (std::size_t c = view.num_seen; c < set.num_known; ++c) {
        unseen_ids.push_back(c);
    }
    const auto synth = synthesize_features(models, view.known_embeddings, unseen_ids, e.synth_per_class, stream_seed(seed, stream::synthesis));
    parts.push_back(synth.features);
    for (Label l : synth.labels) {
        set.labels.push_back(static_cast<std::size_t>(l));
    }

    if (e.unknown_gen) {
        double alpha = e.sigma_scale;
        auto regions = fit_class_regions(models.sampler, view.known_embeddings, 1.0);
        if (alpha <= 0.0) {
            Matrix means{regions.size(), view.known_embeddings.cols()};
            for (std::size_t i = 0; i < regions.size(); ++i) {
                std::copy_n(regions[i].mu.row_span(0).begin(), means.cols(), means.row_span(i).begin());
            }
            alpha = default_sigma_scale(means, e.radius_multiplier);
        }
        for (auto &r : regions) {
            r.sigma_scale = alpha;
        }
        set.unknowns = complementary_sample(regions, e.unknown_count, {e.radius_multiplier, e.retry_budget}, stream_seed(seed, stream::complementary));
        const auto unk = generate_unknown_features(set.unknowns, models.generator, e.unknown_per_embedding, stream_seed(seed, stream::unknown_features));
        parts.push_back(unk.features);
        set.labels.insert(set.labels.end(), unk.labels.size(), set.num_known);
        set.unknown_class = true;
    }
    set.features = vstack(parts);
    return set;
}

inline Classifier train_final_classifier(const ClassifierSet &set, const EvalSettings &e, std::uint64_t seed) {
    Rng rng{stream_seed(seed, stream::classifier)};
    return train_classifier(set.features, set.labels, set.num_outputs(), e.classifier, rng);
}

inline std::string join_names(const std::vector<std::string> &names) {
    std::string out;
    for (const auto &n : names) {
        out += (out.empty() ? "" : " ") + n;
    }
    return out;
}

inline std::vector<std::string> split_names(const std::string &s) {
    std::istringstream in{s};
    std::vector<std::string> out;
    for (std::string n; in >> n;) {
        out.push_back(n);
    }
    return out;
}

struct TrainOutcome {
    TrainResult result;
    Views views;
};

inline TrainOutcome cmd_train(const RunConfig &cfg, const fs::path &dataset_dir, const fs::path &manifest_path, const fs::path &out, bool force) {
    std::vector<std::string> files{checkpoint_file, train_log_file, "config.json"};
    if (cfg.eval.unknown_gen) {
        files.emplace_back(unknowns_file);
    }
    prepare_outputs(out, files, force);
    const Dataset d = load_dataset_dir(dataset_dir);
    const SplitManifest m = load_manifest(manifest_path.string());
    const ViewOptions vopts{cfg.train.seen_test_fraction, stream_seed(cfg.seed, stream::views)};
    TrainOutcome o{{}, apply_manifest(d, m, vopts)};

    TrainConfig tc = cfg.train.config;
    tc.seed = stream_seed(cfg.seed, stream::train);
    tc.model.feature_dim = d.feature_dim();
    tc.model.embed_dim = d.embed_dim();

    std::ostringstream log;
    o.result = train(o.views.train, tc, [&](const LossBreakdown &r) { write_loss_record(log, r); });

    Checkpoint ck;
    store_models(ck, o.result.models);
    ck.meta["seed"] = std::to_string(cfg.seed);
    ck.meta["view_seed"] = std::to_string(vopts.seed);
    ck.meta["seen_test_fraction"] = format_double(vopts.seen_test_fraction);
    ck.meta["regime"] = to_string(m.regime);
    ck.meta["num_seen"] = std::to_string(o.views.train.num_seen);
    ck.meta["known_classes"] = join_names(o.views.train.known_classes);
    ck.meta["iterations"] = std::to_string(tc.iterations);
    ck.meta["critic_updates"] = std::to_string(o.result.critic_updates);
    ck.meta["generator_updates"] = std::to_string(o.result.generator_updates);
    ck.meta["sampler_updates"] = std::to_string(o.result.sampler_updates);
    if (cfg.eval.unknown_gen) {
        const auto set = build_classifier_set(o.result.models, o.views.train, cfg.eval, cfg.seed);
        store_classifier(ck, "final_classifier", train_final_classifier(set, cfg.eval, cfg.seed));
        ck.meta["final_classifier_outputs"] = std::to_string(set.num_outputs());
        std::ostringstream prov;
        write_unknown_provenance(prov, set.unknowns, o.views.train.known_classes);
        write_text(out / unknowns_file, prov.str());
    }
    save_checkpoint((out / checkpoint_file).string(), ck);
    write_text(out / train_log_file, log.str());
    write_effective_config(out, cfg, "train");
    return o;
}

// --- eval ----------------------------------------------------------------------

inline constexpr const char *reports_file = "reports.jsonl";
inline constexpr const char *table_file = "table.txt";
inline constexpr const char *series_file = "series.tsv";

inline std::vector<std::size_t> eval_tails(const EvalSettings &e) {
    if (e.rejector == "softmax") {
        return {0};
    }
    if (e.tail_sweep) {
        return {2, 3, 4, 5, 6, 7, 8, 9, 10};
    }
    return {e.tail_size};
}

inline std::string calibration_file(std::size_t tail) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "calibration_tail%02zu.cal", tail);
    return buf;
}

inline std::vector<nlohmann::ordered_json> cmd_eval(const RunConfig &cfg, const fs::path &checkpoint_path, const fs::path &dataset_dir,
                                                    const fs::path &manifest_path, const fs::path &out, bool force) {
    const auto &e = cfg.eval;
    if (e.rejector != "softmax" && e.rejector != "openmax") {
        throw validation_error("eval: rejector must be softmax or openmax, got '" + e.rejector + "'");
    }
    const auto tails = eval_tails(e);
    std::vector<std::string> files{reports_file, table_file, series_file, "config.json"};
    if (e.rejector == "openmax") {
        for (auto t : tails) {
            if (t < 2) {
                throw validation_error("eval: tail size must be >= 2");
            }
            files.push_back(calibration_file(t));
        }
    }
    if (e.unknown_gen) {
        files.emplace_back(unknowns_file);
    }
    prepare_outputs(out, files, force);

    const Checkpoint ck = load_checkpoint(checkpoint_path.string());
    const VacWgan models = restore_models(ck);
    const Dataset d = load_dataset_dir(dataset_dir);
    const SplitManifest m = load_manifest(manifest_path.string());
    if (!e.regime.empty() && parse_regime(e.regime) != m.regime) {
        throw validation_error("eval: --regime " + e.regime + " does not match the manifest's " + to_string(m.regime));
    }
    const ViewOptions vopts{ck.get_double("seen_test_fraction"), static_cast<std::uint64_t>(std::stoull(ck.get("view_seed")))};
    const Views views = apply_manifest(d, m, vopts);
    if (join_names(views.train.known_classes) != ck.get("known_classes")) {
        throw validation_error("eval: manifest classes differ from those the checkpoint was trained on");
    }
    if (d.feature_dim() != models.config.feature_dim || d.embed_dim() != models.config.embed_dim) {
        throw dimension_error("eval: dataset dimensions differ from the checkpoint's");
    }

    const auto set = build_classifier_set(models, views.train, e, cfg.seed);
    const Classifier clf = train_final_classifier(set, e, cfg.seed);
    const Matrix train_logits = clf.logits(set.features);
    const Matrix test_logits = clf.logits(views.test.features);
    const std::size_t k = set.num_outputs();
    const auto to_decision = [&](Label raw) { return set.unknown_class && raw == static_cast<Label>(set.num_known) ? reject_label : raw; };

    std::vector<std::size_t> train_pred(train_logits.rows());
    for (std::size_t i = 0; i < train_logits.rows(); ++i) {
        train_pred[i] = static_cast<std::size_t>(softmax_predict(train_logits.row_span(i)));
    }

    std::vector<nlohmann::ordered_json> records;
    for (std::size_t tail : tails) {
        std::vector<Label> pred(test_logits.rows());
        ReportContext ctx;
        ctx.rejector = e.rejector;
        ctx.tail_size = tail;
        ctx.regime = to_string(m.regime);
        ctx.unknown_gen = e.unknown_gen;
        ctx.seed = cfg.seed;
        if (e.rejector == "softmax") {
            ctx.label = "softmax";
            for (std::size_t i = 0; i < pred.size(); ++i) {
                pred[i] = to_decision(softmax_predict(test_logits.row_span(i)));
            }
        } else {
            char label[32];
            std::snprintf(label, sizeof(label), "openmax-tail%02zu", tail);
            ctx.label = label;
            TailFitOptions fit;
            fit.translate = e.weibull_translate;
            const auto cal = compute_calibrations(train_logits, set.labels, train_pred, k, tail, fit);
            ctx.warnings = cal.warnings;
            std::ostringstream calout;
            write_calibrations(calout, cal);
            write_text(out / calibration_file(tail), calout.str());
            const std::size_t alpha = e.alpha_top == 0 ? default_alpha_top(k) : e.alpha_top;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                pred[i] = to_decision(openmax_predict(test_logits.row_span(i), cal, alpha).decision);
            }
        }
        if (e.unknown_gen) {
            ctx.label += "+unknown-gen";
        }
        const auto ledger = tally(pred, views.test.truth, m);
        records.push_back(report_json(evaluate(ledger), ctx));
    }

    std::string lines;
    for (const auto &r : records) {
        lines += r.dump() + "\n";
    }
    write_text(out / reports_file, lines);
    write_text(out / table_file, render_table(records));
    write_text(out / series_file, render_series(records));
    if (e.unknown_gen) {
        std::ostringstream prov;
        write_unknown_provenance(prov, set.unknowns, views.train.known_classes);
        write_text(out / unknowns_file, prov.str());
    }
    write_effective_config(out, cfg, "eval");
    return records;
}

// --- report --------------------------------------------------------------------

inline std::vector<nlohmann::ordered_json> cmd_report(const std::vector<fs::path> &inputs, const fs::path &out, bool force) {
    if (inputs.empty()) {
        throw validation_error("report: no input files");
    }
    std::vector<nlohmann::ordered_json> records;
    for (const auto &p : inputs) {
        std::ifstream in{p};
        if (!in) {
            throw validation_error("cannot read " + p.string());
        }
        auto part = read_report_records(in, p.string());
        records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (records.empty()) {
        throw validation_error("report: the inputs contain no records");
    }
    prepare_outputs(out, {table_file, series_file}, force);
    write_text(out / table_file, render_table(records));
    write_text(out / series_file, render_series(records));
    return records;
}

}  // namespace ozsl

#endif  // OZSL_PIPELINE_HPP
