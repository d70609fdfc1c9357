// ozsl: synth, split, train, eval and report commands.
//
// Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.

#include "ozsl/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using ozsl::RunConfig;

template <class T>
void overlay(T &field, const std::optional<T> &flag) {
    if (flag) {
        field = *flag;
    }
}

struct SharedFlags {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string config;
    bool force = false;

    void add(CLI::App *cmd, bool needs_out = true) {
        cmd->add_option("--seed", seed, "Run seed");
        auto *o = cmd->add_option("--out", out, "Output directory");
        if (needs_out) {
            o->required();
        }
        cmd->add_option("--config", config, "JSON config file (flags take precedence)")->check(CLI::ExistingFile);
        cmd->add_flag("--force", force, "Overwrite existing outputs");
    }

    [[nodiscard]] RunConfig base() const {
        RunConfig c = config.empty() ? RunConfig{} : ozsl::load_config_file(config);
        overlay(c.seed, seed);
        return c;
    }
};

struct TrainFlags {
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> critic_steps;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> width_divisor;
    std::optional<double> gp_weight;
    std::optional<double> cls_weight;
    std::optional<double> learning_rate;

    void add(CLI::App *cmd) {
        cmd->add_option("--iterations", iterations, "Outer training iterations");
        cmd->add_option("--critic-steps", critic_steps, "Critic updates per generator update");
        cmd->add_option("--batch-size", batch_size, "Minibatch size");
        cmd->add_option("--width-divisor", width_divisor, "Divide the full hidden sizes by this factor");
        cmd->add_option("--gp-weight", gp_weight, "Gradient penalty weight");
        cmd->add_option("--cls-weight", cls_weight, "Classification loss weight");
        cmd->add_option("--lr", learning_rate, "Adam learning rate for S, G and D");
    }

    void apply(RunConfig &c) const {
        auto &t = c.train.config;
        overlay(t.iterations, iterations);
        overlay(t.critic_steps, critic_steps);
        overlay(t.batch_size, batch_size);
        overlay(t.model.width_divisor, width_divisor);
        overlay(t.gp_weight, gp_weight);
        overlay(t.cls_weight, cls_weight);
        overlay(t.optimizer.learning_rate, learning_rate);
    }
};

struct EvalFlags {
    std::optional<std::string> rejector;
    std::optional<std::size_t> tail_size;
    std::optional<std::string> regime;
    bool tail_sweep = false;
    bool unknown_gen = false;

    void add(CLI::App *cmd, bool full) {
        cmd->add_flag("--unknown-gen", unknown_gen, "Add complementary unknown features to the final classifier");
        if (!full) {
            return;
        }
        cmd->add_option("--rejector", rejector, "softmax or openmax")->check(CLI::IsMember({"softmax", "openmax"}));
        cmd->add_option("--tail-size", tail_size, "Openmax Weibull tail size");
        cmd->add_flag("--tail-sweep", tail_sweep, "Openmax with tail sizes 2..10, one report each");
        cmd->add_option("--regime", regime, "Expected regime of the manifest")->check(CLI::IsMember({"20-80", "50-50", "80-20"}));
    }

    void apply(RunConfig &c) const {
        overlay(c.eval.rejector, rejector);
        overlay(c.eval.tail_size, tail_size);
        overlay(c.eval.regime, regime);
        if (tail_sweep) {
            c.eval.tail_sweep = true;
        }
        if (unknown_gen) {
            c.eval.unknown_gen = true;
        }
    }
};

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Open zero-shot learning: feature generation, unknown sampling, open-set evaluation"};
    app.require_subcommand(1);

    // synth
    SharedFlags synth_shared;
    std::optional<std::size_t> classes;
    std::optional<std::size_t> per_class;
    std::optional<std::size_t> embed_dim;
    std::optional<std::size_t> feature_dim;
    std::optional<double> spread;
    auto *synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth_shared.add(synth);
    synth->add_option("--classes", classes, "Number of classes");
    synth->add_option("--per-class", per_class, "Instances per class");
    synth->add_option("--embed-dim", embed_dim, "Class embedding dimension");
    synth->add_option("--feature-dim", feature_dim, "Feature dimension");
    synth->add_option("--spread", spread, "Per-coordinate std of each class blob");

    // split
    SharedFlags split_shared;
    std::string split_dataset;
    std::optional<std::string> split_regime;
    std::optional<std::size_t> base_unseen_count;
    std::vector<std::string> base_unseen;
    std::string canonical;
    auto *split = app.add_subcommand("split", "Write a seen/unseen/unknown manifest");
    split_shared.add(split);
    split->add_option("--dataset", split_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    split->add_option("--regime", split_regime, "20-80, 50-50 or 80-20")->check(CLI::IsMember({"20-80", "50-50", "80-20"}));
    split->add_option("--base-unseen-count", base_unseen_count, "Take the last N registry classes as base unseen");
    split->add_option("--base-unseen", base_unseen, "Base unseen class names");
    split->add_option("--canonical", canonical, "Validate and copy a fixed manifest instead")->check(CLI::ExistingFile);

    // train
    SharedFlags train_shared;
    TrainFlags train_flags;
    EvalFlags train_eval;
    std::string train_dataset;
    std::string train_manifest;
    auto *train = app.add_subcommand("train", "Train the sampler, generator and critic on seen classes");
    train_shared.add(train);
    train_flags.add(train);
    train_eval.add(train, false);
    train->add_option("--dataset", train_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--manifest", train_manifest, "Split manifest")->required()->check(CLI::ExistingFile);

    // eval
    SharedFlags eval_shared;
    EvalFlags eval_flags;
    std::string eval_checkpoint;
    std::string eval_dataset;
    std::string eval_manifest;
    auto *eval = app.add_subcommand("eval", "Build the final classifier, fit the rejector and score the test view");
    eval_shared.add(eval);
    eval_flags.add(eval, true);
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
    eval->add_option("--dataset", eval_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--manifest", eval_manifest, "Split manifest")->required()->check(CLI::ExistingFile);

    // report
    std::vector<std::string> report_inputs;
    std::string report_out;
    bool report_force = false;
    auto *report = app.add_subcommand("report", "Render reports.jsonl files as a table and per-class series");
    report->add_option("inputs", report_inputs, "reports.jsonl files")->check(CLI::ExistingFile);
    report->add_option("--out", report_out, "Output directory")->required();
    report->add_flag("--force", report_force, "Overwrite existing outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            RunConfig c = synth_shared.base();
            overlay(c.synthetic.classes, classes);
            overlay(c.synthetic.per_class, per_class);
            overlay(c.synthetic.embed_dim, embed_dim);
            overlay(c.synthetic.feature_dim, feature_dim);
            overlay(c.synthetic.spread, spread);
            ozsl::cmd_synth(c, synth_shared.out, synth_shared.force);
        } else if (split->parsed()) {
            RunConfig c = split_shared.base();
            overlay(c.split.regime, split_regime);
            overlay(c.split.base_unseen_count, base_unseen_count);
            if (!base_unseen.empty()) {
                c.split.base_unseen = base_unseen;
            }
            std::optional<ozsl::fs::path> canon;
            if (!canonical.empty()) {
                canon = canonical;
            }
            const auto m = ozsl::cmd_split(c, split_dataset, split_shared.out, split_shared.force, canon);
            std::cout << "regime " << ozsl::to_string(m.regime) << ": " << m.seen.size() << " seen, " << m.unseen.size() << " unseen, "
                      << m.unknown.size() << " unknown\n";
        } else if (train->parsed()) {
            RunConfig c = train_shared.base();
            train_flags.apply(c);
            train_eval.apply(c);
            const auto o = ozsl::cmd_train(c, train_dataset, train_manifest, train_shared.out, train_shared.force);
            std::cout << "trained " << o.result.generator_updates << " iterations (" << o.result.critic_updates << " critic updates)\n";
        } else if (eval->parsed()) {
            RunConfig c = eval_shared.base();
            eval_flags.apply(c);
            const auto records = ozsl::cmd_eval(c, eval_checkpoint, eval_dataset, eval_manifest, eval_shared.out, eval_shared.force);
            std::cout << ozsl::render_table(records);
        } else if (report->parsed()) {
            std::vector<ozsl::fs::path> inputs(report_inputs.begin(), report_inputs.end());
            const auto records = ozsl::cmd_report(inputs, report_out, report_force);
            std::cout << ozsl::render_table(records);
        }
    } catch (const ozsl::validation_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
