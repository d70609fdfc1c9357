// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.

#include "ozsl/pipeline.hpp"

#include "../tests/support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ozsl;
using ozsl::testing::check_gradient;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char *f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

double percent_rounded(double fraction) { return std::stod(format_percent(fraction)); }

// 1. Published component scores reproduce the published derived scores.
Outcome metric_oracles() {
    struct Case {
        double a, b, expected;
    };
    // (P_Omega, R_Omega) -> F1_Omega, then (F1_U, F1_S) -> H_OZSL twice.
    const Case cases[] = {{0.1881, 0.5824, 28.43}, {0.3929, 0.6148, 47.94}, {0.4577, 0.7332, 56.36}};
    double worst = 0.0;
    std::string got;
    for (const auto &c : cases) {
        const double v = percent_rounded(harmonic_mean(c.a, c.b));
        worst = std::max(worst, std::abs(v - c.expected));
        got += (got.empty() ? "" : ", ") + format_percent(harmonic_mean(c.a, c.b));
    }
    const bool ok = worst <= 0.02 + 1e-12;
    return {ok, "F1_Omega, H_OZSL case 1, H_OZSL case 2 = " + got + " (worst deviation " + fmt("%.2f pp)", worst)};
}

// 2. tally() equals the rule-by-rule oracle on 1000 random cases.
Outcome ledger_equivalence() {
    Rng rng{20240601};
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng.index(12);
        const std::size_t seen = 1 + rng.index(k);
        const std::size_t n = 1 + rng.index(200);
        std::vector<std::string> names;
        for (std::size_t c = 0; c < k; ++c) {
            names.push_back("c" + std::to_string(c));
        }
        std::vector<Label> pred(n);
        std::vector<Label> truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<Label>(rng.index(k + 1)) - 1;
            truth[i] = static_cast<Label>(rng.index(k + 1)) - 1;
        }
        const auto ledger = tally(pred, truth, names, seen);
        const auto oracle = testing::oracle_tally(pred, truth);
        bool same = ledger.instances == n;
        for (std::size_t c = 0; c < k; ++c) {
            const auto l = static_cast<Label>(c);
            same = same && ledger.per_class[c].tp == testing::count_of(oracle.tp, l) && ledger.per_class[c].fp == testing::count_of(oracle.fp, l) &&
                   ledger.per_class[c].fn == testing::count_of(oracle.fn, l);
        }
        same = same && ledger.unknown.tp == testing::count_of(oracle.tp, -1) && ledger.unknown.fp == testing::count_of(oracle.fp, -1) &&
               ledger.unknown.fn == testing::count_of(oracle.fn, -1);
        mismatches += same ? 0 : 1;
    }
    return {mismatches == 0, std::to_string(1000 - mismatches) + "/1000 random cases identical"};
}

// 3. Reverse-mode gradients against central differences.
Matrix away_from_zero(Matrix m) {
    for (double &v : m.data()) {
        if (std::abs(v) < 0.05) {
            v = v < 0.0 ? -0.05 - std::abs(v) : 0.05 + v;
        }
    }
    return m;
}

double primitive_errors(Rng &rng) {
    const std::size_t r = 1 + rng.index(4);
    const std::size_t c = 1 + rng.index(4);
    const std::size_t k = 1 + rng.index(4);
    auto param = [&](std::size_t rows, std::size_t cols) { return ad::Var::parameter(away_from_zero(rng.uniform_matrix(rows, cols, -2.0, 2.0))); };
    auto positive = [&](std::size_t rows, std::size_t cols) { return ad::Var::parameter(rng.uniform_matrix(rows, cols, 0.5, 2.0)); };
    double worst = 0.0;
    // Random linear read-out so every output entry matters.
    auto check = [&](const std::vector<ad::Var> &ps, const std::function<ad::Var()> &op) {
        const ad::Var probe = op();
        const ad::Var weights = ad::Var::constant(rng.uniform_matrix(probe.rows(), probe.cols(), -1.0, 1.0));
        worst = std::max(worst, check_gradient([&] { return ad::sum(ad::mul(op(), weights)); }, ps));
    };

    auto a = param(r, k);
    auto b = param(k, c);
    auto x = param(r, c);
    auto y = param(r, c);
    auto bias = param(1, c);
    auto row = param(1, c);
    auto col = param(r, 1);
    auto s = param(1, 1);
    auto pos = positive(r, c);
    auto x2 = param(r, k);
    check({a, b}, [&] { return ad::matmul(a, b); });
    check({x}, [&] { return ad::transpose(x); });
    check({x, y}, [&] { return ad::add(x, y); });
    check({x, y}, [&] { return ad::sub(x, y); });
    check({x, y}, [&] { return ad::mul(x, y); });
    check({x}, [&] { return ad::scale(x, -1.7); });
    check({x, bias}, [&] { return ad::add_bias(x, bias); });
    check({x}, [&] { return ad::leaky_relu(x, 0.2); });
    check({x}, [&] { return ad::relu(x); });
    check({x, x2}, [&] { return ad::concat_cols(x, x2); });
    check({x}, [&] { return ad::slice_cols(x, c / 2, c - c / 2); });
    check({x}, [&] { return ad::pad_cols(x, 1, c + 2); });
    check({x}, [&] { return ad::exp(x); });
    check({pos}, [&] { return ad::log(pos); });
    check({pos}, [&] { return ad::sqrt(pos); });
    check({pos}, [&] { return ad::reciprocal(pos); });
    check({x}, [&] { return ad::square(x); });
    check({x}, [&] { return ad::sum(x); });
    check({x}, [&] { return ad::mean(x); });
    check({x}, [&] { return ad::sum_rows(x); });
    check({x}, [&] { return ad::sum_cols(x); });
    check({s}, [&] { return ad::broadcast_scalar(s, r, c); });
    check({row}, [&] { return ad::broadcast_rows(row, r); });
    check({col}, [&] { return ad::broadcast_cols(col, c); });
    check({x}, [&] { return ad::softmax(x); });
    std::vector<std::size_t> labels(r);
    for (auto &l : labels) {
        l = rng.index(c);
    }
    check({x}, [&] { return ad::softmax_cross_entropy(x, labels); });
    return worst;
}

struct LossErrors {
    double first_order = 0.0;  // generator / sampler objective
    double penalty = 0.0;      // paths through the gradient penalty
};

LossErrors loss_graph_errors(Rng &rng) {
    ModelConfig mc;
    mc.feature_dim = 2 + rng.index(4);
    mc.embed_dim = 2 + rng.index(3);
    mc.width_divisor = 512 * (1 + rng.index(2));
    const std::size_t n = 2 + rng.index(4);
    const std::size_t k = 2 + rng.index(3);
    const Sampler sampler = make_sampler(mc, rng);
    const Generator generator = make_generator(mc, rng);
    const Critic critic = make_critic(mc, rng);
    const Classifier clf = make_classifier(mc.feature_dim, k, rng);
    const Matrix real = rng.uniform_matrix(n, mc.feature_dim, 0.1, 2.0);
    const Matrix emb = rng.normal_matrix(n, mc.embed_dim);
    const Matrix u = rng.normal_matrix(n, mc.embed_dim);
    const Matrix z = rng.normal_matrix(n, mc.embed_dim);
    std::vector<double> t(n);
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.uniform();
        y[i] = rng.index(k);
    }
    const double beta = rng.uniform(0.0, 1.0);
    const double lambda = rng.uniform(1.0, 10.0);

    // Critic step: conditioning and fake are fixed inputs.
    auto critic_loss = [&] {
        const ad::Var s = ad::Var::constant(reparameterized_sample(sampler.forward(ad::Var::constant(emb)), ad::Var::constant(u)).value());
        const ad::Var fake = ad::Var::constant(generator.forward(s, ad::Var::constant(z)).value());
        const ad::Var l = wgan_loss(critic, ad::Var::constant(real), fake, s);
        const ad::Var r = gradient_penalty(critic, ad::Var::constant(real), fake, s, t);
        return critic_objective(l, r, lambda);
    };
    // Generator/sampler step, with the penalty kept in the graph for the literal variant.
    auto generator_loss = [&](bool with_penalty) {
        return [&, with_penalty] {
            const SamplerOutput so = sampler.forward(ad::Var::constant(emb));
            const ad::Var s = reparameterized_sample(so, ad::Var::constant(u));
            const ad::Var fake = generator.forward(s, ad::Var::constant(z));
            const ad::Var score = ad::mean(critic.forward(fake, s));
            const ad::Var cls = classification_loss(clf, fake, y);
            ad::Var total;
            if (with_penalty) {
                const ad::Var r = gradient_penalty(critic, ad::Var::constant(real), fake, s, t);
                total = generator_objective(score, cls, beta, &r, lambda);
            } else {
                total = generator_objective(score, cls, beta, nullptr, lambda);
            }
            return ad::add(total, sampler_prior(so, ad::Var::constant(emb), 0.1));
        };
    };
    LossErrors e;
    e.penalty = std::max(e.penalty, check_gradient(critic_loss, critic.parameters()));
    e.first_order = std::max(e.first_order, check_gradient(generator_loss(false), generator.parameters()));
    e.first_order = std::max(e.first_order, check_gradient(generator_loss(false), sampler.parameters()));
    e.penalty = std::max(e.penalty, check_gradient(generator_loss(true), generator.parameters()));
    e.penalty = std::max(e.penalty, check_gradient(generator_loss(true), sampler.parameters()));
    return e;
}

Outcome autodiff_finite_differences() {
    double prim = 0.0;
    LossErrors loss;
    for (std::uint64_t i = 0; i < 100; ++i) {
        Rng rng{substream_seed(77, i)};
        prim = std::max(prim, primitive_errors(rng));
        const auto e = loss_graph_errors(rng);
        loss.first_order = std::max(loss.first_order, e.first_order);
        loss.penalty = std::max(loss.penalty, e.penalty);
    }
    const bool ok = prim < 1e-4 && loss.first_order < 1e-4 && loss.penalty < 1e-3;
    return {ok, fmt("100 instances; worst relative error: primitives %.2e, loss graph %.2e, gradient-penalty paths %.2e", prim, loss.first_order, loss.penalty)};
}

// 4. Weibull maximum likelihood recovers (k, lambda) within 10%.
Outcome weibull_recovery() {
    double worst = 0.0;
    for (double k : {0.5, 1.0, 2.0, 5.0}) {
        for (double lambda : {0.5, 2.0}) {
            std::vector<double> shapes;
            std::vector<double> scales;
            for (std::uint64_t s = 0; s < 20; ++s) {
                const auto m = fit_weibull_mle(testing::weibull_samples(k, lambda, 1000, substream_seed(static_cast<std::uint64_t>(k * 100 + lambda * 10), s)));
                shapes.push_back(m.shape);
                scales.push_back(m.scale);
            }
            worst = std::max(worst, std::abs(testing::median(shapes) / k - 1.0));
            worst = std::max(worst, std::abs(testing::median(scales) / lambda - 1.0));
        }
    }
    return {worst <= 0.10, fmt("8 (k, lambda) pairs x 20 seeds, worst median relative error %.2f%%", 100.0 * worst)};
}

// 5. Every complementary sample lies outside every region.
Outcome complementary_invariant() {
    std::size_t emitted = 0;
    std::size_t violations = 0;
    std::size_t configs = 0;
    for (std::uint64_t c = 0; configs < 50; ++c) {
        Rng rng{substream_seed(5150, c)};
        const std::size_t regions_n = 2 + rng.index(19);
        const std::size_t dim = 2 + rng.index(15);
        const double alpha = rng.uniform(0.01, 0.5);
        const double radius = rng.uniform(1.5, 3.0);
        std::vector<ClassRegion> regions;
        for (std::size_t i = 0; i < regions_n; ++i) {
            regions.push_back({i, rng.normal_matrix(1, dim, 2.0), alpha});
        }
        std::vector<UnknownEmbedding> out;
        try {
            out = complementary_sample(regions, 50, {radius, 1000}, rng.next_seed());
        } catch (const degenerate_geometry_error &) {
            continue;  // a refused configuration emits nothing to check
        }
        ++configs;
        for (const auto &u : out) {
            ++emitted;
            for (const auto &r : regions) {
                if (mahalanobis(u.s.row_span(0), r) < radius) {
                    ++violations;
                    break;
                }
            }
        }
    }
    return {violations == 0 && emitted > 0, std::to_string(emitted - violations) + "/" + std::to_string(emitted) + " samples outside all regions over " +
                                                std::to_string(configs) + " configurations"};
}

// 6 and 7. Desk-scale pipeline.
struct DeskRun {
    fs::path root;
    double seconds = 0.0;
    std::vector<nlohmann::ordered_json> softmax;
    std::vector<nlohmann::ordered_json> openmax;
    std::vector<nlohmann::ordered_json> sweep;
};

DeskRun run_desk(const fs::path &root) {
    const RunConfig cfg = desk_config();
    DeskRun r;
    r.root = root;
    const auto t0 = Clock::now();
    cmd_synth(cfg, root / "data", true);
    cmd_split(cfg, root / "data", root / "split", true);
    const fs::path manifest = root / "split" / manifest_file;
    cmd_train(cfg, root / "data", manifest, root / "train", true);
    const fs::path ckpt = root / "train" / checkpoint_file;
    RunConfig ev = cfg;
    ev.eval.rejector = "softmax";
    r.softmax = cmd_eval(ev, ckpt, root / "data", manifest, root / "eval_softmax", true);
    ev.eval.rejector = "openmax";
    r.openmax = cmd_eval(ev, ckpt, root / "data", manifest, root / "eval_openmax", true);
    r.seconds = seconds_since(t0);
    ev.eval.tail_sweep = true;
    r.sweep = cmd_eval(ev, ckpt, root / "data", manifest, root / "eval_sweep", true);
    return r;
}

std::string read_file(const fs::path &p) {
    std::ifstream in{p, std::ios::binary};
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// RMS over seen classes and coordinates of (generated mean - construction mean) / spread.
double generated_mean_error(const DeskRun &run) {
    const RunConfig cfg = desk_config();
    const Checkpoint ck = load_checkpoint((run.root / "train" / checkpoint_file).string());
    const VacWgan models = restore_models(ck);
    const Dataset d = load_dataset_dir(run.root / "data");
    const Matrix truth = load_matrix((run.root / "data" / class_means_file).string());
    const SplitManifest m = load_manifest((run.root / "split" / manifest_file).string());
    const Views views = apply_manifest(d, m, {ck.get_double("seen_test_fraction"), std::stoull(ck.get("view_seed"))});
    std::vector<std::size_t> ids;
    for (std::size_t c = 0; c < views.train.num_seen; ++c) {
        ids.push_back(c);
    }
    const std::size_t per = 2000;
    const auto gen = synthesize_features(models, views.train.known_embeddings, ids, per, 99);
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t c : ids) {
        const std::size_t row = d.class_index(views.train.known_classes[c]);
        for (std::size_t j = 0; j < d.feature_dim(); ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < gen.labels.size(); ++i) {
                if (gen.labels[i] == static_cast<Label>(c)) {
                    mean += gen.features(i, j);
                }
            }
            mean /= static_cast<double>(per);
            const double e = (mean - truth(row, j)) / cfg.synthetic.spread;
            sq += e * e;
            ++count;
        }
    }
    return std::sqrt(sq / static_cast<double>(count));
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = "acceptance_work";
    app.add_option("--work-dir", work, "Scratch directory for the desk-scale pipeline");
    CLI11_PARSE(app, argc, argv);

    int failures = 0;
    auto report = [&](const std::string &name, const Outcome &o, double secs, double budget) {
        const bool ok = o.pass && secs <= budget;
        failures += ok ? 0 : 1;
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << o.detail << fmt(" [%.2f s, budget %.0f s]", secs, budget) << std::endl;
    };
    auto timed = [&](const std::string &name, double budget, const std::function<Outcome()> &f) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception &e) {
            o = {false, std::string{"exception: "} + e.what()};
        }
        report(name, o, seconds_since(t0), budget);
    };

    timed("metric-oracles", 1.0, metric_oracles);
    timed("ledger-brute-force", 5.0, ledger_equivalence);
    timed("autodiff-finite-differences", 30.0, autodiff_finite_differences);
    timed("weibull-recovery", 10.0, weibull_recovery);
    timed("complementary-invariant", 10.0, complementary_invariant);

    DeskRun first;
    DeskRun second;
    std::string desk_error;
    try {
        first = run_desk(fs::path{work} / "run1");
        second = run_desk(fs::path{work} / "run2");
    } catch (const std::exception &e) {
        desk_error = e.what();
    }
    if (!desk_error.empty()) {
        report("desk-end-to-end", {false, "exception: " + desk_error}, 0.0, 60.0);
        report("tail-sweep", {false, "desk pipeline did not complete"}, 0.0, 60.0);
        return 1;
    }

    {
        const auto &sm = first.softmax.front();
        const auto &om = first.openmax.front();
        const bool a = sm.at("F1_Omega").get<double>() == 0.0 && sm.at("F1_S").get<double>() > 0.0 && sm.at("F1_U").get<double>() > 0.0;
        const bool b = om.at("F1_Omega").get<double>() > 0.0 && om.at("R_Omega").get<double>() >= 0.3;
        const double mean_err = generated_mean_error(first);
        const bool c = mean_err <= 0.5;
        bool d = true;
        std::size_t compared = 0;
        for (const auto &entry : fs::recursive_directory_iterator(first.root)) {
            if (!entry.is_regular_file()) {
                continue;
            }
            const auto rel = fs::relative(entry.path(), first.root);
            d = d && read_file(entry.path()) == read_file(second.root / rel);
            ++compared;
        }
        std::string detail = std::string{"(a) softmax F1_Omega="} + format_percent(sm.at("F1_Omega").get<double>()) +
                             " F1_S=" + format_percent(sm.at("F1_S").get<double>()) + " F1_U=" + format_percent(sm.at("F1_U").get<double>()) +
                             (a ? " ok" : " FAIL") + "; (b) openmax F1_Omega=" + format_percent(om.at("F1_Omega").get<double>()) +
                             " R_Omega=" + format_percent(om.at("R_Omega").get<double>()) + (b ? " ok" : " FAIL") +
                             fmt("; (c) seen-class mean error %.3f blob-sigma", mean_err) + (c ? " ok" : " FAIL") + "; (d) " +
                             std::to_string(compared) + " output files byte-identical across reruns" + (d ? " ok" : " FAIL");
        report("desk-end-to-end", {a && b && c && d, detail}, first.seconds, 60.0);
    }
    {
        bool ok = first.sweep.size() == 9;
        double min_recall = 1.0;
        std::size_t tail = 2;
        for (const auto &r : first.sweep) {
            ok = ok && r.at("tail_size").get<std::size_t>() == tail++ && !r.at("per_class").empty();
            min_recall = std::min(min_recall, r.at("R_Omega").get<double>());
        }
        const double softmax_recall = first.softmax.front().at("R_Omega").get<double>();
        ok = ok && min_recall > softmax_recall;
        const std::string series = read_file(first.root / "eval_sweep" / series_file);
        const auto rows = static_cast<std::size_t>(std::count(series.begin(), series.end(), '\n'));
        ok = ok && rows == 1 + 9 * (first.sweep.front().at("per_class").size() + 1);
        report("tail-sweep",
               {ok, std::to_string(first.sweep.size()) + " reports (tails 2..10), " + std::to_string(rows - 1) + " series rows, min openmax R_Omega " +
                        format_percent(min_recall) + " vs softmax " + format_percent(softmax_recall)},
               0.0, 60.0);
    }
    return failures == 0 ? 0 : 1;
}
