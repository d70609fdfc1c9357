#include "ozsl/metrics.hpp"
#include "ozsl/random.hpp"
#include "ozsl/report.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace {

using namespace ozsl;
using ozsl::testing::count_of;
using ozsl::testing::oracle_tally;

constexpr Label R = reject_label;
constexpr Label U = unknown_label;

std::vector<std::string> names(std::size_t k) {
    std::vector<std::string> n;
    for (std::size_t c = 0; c < k; ++c) {
        n.push_back("c" + std::to_string(c));
    }
    return n;
}

double pct(double fraction) { return std::stod(format_percent(fraction)); }

TEST(Tally, AllCorrectGivesPerfectScores) {
    const std::vector<Label> y{0, 1, 2, 2, U, U};
    const auto l = tally(y, y, names(3), 2);
    for (const auto &c : l.per_class) {
        EXPECT_EQ(c.fp, 0u);
        EXPECT_EQ(c.fn, 0u);
    }
    const auto r = evaluate(l);
    for (const auto &s : r.per_class) {
        EXPECT_EQ(s.f1, 1.0);
    }
    EXPECT_EQ(r.unknown.f1, 1.0);
    EXPECT_EQ(r.h_ozsl, 1.0);
}

TEST(Tally, UnknownPredictedAsSeenClass) {
    const std::vector<Label> pred{1};
    const std::vector<Label> truth{U};
    const auto l = tally(pred, truth, names(3), 2);
    EXPECT_EQ(l.per_class[1].fp, 1u);
    EXPECT_EQ(l.unknown.fn, 1u);
    EXPECT_EQ(l.unknown.tp, 0u);
}

TEST(Tally, FiveRulesByHand) {
    const std::vector<Label> pred{0, 1, 0, R, R};
    const std::vector<Label> truth{0, 0, U, U, 1};
    const auto l = tally(pred, truth, names(2), 1);
    EXPECT_EQ(l.per_class[0], (ClassCounts{1, 1, 1, 2}));
    EXPECT_EQ(l.per_class[1], (ClassCounts{0, 1, 1, 1}));
    EXPECT_EQ(l.unknown, (ClassCounts{1, 1, 1, 2}));
    EXPECT_TRUE(l.conserved());
}

TEST(Tally, RejectsLabelsOutsideTheManifest) {
    const std::vector<Label> ok{0};
    const std::vector<Label> big{3};
    const std::vector<Label> neg{-2};
    EXPECT_THROW(tally(big, ok, names(3), 1), validation_error);
    EXPECT_THROW(tally(ok, big, names(3), 1), validation_error);
    EXPECT_THROW(tally(neg, ok, names(3), 1), validation_error);
    EXPECT_THROW(tally(ok, std::vector<Label>{0, 1}, names(3), 1), dimension_error);
}

struct RandomCase {
    std::vector<Label> pred;
    std::vector<Label> truth;
    std::size_t k;
    std::size_t seen;
};

RandomCase random_case(Rng &rng, std::size_t n) {
    RandomCase c;
    c.k = 2 + rng.index(8);
    c.seen = 1 + rng.index(c.k - 1);
    for (std::size_t i = 0; i < n; ++i) {
        c.pred.push_back(static_cast<Label>(rng.index(c.k + 1)) - 1);
        c.truth.push_back(static_cast<Label>(rng.index(c.k + 1)) - 1);
    }
    return c;
}

// Property: tally equals a rule-by-rule oracle and conserves counts.
class TallyOracle : public ::testing::TestWithParam<int> {};

TEST_P(TallyOracle, MatchesBruteForce) {
    Rng rng{static_cast<std::uint64_t>(GetParam())};
    const auto c = random_case(rng, 50);
    const auto l = tally(c.pred, c.truth, names(c.k), c.seen);
    const auto o = oracle_tally(c.pred, c.truth);
    for (std::size_t k = 0; k < c.k; ++k) {
        const auto lk = static_cast<Label>(k);
        EXPECT_EQ(l.per_class[k].tp, count_of(o.tp, lk));
        EXPECT_EQ(l.per_class[k].fp, count_of(o.fp, lk));
        EXPECT_EQ(l.per_class[k].fn, count_of(o.fn, lk));
    }
    EXPECT_EQ(l.unknown.tp, count_of(o.tp, U));
    EXPECT_EQ(l.unknown.fp, count_of(o.fp, U));
    EXPECT_EQ(l.unknown.fn, count_of(o.fn, U));
    EXPECT_TRUE(l.conserved());
    EXPECT_EQ(l.instances, 50u);
}

TEST_P(TallyOracle, MergeOfShardsEqualsWholeTally) {
    Rng rng{static_cast<std::uint64_t>(500 + GetParam())};
    const auto c = random_case(rng, 60);
    const auto shard = [&](std::size_t a, std::size_t b) {
        return tally(std::span<const Label>{c.pred}.subspan(a, b - a), std::span<const Label>{c.truth}.subspan(a, b - a), names(c.k), c.seen);
    };
    const auto whole = tally(c.pred, c.truth, names(c.k), c.seen);
    auto x = shard(0, 20);
    auto y = shard(20, 45);
    auto z = shard(45, 60);
    auto left = x;
    left.merge(y).merge(z);
    auto yz = y;
    yz.merge(z);
    auto right = x;
    right.merge(yz);
    auto swapped = z;
    swapped.merge(x).merge(y);
    EXPECT_EQ(left, whole);
    EXPECT_EQ(right, whole);
    EXPECT_EQ(swapped, whole);
}

INSTANTIATE_TEST_SUITE_P(Random, TallyOracle, ::testing::Range(0, 40));

TEST(Ledger, MergeRequiresTheSameClassList) {
    auto a = empty_ledger(names(3), 1);
    EXPECT_THROW(a.merge(empty_ledger(names(3), 2)), validation_error);
    EXPECT_THROW(a.merge(empty_ledger(names(4), 1)), validation_error);
}

TEST(Scores, ZeroDenominatorConvention) {
    const auto s = scores_from_counts({0, 0, 3, 3});
    EXPECT_EQ(s.recall, 0.0);
    EXPECT_EQ(s.precision, 0.0);
    EXPECT_EQ(s.f1, 0.0);
    const auto perfect = scores_from_counts({5, 0, 0, 5});
    EXPECT_EQ(perfect.recall, 1.0);
    EXPECT_EQ(perfect.precision, 1.0);
    EXPECT_EQ(perfect.f1, 1.0);
    EXPECT_EQ(scores_from_counts({}).f1, 0.0);
}

TEST(Scores, PublishedComponentScoresReproduceDerivedScores) {
    EXPECT_NEAR(pct(harmonic_mean(0.1881, 0.5824)), 28.43, 0.02);
    EXPECT_NEAR(pct(h_ozsl(0.6148, 0.3929)), 47.94, 0.02);
    EXPECT_NEAR(pct(h_ozsl(0.7332, 0.4577)), 56.36, 0.02);
}

TEST(Scores, AggregateIsUnweightedPerBlock) {
    const std::vector<Prf> s{{0.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, {0.0, 0.5, 0.25}};
    const auto g = aggregate(s, 2);
    EXPECT_EQ(g.f1_seen, 0.5);
    EXPECT_EQ(g.recall_seen, 0.5);
    EXPECT_EQ(g.f1_unseen, 0.25);
    EXPECT_EQ(g.recall_unseen, 0.5);
    EXPECT_THROW(aggregate(s, 0), validation_error);
    EXPECT_THROW(aggregate(s, 3), validation_error);
}

TEST(Scores, AggregateMatchesBruteForceAverages) {
    Rng rng{3};
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng.index(10);
        const std::size_t seen = 1 + rng.index(k - 1);
        std::vector<Prf> s(k);
        double fs = 0.0;
        double fu = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            s[c].f1 = rng.uniform();
            (c < seen ? fs : fu) += s[c].f1;
        }
        const auto g = aggregate(s, seen);
        EXPECT_NEAR(g.f1_seen, fs / static_cast<double>(seen), 1e-12);
        EXPECT_NEAR(g.f1_unseen, fu / static_cast<double>(k - seen), 1e-12);
    }
}

TEST(HarmonicMean, Properties) {
    Rng rng{4};
    for (int trial = 0; trial < 500; ++trial) {
        const double a = rng.uniform();
        const double b = rng.uniform();
        const double h = harmonic_mean(a, b);
        EXPECT_EQ(h, harmonic_mean(b, a));
        EXPECT_GE(h, std::min(a, b) - 1e-15);
        EXPECT_LE(h, std::max(a, b) + 1e-15);
        EXPECT_NEAR(harmonic_mean(a, a), a, 1e-15);
        EXPECT_EQ(harmonic_mean(a, 0.0), 0.0);
    }
    EXPECT_EQ(harmonic_mean(0.0, 0.0), 0.0);
}

TEST(OpenScores, NeverRejectingScoresZeroOnTheUnknownBin) {
    Rng rng{5};
    for (int trial = 0; trial < 50; ++trial) {
        auto c = random_case(rng, 40);
        c.truth[0] = U;
        for (auto &p : c.pred) {
            p = static_cast<Label>(rng.index(c.k));
        }
        const auto r = evaluate(tally(c.pred, c.truth, names(c.k), c.seen));
        EXPECT_EQ(r.unknown.precision, 0.0);
        EXPECT_EQ(r.unknown.recall, 0.0);
        EXPECT_EQ(r.unknown.f1, 0.0);
    }
}

TEST(OpenScores, CorrectRejectionsOnlyHelpTheUnknownBin) {
    Rng rng{6};
    for (int trial = 0; trial < 100; ++trial) {
        auto c = random_case(rng, 30);
        const auto before = evaluate(tally(c.pred, c.truth, names(c.k), c.seen));
        const std::size_t extra = 1 + rng.index(10);
        for (std::size_t i = 0; i < extra; ++i) {
            c.pred.push_back(R);
            c.truth.push_back(U);
        }
        const auto after = evaluate(tally(c.pred, c.truth, names(c.k), c.seen));
        EXPECT_GE(after.unknown.f1, before.unknown.f1);
        for (std::size_t k = 0; k < c.k; ++k) {
            EXPECT_EQ(after.per_class[k].f1, before.per_class[k].f1);
        }
    }
}

TEST(Format, TwoDecimalsHalfToEven) {
    EXPECT_EQ(format_percent(0.28434), "28.43");
    EXPECT_EQ(format_percent(1.0), "100.00");
    EXPECT_EQ(format_percent(0.0), "0.00");
    EXPECT_EQ(format_percent(0.00125), "0.12");
    EXPECT_EQ(format_percent(0.00375), "0.38");
}

EvalReport small_report() {
    const std::vector<Label> pred{0, 1, R, 2, 0};
    const std::vector<Label> truth{0, 1, U, 1, U};
    return evaluate(tally(pred, truth, names(3), 2));
}

TEST(Report, RecordCarriesHeadlineScoresAndPerClassRows) {
    const auto r = small_report();
    const auto j = report_json(r, {"openmax-tail10", "openmax", 10, "50-50", false, 3, {}});
    EXPECT_EQ(j.at("label"), "openmax-tail10");
    EXPECT_EQ(j.at("instances"), 5u);
    EXPECT_EQ(j.at("F1_S").get<double>(), r.groups.f1_seen);
    EXPECT_EQ(j.at("F1_Omega").get<double>(), r.unknown.f1);
    ASSERT_EQ(j.at("per_class").size(), 3u);
    EXPECT_EQ(j.at("per_class")[2].at("role"), "unseen");
    EXPECT_EQ(j.at("unknown").at("tp"), 1u);
}

TEST(Report, RecordsRoundTripThroughLines) {
    const auto r = small_report();
    std::stringstream buf;
    buf << report_json(r, {"a", "softmax", 0, "50-50", false, 1, {}}).dump() << "\n\n" << report_json(r, {"b", "openmax", 5, "50-50", true, 1, {}}).dump()
        << '\n';
    const auto recs = read_report_records(buf, "mem");
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[1].at("label"), "b");
    std::stringstream broken{"{\"label\": \"x\"}\n"};
    EXPECT_THROW(read_report_records(broken, "mem"), format_error);
    std::stringstream garbage{"not json\n"};
    EXPECT_THROW(read_report_records(garbage, "mem"), format_error);
}

TEST(Report, TableColumnOrderAndSeriesRows) {
    const auto r = small_report();
    const std::vector<nlohmann::ordered_json> recs{report_json(r, {"softmax", "softmax", 0, "50-50", false, 1, {}})};
    const std::string table = render_table(recs);
    const auto f1u = table.find("F1_U");
    const auto f1s = table.find("F1_S");
    const auto h = table.find("H_OZSL");
    ASSERT_NE(f1u, std::string::npos);
    EXPECT_LT(f1u, f1s);
    EXPECT_LT(f1s, h);
    EXPECT_NE(table.find(format_percent(r.groups.f1_seen)), std::string::npos);

    const std::string series = render_series(recs);
    EXPECT_EQ(std::count(series.begin(), series.end(), '\n'), 1 + 3 + 1);
    EXPECT_EQ(series.rfind("softmax\tunknown\tunknown\t", std::string::npos) != std::string::npos, true);
}

}  // namespace
