#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "nqi/error.hpp"
#include "nqi/evalstats.hpp"

using namespace nqi;

namespace {

ScoredCohort cohort_of(const std::vector<double>& pd, const std::vector<double>& control)
{
    ScoredCohort c;
    int id = 0;
    for (double s : pd) c.entries.push_back({"P" + std::to_string(id++), s, Group::pd, {}});
    for (double s : control) c.entries.push_back({"C" + std::to_string(id++), s, Group::control, {}});
    return c;
}

ScoredCohort random_cohort(std::mt19937_64& rng, std::size_t n_pd, std::size_t n_control, double shift,
                           bool coarse = false)
{
    std::normal_distribution<double> g(0.0, 1.0);
    auto draw = [&](double mu) {
        const double v = mu + g(rng);
        return coarse ? std::round(v * 2.0) / 2.0 : v;
    };
    std::vector<double> pd, control;
    for (std::size_t i = 0; i < n_pd; ++i) pd.push_back(draw(shift));
    for (std::size_t i = 0; i < n_control; ++i) control.push_back(draw(0.0));
    return cohort_of(pd, control);
}

double pairwise_auc(const ScoredCohort& c)
{
    double wins = 0.0;
    const auto pd = c.scores(Group::pd);
    const auto control = c.scores(Group::control);
    for (double a : pd)
        for (double b : control) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    return wins / static_cast<double>(pd.size() * control.size());
}

ScoredCohort swapped(ScoredCohort c)
{
    for (auto& e : c.entries) e.label = e.label == Group::pd ? Group::control : Group::pd;
    return c;
}

} // namespace

TEST_CASE("ROC curve and AUC")
{
    CHECK(roc_curve(cohort_of({0.8, 0.9}, {0.1, 0.2})).auc == 1.0);
    CHECK(roc_curve(cohort_of({0.4, 0.4, 0.4}, {0.4, 0.4})).auc == 0.5);

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = random_cohort(rng, 20, 20, 0.7, trial % 2 == 0);
        CHECK(std::abs(roc_curve(c).auc - pairwise_auc(c)) <= 1e-12);
    }

    const auto curve = roc_curve(cohort_of({0.8, 0.9}, {0.1, 0.2}));
    CHECK(curve.points.front().threshold == -std::numeric_limits<double>::infinity());
    CHECK(curve.points.front().sensitivity == 1.0);
    CHECK(curve.points.front().specificity == 0.0);
    CHECK(curve.points.back().sensitivity == 0.0);
    CHECK(curve.points.back().specificity == 1.0);

    CHECK_THROWS_AS(roc_curve(cohort_of({0.1, 0.2}, {})), Error);
    auto dup = cohort_of({0.1}, {0.2});
    dup.entries[1].subject_id = dup.entries[0].subject_id;
    CHECK_THROWS_AS(roc_curve(dup), Error);
    dup.per_window = true;
    CHECK_NOTHROW(roc_curve(dup));
}

TEST_CASE("candidate thresholds")
{
    const auto t = candidate_thresholds({0.3, 0.1, 0.3, 0.2});
    REQUIRE(t.size() == 4);
    CHECK(std::isinf(t.front()));
    CHECK(t[1] == doctest::Approx(0.15));
    CHECK(t[2] == doctest::Approx(0.25));
    CHECK(std::isinf(t.back()));
}

TEST_CASE("bootstrap AUC interval")
{
    std::vector<double> pd, control;
    for (int i = 0; i < 50; ++i) {
        pd.push_back(1.0 + i * 0.01);
        control.push_back(i * 0.01);
    }
    const auto sep = cohort_of(pd, control);
    const auto ci = bootstrap_auc_ci(sep, 500, 3);
    CHECK(ci.low >= 0.9);
    CHECK(ci.high == 1.0);

    const auto tiny = cohort_of({0.6}, {0.4});
    const auto t = bootstrap_auc_ci(tiny, 200, 1);
    CHECK(t.low <= 1.0);
    CHECK(t.high >= 1.0);

    std::mt19937_64 rng(2);
    const auto c = random_cohort(rng, 25, 30, 0.5);
    const auto a = bootstrap_auc_ci(c, 400, 9, 1);
    const auto b = bootstrap_auc_ci(c, 400, 9, 3);
    const auto again = bootstrap_auc_ci(c, 400, 9, 1);
    CHECK(a.low == b.low);
    CHECK(a.high == b.high);
    CHECK(a.low == again.low);
    const double auc = roc_curve(c).auc;
    CHECK(a.low <= auc);
    CHECK(a.high >= auc);
    CHECK_THROWS_AS(bootstrap_auc_ci(c, 0), Error);
}

TEST_CASE("pointwise ROC band")
{
    std::mt19937_64 rng(4);
    const auto c = random_cohort(rng, 30, 30, 1.0);
    const auto band = roc_band(c, 300, 5, 1);
    REQUIRE(band.size() == 101);
    CHECK(band.front().fpr == 0.0);
    CHECK(band.back().fpr == 1.0);
    CHECK(band.back().sensitivity == 1.0);
    for (const auto& p : band) {
        CHECK(p.low <= p.high);
        CHECK(p.low >= 0.0);
        CHECK(p.high <= 1.0);
    }
    for (std::size_t i = 1; i < band.size(); ++i) CHECK(band[i].sensitivity >= band[i - 1].sensitivity);

    const auto threaded = roc_band(c, 300, 5, 4);
    for (std::size_t i = 0; i < band.size(); ++i) {
        CHECK(band[i].low == threaded[i].low);
        CHECK(band[i].high == threaded[i].high);
    }
    CHECK_THROWS_AS(roc_band(c, 10, 0, 1, 1), Error);
}

TEST_CASE("DeLong test")
{
    std::mt19937_64 rng(6);
    const auto c = random_cohort(rng, 20, 25, 0.8);
    const auto self = delong_test(c, c);
    CHECK(self.z == 0.0);
    CHECK(self.p == 1.0);
    CHECK(self.auc_a == self.auc_b);

    for (int trial = 0; trial < 10; ++trial) {
        auto a = random_cohort(rng, 15, 15, 0.5);
        auto b = a;
        std::normal_distribution<double> g(0.0, 0.7);
        for (auto& e : b.entries) e.score += g(rng);
        const auto r = delong_test(a, b);
        const auto s = delong_test(swapped(a), swapped(b));
        CHECK(s.auc_a == doctest::Approx(1.0 - r.auc_a).epsilon(1e-12));
        CHECK(s.auc_b == doctest::Approx(1.0 - r.auc_b).epsilon(1e-12));
        CHECK(std::abs(s.z) == doctest::Approx(std::abs(r.z)).epsilon(1e-9));
        CHECK(r.p >= 0.0);
        CHECK(r.p <= 1.0);
    }

    auto fewer = c;
    fewer.entries.pop_back();
    CHECK_THROWS_AS(delong_test(c, fewer), Error);
    auto relabeled = c;
    relabeled.entries[0].label = Group::control;
    CHECK_THROWS_AS(delong_test(c, relabeled), Error);
}

TEST_CASE("cost-weighted Youden cut-point")
{
    const auto sep = youden_cutpoint(cohort_of({0.8, 0.9}, {0.1, 0.2}), 1.0, 1.0);
    CHECK(sep.threshold == doctest::Approx(0.5));
    CHECK(sep.sensitivity == 1.0);
    CHECK(sep.specificity == 1.0);
    CHECK(sep.accuracy == 1.0);
    CHECK(sep.tp == 2);
    CHECK(sep.tn == 2);

    // exhaustive oracle over every midpoint threshold
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = random_cohort(rng, 10 + trial % 7, 12, 0.6, trial % 3 == 0);
        const double fn = trial % 3 == 1 ? 2.0 : 1.0;
        const double fp = trial % 3 == 2 ? 2.0 : 1.0;
        std::vector<double> all;
        for (const auto& e : c.entries) all.push_back(e.score);
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        std::vector<double> cands{-std::numeric_limits<double>::infinity()};
        for (std::size_t i = 1; i < all.size(); ++i) cands.push_back(0.5 * (all[i - 1] + all[i]));
        cands.push_back(std::numeric_limits<double>::infinity());

        const double npd = static_cast<double>(c.count(Group::pd));
        const double nc = static_cast<double>(c.count(Group::control));
        const double prev = npd / (npd + nc);
        const double r = fp * (1.0 - prev) / (fn * prev);
        double best_j = -1.0, best_sp = -1.0, best_t = 0.0;
        for (double t : cands) {
            double tp = 0, tn = 0;
            for (const auto& e : c.entries) {
                if (e.label == Group::pd && e.score > t) ++tp;
                if (e.label == Group::control && e.score <= t) ++tn;
            }
            const double se = tp / npd, sp = tn / nc;
            const double j = se + r * sp;
            if (j > best_j + 1e-12 || (std::abs(j - best_j) <= 1e-12 && sp > best_sp)) {
                best_j = j;
                best_sp = sp;
                best_t = t;
            }
        }
        const auto got = youden_cutpoint(c, fn, fp);
        CHECK(got.threshold == best_t);
        CHECK(got.tp + got.fn == c.count(Group::pd));
        CHECK(got.tn + got.fp == c.count(Group::control));
    }

    const auto c = cohort_of({0.8, 0.9}, {0.1, 0.2});
    CHECK_THROWS_AS(youden_cutpoint(c, 0.0, 1.0), Error);
    CHECK_THROWS_AS(youden_cutpoint(c, 1.0, 1.0, 1.0), Error);
}

TEST_CASE("Mann-Whitney U")
{
    const std::vector<double> a{1, 2}, b{3, 4};
    const auto r = mann_whitney_u(a, b);
    CHECK(r.u == 0.0);
    CHECK(r.exact);
    CHECK(r.p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const std::vector<double> same{1.0, 2.0, 3.0};
    CHECK(mann_whitney_u(same, same).p == doctest::Approx(1.0));

    // exact p against full enumeration of rank assignments for a 4+5 split
    const std::vector<double> x{0.3, 1.2, 2.5, 4.1}, y{0.1, 0.7, 1.9, 3.3, 5.0};
    const auto ex = mann_whitney_u(x, y);
    std::vector<int> mask(9, 0);
    std::fill(mask.begin(), mask.begin() + 4, 1);
    std::sort(mask.begin(), mask.end());
    const double mean_u = 4.0 * 5.0 / 2.0;
    int extreme = 0, total = 0;
    do {
        double u = 0;
        for (int i = 0; i < 9; ++i)
            if (mask[i])
                for (int j = 0; j < 9; ++j)
                    if (!mask[j] && i > j) ++u;
        ++total;
        if (std::abs(u - mean_u) >= std::abs(ex.u - mean_u) - 1e-12) ++extreme;
    } while (std::next_permutation(mask.begin(), mask.end()));
    CHECK(ex.exact);
    CHECK(ex.p == doctest::Approx(static_cast<double>(extreme) / total).epsilon(1e-12));

    CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{}, b), Error);
}

TEST_CASE("Mann-Whitney p-values are calibrated under the null")
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    int rejections = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> a(40), b(40);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        if (mann_whitney_u(a, b).p < 0.05) ++rejections;
    }
    const double rate = static_cast<double>(rejections) / trials;
    CHECK(rate >= 0.03);
    CHECK(rate <= 0.07);
}

TEST_CASE("logistic regression")
{
    SUBCASE("a covariate with no signal gets a zero coefficient")
    {
        std::vector<std::vector<double>> design;
        std::vector<double> y;
        for (double s : {-1.0, -0.5, 0.5, 1.0})
            for (double c : {-1.0, 1.0}) {
                for (double label : {0.0, 1.0}) {
                    design.push_back({s + (label ? 0.3 : -0.3), c});
                    y.push_back(label);
                }
            }
        const auto fit = logistic_fit(design, y, {"score", "noise"});
        CHECK(std::abs(fit.term("noise").coef) <= 1e-6);
        CHECK(fit.term("score").coef > 0.0);
        CHECK_FALSE(fit.separated);
    }
    SUBCASE("likelihood beats a dense grid")
    {
        const std::vector<std::vector<double>> design{{0.1}, {0.4}, {0.5}, {0.9}, {1.2}, {1.3}, {1.8}, {2.2}};
        const std::vector<double> y{0, 0, 1, 0, 1, 0, 1, 1};
        const auto fit = logistic_fit(design, y, {"x"});
        double best = -1e300;
        for (double b0 = -6.0; b0 <= 6.0; b0 += 0.02)
            for (double b1 = -6.0; b1 <= 6.0; b1 += 0.02) {
                double ll = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                    const double eta = b0 + b1 * design[i][0];
                    ll += y[i] * eta - std::log1p(std::exp(eta));
                }
                best = std::max(best, ll);
            }
        CHECK(fit.log_likelihood >= best - 1e-12);
        CHECK(fit.gradient_norm < 1e-8);
    }
    SUBCASE("perfect separation is flagged")
    {
        const std::vector<std::vector<double>> design{{0.1}, {0.2}, {0.3}, {0.7}, {0.8}, {0.9}};
        const std::vector<double> y{0, 0, 0, 1, 1, 1};
        CHECK(logistic_fit(design, y, {"x"}).separated);
    }
    SUBCASE("rank deficiency is an error")
    {
        const std::vector<std::vector<double>> design{{1, 2}, {2, 4}, {3, 6}, {4, 8}};
        const std::vector<double> y{0, 1, 0, 1};
        CHECK_THROWS_AS(logistic_fit(design, y, {"a", "b"}), Error);
    }
}

TEST_CASE("descriptive statistics")
{
    const std::vector<double> v{1, 2, 3, 4, 100};
    CHECK(mean(v) == 22.0);
    CHECK(sample_sd(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.1380899353));
    const auto b = box_stats(v);
    CHECK(b.n == 5);
    CHECK(b.median == 3.0);
    CHECK(b.q1 == 2.0);
    CHECK(b.q3 == 4.0);
    CHECK(b.whisker_high == 4.0);
    REQUIRE(b.outliers.size() == 1);
    CHECK(b.outliers[0] == 100.0);
}

TEST_CASE("metric comparison")
{
    MetricTable t;
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1.0);
    MetricColumn strong{"strong", {}, {}, true};
    MetricColumn noise{"noise", {}, {}, true};
    MetricColumn taps{"taps", {}, {}, false};
    for (int i = 0; i < 100; ++i) {
        const std::string id = "S" + std::to_string(i);
        const bool pd = i < 50;
        t.labels[id] = pd ? Group::pd : Group::control;
        t.covariates[id] = {{"sex", static_cast<double>(i % 2)}, {"age", 50.0 + i % 17}, {"education_years", 10.0 + i % 7}};
        strong.values[id] = (pd ? 1.5 : 0.0) + g(rng);
        noise.values[id] = g(rng);
        taps.values[id] = (pd ? 150.0 : 190.0) + 5.0 * g(rng);
    }
    t.metrics = {strong, noise, taps};
    CompareOptions opt;
    opt.n_boot = 200;
    const auto report = compare_metrics(t, opt);
    REQUIRE(report.metrics.size() == 3);
    CHECK(report.metrics[0].roc.auc > 0.75);
    REQUIRE(report.pairwise.size() == 3);
    CHECK(report.pairwise[0].metric_a == "strong");
    CHECK(report.pairwise[0].metric_b == "noise");
    CHECK(report.pairwise[0].result.p < 0.05);

    SUBCASE("low-in-PD metrics are oriented before ROC analysis")
    {
        const auto& m = report.metrics[2];
        CHECK_FALSE(m.pd_high);
        CHECK(m.roc.auc > 0.9);
        CHECK(m.mean_pd < m.mean_control);
    }
    SUBCASE("a duplicated column compares equal to itself")
    {
        MetricTable dup = t;
        auto copy = strong;
        copy.name = "strong_copy";
        dup.metrics = {strong, copy};
        const auto r = compare_metrics(dup, opt);
        REQUIRE(r.pairwise.size() == 1);
        CHECK(r.pairwise[0].result.p == 1.0);
    }
    SUBCASE("one separable metric")
    {
        MetricTable one;
        MetricColumn m{"m", {}, {}, true};
        for (int i = 0; i < 6; ++i) {
            const std::string id = "X" + std::to_string(i);
            one.labels[id] = i < 3 ? Group::pd : Group::control;
            one.covariates[id] = {{"sex", static_cast<double>(i % 2)}, {"age", 60.0 + i}, {"education_years", 12.0}};
            m.values[id] = i < 3 ? 1.0 + i : -1.0 - i;
        }
        one.metrics = {m};
        const auto r = compare_metrics(one, opt);
        REQUIRE(r.metrics.size() == 1);
        CHECK(r.metrics[0].roc.auc == 1.0);
        CHECK(r.pairwise.empty());
    }
    SUBCASE("no metrics is an error")
    {
        MetricTable empty;
        CHECK_THROWS_AS(compare_metrics(empty, opt), Error);
    }
}
