// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
//
//   acceptance            run all criteria
//   acceptance 3 7        run only the listed ones

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nqi/cli.hpp"
#include "nqi/ensemble.hpp"
#include "nqi/evalstats.hpp"
#include "nqi/featurize.hpp"
#include "nqi/svr.hpp"
#include "nqi/synthcohort.hpp"
#include "oracles/naive_featurizer.hpp"
#include "oracles/qp_oracle.hpp"
#include "support/pipeline.hpp"

using namespace nqi;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

SvrProblem random_svr_problem(std::mt19937_64& rng, std::size_t l, double C, double eps)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SvrProblem p;
    p.C = C;
    p.epsilon = eps;
    Vec7 truth{};
    for (auto& v : truth) v = u(rng) - 0.5;
    for (std::size_t i = 0; i < l; ++i) {
        Vec7 x{};
        for (auto& v : x) v = u(rng);
        double z = 0.2;
        for (std::size_t d = 0; d < kFeatureDim; ++d) z += truth[d] * x[d];
        p.inputs.push_back(x);
        p.targets.push_back(z + 0.3 * (u(rng) - 0.5));
    }
    return p;
}

// ---------------------------------------------------------------------------

Outcome svr_optimality()
{
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> size(1, 20);
    std::uniform_real_distribution<double> cdist(0.01, 10.0), edist(0.01, 0.2);
    double worst_rel = 0.0, worst_kkt = 0.0;
    const auto t0 = Clock::now();
    for (int trial = 0; trial < 200; ++trial) {
        const double C = cdist(rng);
        const double eps = edist(rng);
        const auto p = random_svr_problem(rng, size(rng), C, eps);
        const auto m = train_svr(p);
        const auto ref = oracle::svr_reference_optimum(p);
        const double obj = primal_objective(m.w, m.b, p);
        const double rel = std::abs(obj - static_cast<double>(ref.optimum)) /
                           std::max(1.0, std::abs(static_cast<double>(ref.optimum)));
        worst_rel = std::max(worst_rel, rel);
        worst_kkt = std::max(worst_kkt, m.kkt_residual);
    }
    const double t = seconds_since(t0);
    return {worst_rel <= 1e-6 && worst_kkt <= 1e-8 && t < 30.0,
            fmt("200 problems, worst relative objective gap %.2e, worst KKT residual %.2e, %.1f s", worst_rel,
                worst_kkt, t)};
}

Outcome svr_two_point()
{
    SvrProblem p;
    p.inputs = {Vec7{0, 0, 0, 0, 0, 0, 0}, Vec7{1, 0, 0, 0, 0, 0, 0}};
    p.targets = {0.0, 1.0};
    p.C = 1e3;
    p.epsilon = 0.1;
    const auto m = train_svr(p);
    bool others_zero = true;
    for (std::size_t d = 1; d < kFeatureDim; ++d) others_zero = others_zero && m.w[d] == 0.0;
    const bool ok = std::abs(m.w[0] - 0.8) <= 1e-9 && std::abs(m.b - 0.1) <= 1e-9 &&
                    std::abs(m.objective - 0.32) <= 1e-9 && others_zero;
    return {ok, fmt("w = %.12f, b = %.12f, objective = %.12f", m.w[0], m.b, m.objective)};
}

Outcome target_translation()
{
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<std::size_t> size(2, 60);
    std::uniform_real_distribution<double> cdist(0.01, 10.0), edist(0.01, 0.2), u(0.0, 1.0);
    const double c = 0.37;
    double worst_w = 0.0, worst_pred = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_svr_problem(rng, size(rng), cdist(rng), edist(rng));
        const auto a = train_svr(p);
        for (auto& z : p.targets) z += c;
        const auto b = train_svr(p);
        for (std::size_t d = 0; d < kFeatureDim; ++d) worst_w = std::max(worst_w, std::abs(a.w[d] - b.w[d]));
        for (int k = 0; k < 20; ++k) {
            Vec7 x{};
            for (auto& v : x) v = u(rng);
            worst_pred = std::max(worst_pred, std::abs(predict(b, x) - predict(a, x) - c));
        }
        for (const auto& x : p.inputs) worst_pred = std::max(worst_pred, std::abs(predict(b, x) - predict(a, x) - c));
    }
    return {worst_w <= 1e-10 && worst_pred <= 1e-9,
            fmt("50 corpora, max |dw| %.2e, max prediction shift error %.2e", worst_w, worst_pred)};
}

Outcome featurization_oracle()
{
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_ratio = 0.0;
    int hist_mismatch = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 30 + static_cast<int>(u(rng) * 170);
        const double median = 0.05 + 0.2 * u(rng);
        std::lognormal_distribution<double> hold(std::log(median), 0.1 + 0.6 * u(rng));
        std::uniform_real_distribution<double> gap(0.0, 0.2 + 0.5 * u(rng));
        const bool quantized = trial % 10 == 0;  // many ties, sometimes a zero IQR
        std::vector<HoldSample> s;
        double t = 100.0 * u(rng);
        for (int i = 0; i < n; ++i) {
            double h = std::min(hold(rng), 1.9);
            if (quantized) h = std::max(0.01, std::round(h * 20.0) / 20.0);
            if (u(rng) < 0.03) h = 0.6 + u(rng);
            s.push_back({t, h, t + h});
            t += gap(rng);
        }
        const auto w = partition_windows(s, {1e9, 30});
        if (w.size() != 1) return {false, fmt("trial %d: expected one window, got %zu", trial, w.size())};

        oracle::NaiveWindow nw;
        for (const auto& x : s) {
            nw.holds.push_back(x.hold);
            nw.presses.push_back(x.press);
            nw.releases.push_back(x.release);
        }
        const auto want = oracle::naive_features(nw);
        const auto got = feature_vector(w[0]).as_array();
        for (std::size_t d = 0; d < 3; ++d) worst_ratio = std::max(worst_ratio, std::abs(got[d] - want[d]));
        for (std::size_t d = 3; d < kFeatureDim; ++d)
            if (std::bit_cast<std::uint64_t>(got[d]) != std::bit_cast<std::uint64_t>(want[d])) ++hist_mismatch;
    }
    return {worst_ratio <= 1e-12 && hist_mismatch == 0,
            fmt("1000 windows, worst ratio-feature deviation %.2e, histogram bin mismatches %d", worst_ratio,
                hist_mismatch)};
}

Outcome window_filter()
{
    // 29, 30 and 31 keys in consecutive 90 s windows.
    TypingSession session{"W", "s1", {}, {}};
    double offset = 0.0;
    for (int count : {29, 30, 31}) {
        for (int i = 0; i < count; ++i) {
            const double p = offset + 89.0 * i / count;
            session.events.push_back({KeyClass::alnum, p, p + 0.1});
        }
        offset += 90.0;
    }
    const auto windows = partition_windows(hold_times(session));
    const auto rows = featurize_sessions({session});
    std::vector<std::size_t> sizes, indices;
    for (const auto& w : windows) {
        sizes.push_back(w.hold_times.size());
        indices.push_back(w.window_index);
    }
    const bool ok = sizes == std::vector<std::size_t>{30, 31} && indices == std::vector<std::size_t>{1, 2} &&
                    rows.size() == 2 && rows[0].window_index == 1 && rows[1].window_index == 2;
    std::string got;
    for (auto n : sizes) got += std::to_string(n) + " ";
    return {ok, "kept window sizes: " + got + "(from 29/30/31)"};
}

ScoredCohort random_cohort(std::mt19937_64& rng, std::size_t n_pd, std::size_t n_control, double shift,
                           bool coarse)
{
    std::normal_distribution<double> g(0.0, 1.0);
    ScoredCohort c;
    for (std::size_t i = 0; i < n_pd + n_control; ++i) {
        const bool pd = i < n_pd;
        double v = (pd ? shift : 0.0) + g(rng);
        if (coarse) v = std::round(v * 2.0) / 2.0;
        c.entries.push_back({"S" + std::to_string(i), v, pd ? Group::pd : Group::control, {}});
    }
    return c;
}

Outcome auc_equivalence()
{
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<std::size_t> size(1, 40);
    std::uniform_real_distribution<double> shift(-1.0, 2.0);
    double worst_roc = 0.0, worst_delong = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto c = random_cohort(rng, size(rng), size(rng), shift(rng), trial % 2 == 0);
        double wins = 0.0;
        const auto pd = c.scores(Group::pd);
        const auto control = c.scores(Group::control);
        for (double a : pd)
            for (double b : control) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
        const double brute = wins / static_cast<double>(pd.size() * control.size());
        worst_roc = std::max(worst_roc, std::abs(roc_curve(c).auc - brute));
        const auto d = delong_test(c, c);
        worst_delong = std::max({worst_delong, std::abs(d.auc_a - brute), std::abs(d.auc_b - brute)});
    }
    return {worst_roc <= 1e-12 && worst_delong <= 1e-12,
            fmt("500 cohorts, max |AUC - pairwise| %.2e (roc_curve), %.2e (DeLong)", worst_roc, worst_delong)};
}

// Exhaustive scan: Se + r Sp with r = cost_fp (1 - p) / (cost_fn p) and
// p = m / (m + n) equals (cost_fn TP + cost_fp TN) / (cost_fn m), so integer
// costs compare exactly.
double exhaustive_youden(const ScoredCohort& c, long cost_fn, long cost_fp)
{
    std::vector<double> s;
    for (const auto& e : c.entries) s.push_back(e.score);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    std::vector<double> thresholds{-std::numeric_limits<double>::infinity()};
    for (std::size_t i = 1; i < s.size(); ++i) thresholds.push_back(s[i - 1] + (s[i] - s[i - 1]) / 2.0);
    thresholds.push_back(std::numeric_limits<double>::infinity());

    long best = -1;
    long best_tn = -1;
    double best_t = 0.0;
    for (double t : thresholds) {
        long tp = 0, tn = 0;
        for (const auto& e : c.entries) {
            if (e.label == Group::pd && e.score > t) ++tp;
            if (e.label == Group::control && !(e.score > t)) ++tn;
        }
        const long v = cost_fn * tp + cost_fp * tn;
        if (v > best || (v == best && tn > best_tn)) {
            best = v;
            best_tn = tn;
            best_t = t;
        }
    }
    return best_t;
}

Outcome youden_oracle()
{
    std::mt19937_64 rng(707);
    std::uniform_int_distribution<std::size_t> size(1, 30);
    std::uniform_real_distribution<double> shift(-0.5, 3.0);
    int mismatches = 0, order_violations = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto c = random_cohort(rng, size(rng), size(rng), shift(rng), trial % 3 == 0);
        double t[3];
        const long costs[3][2] = {{1, 1}, {2, 1}, {1, 2}};
        for (int k = 0; k < 3; ++k) {
            const auto cut = youden_cutpoint(c, static_cast<double>(costs[k][0]), static_cast<double>(costs[k][1]));
            t[k] = cut.threshold;
            if (cut.threshold != exhaustive_youden(c, costs[k][0], costs[k][1])) ++mismatches;
        }
        if (!(t[1] <= t[0] && t[0] <= t[2])) ++order_violations;
    }
    return {mismatches == 0 && order_violations == 0,
            fmt("500 cohorts x 3 cost ratios, %d threshold mismatches, %d ordering violations", mismatches,
                order_violations)};
}

Outcome mann_whitney_exact()
{
    int checked = 0, mismatches = 0;
    for (int total = 2; total <= 10; ++total) {
        for (int na = 1; na < total; ++na) {
            // Null distribution of U over all placements of a's ranks.
            std::vector<long> u_counts(static_cast<std::size_t>(na * (total - na) + 1), 0);
            long placements = 0;
            for (unsigned mask = 0; mask < (1u << total); ++mask) {
                if (std::popcount(mask) != na) continue;
                ++placements;
                long u = 0;
                for (int i = 0; i < total; ++i)
                    if (mask >> i & 1u)
                        for (int j = 0; j < i; ++j)
                            if (!(mask >> j & 1u)) ++u;
                ++u_counts[static_cast<std::size_t>(u)];
            }
            for (unsigned mask = 0; mask < (1u << total); ++mask) {
                if (std::popcount(mask) != na) continue;
                std::vector<double> a, b;
                long u = 0;
                for (int i = 0; i < total; ++i) {
                    if (mask >> i & 1u) {
                        a.push_back(i + 1.0);
                        for (int j = 0; j < i; ++j)
                            if (!(mask >> j & 1u)) ++u;
                    } else {
                        b.push_back(i + 1.0);
                    }
                }
                long lower = 0, upper = 0;
                for (std::size_t k = 0; k < u_counts.size(); ++k) {
                    if (static_cast<long>(k) <= u) lower += u_counts[k];
                    if (static_cast<long>(k) >= u) upper += u_counts[k];
                }
                const double want = std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) /
                                                      static_cast<double>(placements));
                const auto got = mann_whitney_u(a, b);
                ++checked;
                if (got.p != want || !got.exact || got.u != static_cast<double>(u)) ++mismatches;
            }
        }
    }
    const double a[] = {1, 2}, b[] = {3, 4};
    const double p = mann_whitney_u(a, b).p;
    return {mismatches == 0 && p == 1.0 / 3.0,
            fmt("%d rank patterns, %d mismatches; [1,2] vs [3,4] gives p = %.17g", checked, mismatches, p)};
}

double log_likelihood(const std::vector<std::vector<double>>& x, const std::vector<double>& y, const double* beta)
{
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double eta = beta[0];
        for (std::size_t d = 0; d < x[i].size(); ++d) eta += beta[d + 1] * x[i][d];
        // log(1 + e^eta) computed stably
        const double soft = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        ll += y[i] * eta - soft;
    }
    return ll;
}

Outcome logistic_regression()
{
    std::mt19937_64 rng(909);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_excess = -std::numeric_limits<double>::infinity();
    int fitted = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 20 + static_cast<std::size_t>(u(rng) * 30);
        const double b0 = g(rng) * 0.5, b1 = g(rng), b2 = g(rng) * 0.5;
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        for (std::size_t i = 0; i < n; ++i) {
            const double x1 = g(rng), x2 = g(rng);
            const double p = 1.0 / (1.0 + std::exp(-(b0 + b1 * x1 + b2 * x2)));
            x.push_back({x1, x2});
            y.push_back(u(rng) < p ? 1.0 : 0.0);
        }
        LogisticFit fit;
        try {
            fit = logistic_fit(x, y, {"x1", "x2"});
        } catch (const Error&) {
            continue;
        }
        if (fit.separated) continue;
        ++fitted;
        // Dense grid over [-4, 4]^3 at spacing 0.1.
        double grid_best = -std::numeric_limits<double>::infinity();
        double beta[3];
        for (int i = -40; i <= 40; ++i)
            for (int j = -40; j <= 40; ++j)
                for (int k = -40; k <= 40; ++k) {
                    beta[0] = 0.1 * i;
                    beta[1] = 0.1 * j;
                    beta[2] = 0.1 * k;
                    grid_best = std::max(grid_best, log_likelihood(x, y, beta));
                }
        worst_excess = std::max(worst_excess, grid_best - fit.log_likelihood);
    }

    // Every row appears with +v and -v for the null covariate.
    double worst_null = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        for (int i = 0; i < 15; ++i) {
            const double s = g(rng);
            const double yy = u(rng) < 1.0 / (1.0 + std::exp(-s)) ? 1.0 : 0.0;
            const double v = u(rng) + 0.1;
            x.push_back({s, v});
            y.push_back(yy);
            x.push_back({s, -v});
            y.push_back(yy);
        }
        try {
            const auto fit = logistic_fit(x, y, {"signal", "null"});
            if (!fit.separated) worst_null = std::max(worst_null, std::abs(fit.term("null").coef));
        } catch (const Error&) {
        }
    }
    return {fitted >= 90 && worst_excess <= 1e-6 && worst_null <= 1e-5,
            fmt("%d non-separated fits, max (grid best - fitted) log-likelihood %.2e, max null |coef| %.2e", fitted,
                worst_excess, worst_null)};
}

RunConfig pipeline_config(std::size_t threads)
{
    RunConfig c;
    c.seed = 2024;
    c.threads = threads;
    c.simulation.n_pd = 20;  // per dataset; 40 + 40 over both
    c.simulation.n_control = 20;
    return c;
}

Outcome determinism()
{
    support::TempDir one("acc_t1"), many("acc_tn");
    std::ostringstream diag;
    auto t0 = Clock::now();
    support::run_pipeline(one.path(), pipeline_config(1), diag);
    const double t1 = seconds_since(t0);
    t0 = Clock::now();
    support::run_pipeline(many.path(), pipeline_config(4), diag);
    const double t4 = seconds_since(t0);

    const auto a = support::read_tree(one.path());
    const auto b = support::read_tree(many.path());
    std::size_t differing = 0;
    for (const auto& [name, content] : a)
        if (!b.count(name) || b.at(name) != content) ++differing;
    if (a.size() != b.size()) ++differing;
    return {differing == 0 && !a.empty() && t1 < 300.0 && t4 < 300.0,
            fmt("%zu output files, %zu differ between 1 and 4 threads; %.1f s and %.1f s", a.size(), differing, t1,
                t4)};
}

CrossValResult synthetic_crossval(std::uint64_t seed, const ImpairmentParams& impairment, std::size_t n_models)
{
    CohortSpec a;
    a.n_pd = 20;
    a.n_control = 20;
    a.impairment = impairment;
    a.id_prefix = "D";
    auto b = a;
    b.id_prefix = "E";
    b.dataset = DatasetTag::earlypd;
    const auto fa = featurize_dataset(generate_cohort(a, seed));
    const auto fb = featurize_dataset(generate_cohort(b, seed + 1));
    EnsembleParams params;
    params.n_models = n_models;
    params.master_seed = seed;
    return cross_validate(fa, fb, params);
}

Outcome signal_detection()
{
    ImpairmentParams strong;
    strong.burst_sigma_multiplier = 2.0;
    strong.burst_enter_prob = 0.05;
    strong.burst_exit_prob = 0.2;
    const double auc = synthetic_crossval(11, strong, kDefaultModels).combined_auc;

    double sum = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s)
        sum += synthetic_crossval(1000 + 10 * s, ImpairmentParams::null_effect(), kDefaultModels).combined_auc;
    const double null_mean = sum / 20.0;
    return {auc >= 0.75 && null_mean >= 0.35 && null_mean <= 0.65,
            fmt("impaired cohort AUC %.3f, null-effect mean AUC over 20 seeds %.3f", auc, null_mean)};
}

Outcome bagging_variance()
{
    // Fixed query points: feature vectors of an independent reference cohort.
    CohortSpec ref;
    ref.n_pd = 2;
    ref.n_control = 2;
    ref.profiles.session_minutes = 3.0;
    ref.id_prefix = "R";
    const auto ref_windows = featurize_dataset(generate_cohort(ref, 5)).windows;
    std::vector<FeatureVector> queries;
    for (const auto& w : ref_windows) queries.push_back(w.x);

    std::vector<std::vector<double>> bagged(queries.size()), single(queries.size());
    for (std::uint64_t pop = 0; pop < 50; ++pop) {
        CohortSpec spec;
        spec.n_pd = 6;
        spec.n_control = 6;
        spec.profiles.session_minutes = 6.0;
        const auto corpus = build_corpus(featurize_dataset(generate_cohort(spec, 100 + pop)));
        EnsembleParams params;
        params.n_models = 51;
        params.master_seed = pop;
        const auto model = train_ensemble(corpus, params);
        for (std::size_t q = 0; q < queries.size(); ++q) {
            bagged[q].push_back(window_nqi(model, queries[q]));
            single[q].push_back(predict(model.units[0], model.transform(queries[q])));
        }
    }
    std::size_t reduced = 0;
    double ratio_sum = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const double vb = sample_sd(bagged[q]) * sample_sd(bagged[q]);
        const double vs = sample_sd(single[q]) * sample_sd(single[q]);
        if (vb <= vs) ++reduced;
        ratio_sum += vb / vs;
    }
    return {reduced == queries.size(),
            fmt("%zu of %zu query points with var(bagged) <= var(single unit), mean variance ratio %.3f", reduced,
                queries.size(), ratio_sum / static_cast<double>(queries.size()))};
}

Outcome model_round_trip()
{
    CohortSpec spec;
    spec.n_pd = 5;
    spec.n_control = 5;
    spec.profiles.session_minutes = 4.0;
    const auto corpus = build_corpus(featurize_dataset(generate_cohort(spec, 77)));
    std::mt19937_64 rng(1313);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    std::size_t differing = 0;
    for (bool standardize : {false, true}) {
        EnsembleParams params;
        params.n_models = 25;
        params.standardize = standardize;
        const auto model = train_ensemble(corpus, params, "denovo");
        std::stringstream io;
        save_model(io, model);
        const auto back = load_model(io);
        for (int i = 0; i < 1000; ++i) {
            Vec7 a{};
            for (auto& v : a) v = u(rng);
            const auto x = FeatureVector::from_array(a);
            const double p = window_nqi(model, x), q = window_nqi(back, x);
            if (std::bit_cast<std::uint64_t>(p) != std::bit_cast<std::uint64_t>(q)) ++differing;
        }
    }
    return {differing == 0, fmt("2000 predictions (plain and standardized models), %zu differ", differing)};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"SVR optimality against a high-precision reference", svr_optimality},
        {"analytic two-point SVR", svr_two_point},
        {"target-translation invariance", target_translation},
        {"featurization matches the naive oracle", featurization_oracle},
        {"windows with fewer than 30 holds are dropped", window_filter},
        {"AUC equals the pairwise count", auc_equivalence},
        {"Youden cut-points match an exhaustive scan", youden_oracle},
        {"exact Mann-Whitney p-values", mann_whitney_exact},
        {"logistic regression maximizes the likelihood", logistic_regression},
        {"pipeline determinism across thread counts", determinism},
        {"end-to-end signal detection", signal_detection},
        {"bagging reduces prediction variance", bagging_variance},
        {"model serialization round-trip", model_round_trip},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome r;
        const auto t0 = Clock::now();
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("threw: ") + e.what()};
        }
        if (!r.pass) ++failed;
        std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first << " ("
                  << r.detail << ") [" << fmt("%.1f s", seconds_since(t0)) << "]" << std::endl;
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << failed << " failing" << std::endl;
    return failed ? 1 : 0;
}
