#include "nqi/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "nqi/error.hpp"
#include "nqi/featurize.hpp"
#include "nqi/parallel.hpp"

namespace nqi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-based ranks with ties sharing the mean rank.
std::vector<double> midranks(std::span<const double> v)
{
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j + 1);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

// Rank-sum form of the AUC: exact for any realistic cohort size since the
// numerator is a half-integer.
double auc_by_ranks(std::span<const double> pd, std::span<const double> control)
{
    std::vector<double> all(pd.begin(), pd.end());
    all.insert(all.end(), control.begin(), control.end());
    const auto ranks = midranks(all);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < pd.size(); ++i) rank_sum += ranks[i];
    const auto m = static_cast<double>(pd.size());
    const auto n = static_cast<double>(control.size());
    return (rank_sum - m * (m + 1.0) / 2.0) / (m * n);
}

double quantile_sorted(const std::vector<double>& sorted, double p)
{
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto k = static_cast<std::size_t>(std::floor(h));
    if (k + 1 >= sorted.size()) return sorted.back();
    return sorted[k] + (h - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
}

std::size_t count_above(const std::vector<double>& sorted, double t)
{
    return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
}

double covariance(std::span<const double> a, double mean_a, std::span<const double> b, double mean_b)
{
    if (a.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - mean_a) * (b[i] - mean_b);
    return s / static_cast<double>(a.size() - 1);
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y)
{
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // y*eta - log(1 + e^eta), evaluated without overflow
        const double e = eta(i);
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y(i) * e - softplus;
    }
    return ll;
}

Eigen::VectorXd logistic(const Eigen::VectorXd& eta)
{
    Eigen::VectorXd mu(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta(i);
        mu(i) = e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
    }
    return mu;
}

} // namespace

std::size_t ScoredCohort::count(Group g) const
{
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [g](const auto& e) { return e.label == g; }));
}

std::vector<double> ScoredCohort::scores(Group g) const
{
    std::vector<double> out;
    for (const auto& e : entries)
        if (e.label == g) out.push_back(e.score);
    return out;
}

void ScoredCohort::require_both_labels() const
{
    if (count(Group::pd) == 0 || count(Group::control) == 0)
        throw Error("ROC analysis needs at least one PD and one control entry");
    if (!per_window) {
        std::set<std::string> ids;
        for (const auto& e : entries)
            if (!ids.insert(e.subject_id).second)
                throw Error("subject '" + e.subject_id + "' scored twice in a subject-level cohort");
    }
    for (const auto& e : entries)
        if (!std::isfinite(e.score)) throw Error("non-finite score for '" + e.subject_id + "'");
}

std::vector<double> candidate_thresholds(std::vector<double> scores)
{
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> out;
    out.reserve(scores.size() + 1);
    out.push_back(-kInf);
    for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
        const double a = scores[i], b = scores[i + 1];
        double mid = a + (b - a) / 2.0;
        if (!(mid < b)) mid = a;
        out.push_back(mid);
    }
    out.push_back(kInf);
    return out;
}

RocCurve roc_curve(const ScoredCohort& cohort)
{
    cohort.require_both_labels();
    auto pd = cohort.scores(Group::pd);
    auto control = cohort.scores(Group::control);
    std::sort(pd.begin(), pd.end());
    std::sort(control.begin(), control.end());
    const auto m = static_cast<double>(pd.size());
    const auto n = static_cast<double>(control.size());

    std::vector<double> all = pd;
    all.insert(all.end(), control.begin(), control.end());

    RocCurve roc;
    double doubled_area = 0.0;
    std::size_t prev_tp = 0, prev_fp = 0;
    bool first = true;
    for (double t : candidate_thresholds(std::move(all))) {
        const auto tp = count_above(pd, t);
        const auto fp = count_above(control, t);
        roc.points.push_back({t, static_cast<double>(tp) / m, 1.0 - static_cast<double>(fp) / n});
        if (!first)
            doubled_area += static_cast<double>(prev_fp - fp) * static_cast<double>(prev_tp + tp);
        prev_tp = tp;
        prev_fp = fp;
        first = false;
    }
    roc.auc = doubled_area / (2.0 * m * n);
    return roc;
}

AucInterval bootstrap_auc_ci(const ScoredCohort& cohort, std::size_t n_boot, std::uint64_t seed,
                             std::size_t threads)
{
    cohort.require_both_labels();
    if (n_boot == 0) throw Error("bootstrap needs at least one replicate");
    const auto pd = cohort.scores(Group::pd);
    const auto control = cohort.scores(Group::control);

    std::vector<double> aucs(n_boot);
    parallel_for(n_boot, threads, [&](std::size_t r) {
        std::mt19937_64 rng(derive_seed(seed, r));
        std::uniform_int_distribution<std::size_t> pick_pd(0, pd.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_c(0, control.size() - 1);
        std::vector<double> a(pd.size()), b(control.size());
        for (auto& v : a) v = pd[pick_pd(rng)];
        for (auto& v : b) v = control[pick_c(rng)];
        aucs[r] = auc_by_ranks(a, b);
    });
    std::sort(aucs.begin(), aucs.end());
    return {quantile_sorted(aucs, 0.025), quantile_sorted(aucs, 0.975)};
}

namespace {

// Sensitivity of the piecewise-linear ROC path at false-positive rate t.
double sensitivity_at(const std::vector<RocPoint>& points, double t)
{
    // points run from threshold -inf (fpr 1) to +inf (fpr 0); walk backwards.
    double best = 0.0;
    for (std::size_t k = points.size(); k-- > 1;) {
        const double f0 = 1.0 - points[k].specificity, s0 = points[k].sensitivity;
        const double f1 = 1.0 - points[k - 1].specificity, s1 = points[k - 1].sensitivity;
        if (t < f0) break;
        if (t >= f1) {
            best = std::max(best, s1);
            continue;
        }
        best = std::max(best, s0 + (s1 - s0) * (t - f0) / (f1 - f0));
    }
    return best;
}

} // namespace

std::vector<RocBandPoint> roc_band(const ScoredCohort& cohort, std::size_t n_boot, std::uint64_t seed,
                                   std::size_t threads, std::size_t grid)
{
    cohort.require_both_labels();
    if (n_boot == 0) throw Error("bootstrap needs at least one replicate");
    if (grid < 2) throw Error("ROC band needs at least two grid points");
    std::vector<const ScoredEntry*> pd, control;
    for (const auto& e : cohort.entries) (e.label == Group::pd ? pd : control).push_back(&e);

    std::vector<double> fpr(grid);
    for (std::size_t g = 0; g < grid; ++g) fpr[g] = static_cast<double>(g) / static_cast<double>(grid - 1);

    std::vector<std::vector<double>> samples(n_boot, std::vector<double>(grid));
    parallel_for(n_boot, threads, [&](std::size_t r) {
        // Offset seed: the band never shares draws with bootstrap_auc_ci.
        std::mt19937_64 rng(derive_seed(seed ^ 0x5EED0F0C0B0A0D00ULL, r));
        std::uniform_int_distribution<std::size_t> pick_pd(0, pd.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_c(0, control.size() - 1);
        ScoredCohort resampled;
        resampled.per_window = true;
        for (std::size_t i = 0; i < pd.size(); ++i) resampled.entries.push_back(*pd[pick_pd(rng)]);
        for (std::size_t i = 0; i < control.size(); ++i) resampled.entries.push_back(*control[pick_c(rng)]);
        const auto roc = roc_curve(resampled);
        for (std::size_t g = 0; g < grid; ++g) samples[r][g] = sensitivity_at(roc.points, fpr[g]);
    });

    const auto roc = roc_curve(cohort);
    std::vector<RocBandPoint> band(grid);
    std::vector<double> column(n_boot);
    for (std::size_t g = 0; g < grid; ++g) {
        for (std::size_t r = 0; r < n_boot; ++r) column[r] = samples[r][g];
        std::sort(column.begin(), column.end());
        band[g] = {fpr[g], sensitivity_at(roc.points, fpr[g]), quantile_sorted(column, 0.025),
                   quantile_sorted(column, 0.975)};
    }
    return band;
}

DelongResult delong_test(const ScoredCohort& a, const ScoredCohort& b)
{
    a.require_both_labels();
    b.require_both_labels();
    if (a.per_window || b.per_window) throw Error("DeLong test needs subject-level cohorts");
    std::map<std::string, const ScoredEntry*> by_id;
    for (const auto& e : b.entries) by_id[e.subject_id] = &e;
    if (by_id.size() != a.entries.size()) throw Error("DeLong test needs the same subjects in both cohorts");

    std::vector<double> xa, xb, ya, yb;  // PD (x) and control (y) scores for both metrics
    std::vector<const ScoredEntry*> order;
    for (const auto& e : a.entries) order.push_back(&e);
    std::sort(order.begin(), order.end(),
              [](const auto* l, const auto* r) { return l->subject_id < r->subject_id; });
    for (const auto* e : order) {
        auto it = by_id.find(e->subject_id);
        if (it == by_id.end())
            throw Error("subject '" + e->subject_id + "' missing from the second cohort");
        if (it->second->label != e->label)
            throw Error("subject '" + e->subject_id + "' labeled differently in the two cohorts");
        if (e->label == Group::pd) {
            xa.push_back(e->score);
            xb.push_back(it->second->score);
        } else {
            ya.push_back(e->score);
            yb.push_back(it->second->score);
        }
    }

    const std::size_t m = xa.size(), n = ya.size();
    struct Components
    {
        double auc;
        std::vector<double> v10, v01;
    };
    auto components = [&](const std::vector<double>& x, const std::vector<double>& y) {
        std::vector<double> z = x;
        z.insert(z.end(), y.begin(), y.end());
        const auto tz = midranks(z), tx = midranks(x), ty = midranks(y);
        Components c;
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            rank_sum += tz[i];
            c.v10.push_back((tz[i] - tx[i]) / static_cast<double>(n));
        }
        for (std::size_t j = 0; j < n; ++j)
            c.v01.push_back(1.0 - (tz[m + j] - ty[j]) / static_cast<double>(m));
        const auto dm = static_cast<double>(m), dn = static_cast<double>(n);
        c.auc = (rank_sum - dm * (dm + 1.0) / 2.0) / (dm * dn);
        return c;
    };
    const auto ca = components(xa, ya);
    const auto cb = components(xb, yb);

    const double s10 = covariance(ca.v10, ca.auc, ca.v10, ca.auc) +
                       covariance(cb.v10, cb.auc, cb.v10, cb.auc) -
                       2.0 * covariance(ca.v10, ca.auc, cb.v10, cb.auc);
    const double s01 = covariance(ca.v01, ca.auc, ca.v01, ca.auc) +
                       covariance(cb.v01, cb.auc, cb.v01, cb.auc) -
                       2.0 * covariance(ca.v01, ca.auc, cb.v01, cb.auc);
    const double var = s10 / static_cast<double>(m) + s01 / static_cast<double>(n);

    DelongResult r;
    r.auc_a = ca.auc;
    r.auc_b = cb.auc;
    const double diff = ca.auc - cb.auc;
    if (diff == 0.0) {
        r.z = 0.0;
        r.p = 1.0;
    } else if (!(var > 0.0)) {
        r.z = diff > 0 ? kInf : -kInf;
        r.p = 0.0;
    } else {
        r.z = diff / std::sqrt(var);
        r.p = normal_two_sided_p(r.z);
    }
    return r;
}

CutPoint youden_cutpoint(const ScoredCohort& cohort, double cost_fn, double cost_fp,
                         std::optional<double> prevalence)
{
    cohort.require_both_labels();
    if (!(cost_fn > 0.0) || !(cost_fp > 0.0)) throw Error("misclassification costs must be positive");
    if (prevalence && !(*prevalence > 0.0 && *prevalence < 1.0))
        throw Error("prevalence override must lie in (0, 1)");

    auto pd = cohort.scores(Group::pd);
    auto control = cohort.scores(Group::control);
    std::sort(pd.begin(), pd.end());
    std::sort(control.begin(), control.end());
    const auto m = static_cast<double>(pd.size());
    const auto n = static_cast<double>(control.size());

    std::vector<double> all = pd;
    all.insert(all.end(), control.begin(), control.end());

    // With the empirical prevalence the criterion is proportional to
    // cost_fn*TP + cost_fp*TN, which stays exact for integer costs.
    const double r = prevalence ? cost_fp * (1.0 - *prevalence) / (cost_fn * *prevalence) : 0.0;
    auto criterion = [&](std::size_t tp, std::size_t tn) {
        if (prevalence) return static_cast<double>(tp) / m + r * static_cast<double>(tn) / n;
        return cost_fn * static_cast<double>(tp) + cost_fp * static_cast<double>(tn);
    };

    CutPoint best;
    double best_value = -kInf;
    for (double t : candidate_thresholds(std::move(all))) {
        const auto tp = count_above(pd, t);
        const auto tn = control.size() - count_above(control, t);
        const double v = criterion(tp, tn);
        if (v >= best_value) {
            best_value = v;
            best.threshold = t;
            best.tp = tp;
            best.tn = tn;
        }
    }
    best.cost_fn = cost_fn;
    best.cost_fp = cost_fp;
    best.fn = pd.size() - best.tp;
    best.fp = control.size() - best.tn;
    best.sensitivity = static_cast<double>(best.tp) / m;
    best.specificity = static_cast<double>(best.tn) / n;
    best.accuracy = static_cast<double>(best.tp + best.tn) / (m + n);
    return best;
}

double normal_two_sided_p(double z)
{
    if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
    return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) throw Error("Mann-Whitney U needs two non-empty groups");
    MannWhitneyResult r;
    for (double x : a)
        for (double y : b) r.u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);

    const std::size_t m = a.size(), n = b.size(), total_n = m + n;
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    const bool ties = std::adjacent_find(all.begin(), all.end()) != all.end();

    if (!ties && total_n <= kMannWhitneyExactMax) {
        // dist[i][j][u]: orderings of i a-values and j b-values with statistic u
        const std::size_t umax = m * n;
        std::vector<std::vector<std::vector<std::uint64_t>>> dist(
            m + 1, std::vector<std::vector<std::uint64_t>>(n + 1, std::vector<std::uint64_t>(umax + 1, 0)));
        dist[0][0][0] = 1;
        for (std::size_t i = 0; i <= m; ++i)
            for (std::size_t j = 0; j <= n; ++j) {
                if (i == 0 && j == 0) continue;
                for (std::size_t u = 0; u <= umax; ++u) {
                    std::uint64_t c = 0;
                    // largest value is an a: it beats all j b-values
                    if (i > 0 && u >= j) c += dist[i - 1][j][u - j];
                    if (j > 0) c += dist[i][j - 1][u];
                    dist[i][j][u] = c;
                }
            }
        const auto& f = dist[m][n];
        const auto u = static_cast<std::size_t>(r.u);
        std::uint64_t le = 0, ge = 0, total = 0;
        for (std::size_t v = 0; v <= umax; ++v) {
            total += f[v];
            if (v <= u) le += f[v];
            if (v >= u) ge += f[v];
        }
        r.p = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
        r.exact = true;
        return r;
    }

    const double dm = static_cast<double>(m), dn = static_cast<double>(n);
    const double big_n = dm + dn;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j] == all[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double var = dm * dn / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if (!(var > 0.0)) {
        r.p = 1.0;
        return r;
    }
    const double dev = std::max(0.0, std::abs(r.u - dm * dn / 2.0) - 0.5);
    r.p = normal_two_sided_p(dev / std::sqrt(var));
    return r;
}

const LogisticTerm& LogisticFit::term(const std::string& name) const
{
    for (const auto& t : terms)
        if (t.name == name) return t;
    throw Error("no regression term named '" + name + "'");
}

LogisticFit logistic_fit(const std::vector<std::vector<double>>& design,
                         const std::vector<double>& outcome, const std::vector<std::string>& names)
{
    const auto n = static_cast<Eigen::Index>(design.size());
    const auto p = static_cast<Eigen::Index>(names.size() + 1);
    if (outcome.size() != design.size()) throw Error("design and outcome differ in length");
    if (n == 0) throw Error("logistic regression on an empty sample");

    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = design[static_cast<std::size_t>(i)];
        if (row.size() + 1 != static_cast<std::size_t>(p)) throw Error("design row has the wrong width");
        x(i, 0) = 1.0;
        for (Eigen::Index k = 1; k < p; ++k) x(i, k) = row[static_cast<std::size_t>(k - 1)];
        y(i) = outcome[static_cast<std::size_t>(i)];
        if (y(i) != 0.0 && y(i) != 1.0) throw Error("logistic outcome must be 0 or 1");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) throw Error("logistic design matrix is rank deficient");

    constexpr std::size_t kMaxIter = 100;
    constexpr double kGradTol = 1e-8;
    constexpr double kDivergedEta = 30.0;

    LogisticFit fit;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = x * beta;
    double ll = log_likelihood(eta, y);
    bool converged = false;
    for (; fit.iterations < kMaxIter; ++fit.iterations) {
        const Eigen::VectorXd mu = logistic(eta);
        const Eigen::VectorXd grad = x.transpose() * (y - mu);
        fit.gradient_norm = grad.norm();
        if (fit.gradient_norm <= kGradTol) {
            converged = true;
            break;
        }
        const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
        const Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
        const Eigen::VectorXd step = h.ldlt().solve(grad);
        if (!step.allFinite()) break;
        double s = 1.0;
        while (true) {
            const Eigen::VectorXd trial = beta + s * step;
            const Eigen::VectorXd trial_eta = x * trial;
            const double trial_ll = log_likelihood(trial_eta, y);
            if (trial_ll >= ll - 1e-12 * std::abs(ll) || s < 1e-10) {
                beta = trial;
                eta = trial_eta;
                ll = trial_ll;
                break;
            }
            s *= 0.5;
        }
        if (eta.cwiseAbs().maxCoeff() > kDivergedEta) break;
    }
    fit.log_likelihood = ll;
    fit.separated = !converged || eta.cwiseAbs().maxCoeff() > kDivergedEta;

    const Eigen::VectorXd mu = logistic(eta);
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    const Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
    const Eigen::MatrixXd cov = h.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

    for (Eigen::Index k = 0; k < p; ++k) {
        LogisticTerm t;
        t.name = k == 0 ? "(intercept)" : names[static_cast<std::size_t>(k - 1)];
        t.coef = beta(k);
        t.se = cov(k, k) > 0 ? std::sqrt(cov(k, k)) : std::numeric_limits<double>::infinity();
        t.z = t.coef / t.se;
        t.p = normal_two_sided_p(t.z);
        fit.terms.push_back(t);
    }
    return fit;
}

LogisticFit logistic_fit(const ScoredCohort& cohort, const std::string& metric,
                         const std::vector<std::string>& covariates)
{
    std::vector<std::vector<double>> design;
    std::vector<double> outcome;
    for (const auto& e : cohort.entries) {
        std::vector<double> row{e.score};
        for (const auto& c : covariates) {
            auto it = e.covariates.find(c);
            if (it == e.covariates.end())
                throw Error("subject '" + e.subject_id + "' lacks covariate '" + c + "'");
            row.push_back(it->second);
        }
        design.push_back(std::move(row));
        outcome.push_back(e.label == Group::pd ? 1.0 : 0.0);
    }
    std::vector<std::string> names{metric};
    names.insert(names.end(), covariates.begin(), covariates.end());
    return logistic_fit(design, outcome, names);
}

double mean(std::span<const double> v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v)
{
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

BoxStats box_stats(std::span<const double> values)
{
    BoxStats b;
    b.n = values.size();
    if (values.empty()) return b;
    const auto q = quartiles(values);
    b.q1 = q.q1;
    b.median = q.q2;
    b.q3 = q.q3;
    const double iqr = q.q3 - q.q1;
    const double lo = q.q1 - 1.5 * iqr, hi = q.q3 + 1.5 * iqr;
    b.whisker_low = kInf;
    b.whisker_high = -kInf;
    for (double v : values) {
        if (v < lo || v > hi) {
            b.outliers.push_back(v);
            continue;
        }
        b.whisker_low = std::min(b.whisker_low, v);
        b.whisker_high = std::max(b.whisker_high, v);
    }
    std::sort(b.outliers.begin(), b.outliers.end());
    return b;
}

ScoredCohort cohort_for(const MetricTable& table, const MetricColumn& metric,
                        const std::vector<std::string>* restrict_to)
{
    std::set<std::string> allowed;
    if (restrict_to) allowed.insert(restrict_to->begin(), restrict_to->end());
    ScoredCohort c;
    for (const auto& [id, value] : metric.values) {
        if (restrict_to && !allowed.count(id)) continue;
        auto label = table.labels.find(id);
        if (label == table.labels.end()) continue;
        ScoredEntry e{id, metric.pd_high ? value : -value, label->second, {}};
        if (auto cov = table.covariates.find(id); cov != table.covariates.end()) e.covariates = cov->second;
        c.entries.push_back(std::move(e));
    }
    return c;
}

ComparisonReport compare_metrics(const MetricTable& table, const CompareOptions& options)
{
    if (table.metrics.empty()) throw Error("no metrics to compare");
    ComparisonReport report;
    for (const auto& metric : table.metrics) {
        const auto cohort = cohort_for(table, metric);
        if (cohort.entries.empty()) throw Error("metric '" + metric.name + "' covers no labeled subject");

        MetricSummary s;
        s.name = metric.name;
        s.pd_high = metric.pd_high;
        auto pd = cohort.scores(Group::pd);
        auto control = cohort.scores(Group::control);
        if (!metric.pd_high) {
            for (auto& v : pd) v = -v;
            for (auto& v : control) v = -v;
        }
        s.n_pd = pd.size();
        s.n_control = control.size();
        s.mean_pd = mean(pd);
        s.sd_pd = sample_sd(pd);
        s.mean_control = mean(control);
        s.sd_control = sample_sd(control);
        s.box_pd = box_stats(pd);
        s.box_control = box_stats(control);
        if (!pd.empty() && !control.empty()) {
            s.unadjusted = mann_whitney_u(cohort.scores(Group::pd), cohort.scores(Group::control));
            s.roc = roc_curve(cohort);
            const auto ci = bootstrap_auc_ci(cohort, options.n_boot, options.seed, options.threads);
            s.roc.ci_low = ci.low;
            s.roc.ci_high = ci.high;
        }

        s.adjusted_covariates = options.covariates;
        s.adjusted_covariates.insert(s.adjusted_covariates.end(), metric.extra_covariates.begin(),
                                     metric.extra_covariates.end());
        try {
            const auto fit = logistic_fit(cohort, metric.name, s.adjusted_covariates);
            s.adjusted_p = fit.term(metric.name).p;
            s.adjusted_separated = fit.separated;
        } catch (const Error&) {
            s.adjusted_p.reset();
        }
        report.metrics.push_back(std::move(s));
    }

    for (std::size_t i = 0; i < table.metrics.size(); ++i) {
        for (std::size_t j = i + 1; j < table.metrics.size(); ++j) {
            const auto& a = table.metrics[i];
            const auto& b = table.metrics[j];
            std::vector<std::string> common;
            for (const auto& [id, v] : a.values)
                if (b.values.count(id) && table.labels.count(id)) common.push_back(id);
            if (common.empty())
                throw Error("metrics '" + a.name + "' and '" + b.name + "' share no subjects");
            const auto ca = cohort_for(table, a, &common);
            const auto cb = cohort_for(table, b, &common);
            if (ca.count(Group::pd) == 0 || ca.count(Group::control) == 0) continue;
            report.pairwise.push_back({a.name, b.name, common.size(), delong_test(ca, cb)});
        }
    }
    return report;
}

} // namespace nqi
