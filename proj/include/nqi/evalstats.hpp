#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nqi/keystroke.hpp"

namespace nqi {

// ---------------------------------------------------------------------------
// Scored cohorts and ROC analysis. Orientation throughout: PD = high score,
// a subject is called positive when score > threshold.
// ---------------------------------------------------------------------------

struct ScoredEntry
{
    std::string subject_id;
    double score = 0.0;
    Group label = Group::control;
    std::map<std::string, double> covariates;
};

struct ScoredCohort
{
    std::vector<ScoredEntry> entries;
    // One entry per window instead of per subject; repeated ids are allowed.
    bool per_window = false;

    std::size_t count(Group g) const;
    std::vector<double> scores(Group g) const;

    // Throws Error unless both labels are present (and ids are unique in
    // subject-level mode).
    void require_both_labels() const;
};

struct RocPoint
{
    double threshold;
    double sensitivity;
    double specificity;
};

struct RocCurve
{
    std::vector<RocPoint> points;  // thresholds ascending, -inf first, +inf last
    double auc = 0.5;
    double ci_low = 0.0;
    double ci_high = 1.0;
};

/// -inf, midpoints between adjacent distinct sorted scores, +inf.
std::vector<double> candidate_thresholds(std::vector<double> scores);

/// ROC points at every candidate threshold and the trapezoidal AUC. Ties
/// between a PD and a control score count one half. ci_low/ci_high are left
/// at [0, 1]; fill them with bootstrap_auc_ci.
RocCurve roc_curve(const ScoredCohort& cohort);

struct AucInterval
{
    double low;
    double high;
};

/// Percentile interval from stratified resampling within each label.
AucInterval bootstrap_auc_ci(const ScoredCohort& cohort, std::size_t n_boot = 2000,
                             std::uint64_t seed = 0, std::size_t threads = 1);

struct RocBandPoint
{
    double fpr;
    double sensitivity;  // of the full cohort, linear between ROC points
    double low;
    double high;
};

/// Pointwise 95% percentile band for sensitivity on an even grid of
/// false-positive rates in [0, 1], from stratified resamples.
std::vector<RocBandPoint> roc_band(const ScoredCohort& cohort, std::size_t n_boot = 2000,
                                   std::uint64_t seed = 0, std::size_t threads = 1, std::size_t grid = 101);

struct DelongResult
{
    double auc_a = 0.5;
    double auc_b = 0.5;
    double z = 0.0;
    double p = 1.0;
};

/// DeLong's test for two correlated AUCs measured on the same subjects.
/// Entries are matched by subject_id; labels must agree.
DelongResult delong_test(const ScoredCohort& a, const ScoredCohort& b);

struct CutPoint
{
    double cost_fn = 1.0;
    double cost_fp = 1.0;
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
};

/// Maximizes Se + r Sp over candidate thresholds with
/// r = cost_fp (1 - p) / (cost_fn p), p the PD prevalence (empirical unless
/// overridden). Ties go to the threshold with higher specificity.
CutPoint youden_cutpoint(const ScoredCohort& cohort, double cost_fn, double cost_fp,
                         std::optional<double> prevalence = std::nullopt);

// ---------------------------------------------------------------------------
// Group tests
// ---------------------------------------------------------------------------

struct MannWhitneyResult
{
    double u = 0.0;  // pairs with a > b plus half the ties
    double p = 1.0;  // two-sided
    bool exact = false;
};

/// Exact null distribution when the combined size is at most 12 and there are
/// no ties, otherwise the normal approximation with tie and continuity
/// correction.
MannWhitneyResult mann_whitney_u(std::span<const double> group_a, std::span<const double> group_b);

constexpr std::size_t kMannWhitneyExactMax = 12;

double normal_two_sided_p(double z);

struct LogisticTerm
{
    std::string name;
    double coef = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 1.0;
};

struct LogisticFit
{
    std::vector<LogisticTerm> terms;  // intercept first
    double log_likelihood = 0.0;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool separated = false;  // coefficients diverging; Wald values are unreliable

    const LogisticTerm& term(const std::string& name) const;
};

/// Maximum-likelihood logistic regression by IRLS. `design` holds one row per
/// observation without the intercept column; `names` labels its columns.
/// Throws Error when the design (with intercept) is rank deficient.
LogisticFit logistic_fit(const std::vector<std::vector<double>>& design,
                         const std::vector<double>& outcome, const std::vector<std::string>& names);

/// Regresses the pd label (pd = 1) on the score (named `metric`) and the listed
/// covariates from each entry.
LogisticFit logistic_fit(const ScoredCohort& cohort, const std::string& metric,
                         const std::vector<std::string>& covariates);

// ---------------------------------------------------------------------------
// Metric comparison
// ---------------------------------------------------------------------------

struct BoxStats
{
    std::size_t n = 0;
    double q1 = 0.0, median = 0.0, q3 = 0.0;
    double whisker_low = 0.0, whisker_high = 0.0;  // extreme values within 1.5 IQR of the box
    std::vector<double> outliers;
};

BoxStats box_stats(std::span<const double> values);

double mean(std::span<const double> v);
double sample_sd(std::span<const double> v);

struct MetricColumn
{
    std::string name;
    std::map<std::string, double> values;  // by subject id; absent = not measured
    // covariates appended to the base set only for this metric
    std::vector<std::string> extra_covariates;
    // False for metrics where PD subjects score lower (tapping counts); ROC,
    // DeLong and cut-points then run on the negated values.
    bool pd_high = true;
};

struct MetricTable
{
    std::map<std::string, Group> labels;
    std::map<std::string, std::map<std::string, double>> covariates;
    std::vector<MetricColumn> metrics;
};

struct CompareOptions
{
    std::vector<std::string> covariates = {"sex", "age", "education_years"};
    std::size_t n_boot = 2000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct MetricSummary
{
    std::string name;
    bool pd_high = true;  // roc thresholds are on the negated scale otherwise
    std::size_t n_pd = 0, n_control = 0;
    double mean_pd = 0.0, sd_pd = 0.0, mean_control = 0.0, sd_control = 0.0;
    MannWhitneyResult unadjusted;
    std::optional<double> adjusted_p;  // empty when the regression could not be fit
    bool adjusted_separated = false;
    std::vector<std::string> adjusted_covariates;
    RocCurve roc;
    BoxStats box_pd, box_control;
};

struct PairwiseDelong
{
    std::string metric_a, metric_b;
    std::size_t n_subjects = 0;
    DelongResult result;
};

struct ComparisonReport
{
    std::vector<MetricSummary> metrics;
    std::vector<PairwiseDelong> pairwise;
};

/// Scores are negated when the metric has pd_high = false.
ScoredCohort cohort_for(const MetricTable& table, const MetricColumn& metric,
                        const std::vector<std::string>* restrict_to = nullptr);

/// Group statistics, adjusted significance, ROC with CI per metric, and
/// DeLong tests for every metric pair on the subjects both metrics cover.
ComparisonReport compare_metrics(const MetricTable& table, const CompareOptions& options = {});

} // namespace nqi
