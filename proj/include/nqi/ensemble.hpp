#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nqi/featurize.hpp"
#include "nqi/keystroke.hpp"
#include "nqi/svr.hpp"

namespace nqi {

constexpr double kDefaultC = 0.094;
constexpr double kDefaultEpsilon = 0.052;
constexpr std::size_t kDefaultModels = 200;
constexpr double kDefaultNormalization = 108.0;

struct TrainingRow
{
    FeatureVector x;
    double target = 0.0;  // UPDRS-III / normalization constant
    std::string subject_id;
};

struct TrainingCorpus
{
    std::vector<TrainingRow> rows;
    double normalization_constant = kDefaultNormalization;
};

// Window features with the subject metadata needed to label and train on them.
struct LabeledFeatures
{
    std::map<std::string, SubjectRecord> subjects;
    std::vector<WindowFeatures> windows;  // (subject, session, window_index) order

    // Throws Error when a window refers to an unknown subject.
    void validate() const;
    std::vector<std::string> subject_ids() const;
    LabeledFeatures restricted_to(const std::vector<std::string>& subject_ids) const;
};

LabeledFeatures featurize_dataset(const CohortDataset& dataset, const WindowParams& params = {});

/// One row per window; target is the subject's UPDRS-III divided by the
/// normalization constant. Throws Error for windows of unknown subjects.
TrainingCorpus build_corpus(const LabeledFeatures& data,
                            double normalization_constant = kDefaultNormalization);

enum class BootstrapUnit { window, subject };

/// l rows drawn uniformly with replacement from a generator seeded by `seed`.
TrainingCorpus bootstrap_sample(const TrainingCorpus& corpus, std::uint64_t seed);

/// Draws subjects with replacement and keeps all rows of each draw.
TrainingCorpus bootstrap_subjects(const TrainingCorpus& corpus, std::uint64_t seed);

struct EnsembleParams
{
    double C = kDefaultC;
    double epsilon = kDefaultEpsilon;
    std::size_t n_models = kDefaultModels;
    std::uint64_t master_seed = 0;
    BootstrapUnit unit = BootstrapUnit::window;
    SvrOptions svr;
    std::size_t threads = 1;
    // Z-score features with the training corpus mean and sd before fitting.
    bool standardize = false;
};

struct Provenance
{
    std::string dataset;
    std::vector<std::string> training_subjects;  // sorted

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct EnsembleModel
{
    std::vector<SvrModel> units;
    double C = kDefaultC;
    double epsilon = kDefaultEpsilon;
    std::size_t n_models = 0;
    std::uint64_t master_seed = 0;
    double normalization_constant = kDefaultNormalization;
    Provenance provenance;
    bool standardized = false;
    Vec7 feature_mean{};
    Vec7 feature_scale{1, 1, 1, 1, 1, 1, 1};

    // Input as the units see it.
    Vec7 transform(const FeatureVector& x) const;
};

/// Seed of unit m: derive_seed(master_seed, m). Units are trained in parallel
/// but the result never depends on the thread count. Throws Error naming the
/// first unit that fails to converge.
EnsembleModel train_ensemble(const TrainingCorpus& corpus, const EnsembleParams& params,
                             const std::string& provenance_tag = {});

/// Median of the per-unit predictions; mean of the two middle values for an
/// even count.
double window_nqi(const EnsembleModel& model, const FeatureVector& x);

double median(std::vector<double> values);

struct NqiScore
{
    std::string subject_id;
    std::optional<std::string> session_id;
    std::optional<std::size_t> window_index;
    double value = 0.0;
};

std::vector<NqiScore> score_windows(const EnsembleModel& model, const std::vector<WindowFeatures>& windows,
                                    std::size_t threads = 1);

/// Session score = mean of its windows, subject score = mean of its sessions.
/// Subjects with no window scores are absent from the output.
std::vector<NqiScore> rollup_subjects(const std::vector<NqiScore>& window_scores);

/// Throws InsufficientDataError when no window of the subject survives the
/// minimum-key filter.
NqiScore subject_nqi(const EnsembleModel& model, const CohortDataset& dataset,
                     const std::string& subject_id, const WindowParams& params = {});

struct FoldResult
{
    std::string train_dataset;
    std::string test_dataset;
    EnsembleModel model;
    std::vector<NqiScore> window_scores;
    std::vector<NqiScore> subject_scores;
    std::size_t n_pd = 0, n_control = 0;
    double auc = 0.5;
};

struct CrossValResult
{
    FoldResult fold_a;  // train de-novo, score early-PD
    FoldResult fold_b;  // train early-PD, score de-novo
    std::vector<NqiScore> combined_subject_scores;
    std::vector<NqiScore> combined_window_scores;
    std::size_t n_pd = 0, n_control = 0;
    double combined_auc = 0.5;
};

/// Two-fold cross-dataset validation. The combined scores are the held-out
/// scores of both folds concatenated. Throws Error if a subject id appears in
/// both datasets.
CrossValResult cross_validate(const LabeledFeatures& denovo, const LabeledFeatures& earlypd,
                              const EnsembleParams& params,
                              double normalization_constant = kDefaultNormalization);

struct GridPoint
{
    double C;
    double epsilon;
    double loo_auc;
};

struct GridSearchResult
{
    double C = kDefaultC;
    double epsilon = kDefaultEpsilon;
    double loo_auc = 0.5;
    std::vector<GridPoint> table;  // C ascending, then epsilon ascending
};

/// Leave-one-subject-out AUC at every grid point; best AUC wins, ties go to
/// smaller C and then smaller epsilon.
GridSearchResult grid_search_params(const LabeledFeatures& paramest, std::vector<double> c_grid,
                                    std::vector<double> eps_grid, const EnsembleParams& base,
                                    double normalization_constant = kDefaultNormalization);

/// Subject-level AUC of the given subject scores against the labels in `subjects`.
double subject_auc(const std::vector<NqiScore>& subject_scores,
                   const std::map<std::string, SubjectRecord>& subjects);

constexpr int kModelFormatVersion = 1;

void save_model(std::ostream& out, const EnsembleModel& model);
EnsembleModel load_model(std::istream& in);

void write_window_scores(std::ostream& out, const std::vector<NqiScore>& scores);
void write_subject_scores(std::ostream& out, const std::vector<NqiScore>& scores);
std::vector<NqiScore> read_window_scores(std::istream& in);
std::vector<NqiScore> read_subject_scores(std::istream& in);

} // namespace nqi
