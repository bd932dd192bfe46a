#include "nqi/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>

#include "nqi/error.hpp"
#include "nqi/evalstats.hpp"
#include "nqi/parallel.hpp"
#include "nqi/text.hpp"

namespace nqi {

namespace {

const std::vector<std::string> kWindowScoreHeader = {"subject_id", "session_id", "window_index", "nqi"};
const std::vector<std::string> kSubjectScoreHeader = {"subject_id", "nqi"};

SvrProblem to_problem(const TrainingCorpus& corpus, const EnsembleModel& model)
{
    SvrProblem p;
    p.C = model.C;
    p.epsilon = model.epsilon;
    p.inputs.reserve(corpus.rows.size());
    p.targets.reserve(corpus.rows.size());
    for (const auto& r : corpus.rows) {
        p.inputs.push_back(model.transform(r.x));
        p.targets.push_back(r.target);
    }
    return p;
}

FoldResult run_fold(const LabeledFeatures& train, const LabeledFeatures& test,
                    const EnsembleParams& params, double normalization_constant)
{
    FoldResult fold;
    const auto corpus = build_corpus(train, normalization_constant);
    const std::string tag =
        train.subjects.empty() ? std::string() : std::string(to_string(train.subjects.begin()->second.dataset));
    fold.model = train_ensemble(corpus, params, tag);
    fold.train_dataset = tag;
    fold.test_dataset =
        test.subjects.empty() ? std::string() : std::string(to_string(test.subjects.begin()->second.dataset));
    fold.window_scores = score_windows(fold.model, test.windows, params.threads);
    fold.subject_scores = rollup_subjects(fold.window_scores);
    for (const auto& s : fold.subject_scores) {
        if (test.subjects.at(s.subject_id).group == Group::pd)
            ++fold.n_pd;
        else
            ++fold.n_control;
    }
    fold.auc = subject_auc(fold.subject_scores, test.subjects);
    return fold;
}

} // namespace

void LabeledFeatures::validate() const
{
    for (const auto& w : windows)
        if (!subjects.count(w.subject_id))
            throw Error("feature row refers to unknown subject '" + w.subject_id + "'");
}

std::vector<std::string> LabeledFeatures::subject_ids() const
{
    std::vector<std::string> ids;
    for (const auto& [id, rec] : subjects) ids.push_back(id);
    return ids;
}

LabeledFeatures LabeledFeatures::restricted_to(const std::vector<std::string>& subject_ids) const
{
    std::set<std::string> keep(subject_ids.begin(), subject_ids.end());
    LabeledFeatures out;
    for (const auto& [id, rec] : subjects)
        if (keep.count(id)) out.subjects.emplace(id, rec);
    for (const auto& w : windows)
        if (keep.count(w.subject_id)) out.windows.push_back(w);
    return out;
}

LabeledFeatures featurize_dataset(const CohortDataset& dataset, const WindowParams& params)
{
    LabeledFeatures out;
    out.subjects = dataset.subjects();
    out.windows = featurize_sessions(dataset.sessions(), params);
    return out;
}

TrainingCorpus build_corpus(const LabeledFeatures& data, double normalization_constant)
{
    if (!(normalization_constant > 0.0)) throw Error("normalization constant must be positive");
    TrainingCorpus corpus;
    corpus.normalization_constant = normalization_constant;
    for (const auto& w : data.windows) {
        auto it = data.subjects.find(w.subject_id);
        if (it == data.subjects.end())
            throw Error("feature row refers to unknown subject '" + w.subject_id + "'");
        const double target = static_cast<double>(it->second.updrs3) / normalization_constant;
        if (target < 0.0 || target > 1.0)
            throw Error("normalized target of '" + w.subject_id + "' outside [0, 1]");
        corpus.rows.push_back({w.x, target, w.subject_id});
    }
    return corpus;
}

TrainingCorpus bootstrap_sample(const TrainingCorpus& corpus, std::uint64_t seed)
{
    if (corpus.rows.empty()) throw Error("cannot bootstrap an empty corpus");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.rows.size() - 1);
    TrainingCorpus out;
    out.normalization_constant = corpus.normalization_constant;
    out.rows.reserve(corpus.rows.size());
    for (std::size_t i = 0; i < corpus.rows.size(); ++i) out.rows.push_back(corpus.rows[pick(rng)]);
    return out;
}

TrainingCorpus bootstrap_subjects(const TrainingCorpus& corpus, std::uint64_t seed)
{
    if (corpus.rows.empty()) throw Error("cannot bootstrap an empty corpus");
    std::map<std::string, std::vector<std::size_t>> by_subject;
    for (std::size_t i = 0; i < corpus.rows.size(); ++i) by_subject[corpus.rows[i].subject_id].push_back(i);
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [id, rows] : by_subject) groups.push_back(&rows);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, groups.size() - 1);
    TrainingCorpus out;
    out.normalization_constant = corpus.normalization_constant;
    for (std::size_t k = 0; k < groups.size(); ++k)
        for (auto i : *groups[pick(rng)]) out.rows.push_back(corpus.rows[i]);
    return out;
}

EnsembleModel train_ensemble(const TrainingCorpus& corpus, const EnsembleParams& params,
                             const std::string& provenance_tag)
{
    if (corpus.rows.size() < 2) throw Error("ensemble training needs at least two rows");
    if (params.n_models == 0) throw Error("ensemble needs at least one unit");

    EnsembleModel model;
    model.C = params.C;
    model.epsilon = params.epsilon;
    model.n_models = params.n_models;
    model.master_seed = params.master_seed;
    model.normalization_constant = corpus.normalization_constant;
    model.provenance.dataset = provenance_tag;
    std::set<std::string> subjects;
    for (const auto& r : corpus.rows) subjects.insert(r.subject_id);
    model.provenance.training_subjects.assign(subjects.begin(), subjects.end());

    if (params.standardize) {
        model.standardized = true;
        const auto n = static_cast<double>(corpus.rows.size());
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            double sum = 0.0;
            for (const auto& r : corpus.rows) sum += r.x.as_array()[d];
            const double mu = sum / n;
            double ss = 0.0;
            for (const auto& r : corpus.rows) ss += (r.x.as_array()[d] - mu) * (r.x.as_array()[d] - mu);
            const double sd = std::sqrt(ss / (n - 1.0));
            model.feature_mean[d] = mu;
            model.feature_scale[d] = sd > 0.0 ? sd : 1.0;
        }
    }

    model.units.resize(params.n_models);
    parallel_for(params.n_models, params.threads, [&](std::size_t m) {
        const auto seed = derive_seed(params.master_seed, m);
        const auto sample = params.unit == BootstrapUnit::window ? bootstrap_sample(corpus, seed)
                                                                 : bootstrap_subjects(corpus, seed);
        try {
            model.units[m] = train_svr(to_problem(sample, model), params.svr);
        } catch (const ConvergenceError& e) {
            throw Error("ensemble unit " + std::to_string(m) + " failed: " + e.what());
        }
    });
    return model;
}

double median(std::vector<double> values)
{
    if (values.empty()) throw Error("median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Vec7 EnsembleModel::transform(const FeatureVector& x) const
{
    auto v = x.as_array();
    if (standardized)
        for (std::size_t d = 0; d < kFeatureDim; ++d) v[d] = (v[d] - feature_mean[d]) / feature_scale[d];
    return v;
}

double window_nqi(const EnsembleModel& model, const FeatureVector& x)
{
    if (model.units.empty()) throw Error("ensemble has no units");
    const auto v = model.transform(x);
    std::vector<double> preds;
    preds.reserve(model.units.size());
    for (const auto& u : model.units) preds.push_back(predict(u, v));
    return median(std::move(preds));
}

std::vector<NqiScore> score_windows(const EnsembleModel& model, const std::vector<WindowFeatures>& windows,
                                    std::size_t threads)
{
    std::vector<NqiScore> out(windows.size());
    parallel_for(windows.size(), threads, [&](std::size_t i) {
        const auto& w = windows[i];
        out[i] = {w.subject_id, w.session_id, w.window_index, window_nqi(model, w.x)};
    });
    return out;
}

std::vector<NqiScore> rollup_subjects(const std::vector<NqiScore>& window_scores)
{
    // subject -> session -> (sum, count)
    std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
    for (const auto& s : window_scores) {
        auto& cell = acc[s.subject_id][s.session_id.value_or("")];
        cell.first += s.value;
        ++cell.second;
    }
    std::vector<NqiScore> out;
    for (const auto& [subject, sessions] : acc) {
        double sum = 0.0;
        for (const auto& [session, cell] : sessions) sum += cell.first / static_cast<double>(cell.second);
        out.push_back({subject, std::nullopt, std::nullopt, sum / static_cast<double>(sessions.size())});
    }
    return out;
}

NqiScore subject_nqi(const EnsembleModel& model, const CohortDataset& dataset, const std::string& subject_id,
                     const WindowParams& params)
{
    dataset.subject(subject_id);
    std::vector<TypingSession> sessions;
    for (const auto* s : dataset.sessions_of(subject_id)) sessions.push_back(*s);
    const auto windows = featurize_sessions(sessions, params);
    if (windows.empty())
        throw InsufficientDataError("subject '" + subject_id + "' has no window with at least " +
                                    std::to_string(params.min_keys) + " hold times");
    return rollup_subjects(score_windows(model, windows)).front();
}

double subject_auc(const std::vector<NqiScore>& subject_scores,
                   const std::map<std::string, SubjectRecord>& subjects)
{
    ScoredCohort cohort;
    for (const auto& s : subject_scores) {
        auto it = subjects.find(s.subject_id);
        if (it == subjects.end()) throw Error("score for unknown subject '" + s.subject_id + "'");
        cohort.entries.push_back({s.subject_id, s.value, it->second.group, {}});
    }
    return roc_curve(cohort).auc;
}

CrossValResult cross_validate(const LabeledFeatures& denovo, const LabeledFeatures& earlypd,
                              const EnsembleParams& params, double normalization_constant)
{
    denovo.validate();
    earlypd.validate();
    if (denovo.subjects.empty() || earlypd.subjects.empty())
        throw Error("cross-validation needs two non-empty datasets");
    for (const auto& [id, rec] : denovo.subjects)
        if (earlypd.subjects.count(id))
            throw Error("subject '" + id + "' appears in both folds; held-out scores would leak");

    CrossValResult r;
    r.fold_a = run_fold(denovo, earlypd, params, normalization_constant);
    r.fold_b = run_fold(earlypd, denovo, params, normalization_constant);

    std::map<std::string, SubjectRecord> all = denovo.subjects;
    all.insert(earlypd.subjects.begin(), earlypd.subjects.end());
    r.combined_subject_scores = r.fold_a.subject_scores;
    r.combined_subject_scores.insert(r.combined_subject_scores.end(), r.fold_b.subject_scores.begin(),
                                     r.fold_b.subject_scores.end());
    r.combined_window_scores = r.fold_a.window_scores;
    r.combined_window_scores.insert(r.combined_window_scores.end(), r.fold_b.window_scores.begin(),
                                    r.fold_b.window_scores.end());
    r.n_pd = r.fold_a.n_pd + r.fold_b.n_pd;
    r.n_control = r.fold_a.n_control + r.fold_b.n_control;
    r.combined_auc = subject_auc(r.combined_subject_scores, all);
    return r;
}

GridSearchResult grid_search_params(const LabeledFeatures& paramest, std::vector<double> c_grid,
                                    std::vector<double> eps_grid, const EnsembleParams& base,
                                    double normalization_constant)
{
    paramest.validate();
    if (c_grid.empty() || eps_grid.empty()) throw Error("grid search needs non-empty C and epsilon grids");
    for (double c : c_grid)
        if (!(c > 0.0)) throw Error("grid C values must be positive");
    for (double e : eps_grid)
        if (!(e > 0.0)) throw Error("grid epsilon values must be positive");
    std::sort(c_grid.begin(), c_grid.end());
    c_grid.erase(std::unique(c_grid.begin(), c_grid.end()), c_grid.end());
    std::sort(eps_grid.begin(), eps_grid.end());
    eps_grid.erase(std::unique(eps_grid.begin(), eps_grid.end()), eps_grid.end());

    std::size_t n_pd = 0, n_control = 0;
    for (const auto& [id, rec] : paramest.subjects) (rec.group == Group::pd ? n_pd : n_control)++;
    if (n_pd < 2 || n_control < 2)
        throw Error("grid search needs at least two subjects per group");

    const auto ids = paramest.subject_ids();
    GridSearchResult result;
    bool have_best = false;
    for (double c : c_grid) {
        for (double eps : eps_grid) {
            auto params = base;
            params.C = c;
            params.epsilon = eps;
            std::vector<NqiScore> held_out;
            for (const auto& left_out : ids) {
                std::vector<std::string> rest;
                for (const auto& id : ids)
                    if (id != left_out) rest.push_back(id);
                const auto train = paramest.restricted_to(rest);
                const auto test = paramest.restricted_to({left_out});
                if (test.windows.empty()) continue;
                const auto corpus = build_corpus(train, normalization_constant);
                const auto model = train_ensemble(corpus, params, "paramest");
                const auto scores = rollup_subjects(score_windows(model, test.windows, params.threads));
                held_out.insert(held_out.end(), scores.begin(), scores.end());
            }
            const double auc = subject_auc(held_out, paramest.subjects);
            result.table.push_back({c, eps, auc});
            if (!have_best || auc > result.loo_auc) {
                result.C = c;
                result.epsilon = eps;
                result.loo_auc = auc;
                have_best = true;
            }
        }
    }
    return result;
}

void save_model(std::ostream& out, const EnsembleModel& model)
{
    nlohmann::ordered_json j;
    j["format"] = "nqi-ensemble";
    j["version"] = kModelFormatVersion;
    j["C"] = model.C;
    j["epsilon"] = model.epsilon;
    j["n_models"] = model.n_models;
    j["master_seed"] = model.master_seed;
    j["normalization_constant"] = model.normalization_constant;
    j["provenance"] = {{"dataset", model.provenance.dataset},
                       {"training_subjects", model.provenance.training_subjects}};
    if (model.standardized)
        j["standardization"] = {{"mean", model.feature_mean}, {"scale", model.feature_scale}};
    auto units = nlohmann::ordered_json::array();
    for (const auto& u : model.units) {
        nlohmann::ordered_json ju;
        ju["w"] = u.w;
        ju["b"] = u.b;
        ju["objective"] = u.objective;
        ju["kkt_residual"] = u.kkt_residual;
        units.push_back(std::move(ju));
    }
    j["units"] = std::move(units);
    out << j.dump(1) << '\n';
}

EnsembleModel load_model(std::istream& in)
{
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what(), 0);
    }
    try {
        if (j.at("format").get<std::string>() != "nqi-ensemble") throw Error("not an nqi ensemble model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw Error("unsupported model format version " + std::to_string(version));
        EnsembleModel m;
        m.C = j.at("C").get<double>();
        m.epsilon = j.at("epsilon").get<double>();
        m.n_models = j.at("n_models").get<std::size_t>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.normalization_constant = j.at("normalization_constant").get<double>();
        m.provenance.dataset = j.at("provenance").at("dataset").get<std::string>();
        m.provenance.training_subjects =
            j.at("provenance").at("training_subjects").get<std::vector<std::string>>();
        if (j.contains("standardization")) {
            m.standardized = true;
            m.feature_mean = j["standardization"].at("mean").get<Vec7>();
            m.feature_scale = j["standardization"].at("scale").get<Vec7>();
        }
        for (const auto& ju : j.at("units")) {
            SvrModel u;
            u.w = ju.at("w").get<Vec7>();
            u.b = ju.at("b").get<double>();
            u.objective = ju.value("objective", 0.0);
            u.kkt_residual = ju.value("kkt_residual", 0.0);
            m.units.push_back(u);
        }
        if (m.units.size() != m.n_models)
            throw Error("model file lists " + std::to_string(m.units.size()) + " units but n_models = " +
                        std::to_string(m.n_models));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model file: ") + e.what(), 0);
    }
}

void write_window_scores(std::ostream& out, const std::vector<NqiScore>& scores)
{
    out << "subject_id,session_id,window_index,nqi\n";
    for (const auto& s : scores) {
        out << s.subject_id << ',' << s.session_id.value_or("") << ',';
        if (s.window_index) out << *s.window_index;
        out << ',' << text::format_double(s.value) << '\n';
    }
}

void write_subject_scores(std::ostream& out, const std::vector<NqiScore>& scores)
{
    out << "subject_id,nqi\n";
    for (const auto& s : scores) out << s.subject_id << ',' << text::format_double(s.value) << '\n';
}

std::vector<NqiScore> read_window_scores(std::istream& in)
{
    std::vector<NqiScore> out;
    text::CsvReader reader(in, kWindowScoreHeader);
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        NqiScore s;
        s.subject_id = std::string(f[0]);
        if (!f[1].empty()) s.session_id = std::string(f[1]);
        if (!f[2].empty()) s.window_index = static_cast<std::size_t>(text::parse_int(f[2], reader.line()));
        s.value = text::parse_double(f[3], reader.line());
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<NqiScore> read_subject_scores(std::istream& in)
{
    std::vector<NqiScore> out;
    text::CsvReader reader(in, kSubjectScoreHeader);
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        NqiScore s;
        s.subject_id = std::string(f[0]);
        s.value = text::parse_double(f[1], reader.line());
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace nqi
