#include "nqi/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nqi/error.hpp"
#include "nqi/evalstats.hpp"
#include "nqi/text.hpp"

namespace nqi {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits)
{
    if (std::isnan(v)) return "n/a";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pvalue(double p)
{
    if (p < 0.001) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2e", p);
        return buf;
    }
    return fixed(p, 3);
}

std::string pad(std::string s, std::size_t width)
{
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string lpad(std::string s, std::size_t width)
{
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
}

// JSON numbers cannot hold infinities; thresholds use strings for those.
ojson json_number(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return nullptr;
    return v;
}

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return in;
}

std::vector<WindowFeatures> load_features(const fs::path& path)
{
    auto in = open_input(path);
    return read_features(in);
}

std::map<std::string, SubjectRecord> load_subjects(const fs::path& path)
{
    std::map<std::string, SubjectRecord> out;
    for (auto& s : read_subjects(path)) out.emplace(s.subject_id, std::move(s));
    return out;
}

LabeledFeatures load_labeled(const fs::path& features, const fs::path& metadata, std::ostream& diag)
{
    const auto subjects = load_subjects(metadata);
    LabeledFeatures data;
    data.windows = load_features(features);
    for (const auto& w : data.windows) {
        auto it = subjects.find(w.subject_id);
        if (it == subjects.end())
            throw Error("'" + features.string() + "' refers to subject '" + w.subject_id +
                        "' missing from '" + metadata.string() + "'");
        data.subjects.emplace(it->first, it->second);
    }
    if (data.windows.empty()) diag << "warning: '" << features.string() << "' has no feature rows\n";
    return data;
}

std::string dataset_tag(const LabeledFeatures& data)
{
    std::set<std::string_view> tags;
    for (const auto& [id, rec] : data.subjects) tags.insert(to_string(rec.dataset));
    if (tags.size() == 1) return std::string(*tags.begin());
    return tags.empty() ? std::string() : std::string("mixed");
}

void save_text(const fs::path& path, const std::string& content)
{
    write_file_atomic(path, [&](std::ostream& out) { out << content; });
}

std::string config_comment(const RunConfig& config)
{
    return "# config: " + config.to_json(false) + "\n";
}

ojson config_object(const RunConfig& config) { return ojson::parse(config.to_json(false)); }

std::string metric_file_stem(const std::string& name)
{
    std::string s;
    for (char c : name) s.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return s;
}

std::string roc_csv(const RocCurve& roc, bool pd_high)
{
    std::ostringstream out;
    out << "threshold,sensitivity,specificity\n";
    std::vector<RocPoint> points = roc.points;
    if (!pd_high) {
        // back to the metric's own scale: PD called when value < threshold
        for (auto& p : points) p.threshold = -p.threshold;
        std::reverse(points.begin(), points.end());
    }
    for (const auto& p : points)
        out << text::format_double(p.threshold) << ',' << text::format_double(p.sensitivity) << ','
            << text::format_double(p.specificity) << '\n';
    return out.str();
}

std::string band_csv(const std::vector<RocBandPoint>& band)
{
    std::ostringstream out;
    out << "fpr,sensitivity,sensitivity_low,sensitivity_high\n";
    for (const auto& b : band)
        out << text::format_double(b.fpr) << ',' << text::format_double(b.sensitivity) << ','
            << text::format_double(b.low) << ',' << text::format_double(b.high) << '\n';
    return out.str();
}

void box_row(std::ostream& out, std::string_view group, const BoxStats& b)
{
    out << group << ',' << b.n << ',' << text::format_double(b.q1) << ',' << text::format_double(b.median) << ','
        << text::format_double(b.q3) << ',' << text::format_double(b.whisker_low) << ','
        << text::format_double(b.whisker_high) << ',';
    for (std::size_t i = 0; i < b.outliers.size(); ++i) {
        if (i) out << ';';
        out << text::format_double(b.outliers[i]);
    }
    out << '\n';
}

std::string box_csv(const BoxStats& pd, const BoxStats& control)
{
    std::ostringstream out;
    out << "group,n,q1,median,q3,whisker_low,whisker_high,outliers\n";
    box_row(out, "pd", pd);
    box_row(out, "control", control);
    return out.str();
}

ojson box_json(const BoxStats& b)
{
    return {{"n", b.n},
            {"q1", json_number(b.q1)},
            {"median", json_number(b.median)},
            {"q3", json_number(b.q3)},
            {"whisker_low", json_number(b.whisker_low)},
            {"whisker_high", json_number(b.whisker_high)},
            {"outliers", b.outliers}};
}

ojson cutpoint_json(const CutPoint& c)
{
    return {{"cost", to_string(CostRatio{c.cost_fn, c.cost_fp})},
            {"threshold", json_number(c.threshold)},
            {"sensitivity", c.sensitivity},
            {"specificity", c.specificity},
            {"accuracy", c.accuracy},
            {"tp", c.tp},
            {"fn", c.fn},
            {"tn", c.tn},
            {"fp", c.fp}};
}

void cutpoint_table(std::ostream& out, const std::vector<CutPoint>& cuts)
{
    out << "Misclassification cost (FN/FP)  Cut-off     Se     Sp    Acc   TP   FN   TN   FP\n";
    for (const auto& c : cuts) {
        out << pad(to_string(CostRatio{c.cost_fn, c.cost_fp}), 32) << lpad(fixed(c.threshold, 4), 7)
            << lpad(fixed(c.sensitivity, 2), 7) << lpad(fixed(c.specificity, 2), 7)
            << lpad(fixed(c.accuracy, 2), 7) << lpad(std::to_string(c.tp), 5) << lpad(std::to_string(c.fn), 5)
            << lpad(std::to_string(c.tn), 5) << lpad(std::to_string(c.fp), 5) << '\n';
    }
}

std::string auc_with_ci(double auc, double lo, double hi)
{
    return fixed(auc, 3) + " (" + fixed(lo, 3) + "-" + fixed(hi, 3) + ")";
}

std::map<std::string, double> typing_speeds(const fs::path& log, const ValidationPolicy& policy,
                                            std::ostream& diag)
{
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& s : ingest_log(log, policy)) {
        try {
            auto& cell = acc[s.subject_id];
            cell.first += typing_speed(s);
            ++cell.second;
        } catch (const InsufficientDataError&) {
            diag << "warning: " << s.subject_id << '/' << s.session_id << ": too few keys for a typing speed\n";
        }
    }
    std::map<std::string, double> out;
    for (const auto& [id, cell] : acc)
        if (cell.second) out[id] = cell.first / static_cast<double>(cell.second);
    return out;
}

bool is_window_score_file(const fs::path& path)
{
    auto in = open_input(path);
    std::string header;
    std::getline(in, header);
    return text::split_fields(header).size() == 4;
}

std::vector<NqiScore> load_window_scores(const fs::path& path)
{
    auto in = open_input(path);
    return read_window_scores(in);
}

std::vector<NqiScore> load_subject_scores(const fs::path& path)
{
    auto in = open_input(path);
    return read_subject_scores(in);
}

double require_positive(double v, const char* name)
{
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string(name) + " must be positive");
    return v;
}

std::array<double, 2> json_range(const ojson& j)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw Error("ranges are [low, high] pairs");
    return {v[0], v[1]};
}

} // namespace

CostRatio parse_cost_ratio(std::string_view s)
{
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) throw Error("cost ratio '" + std::string(s) + "' is not of the form FN/FP");
    CostRatio c;
    try {
        c.fn = text::parse_double(text::trim(s.substr(0, slash)), 0);
        c.fp = text::parse_double(text::trim(s.substr(slash + 1)), 0);
    } catch (const ParseError&) {
        throw Error("cost ratio '" + std::string(s) + "' is not of the form FN/FP");
    }
    if (!(c.fn > 0.0) || !(c.fp > 0.0)) throw Error("cost ratio '" + std::string(s) + "' needs positive costs");
    return c;
}

std::string to_string(const CostRatio& c) { return text::format_double(c.fn) + "/" + text::format_double(c.fp); }

void RunConfig::validate() const
{
    require_positive(window_s, "window_s");
    if (min_keys < 1) throw Error("min_keys must be at least 1");
    require_positive(C, "C");
    require_positive(epsilon, "epsilon");
    if (n_models < 1) throw Error("n_models must be at least 1");
    require_positive(normalization_constant, "normalization_constant");
    require_positive(max_hold_s, "max_hold_s");
    if (n_boot < 1) throw Error("n_boot must be at least 1");
    if (cost_ratios.empty()) throw Error("at least one cost ratio is required");
    if (threads < 1) throw Error("threads must be at least 1");
    simulation.validate();
}

EnsembleParams RunConfig::ensemble_params() const
{
    EnsembleParams p;
    p.C = C;
    p.epsilon = epsilon;
    p.n_models = n_models;
    p.master_seed = seed;
    p.unit = bootstrap_unit;
    p.threads = threads;
    p.standardize = standardize;
    return p;
}

std::string RunConfig::to_json(bool include_threads) const
{
    ojson j;
    j["window_s"] = window_s;
    j["min_keys"] = min_keys;
    j["C"] = C;
    j["epsilon"] = epsilon;
    j["n_models"] = n_models;
    j["normalization_constant"] = normalization_constant;
    j["max_hold_s"] = max_hold_s;
    j["n_boot"] = n_boot;
    j["seed"] = seed;
    auto costs = ojson::array();
    for (const auto& c : cost_ratios) costs.push_back(to_string(c));
    j["cost_ratios"] = costs;
    j["bootstrap_unit"] = bootstrap_unit == BootstrapUnit::window ? "window" : "subject";
    j["standardize"] = standardize;
    if (include_threads) j["threads"] = threads;

    const auto& s = simulation;
    const auto& r = s.profiles;
    const auto& imp = s.impairment;
    j["simulation"] = {
        {"n_pd", s.n_pd},
        {"n_control", s.n_control},
        {"sessions_per_subject", s.sessions_per_subject},
        {"dataset", to_string(s.dataset)},
        {"id_prefix", s.id_prefix},
        {"mean_ht", {r.mean_ht_lo, r.mean_ht_hi}},
        {"ht_sigma", {r.sigma_lo, r.sigma_hi}},
        {"keys_per_min", {r.keys_per_min_lo, r.keys_per_min_hi}},
        {"rollover_prob", {r.rollover_lo, r.rollover_hi}},
        {"session_minutes", r.session_minutes},
        {"burst_enter_prob", imp.burst_enter_prob},
        {"burst_exit_prob", imp.burst_exit_prob},
        {"burst_sigma_multiplier", imp.burst_sigma_multiplier},
        {"burst_mean_shift", imp.burst_mean_shift},
    };
    return j.dump();
}

void RunConfig::merge_json(const std::string& text)
{
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("config must be a JSON object");
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& k = it.key();
            const auto& v = it.value();
            if (k == "window_s") window_s = v.get<double>();
            else if (k == "min_keys") min_keys = v.get<std::size_t>();
            else if (k == "C") C = v.get<double>();
            else if (k == "epsilon") epsilon = v.get<double>();
            else if (k == "n_models") n_models = v.get<std::size_t>();
            else if (k == "normalization_constant") normalization_constant = v.get<double>();
            else if (k == "max_hold_s") max_hold_s = v.get<double>();
            else if (k == "n_boot") n_boot = v.get<std::size_t>();
            else if (k == "seed") seed = v.get<std::uint64_t>();
            else if (k == "cost_ratios") {
                cost_ratios.clear();
                for (const auto& c : v) cost_ratios.push_back(parse_cost_ratio(c.get<std::string>()));
            } else if (k == "bootstrap_unit") {
                const auto u = v.get<std::string>();
                if (u == "window") bootstrap_unit = BootstrapUnit::window;
                else if (u == "subject") bootstrap_unit = BootstrapUnit::subject;
                else throw Error("bootstrap_unit must be 'window' or 'subject'");
            } else if (k == "standardize") standardize = v.get<bool>();
            else if (k == "threads") threads = v.get<std::size_t>();
            else if (k == "simulation") {
                auto& s = simulation;
                auto range = [](const ojson& r, double& lo, double& hi) {
                    const auto v = json_range(r);
                    lo = v[0];
                    hi = v[1];
                };
                for (auto si = v.begin(); si != v.end(); ++si) {
                    const auto& sk = si.key();
                    const auto& sv = si.value();
                    if (sk == "n_pd") s.n_pd = sv.get<std::size_t>();
                    else if (sk == "n_control") s.n_control = sv.get<std::size_t>();
                    else if (sk == "sessions_per_subject") s.sessions_per_subject = sv.get<std::size_t>();
                    else if (sk == "dataset") s.dataset = parse_dataset(sv.get<std::string>());
                    else if (sk == "id_prefix") s.id_prefix = sv.get<std::string>();
                    else if (sk == "mean_ht") range(sv, s.profiles.mean_ht_lo, s.profiles.mean_ht_hi);
                    else if (sk == "ht_sigma") range(sv, s.profiles.sigma_lo, s.profiles.sigma_hi);
                    else if (sk == "keys_per_min") range(sv, s.profiles.keys_per_min_lo, s.profiles.keys_per_min_hi);
                    else if (sk == "rollover_prob") range(sv, s.profiles.rollover_lo, s.profiles.rollover_hi);
                    else if (sk == "session_minutes") s.profiles.session_minutes = sv.get<double>();
                    else if (sk == "burst_enter_prob") s.impairment.burst_enter_prob = sv.get<double>();
                    else if (sk == "burst_exit_prob") s.impairment.burst_exit_prob = sv.get<double>();
                    else if (sk == "burst_sigma_multiplier") s.impairment.burst_sigma_multiplier = sv.get<double>();
                    else if (sk == "burst_mean_shift") s.impairment.burst_mean_shift = sv.get<double>();
                    else throw Error("unknown simulation key '" + sk + "'");
                }
            } else {
                throw Error("unknown config key '" + k + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad config value: ") + e.what());
    }
}

RunConfig RunConfig::load(const fs::path& path)
{
    auto in = open_input(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    RunConfig c;
    c.merge_json(buf.str());
    c.validate();
    return c;
}

void RunConfig::save(const fs::path& path) const
{
    const auto pretty = ojson::parse(to_json(true)).dump(2) + "\n";
    save_text(path, pretty);
}

bool operator==(const RunConfig& a, const RunConfig& b) { return a.to_json(true) == b.to_json(true); }

void write_file_atomic(const fs::path& path, const std::function<void(std::ostream&)>& write)
{
    fs::path tmp = path;
    tmp += ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write '" + tmp.string() + "'");
            write(out);
            out.flush();
            if (!out) throw Error("write to '" + tmp.string() + "' failed");
        }
        fs::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

void cmd_featurize(const fs::path& log, const fs::path& out, const RunConfig& config, std::ostream& diag)
{
    config.validate();
    const auto sessions = ingest_log(log, config.validation_policy());
    if (sessions.empty()) diag << "warning: '" << log.string() << "' contains no sessions\n";
    const auto rows = featurize_sessions(sessions, config.window_params());

    std::set<std::pair<std::string, std::string>> with_windows;
    for (const auto& r : rows) with_windows.emplace(r.subject_id, r.session_id);
    for (const auto& s : sessions) {
        const auto& d = s.warnings;
        if (d.total())
            diag << "warning: " << s.subject_id << '/' << s.session_id << ": dropped " << d.total()
                 << " events (other keys " << d.other_key << ", non-positive hold " << d.non_positive_hold
                 << ", hold above " << config.max_hold_s << " s " << d.over_max_hold << ")\n";
        if (!with_windows.count({s.subject_id, s.session_id}))
            diag << "warning: " << s.subject_id << '/' << s.session_id << ": no " << config.window_s
                 << " s window with at least " << config.min_keys << " hold times; session ignored\n";
    }
    write_file_atomic(out, [&](std::ostream& o) { write_features(o, rows); });
}

void cmd_train(const fs::path& features, const fs::path& metadata, const fs::path& model_out,
               const RunConfig& config, std::ostream& diag)
{
    config.validate();
    const auto data = load_labeled(features, metadata, diag);
    const auto corpus = build_corpus(data, config.normalization_constant);
    const auto model = train_ensemble(corpus, config.ensemble_params(), dataset_tag(data));
    diag << "trained " << model.units.size() << " units on " << corpus.rows.size() << " windows from "
         << model.provenance.training_subjects.size() << " subjects\n";
    write_file_atomic(model_out, [&](std::ostream& o) { save_model(o, model); });
}

void cmd_score(const fs::path& model_path, const fs::path& features, const fs::path& out,
               const std::optional<fs::path>& windows_out, const RunConfig& config, std::ostream& diag)
{
    config.validate();
    EnsembleModel model;
    {
        auto in = open_input(model_path);
        model = load_model(in);
    }
    const auto windows = load_features(features);
    if (windows.empty()) diag << "warning: '" << features.string() << "' has no feature rows\n";
    const auto window_scores = score_windows(model, windows, config.threads);
    const auto subject_scores = rollup_subjects(window_scores);
    std::ostringstream subj, win;
    write_subject_scores(subj, subject_scores);
    if (windows_out) write_window_scores(win, window_scores);
    save_text(out, subj.str());
    if (windows_out) save_text(*windows_out, win.str());
}

void cmd_crossval(const FoldInputs& denovo, const FoldInputs& earlypd, const fs::path& out_dir,
                  const RunConfig& config, std::ostream& diag)
{
    config.validate();
    const auto a = load_labeled(denovo.features, denovo.metadata, diag);
    const auto b = load_labeled(earlypd.features, earlypd.metadata, diag);
    const auto params = config.ensemble_params();
    const auto result = cross_validate(a, b, params, config.normalization_constant);

    std::map<std::string, SubjectRecord> all = a.subjects;
    all.insert(b.subjects.begin(), b.subjects.end());
    auto cohort_of = [&](const std::vector<NqiScore>& scores) {
        ScoredCohort c;
        for (const auto& s : scores) c.entries.push_back({s.subject_id, s.value, all.at(s.subject_id).group, {}});
        return c;
    };

    struct Row
    {
        std::string test, train;
        std::size_t n_pd, n_control;
        double auc;
        AucInterval ci;
    };
    std::vector<Row> rows;
    auto add_row = [&](std::string test, std::string train, const std::vector<NqiScore>& scores,
                       std::size_t n_pd, std::size_t n_control, double auc) {
        const auto ci = bootstrap_auc_ci(cohort_of(scores), config.n_boot, config.seed, config.threads);
        rows.push_back({std::move(test), std::move(train), n_pd, n_control, auc, ci});
    };
    const auto& fa = result.fold_a;
    const auto& fb = result.fold_b;
    const std::string tag_a = fa.train_dataset.empty() ? "denovo" : fa.train_dataset;
    const std::string tag_b = fb.train_dataset.empty() ? "earlypd" : fb.train_dataset;
    add_row(tag_b, tag_a, fa.subject_scores, fa.n_pd, fa.n_control, fa.auc);
    add_row(tag_a, tag_b, fb.subject_scores, fb.n_pd, fb.n_control, fb.auc);
    add_row("combined", "", result.combined_subject_scores, result.n_pd, result.n_control, result.combined_auc);

    auto subject_scores = result.combined_subject_scores;
    std::sort(subject_scores.begin(), subject_scores.end(),
              [](const auto& l, const auto& r) { return l.subject_id < r.subject_id; });
    auto window_scores = result.combined_window_scores;
    std::stable_sort(window_scores.begin(), window_scores.end(), [](const auto& l, const auto& r) {
        return std::tie(l.subject_id, l.session_id, l.window_index) <
               std::tie(r.subject_id, r.session_id, r.window_index);
    });

    std::ostringstream txt;
    txt << "# nqi cross-validation report\n" << config_comment(config);
    txt << "\nCross-validation performance (subject level)\n";
    txt << "Test dataset  Train dataset  n PD  n control  AUC (95% CI)\n";
    for (const auto& r : rows)
        txt << pad(r.test, 14) << pad(r.train.empty() ? "-" : r.train, 15) << lpad(std::to_string(r.n_pd), 4)
            << lpad(std::to_string(r.n_control), 11) << "  " << auc_with_ci(r.auc, r.ci.low, r.ci.high) << '\n';

    ojson j;
    j["config"] = config_object(config);
    auto jrows = ojson::array();
    for (const auto& r : rows)
        jrows.push_back({{"test_dataset", r.test},
                         {"train_dataset", r.train},
                         {"n_pd", r.n_pd},
                         {"n_control", r.n_control},
                         {"auc", r.auc},
                         {"ci_low", r.ci.low},
                         {"ci_high", r.ci.high}});
    j["folds"] = jrows;

    std::ostringstream subj, win, model_a, model_b;
    write_subject_scores(subj, subject_scores);
    write_window_scores(win, window_scores);
    save_model(model_a, fa.model);
    save_model(model_b, fb.model);

    fs::create_directories(out_dir);
    save_text(out_dir / "subject_scores.csv", subj.str());
    save_text(out_dir / "window_scores.csv", win.str());
    save_text(out_dir / ("model_train_" + tag_a + ".json"), model_a.str());
    save_text(out_dir / ("model_train_" + tag_b + ".json"), model_b.str());
    save_text(out_dir / "crossval_report.txt", txt.str());
    save_text(out_dir / "crossval_report.json", j.dump(2) + "\n");
    diag << "combined AUC " << fixed(result.combined_auc, 3) << " over " << result.n_pd << " PD and "
         << result.n_control << " control subjects\n";
}

void cmd_evaluate(const EvaluateInputs& in, const fs::path& out_dir, const RunConfig& config, std::ostream& diag)
{
    config.validate();
    const auto subjects = load_subjects(in.metadata);
    const bool window_file = is_window_score_file(in.scores);
    if (in.per_window && !window_file)
        throw Error("per-window evaluation needs a window score file (subject_id,session_id,window_index,nqi)");

    std::vector<NqiScore> window_scores;
    std::vector<NqiScore> subject_scores;
    if (window_file) {
        window_scores = load_window_scores(in.scores);
        subject_scores = rollup_subjects(window_scores);
    } else {
        subject_scores = load_subject_scores(in.scores);
    }
    for (const auto& s : window_file ? window_scores : subject_scores)
        if (!subjects.count(s.subject_id))
            throw Error("score for subject '" + s.subject_id + "' missing from '" + in.metadata.string() + "'");

    std::map<std::string, std::string> files;  // name -> content
    ojson j;
    j["config"] = config_object(config);
    j["mode"] = in.per_window ? "window" : "subject";
    std::ostringstream txt;
    txt << "# nqi evaluation report\n" << config_comment(config);

    std::vector<CutPoint> cuts;
    auto make_cuts = [&](const ScoredCohort& c) {
        cuts.clear();
        for (const auto& cr : config.cost_ratios) cuts.push_back(youden_cutpoint(c, cr.fn, cr.fp));
    };

    if (in.per_window) {
        ScoredCohort cohort;
        cohort.per_window = true;
        for (const auto& s : window_scores)
            cohort.entries.push_back({s.subject_id, s.value, subjects.at(s.subject_id).group, {}});
        cohort.require_both_labels();
        auto roc = roc_curve(cohort);
        const auto ci = bootstrap_auc_ci(cohort, config.n_boot, config.seed, config.threads);
        roc.ci_low = ci.low;
        roc.ci_high = ci.high;
        make_cuts(cohort);
        const auto pd = cohort.scores(Group::pd);
        const auto control = cohort.scores(Group::control);

        txt << "\nPer-window discrimination (windows scored independently)\n";
        txt << "windows PD " << pd.size() << ", control " << control.size() << "\n";
        txt << "nqi AUC (95% CI): " << auc_with_ci(roc.auc, roc.ci_low, roc.ci_high) << "\n\n";
        txt << "Cut-off points (generalized Youden index)\n";
        cutpoint_table(txt, cuts);

        j["nqi"] = {{"n_pd", pd.size()},
                    {"n_control", control.size()},
                    {"auc", roc.auc},
                    {"ci_low", roc.ci_low},
                    {"ci_high", roc.ci_high},
                    {"box_pd", box_json(box_stats(pd))},
                    {"box_control", box_json(box_stats(control))}};
        auto jc = ojson::array();
        for (const auto& c : cuts) jc.push_back(cutpoint_json(c));
        j["cutpoints"] = jc;
        files["roc_nqi.csv"] = roc_csv(roc, true);
        files["roc_band_nqi.csv"] = band_csv(roc_band(cohort, config.n_boot, config.seed, config.threads));
        files["box_nqi.csv"] = box_csv(box_stats(pd), box_stats(control));
    } else {
        std::map<std::string, double> speeds;
        if (in.log) speeds = typing_speeds(*in.log, config.validation_policy(), diag);

        MetricTable table;
        for (const auto& [id, rec] : subjects) {
            table.labels[id] = rec.group;
            auto& cov = table.covariates[id];
            cov["sex"] = rec.sex == Sex::male ? 1.0 : 0.0;
            cov["age"] = rec.age;
            cov["education_years"] = rec.education_years;
            if (auto it = speeds.find(id); it != speeds.end()) cov["typing_speed"] = it->second;
        }
        MetricColumn nqi_col{"nqi", {}, {}, true};
        for (const auto& s : subject_scores) nqi_col.values[s.subject_id] = s.value;
        if (in.log) nqi_col.extra_covariates.push_back("typing_speed");
        table.metrics.push_back(nqi_col);

        // Tapping metrics cover the scored subjects that have them.
        MetricColumn alt{"alternating_finger_tapping", {}, {}, false};
        MetricColumn single{"single_key_tapping", {}, {}, false};
        for (const auto& [id, v] : nqi_col.values) {
            const auto& rec = subjects.at(id);
            if (rec.tapping_alternating) alt.values[id] = *rec.tapping_alternating;
            if (rec.tapping_single) single.values[id] = *rec.tapping_single;
        }
        if (!alt.values.empty()) table.metrics.push_back(alt);
        if (!single.values.empty()) table.metrics.push_back(single);

        // Only scored subjects enter the comparison.
        for (auto it = table.labels.begin(); it != table.labels.end();)
            it = nqi_col.values.count(it->first) ? std::next(it) : table.labels.erase(it);

        CompareOptions opts;
        opts.n_boot = config.n_boot;
        opts.seed = config.seed;
        opts.threads = config.threads;
        const auto report = compare_metrics(table, opts);
        make_cuts(cohort_for(table, table.metrics.front()));

        txt << "\nGroup comparison (subject level)\n";
        txt << "Metric                        n PD  n ctl  PD mean (sd)          Control mean (sd)     "
               "p unadj.   p adj.     AUC (95% CI)\n";
        auto jm = ojson::array();
        for (const auto& m : report.metrics) {
            std::string adj = m.adjusted_p ? pvalue(*m.adjusted_p) : "n/a";
            if (m.adjusted_separated) adj += "*";
            txt << pad(m.name, 30) << lpad(std::to_string(m.n_pd), 4) << lpad(std::to_string(m.n_control), 7)
                << "  " << pad(fixed(m.mean_pd, 3) + " (" + fixed(m.sd_pd, 3) + ")", 22)
                << pad(fixed(m.mean_control, 3) + " (" + fixed(m.sd_control, 3) + ")", 22)
                << pad(pvalue(m.unadjusted.p), 11) << pad(adj, 11)
                << auc_with_ci(m.roc.auc, m.roc.ci_low, m.roc.ci_high) << '\n';
            jm.push_back({{"name", m.name},
                          {"pd_high", m.pd_high},
                          {"n_pd", m.n_pd},
                          {"n_control", m.n_control},
                          {"mean_pd", json_number(m.mean_pd)},
                          {"sd_pd", m.sd_pd},
                          {"mean_control", json_number(m.mean_control)},
                          {"sd_control", m.sd_control},
                          {"mann_whitney", {{"u", m.unadjusted.u}, {"p", m.unadjusted.p}, {"exact", m.unadjusted.exact}}},
                          {"adjusted", {{"p", m.adjusted_p ? ojson(*m.adjusted_p) : ojson(nullptr)},
                                        {"separated", m.adjusted_separated},
                                        {"covariates", m.adjusted_covariates}}},
                          {"auc", m.roc.auc},
                          {"ci_low", m.roc.ci_low},
                          {"ci_high", m.roc.ci_high},
                          {"box_pd", box_json(m.box_pd)},
                          {"box_control", box_json(m.box_control)}});
            const auto stem = metric_file_stem(m.name);
            files["roc_" + stem + ".csv"] = roc_csv(m.roc, m.pd_high);
            files["box_" + stem + ".csv"] = box_csv(m.box_pd, m.box_control);
        }
        txt << "p unadj.: two-sided Mann-Whitney U. p adj.: Wald test in a logistic model with sex, age and "
               "years of education";
        txt << (in.log ? " (plus typing speed for nqi)" : "") << ". * = separated fit, Wald value unreliable.\n";
        txt << "Tapping metrics: lower values indicate PD; their AUC is computed on that orientation.\n";
        j["metrics"] = jm;

        for (const auto& metric : table.metrics)
            files["roc_band_" + metric_file_stem(metric.name) + ".csv"] =
                band_csv(roc_band(cohort_for(table, metric), config.n_boot, config.seed, config.threads));

        txt << "\nPairwise DeLong tests (common subjects)\n";
        auto jd = ojson::array();
        for (const auto& d : report.pairwise) {
            txt << pad(d.metric_a + " vs " + d.metric_b, 56) << "n " << lpad(std::to_string(d.n_subjects), 4)
                << "  z " << lpad(fixed(d.result.z, 3), 8) << "  p " << pvalue(d.result.p) << '\n';
            jd.push_back({{"metric_a", d.metric_a},
                          {"metric_b", d.metric_b},
                          {"n_subjects", d.n_subjects},
                          {"auc_a", d.result.auc_a},
                          {"auc_b", d.result.auc_b},
                          {"z", d.result.z},
                          {"p", d.result.p}});
        }
        j["delong"] = jd;

        txt << "\nnqi cut-off points (generalized Youden index)\n";
        cutpoint_table(txt, cuts);
        auto jc = ojson::array();
        for (const auto& c : cuts) jc.push_back(cutpoint_json(c));
        j["cutpoints"] = jc;

        // Descriptive rows in the same layout, no ROC.
        txt << "\nCohort description (scored subjects)\n";
        txt << "Attribute                     n PD  n ctl  PD mean (sd)          Control mean (sd)     p unadj.\n";
        auto jdesc = ojson::array();
        auto describe = [&](const std::string& name, auto&& value_of) {
            std::vector<double> pd, control;
            for (const auto& [id, group] : table.labels) {
                const auto v = value_of(id);
                if (!v) continue;
                (group == Group::pd ? pd : control).push_back(*v);
            }
            if (pd.empty() || control.empty()) return;
            const auto mw = mann_whitney_u(pd, control);
            txt << pad(name, 30) << lpad(std::to_string(pd.size()), 4) << lpad(std::to_string(control.size()), 7)
                << "  " << pad(fixed(mean(pd), 2) + " (" + fixed(sample_sd(pd), 2) + ")", 22)
                << pad(fixed(mean(control), 2) + " (" + fixed(sample_sd(control), 2) + ")", 22) << pvalue(mw.p)
                << '\n';
            jdesc.push_back({{"name", name},
                             {"n_pd", pd.size()},
                             {"n_control", control.size()},
                             {"mean_pd", mean(pd)},
                             {"sd_pd", sample_sd(pd)},
                             {"mean_control", mean(control)},
                             {"sd_control", sample_sd(control)},
                             {"p", mw.p}});
        };
        describe("updrs3", [&](const std::string& id) { return std::optional<double>(subjects.at(id).updrs3); });
        describe("age", [&](const std::string& id) { return std::optional<double>(subjects.at(id).age); });
        describe("education_years",
                 [&](const std::string& id) { return std::optional<double>(subjects.at(id).education_years); });
        describe("typing_speed", [&](const std::string& id) {
            auto it = speeds.find(id);
            return it == speeds.end() ? std::nullopt : std::optional<double>(it->second);
        });
        j["description"] = jdesc;
    }

    fs::create_directories(out_dir);
    for (const auto& [name, content] : files) save_text(out_dir / name, content);
    save_text(out_dir / "report.txt", txt.str());
    save_text(out_dir / "report.json", j.dump(2) + "\n");
    diag << "wrote " << files.size() + 2 << " files to '" << out_dir.string() << "'\n";
}

void cmd_simulate(const fs::path& out_dir, const RunConfig& config, std::ostream& diag)
{
    config.validate();
    const auto cohort = generate_cohort(config.simulation, config.seed);
    std::vector<SubjectRecord> subjects;
    for (const auto& [id, rec] : cohort.subjects()) subjects.push_back(rec);
    std::ostringstream log, meta;
    write_log(log, cohort.sessions());
    write_subjects(meta, subjects);
    fs::create_directories(out_dir);
    save_text(out_dir / "log.csv", log.str());
    save_text(out_dir / "subjects.csv", meta.str());
    diag << "simulated " << config.simulation.n_pd << " PD and " << config.simulation.n_control
         << " control subjects (" << cohort.sessions().size() << " sessions)\n";
}

} // namespace nqi
