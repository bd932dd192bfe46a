// nqi: command-line front end for the typing-based motor score pipeline.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nqi/cli.hpp"
#include "nqi/error.hpp"
#include "nqi/text.hpp"

namespace {

using nqi::text::format_double;

// Flags that override the config file when given.
struct Overrides
{
    std::optional<std::string> config;
    std::optional<double> window_s;
    std::optional<std::size_t> min_keys;
    std::optional<double> C;
    std::optional<double> epsilon;
    std::optional<std::size_t> n_models;
    std::optional<double> normalization_constant;
    std::optional<double> max_hold_s;
    std::optional<std::size_t> n_boot;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> cost_ratios;
    std::optional<std::string> bootstrap_unit;
    bool standardize = false;
    std::optional<std::size_t> threads;

    std::optional<std::size_t> n_pd, n_control, sessions_per_subject;
    std::optional<std::string> dataset, id_prefix;
    std::optional<double> session_minutes, burst_enter_prob, burst_exit_prob, burst_sigma_multiplier,
        burst_mean_shift;
};

std::string dflt(double v) { return " (default " + format_double(v) + ")"; }
std::string dflt(std::size_t v) { return " (default " + std::to_string(v) + ")"; }

void add_common(CLI::App* cmd, Overrides& o)
{
    const nqi::RunConfig d;
    cmd->add_option("--config", o.config, "JSON run config; flags given on the command line win");
    cmd->add_option("--threads", o.threads, "worker threads; results do not depend on it" + dflt(d.threads));
    cmd->add_option("--seed", o.seed, "master seed" + dflt(static_cast<std::size_t>(d.seed)));
}

void add_window(CLI::App* cmd, Overrides& o)
{
    const nqi::RunConfig d;
    cmd->add_option("--window_s", o.window_s, "window length in seconds" + dflt(d.window_s));
    cmd->add_option("--min_keys", o.min_keys, "minimum hold times per window" + dflt(d.min_keys));
    cmd->add_option("--max_hold_s", o.max_hold_s, "holds above this are dropped as artifacts" + dflt(d.max_hold_s));
}

void add_training(CLI::App* cmd, Overrides& o)
{
    const nqi::RunConfig d;
    cmd->add_option("--C", o.C, "SVR penalty" + dflt(d.C));
    cmd->add_option("--epsilon", o.epsilon, "SVR insensitive-tube half width" + dflt(d.epsilon));
    cmd->add_option("--n_models", o.n_models, "ensemble size" + dflt(d.n_models));
    cmd->add_option("--normalization_constant", o.normalization_constant,
                    "UPDRS-III divisor for targets" + dflt(d.normalization_constant));
    cmd->add_option("--bootstrap_unit", o.bootstrap_unit, "window or subject (default window)")
        ->check(CLI::IsMember({"window", "subject"}));
    cmd->add_flag("--standardize", o.standardize, "z-score features before fitting (default off)");
}

void add_evaluation(CLI::App* cmd, Overrides& o)
{
    const nqi::RunConfig d;
    cmd->add_option("--n_boot", o.n_boot, "bootstrap replicates for confidence intervals" + dflt(d.n_boot));
    cmd->add_option("--cost_ratios", o.cost_ratios, "FN/FP misclassification costs (default 1/1 2/1 1/2)");
}

void add_simulation(CLI::App* cmd, Overrides& o)
{
    const nqi::CohortSpec d;
    cmd->add_option("--n_pd", o.n_pd, "PD subjects" + dflt(d.n_pd));
    cmd->add_option("--n_control", o.n_control, "control subjects" + dflt(d.n_control));
    cmd->add_option("--sessions_per_subject", o.sessions_per_subject, "sessions each" + dflt(d.sessions_per_subject));
    cmd->add_option("--dataset", o.dataset, "dataset tag: denovo, earlypd or paramest (default denovo)");
    cmd->add_option("--id_prefix", o.id_prefix, "subject id prefix (default S)");
    cmd->add_option("--session_minutes", o.session_minutes, "session length" + dflt(d.profiles.session_minutes));
    cmd->add_option("--burst_enter_prob", o.burst_enter_prob,
                    "per-key chance of entering a burst" + dflt(d.impairment.burst_enter_prob));
    cmd->add_option("--burst_exit_prob", o.burst_exit_prob,
                    "per-key chance of leaving a burst" + dflt(d.impairment.burst_exit_prob));
    cmd->add_option("--burst_sigma_multiplier", o.burst_sigma_multiplier,
                    "log-spread multiplier in bursts" + dflt(d.impairment.burst_sigma_multiplier));
    cmd->add_option("--burst_mean_shift", o.burst_mean_shift,
                    "seconds added to holds in bursts" + dflt(d.impairment.burst_mean_shift));
}

nqi::RunConfig resolve(const Overrides& o)
{
    nqi::RunConfig c = o.config ? nqi::RunConfig::load(*o.config) : nqi::RunConfig{};
    auto set = [](auto& field, const auto& value) {
        if (value) field = *value;
    };
    set(c.window_s, o.window_s);
    set(c.min_keys, o.min_keys);
    set(c.C, o.C);
    set(c.epsilon, o.epsilon);
    set(c.n_models, o.n_models);
    set(c.normalization_constant, o.normalization_constant);
    set(c.max_hold_s, o.max_hold_s);
    set(c.n_boot, o.n_boot);
    set(c.seed, o.seed);
    set(c.threads, o.threads);
    if (!o.cost_ratios.empty()) {
        c.cost_ratios.clear();
        for (const auto& s : o.cost_ratios) c.cost_ratios.push_back(nqi::parse_cost_ratio(s));
    }
    if (o.bootstrap_unit)
        c.bootstrap_unit = *o.bootstrap_unit == "subject" ? nqi::BootstrapUnit::subject : nqi::BootstrapUnit::window;
    if (o.standardize) c.standardize = true;

    auto& s = c.simulation;
    set(s.n_pd, o.n_pd);
    set(s.n_control, o.n_control);
    set(s.sessions_per_subject, o.sessions_per_subject);
    if (o.dataset) s.dataset = nqi::parse_dataset(*o.dataset);
    set(s.id_prefix, o.id_prefix);
    set(s.profiles.session_minutes, o.session_minutes);
    set(s.impairment.burst_enter_prob, o.burst_enter_prob);
    set(s.impairment.burst_exit_prob, o.burst_exit_prob);
    set(s.impairment.burst_sigma_multiplier, o.burst_sigma_multiplier);
    set(s.impairment.burst_mean_shift, o.burst_mean_shift);
    c.validate();
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Typing-based motor impairment scoring: featurize keystroke logs, train the bagged SVR "
                 "ensemble, score, cross-validate, evaluate and simulate cohorts."};
    app.require_subcommand(1);
    Overrides o;

    std::string log, out, features, metadata, model, scores, out_dir;
    std::optional<std::string> windows_out, eval_log;
    std::string denovo_features, denovo_metadata, earlypd_features, earlypd_metadata;
    bool per_window = false;

    auto* featurize = app.add_subcommand("featurize", "keystroke log -> window feature CSV");
    featurize->add_option("--log", log, "keystroke log (CSV or JSON lines)")->required();
    featurize->add_option("--out", out, "feature CSV to write")->required();
    add_common(featurize, o);
    add_window(featurize, o);

    auto* train = app.add_subcommand("train", "feature CSV + subject metadata -> ensemble model file");
    train->add_option("--features", features, "feature CSV")->required();
    train->add_option("--metadata", metadata, "subject metadata CSV")->required();
    train->add_option("--out", out, "model file to write")->required();
    add_common(train, o);
    add_training(train, o);

    auto* score = app.add_subcommand("score", "model + feature CSV -> nQi scores");
    score->add_option("--model", model, "model file")->required();
    score->add_option("--features", features, "feature CSV")->required();
    score->add_option("--out", out, "subject score CSV to write")->required();
    score->add_option("--windows_out", windows_out, "also write per-window scores here");
    add_common(score, o);

    auto* crossval = app.add_subcommand("crossval", "two-fold cross-dataset validation");
    crossval->add_option("--denovo_features", denovo_features, "feature CSV of the first dataset")->required();
    crossval->add_option("--denovo_metadata", denovo_metadata, "metadata CSV of the first dataset")->required();
    crossval->add_option("--earlypd_features", earlypd_features, "feature CSV of the second dataset")->required();
    crossval->add_option("--earlypd_metadata", earlypd_metadata, "metadata CSV of the second dataset")->required();
    crossval->add_option("--out_dir", out_dir, "directory for scores, models and report")->required();
    add_common(crossval, o);
    add_training(crossval, o);
    add_evaluation(crossval, o);

    auto* evaluate = app.add_subcommand("evaluate", "scores + metadata -> group tests, ROC, cut-points");
    evaluate->add_option("--scores", scores, "subject or window score CSV")->required();
    evaluate->add_option("--metadata", metadata, "subject metadata CSV")->required();
    evaluate->add_option("--log", eval_log, "keystroke log; adds typing speed as a covariate for nqi");
    evaluate->add_flag("--per_window", per_window, "treat every window as an observation");
    evaluate->add_option("--out_dir", out_dir, "directory for report and plot data")->required();
    add_common(evaluate, o);
    add_window(evaluate, o);
    add_evaluation(evaluate, o);

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort (log.csv, subjects.csv)");
    simulate->add_option("--out_dir", out_dir, "directory to write")->required();
    add_common(simulate, o);
    add_simulation(simulate, o);

    auto* config = app.add_subcommand("config", "print the effective config as JSON");
    config->add_option("--out", out, "write to this file instead of standard output");
    add_common(config, o);
    add_window(config, o);
    add_training(config, o);
    add_evaluation(config, o);
    add_simulation(config, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto cfg = resolve(o);
        auto& diag = std::cerr;
        if (*featurize) {
            nqi::cmd_featurize(log, out, cfg, diag);
        } else if (*train) {
            nqi::cmd_train(features, metadata, out, cfg, diag);
        } else if (*score) {
            std::optional<std::filesystem::path> w;
            if (windows_out) w = *windows_out;
            nqi::cmd_score(model, features, out, w, cfg, diag);
        } else if (*crossval) {
            nqi::cmd_crossval({denovo_features, denovo_metadata}, {earlypd_features, earlypd_metadata}, out_dir,
                              cfg, diag);
        } else if (*evaluate) {
            nqi::EvaluateInputs in{scores, metadata, std::nullopt, per_window};
            if (eval_log) in.log = *eval_log;
            nqi::cmd_evaluate(in, out_dir, cfg, diag);
        } else if (*simulate) {
            nqi::cmd_simulate(out_dir, cfg, diag);
        } else if (*config) {
            if (out.empty())
                std::cout << cfg.to_json(true) << '\n';
            else
                cfg.save(out);
        }
    } catch (const std::exception& e) {
        std::cerr << "nqi: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
