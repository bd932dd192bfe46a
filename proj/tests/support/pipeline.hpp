#pragma once

// Scratch directories and the full command pipeline, shared by the CLI tests
// and the acceptance suite.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "nqi/cli.hpp"
#include "nqi/keystroke.hpp"

namespace support {

namespace fs = std::filesystem;

class TempDir
{
public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("nqi_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void spit(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Relative path -> content for every regular file under dir.
inline std::map<std::string, std::string> read_tree(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
    return files;
}

// Concatenates logs and metadata of several simulated datasets.
inline void merge_inputs(const std::vector<fs::path>& dirs, const fs::path& log_out, const fs::path& meta_out)
{
    std::vector<nqi::TypingSession> sessions;
    std::vector<nqi::SubjectRecord> subjects;
    for (const auto& d : dirs) {
        for (auto& s : nqi::ingest_log(d / "log.csv")) sessions.push_back(std::move(s));
        for (auto& s : nqi::read_subjects(d / "subjects.csv")) subjects.push_back(std::move(s));
    }
    std::ofstream log(log_out, std::ios::binary), meta(meta_out, std::ios::binary);
    nqi::write_log(log, sessions);
    nqi::write_subjects(meta, subjects);
}

/// simulate (two datasets) -> featurize -> train -> score -> crossval ->
/// evaluate, everything under `root`. The second dataset uses the same
/// simulation settings with the earlypd tag, prefix "E" and seed + 1.
inline void run_pipeline(const fs::path& root, const nqi::RunConfig& config, std::ostream& diag)
{
    auto denovo = config;
    denovo.simulation.dataset = nqi::DatasetTag::denovo;
    denovo.simulation.id_prefix = "D";
    auto earlypd = config;
    earlypd.simulation.dataset = nqi::DatasetTag::earlypd;
    earlypd.simulation.id_prefix = "E";
    earlypd.seed = config.seed + 1;

    nqi::cmd_simulate(root / "denovo", denovo, diag);
    nqi::cmd_simulate(root / "earlypd", earlypd, diag);
    nqi::cmd_featurize(root / "denovo" / "log.csv", root / "denovo" / "features.csv", config, diag);
    nqi::cmd_featurize(root / "earlypd" / "log.csv", root / "earlypd" / "features.csv", config, diag);

    nqi::cmd_train(root / "denovo" / "features.csv", root / "denovo" / "subjects.csv", root / "model.json", config,
                   diag);
    nqi::cmd_score(root / "model.json", root / "earlypd" / "features.csv", root / "earlypd_scores.csv",
                   root / "earlypd_window_scores.csv", config, diag);

    nqi::cmd_crossval({root / "denovo" / "features.csv", root / "denovo" / "subjects.csv"},
                      {root / "earlypd" / "features.csv", root / "earlypd" / "subjects.csv"}, root / "crossval",
                      config, diag);

    merge_inputs({root / "denovo", root / "earlypd"}, root / "all_log.csv", root / "all_subjects.csv");
    nqi::cmd_evaluate({root / "crossval" / "subject_scores.csv", root / "all_subjects.csv", root / "all_log.csv", false},
                      root / "evaluate", config, diag);
    nqi::cmd_evaluate({root / "crossval" / "window_scores.csv", root / "all_subjects.csv", std::nullopt, true},
                      root / "evaluate_windows", config, diag);
}

} // namespace support
