#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nqi {

enum class KeyClass { alnum, symbol, space, other };

std::string_view to_string(KeyClass k);
KeyClass parse_key_class(std::string_view s);

// Only keys expected to have a short hold time feed the pipeline.
constexpr bool is_eligible(KeyClass k) { return k != KeyClass::other; }

struct KeyEvent
{
    KeyClass key_class = KeyClass::alnum;
    double press_time = 0.0;   // seconds, session-relative
    double release_time = 0.0;

    double hold_time() const { return release_time - press_time; }

    friend bool operator==(const KeyEvent&, const KeyEvent&) = default;
};

// Press order, ties broken by release time.
bool press_order(const KeyEvent& a, const KeyEvent& b);

struct DropCounts
{
    std::size_t other_key = 0;
    std::size_t non_positive_hold = 0;
    std::size_t over_max_hold = 0;

    std::size_t total() const { return other_key + non_positive_hold + over_max_hold; }

    friend bool operator==(const DropCounts&, const DropCounts&) = default;
};

struct TypingSession
{
    std::string subject_id;
    std::string session_id;
    std::vector<KeyEvent> events;
    DropCounts warnings;
};

struct ValidationPolicy
{
    double max_hold_s = 2.0;
};

/// Sorts, filters and counts dropped events per the policy. The result
/// satisfies every TypingSession invariant.
TypingSession validate_session(std::string subject_id, std::string session_id,
                               std::vector<KeyEvent> raw, const ValidationPolicy& policy);

/// Reads a keystroke log (CSV with header, or one JSON object per line)
/// and groups it into validated sessions ordered by (subject_id, session_id).
/// An empty file yields no sessions. Malformed rows throw ParseError.
std::vector<TypingSession> ingest_log(std::istream& in, const ValidationPolicy& policy = {});
std::vector<TypingSession> ingest_log(const std::filesystem::path& path,
                                      const ValidationPolicy& policy = {});

/// Writes sessions in the CSV log format with round-trip exact timestamps.
void write_log(std::ostream& out, const std::vector<TypingSession>& sessions);

struct HoldSample
{
    double press = 0.0;
    double hold = 0.0;
    double release = 0.0;
};

/// One sample per eligible event, in press order.
std::vector<HoldSample> hold_times(const TypingSession& session);

/// Eligible key presses per minute over the span between first and last press.
/// Throws InsufficientDataError for fewer than two presses or a zero span.
double typing_speed(const TypingSession& session);

enum class Group { pd, control };
enum class Sex { female, male };
enum class DatasetTag { denovo, earlypd, paramest };

std::string_view to_string(Group g);
std::string_view to_string(Sex s);
std::string_view to_string(DatasetTag d);
Group parse_group(std::string_view s);
Sex parse_sex(std::string_view s);
DatasetTag parse_dataset(std::string_view s);

struct SubjectRecord
{
    std::string subject_id;
    Group group = Group::control;
    DatasetTag dataset = DatasetTag::denovo;
    int updrs3 = 0;  // 0..108
    Sex sex = Sex::female;
    double age = 0.0;
    double education_years = 0.0;
    std::optional<double> tapping_single;
    std::optional<double> tapping_alternating;

    friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

constexpr int kUpdrs3Max = 108;

std::vector<SubjectRecord> read_subjects(std::istream& in);
std::vector<SubjectRecord> read_subjects(const std::filesystem::path& path);
void write_subjects(std::ostream& out, const std::vector<SubjectRecord>& subjects);

class CohortDataset
{
public:
    CohortDataset() = default;

    /// Throws Error when a session refers to an unknown subject, a
    /// (subject_id, session_id) pair repeats, or a subject id repeats.
    CohortDataset(std::vector<SubjectRecord> subjects, std::vector<TypingSession> sessions);

    const std::map<std::string, SubjectRecord>& subjects() const { return subjects_; }
    const std::vector<TypingSession>& sessions() const { return sessions_; }

    const SubjectRecord& subject(const std::string& id) const;
    bool has_subject(const std::string& id) const { return subjects_.count(id) != 0; }

    std::vector<const TypingSession*> sessions_of(const std::string& subject_id) const;

    // Subset restricted to the given subject ids, sessions included.
    CohortDataset restricted_to(const std::vector<std::string>& subject_ids) const;

private:
    std::map<std::string, SubjectRecord> subjects_;
    std::vector<TypingSession> sessions_;  // ordered by (subject_id, session_id)
};

} // namespace nqi
