#include "nqi/keystroke.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "nqi/error.hpp"
#include "nqi/text.hpp"

namespace nqi {

namespace {

const std::vector<std::string> kLogHeader = {"subject_id", "session_id", "key_class", "press_s",
                                             "release_s"};
// Column order as written in the metadata file.
const std::vector<std::string> kSubjectColumns = {
    "subject_id", "group", "dataset", "updrs3", "sex", "age", "education_years",
    "tapping_single", "tapping_alternating"};

struct RawRow
{
    std::string subject_id;
    std::string session_id;
    KeyEvent event;
};

std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return in;
}

std::vector<RawRow> read_csv_rows(std::istream& in)
{
    std::vector<RawRow> rows;
    text::CsvReader reader(in, kLogHeader);
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        if (f[0].empty()) throw ParseError("empty subject_id", line);
        if (f[1].empty()) throw ParseError("empty session_id", line);
        RawRow row{std::string(f[0]), std::string(f[1]), {}};
        try {
            row.event.key_class = parse_key_class(f[2]);
        } catch (const Error& e) {
            throw ParseError(e.what(), line);
        }
        row.event.press_time = text::parse_double(f[3], line);
        row.event.release_time = text::parse_double(f[4], line);
        if (row.event.press_time < 0.0) throw ParseError("negative press time", line);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string json_id(const nlohmann::json& obj, const char* key, std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line);
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw ParseError(std::string("field '") + key + "' must be a string", line);
}

double json_number(const nlohmann::json& obj, const char* key, std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line);
    if (!it->is_number()) throw ParseError(std::string("field '") + key + "' must be a number", line);
    return it->get<double>();
}

std::vector<RawRow> read_jsonl_rows(std::istream& in)
{
    std::vector<RawRow> rows;
    std::string buf;
    std::size_t line = 0;
    while (std::getline(in, buf)) {
        ++line;
        if (text::trim(buf).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(buf);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid JSON record: ") + e.what(), line);
        }
        if (!obj.is_object()) throw ParseError("record is not a JSON object", line);
        RawRow row{json_id(obj, "subject_id", line), json_id(obj, "session_id", line), {}};
        auto kc = obj.find("key_class");
        if (kc == obj.end() || !kc->is_string()) throw ParseError("missing key_class", line);
        try {
            row.event.key_class = parse_key_class(kc->get<std::string>());
        } catch (const Error& e) {
            throw ParseError(e.what(), line);
        }
        row.event.press_time = json_number(obj, "press_s", line);
        row.event.release_time = json_number(obj, "release_s", line);
        if (row.event.press_time < 0.0) throw ParseError("negative press time", line);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<double> optional_number(std::string_view s, std::size_t line)
{
    if (s.empty()) return std::nullopt;
    return text::parse_double(s, line);
}

} // namespace

std::string_view to_string(KeyClass k)
{
    switch (k) {
    case KeyClass::alnum: return "alnum";
    case KeyClass::symbol: return "symbol";
    case KeyClass::space: return "space";
    case KeyClass::other: return "other";
    }
    return "other";
}

KeyClass parse_key_class(std::string_view s)
{
    if (s == "alnum") return KeyClass::alnum;
    if (s == "symbol") return KeyClass::symbol;
    if (s == "space") return KeyClass::space;
    if (s == "other") return KeyClass::other;
    throw Error("unknown key_class '" + std::string(s) + "'");
}

bool press_order(const KeyEvent& a, const KeyEvent& b)
{
    if (a.press_time != b.press_time) return a.press_time < b.press_time;
    return a.release_time < b.release_time;
}

TypingSession validate_session(std::string subject_id, std::string session_id,
                               std::vector<KeyEvent> raw, const ValidationPolicy& policy)
{
    TypingSession s{std::move(subject_id), std::move(session_id), {}, {}};
    s.events.reserve(raw.size());
    for (const auto& e : raw) {
        if (!is_eligible(e.key_class)) {
            ++s.warnings.other_key;
        } else if (!(e.release_time > e.press_time)) {
            ++s.warnings.non_positive_hold;
        } else if (e.hold_time() > policy.max_hold_s) {
            ++s.warnings.over_max_hold;
        } else {
            s.events.push_back(e);
        }
    }
    std::sort(s.events.begin(), s.events.end(), press_order);
    return s;
}

std::vector<TypingSession> ingest_log(std::istream& in, const ValidationPolicy& policy)
{
    // Peek at the first non-blank character to pick the record format.
    char first = 0;
    while (in.good()) {
        int c = in.peek();
        if (c == EOF) break;
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            in.get();
            continue;
        }
        first = static_cast<char>(c);
        break;
    }
    if (first == 0) return {};

    auto rows = first == '{' ? read_jsonl_rows(in) : read_csv_rows(in);

    std::map<std::pair<std::string, std::string>, std::vector<KeyEvent>> grouped;
    for (auto& r : rows) grouped[{r.subject_id, r.session_id}].push_back(r.event);

    std::vector<TypingSession> out;
    out.reserve(grouped.size());
    for (auto& [key, events] : grouped)
        out.push_back(validate_session(key.first, key.second, std::move(events), policy));
    return out;
}

std::vector<TypingSession> ingest_log(const std::filesystem::path& path,
                                      const ValidationPolicy& policy)
{
    auto in = open_input(path);
    return ingest_log(in, policy);
}

void write_log(std::ostream& out, const std::vector<TypingSession>& sessions)
{
    for (std::size_t i = 0; i < kLogHeader.size(); ++i)
        out << (i ? "," : "") << kLogHeader[i];
    out << '\n';
    for (const auto& s : sessions) {
        for (const auto& e : s.events) {
            out << s.subject_id << ',' << s.session_id << ',' << to_string(e.key_class) << ','
                << text::format_double(e.press_time) << ','
                << text::format_double(e.release_time) << '\n';
        }
    }
}

std::vector<HoldSample> hold_times(const TypingSession& session)
{
    std::vector<HoldSample> out;
    out.reserve(session.events.size());
    for (const auto& e : session.events) {
        if (!is_eligible(e.key_class)) continue;
        out.push_back({e.press_time, e.release_time - e.press_time, e.release_time});
    }
    return out;
}

double typing_speed(const TypingSession& session)
{
    std::size_t n = 0;
    double first = 0.0, last = 0.0;
    for (const auto& e : session.events) {
        if (!is_eligible(e.key_class)) continue;
        if (n == 0) first = e.press_time;
        last = e.press_time;
        ++n;
    }
    if (n < 2) throw InsufficientDataError("typing speed needs at least two key presses");
    const double span = last - first;
    if (!(span > 0.0)) throw InsufficientDataError("typing speed undefined for a zero-length span");
    return static_cast<double>(n) / span * 60.0;
}

std::string_view to_string(Group g) { return g == Group::pd ? "pd" : "control"; }
std::string_view to_string(Sex s) { return s == Sex::male ? "male" : "female"; }

std::string_view to_string(DatasetTag d)
{
    switch (d) {
    case DatasetTag::denovo: return "denovo";
    case DatasetTag::earlypd: return "earlypd";
    case DatasetTag::paramest: return "paramest";
    }
    return "denovo";
}

Group parse_group(std::string_view s)
{
    if (s == "pd") return Group::pd;
    if (s == "control") return Group::control;
    throw Error("unknown group '" + std::string(s) + "'");
}

Sex parse_sex(std::string_view s)
{
    if (s == "female" || s == "F" || s == "f" || s == "0") return Sex::female;
    if (s == "male" || s == "M" || s == "m" || s == "1") return Sex::male;
    throw Error("unknown sex '" + std::string(s) + "'");
}

DatasetTag parse_dataset(std::string_view s)
{
    if (s == "denovo") return DatasetTag::denovo;
    if (s == "earlypd") return DatasetTag::earlypd;
    if (s == "paramest") return DatasetTag::paramest;
    throw Error("unknown dataset '" + std::string(s) + "'");
}

std::vector<SubjectRecord> read_subjects(std::istream& in)
{
    std::vector<SubjectRecord> out;
    text::CsvReader reader(in, kSubjectColumns, 2);
    std::vector<std::string_view> f;
    std::set<std::string> seen;
    while (reader.next(f)) {
        const auto line = reader.line();
        SubjectRecord r;
        r.subject_id = std::string(f[0]);
        if (r.subject_id.empty()) throw ParseError("empty subject_id", line);
        if (!seen.insert(r.subject_id).second)
            throw ParseError("duplicate subject_id '" + r.subject_id + "'", line);
        try {
            r.group = parse_group(f[1]);
            r.dataset = parse_dataset(f[2]);
            r.sex = parse_sex(f[4]);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(e.what(), line);
        }
        auto updrs = text::parse_int(f[3], line);
        if (updrs < 0 || updrs > kUpdrs3Max) throw ParseError("updrs3 outside [0, 108]", line);
        r.updrs3 = static_cast<int>(updrs);
        r.age = text::parse_double(f[5], line);
        r.education_years = text::parse_double(f[6], line);
        r.tapping_single = optional_number(f[7], line);
        r.tapping_alternating = optional_number(f[8], line);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SubjectRecord> read_subjects(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return read_subjects(in);
}

void write_subjects(std::ostream& out, const std::vector<SubjectRecord>& subjects)
{
    for (std::size_t i = 0; i < kSubjectColumns.size(); ++i)
        out << (i ? "," : "") << kSubjectColumns[i];
    out << '\n';
    auto opt = [](const std::optional<double>& v) {
        return v ? text::format_double(*v) : std::string();
    };
    for (const auto& r : subjects) {
        out << r.subject_id << ',' << to_string(r.group) << ',' << to_string(r.dataset) << ','
            << r.updrs3 << ',' << to_string(r.sex) << ',' << text::format_double(r.age) << ','
            << text::format_double(r.education_years) << ',' << opt(r.tapping_single) << ','
            << opt(r.tapping_alternating) << '\n';
    }
}

CohortDataset::CohortDataset(std::vector<SubjectRecord> subjects,
                             std::vector<TypingSession> sessions)
{
    for (auto& s : subjects) {
        if (s.updrs3 < 0 || s.updrs3 > kUpdrs3Max)
            throw Error("subject '" + s.subject_id + "': updrs3 outside [0, 108]");
        auto id = s.subject_id;
        if (!subjects_.emplace(id, std::move(s)).second)
            throw Error("duplicate subject_id '" + id + "'");
    }
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& s : sessions) {
        if (!subjects_.count(s.subject_id))
            throw Error("session '" + s.session_id + "' refers to unknown subject '" +
                        s.subject_id + "'");
        if (!keys.insert({s.subject_id, s.session_id}).second)
            throw Error("duplicate session (" + s.subject_id + ", " + s.session_id + ")");
    }
    sessions_ = std::move(sessions);
    std::sort(sessions_.begin(), sessions_.end(), [](const auto& a, const auto& b) {
        return std::tie(a.subject_id, a.session_id) < std::tie(b.subject_id, b.session_id);
    });
}

const SubjectRecord& CohortDataset::subject(const std::string& id) const
{
    auto it = subjects_.find(id);
    if (it == subjects_.end()) throw Error("unknown subject '" + id + "'");
    return it->second;
}

std::vector<const TypingSession*> CohortDataset::sessions_of(const std::string& subject_id) const
{
    std::vector<const TypingSession*> out;
    for (const auto& s : sessions_)
        if (s.subject_id == subject_id) out.push_back(&s);
    return out;
}

CohortDataset CohortDataset::restricted_to(const std::vector<std::string>& subject_ids) const
{
    std::set<std::string> keep(subject_ids.begin(), subject_ids.end());
    std::vector<SubjectRecord> subs;
    for (const auto& [id, rec] : subjects_)
        if (keep.count(id)) subs.push_back(rec);
    std::vector<TypingSession> sess;
    for (const auto& s : sessions_)
        if (keep.count(s.subject_id)) sess.push_back(s);
    return CohortDataset(std::move(subs), std::move(sess));
}

} // namespace nqi
