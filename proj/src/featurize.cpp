#include "nqi/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "nqi/error.hpp"
#include "nqi/text.hpp"

namespace nqi {

namespace {

constexpr double kHistogramTop = 0.5;
constexpr std::size_t kBins = 4;

const std::vector<std::string> kFeatureHeader = {"subject_id", "session_id", "window_index",
                                                 "v_out",      "v_iqr",      "v_de",
                                                 "h0",         "h1",         "h2",
                                                 "h3"};

double interpolated(const std::vector<double>& sorted, double p)
{
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto k = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(k);
    if (k + 1 >= sorted.size()) return sorted.back();
    return sorted[k] + frac * (sorted[k + 1] - sorted[k]);
}

} // namespace

std::array<double, kFeatureDim> FeatureVector::as_array() const
{
    return {v_out, v_iqr, v_de, v_hst[0], v_hst[1], v_hst[2], v_hst[3]};
}

FeatureVector FeatureVector::from_array(const std::array<double, kFeatureDim>& a)
{
    return {a[0], a[1], a[2], {a[3], a[4], a[5], a[6]}};
}

std::vector<HoldTimeWindow> partition_windows(std::span<const HoldSample> series,
                                              const WindowParams& params)
{
    if (!(params.window_s > 0.0)) throw Error("window length must be positive");
    std::vector<HoldTimeWindow> raw;
    if (series.empty()) return raw;

    const double origin = series.front().press;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const auto idx = static_cast<std::size_t>(std::floor((s.press - origin) / params.window_s));
        if (raw.empty() || raw.back().window_index != idx) {
            HoldTimeWindow w;
            w.window_index = idx;
            w.start_time = static_cast<double>(idx) * params.window_s;
            raw.push_back(std::move(w));
        } else {
            // previous sample shares the window, so the pair belongs to it
            raw.back().overlap_pairs.push_back(series[k - 1].release - s.press);
        }
        raw.back().hold_times.push_back(s.hold);
        raw.back().press_times.push_back(s.press);
    }

    std::vector<HoldTimeWindow> kept;
    for (auto& w : raw)
        if (w.hold_times.size() >= params.min_keys) kept.push_back(std::move(w));
    return kept;
}

Quartiles quartiles(std::span<const double> values)
{
    if (values.empty()) throw Error("quartiles of an empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return {interpolated(sorted, 0.25), interpolated(sorted, 0.5), interpolated(sorted, 0.75)};
}

double outlier_fraction(const HoldTimeWindow& w)
{
    if (w.hold_times.empty()) return 0.0;
    const auto q = quartiles(w.hold_times);
    const double iqr = q.q3 - q.q1;
    const double lo = q.q1 - 1.5 * iqr;
    const double hi = q.q3 + 1.5 * iqr;
    const auto n = std::count_if(w.hold_times.begin(), w.hold_times.end(),
                                 [&](double h) { return h < lo || h > hi; });
    return static_cast<double>(n) / static_cast<double>(w.hold_times.size());
}

double iqr_skewness(const HoldTimeWindow& w)
{
    if (w.hold_times.empty()) return 0.5;
    const auto q = quartiles(w.hold_times);
    const double iqr = q.q3 - q.q1;
    if (!(iqr > 0.0)) return 0.5;
    return (q.q2 - q.q1) / iqr;
}

std::array<double, 4> ht_histogram(const HoldTimeWindow& w)
{
    std::array<double, kBins> counts{};
    if (w.hold_times.empty()) return counts;
    for (double h : w.hold_times) {
        if (h < 0.0 || h >= kHistogramTop) continue;
        auto bin = static_cast<std::size_t>(h * (kBins / kHistogramTop));
        counts[std::min(bin, kBins - 1)] += 1.0;
    }
    const auto n = static_cast<double>(w.hold_times.size());
    for (auto& c : counts) c /= n;
    return counts;
}

double flight_overlap(const HoldTimeWindow& w)
{
    if (w.overlap_pairs.empty()) return 0.0;
    double sum = 0.0;
    for (double d : w.overlap_pairs) sum += std::max(0.0, d);
    return sum / static_cast<double>(w.overlap_pairs.size());
}

FeatureVector feature_vector(const HoldTimeWindow& w)
{
    return {outlier_fraction(w), iqr_skewness(w), flight_overlap(w), ht_histogram(w)};
}

std::vector<WindowFeatures> featurize_sessions(const std::vector<TypingSession>& sessions,
                                               const WindowParams& params)
{
    std::vector<const TypingSession*> order;
    for (const auto& s : sessions) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        return std::tie(a->subject_id, a->session_id) < std::tie(b->subject_id, b->session_id);
    });

    std::vector<WindowFeatures> rows;
    for (const auto* s : order) {
        const auto series = hold_times(*s);
        for (const auto& w : partition_windows(series, params))
            rows.push_back({s->subject_id, s->session_id, w.window_index, feature_vector(w)});
    }
    return rows;
}

void write_features(std::ostream& out, const std::vector<WindowFeatures>& rows)
{
    for (std::size_t i = 0; i < kFeatureHeader.size(); ++i)
        out << (i ? "," : "") << kFeatureHeader[i];
    out << '\n';
    for (const auto& r : rows) {
        out << r.subject_id << ',' << r.session_id << ',' << r.window_index;
        for (double v : r.x.as_array()) out << ',' << text::format_double(v);
        out << '\n';
    }
}

std::vector<WindowFeatures> read_features(std::istream& in)
{
    std::vector<WindowFeatures> rows;
    text::CsvReader reader(in, kFeatureHeader);
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        WindowFeatures r;
        r.subject_id = std::string(f[0]);
        r.session_id = std::string(f[1]);
        const auto idx = text::parse_int(f[2], line);
        if (idx < 0) throw ParseError("negative window_index", line);
        r.window_index = static_cast<std::size_t>(idx);
        std::array<double, kFeatureDim> a{};
        for (std::size_t k = 0; k < kFeatureDim; ++k) a[k] = text::parse_double(f[3 + k], line);
        r.x = FeatureVector::from_array(a);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace nqi
