#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nqi/keystroke.hpp"

namespace nqi {

constexpr std::size_t kFeatureDim = 7;

struct WindowParams
{
    double window_s = 90.0;
    std::size_t min_keys = 30;
};

// One non-overlapping time window of the hold-time series. Press times lie in
// [start_time, start_time + window_s) relative to the first press of the session.
struct HoldTimeWindow
{
    std::size_t window_index = 0;
    double start_time = 0.0;
    std::vector<double> hold_times;
    std::vector<double> press_times;
    // release of key k minus press of key k+1, for consecutive keys both in the window
    std::vector<double> overlap_pairs;
};

struct Quartiles
{
    double q1, q2, q3;
};

// Feature order: v_out, v_iqr, v_de, then four histogram bins.
struct FeatureVector
{
    double v_out = 0.0;
    double v_iqr = 0.5;
    double v_de = 0.0;
    std::array<double, 4> v_hst{};

    std::array<double, kFeatureDim> as_array() const;
    static FeatureVector from_array(const std::array<double, kFeatureDim>& a);

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Assigns each sample to the window holding its press time and drops windows
/// with fewer than min_keys samples. Surviving windows keep their original index.
std::vector<HoldTimeWindow> partition_windows(std::span<const HoldSample> series,
                                              const WindowParams& params = {});

/// Quartiles by linear interpolation between order statistics (h = (n-1)p).
/// Throws Error on empty input.
Quartiles quartiles(std::span<const double> values);

double outlier_fraction(const HoldTimeWindow& w);
double iqr_skewness(const HoldTimeWindow& w);
std::array<double, 4> ht_histogram(const HoldTimeWindow& w);
double flight_overlap(const HoldTimeWindow& w);

FeatureVector feature_vector(const HoldTimeWindow& w);

struct WindowFeatures
{
    std::string subject_id;
    std::string session_id;
    std::size_t window_index = 0;
    FeatureVector x;
};

// Featurizes every session; rows ordered by (subject, session, window_index).
std::vector<WindowFeatures> featurize_sessions(const std::vector<TypingSession>& sessions,
                                               const WindowParams& params = {});

void write_features(std::ostream& out, const std::vector<WindowFeatures>& rows);
std::vector<WindowFeatures> read_features(std::istream& in);

} // namespace nqi
