#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "nqi/keystroke.hpp"

namespace nqi {

struct TypistProfile
{
    double mean_ht = 0.1;        // seconds; median of the hold-time distribution
    double ht_sigma = 0.25;      // log-scale spread
    double keys_per_min = 100.0;
    double rollover_prob = 0.1;  // chance a press lands before the previous release
    double session_minutes = 15.0;

    // Throws Error on a non-positive rate, duration or median, a negative
    // sigma, or a probability outside [0, 1].
    void validate() const;
};

// Two-state chain stepped once per keystroke. In the burst state the log-scale
// spread is multiplied by burst_sigma_multiplier and burst_mean_shift seconds
// are added to each hold.
struct ImpairmentParams
{
    double burst_enter_prob = 0.05;
    double burst_exit_prob = 0.2;
    double burst_sigma_multiplier = 2.0;
    double burst_mean_shift = 0.02;
    int target_updrs3 = 20;

    void validate() const;

    static ImpairmentParams null_effect();
};

/// Hold times never exceed this, so generated sessions lose nothing to the
/// default ingest policy.
constexpr double kMaxGeneratedHold = 1.5;

/// One session of `session_minutes`. Presses are strictly increasing; a few
/// non-eligible keys are generated and then dropped by validate_session, so
/// the returned warnings count them.
TypingSession generate_session(const TypistProfile& profile, const std::optional<ImpairmentParams>& impairment,
                               std::uint64_t seed, std::string subject_id = "S0", std::string session_id = "s1");

struct ProfileRange
{
    double mean_ht_lo = 0.08, mean_ht_hi = 0.15;
    double sigma_lo = 0.15, sigma_hi = 0.3;
    double keys_per_min_lo = 80.0, keys_per_min_hi = 140.0;
    double rollover_lo = 0.0, rollover_hi = 0.2;
    double session_minutes = 15.0;

    void validate() const;
};

struct CohortSpec
{
    std::size_t n_pd = 40;
    std::size_t n_control = 40;
    std::size_t sessions_per_subject = 1;
    ProfileRange profiles;
    ImpairmentParams impairment;  // applied to every PD subject
    DatasetTag dataset = DatasetTag::denovo;
    std::string id_prefix = "S";

    void validate() const;
};

/// Subject i (PD first, then controls) draws its profile, metadata and
/// sessions from derive_seed(seed, i). PD UPDRS-III ~ N(20.6, 7.7) rounded
/// and clamped to [0, 108]; controls are uniform on 0..5.
CohortDataset generate_cohort(const CohortSpec& spec, std::uint64_t seed);

} // namespace nqi
