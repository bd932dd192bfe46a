#include "nqi/synthcohort.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nqi/error.hpp"
#include "nqi/parallel.hpp"

namespace nqi {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void require(bool ok, const char* what)
{
    if (!ok) throw Error(what);
}

double uniform_in(std::mt19937_64& rng, double lo, double hi)
{
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

KeyClass draw_key_class(std::mt19937_64& rng)
{
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < 0.78) return KeyClass::alnum;
    if (u < 0.93) return KeyClass::space;
    if (u < 0.98) return KeyClass::symbol;
    return KeyClass::other;
}

} // namespace

void TypistProfile::validate() const
{
    require(std::isfinite(mean_ht) && mean_ht > 0.0 && mean_ht < kMaxGeneratedHold,
            "typist mean_ht must be in (0, 1.5) seconds");
    require(std::isfinite(ht_sigma) && ht_sigma >= 0.0, "typist ht_sigma must be non-negative");
    require(std::isfinite(keys_per_min) && keys_per_min > 0.0, "typist keys_per_min must be positive");
    require(is_probability(rollover_prob), "typist rollover_prob must be in [0, 1]");
    require(std::isfinite(session_minutes) && session_minutes > 0.0, "session_minutes must be positive");
}

void ImpairmentParams::validate() const
{
    require(burst_enter_prob > 0.0 && burst_enter_prob < 1.0, "burst_enter_prob must be in (0, 1)");
    require(burst_exit_prob > 0.0 && burst_exit_prob < 1.0, "burst_exit_prob must be in (0, 1)");
    require(std::isfinite(burst_sigma_multiplier) && burst_sigma_multiplier >= 1.0,
            "burst_sigma_multiplier must be at least 1");
    require(std::isfinite(burst_mean_shift) && burst_mean_shift >= 0.0, "burst_mean_shift must be non-negative");
    require(target_updrs3 >= 0 && target_updrs3 <= kUpdrs3Max, "target_updrs3 must be in 0..108");
}

ImpairmentParams ImpairmentParams::null_effect()
{
    ImpairmentParams p;
    p.burst_sigma_multiplier = 1.0;
    p.burst_mean_shift = 0.0;
    return p;
}

void ProfileRange::validate() const
{
    auto ordered = [](double lo, double hi) { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; };
    require(ordered(mean_ht_lo, mean_ht_hi) && mean_ht_lo > 0.0 && mean_ht_hi < kMaxGeneratedHold,
            "mean_ht range must be ordered inside (0, 1.5)");
    require(ordered(sigma_lo, sigma_hi) && sigma_lo >= 0.0, "sigma range must be ordered and non-negative");
    require(ordered(keys_per_min_lo, keys_per_min_hi) && keys_per_min_lo > 0.0,
            "keys_per_min range must be ordered and positive");
    require(ordered(rollover_lo, rollover_hi) && is_probability(rollover_lo) && is_probability(rollover_hi),
            "rollover range must be ordered inside [0, 1]");
    require(std::isfinite(session_minutes) && session_minutes > 0.0, "session_minutes must be positive");
}

void CohortSpec::validate() const
{
    require(n_pd >= 1, "cohort needs at least one PD subject");
    require(n_control >= 1, "cohort needs at least one control subject");
    require(sessions_per_subject >= 1, "cohort needs at least one session per subject");
    require(!id_prefix.empty() && id_prefix.find(',') == std::string::npos,
            "id prefix must be non-empty and contain no comma");
    profiles.validate();
    impairment.validate();
}

TypingSession generate_session(const TypistProfile& profile, const std::optional<ImpairmentParams>& impairment,
                               std::uint64_t seed, std::string subject_id, std::string session_id)
{
    profile.validate();
    if (impairment) impairment->validate();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double log_median = std::log(profile.mean_ht);
    const double mean_gap = 60.0 / profile.keys_per_min;
    // Gap between a release and the next press, when there is no rollover.
    const double idle_mean = std::max(mean_gap - profile.mean_ht, 0.02);
    std::gamma_distribution<double> idle(2.0, idle_mean / 2.0);

    auto draw_hold = [&](bool burst) {
        double sigma = profile.ht_sigma;
        double shift = 0.0;
        if (burst) {
            sigma *= impairment->burst_sigma_multiplier;
            shift = impairment->burst_mean_shift;
        }
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double h = std::exp(log_median + sigma * normal(rng)) + shift;
            if (h > 0.0 && h <= kMaxGeneratedHold) return h;
        }
        return std::min(profile.mean_ht + shift, kMaxGeneratedHold);
    };

    const double end = profile.session_minutes * 60.0;
    std::vector<KeyEvent> events;
    events.reserve(static_cast<std::size_t>(profile.keys_per_min * profile.session_minutes * 1.2) + 16);

    bool burst = false;
    double press = idle(rng);
    double prev_hold = 0.0;
    bool first = true;
    while (true) {
        if (!first) {
            double gap;
            if (unit(rng) < profile.rollover_prob)
                gap = prev_hold * (0.2 + 0.75 * unit(rng));
            else
                gap = prev_hold + idle(rng);
            // Keep presses strictly increasing even for degenerate draws.
            press = std::max(press + gap, std::nextafter(press, end + 1.0));
        }
        first = false;
        if (press >= end) break;

        if (impairment) {
            const double u = unit(rng);
            burst = burst ? !(u < impairment->burst_exit_prob) : u < impairment->burst_enter_prob;
        }
        const KeyClass kc = draw_key_class(rng);
        const double hold = draw_hold(burst);
        events.push_back({kc, press, press + hold});
        prev_hold = hold;
    }
    return validate_session(std::move(subject_id), std::move(session_id), std::move(events), ValidationPolicy{});
}

CohortDataset generate_cohort(const CohortSpec& spec, std::uint64_t seed)
{
    spec.validate();
    const std::size_t n = spec.n_pd + spec.n_control;
    const int width = static_cast<int>(std::to_string(n).size());

    std::vector<SubjectRecord> subjects(n);
    std::vector<std::vector<TypingSession>> sessions(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(seed, i));
        std::normal_distribution<double> normal(0.0, 1.0);
        const bool pd = i < spec.n_pd;

        auto& rec = subjects[i];
        std::string num = std::to_string(i + 1);
        rec.subject_id = spec.id_prefix + std::string(width - num.size(), '0') + num;
        rec.group = pd ? Group::pd : Group::control;
        rec.dataset = spec.dataset;
        if (pd) {
            const double u = std::round(20.6 + 7.7 * normal(rng));
            rec.updrs3 = static_cast<int>(std::clamp(u, 0.0, static_cast<double>(kUpdrs3Max)));
        } else {
            rec.updrs3 = std::uniform_int_distribution<int>(0, 5)(rng);
        }
        rec.sex = std::bernoulli_distribution(0.5)(rng) ? Sex::male : Sex::female;
        rec.age = std::round(std::clamp(62.0 + 9.0 * normal(rng), 35.0, 85.0));
        rec.education_years = std::round(std::clamp(16.0 + 3.0 * normal(rng), 8.0, 24.0));
        // Tapping counts fall with motor impairment.
        rec.tapping_single = std::round(std::max(185.0 - 1.2 * rec.updrs3 + 20.0 * normal(rng), 20.0));
        rec.tapping_alternating = std::round(std::max(155.0 - 1.2 * rec.updrs3 + 20.0 * normal(rng), 20.0));

        const auto& r = spec.profiles;
        TypistProfile profile;
        profile.mean_ht = uniform_in(rng, r.mean_ht_lo, r.mean_ht_hi);
        profile.ht_sigma = uniform_in(rng, r.sigma_lo, r.sigma_hi);
        profile.keys_per_min = uniform_in(rng, r.keys_per_min_lo, r.keys_per_min_hi);
        profile.rollover_prob = uniform_in(rng, r.rollover_lo, r.rollover_hi);
        profile.session_minutes = r.session_minutes;

        std::optional<ImpairmentParams> impairment;
        if (pd) {
            impairment = spec.impairment;
            impairment->target_updrs3 = rec.updrs3;
        }
        const auto subject_seed = rng();
        for (std::size_t k = 0; k < spec.sessions_per_subject; ++k)
            sessions[i].push_back(generate_session(profile, impairment, derive_seed(subject_seed, k), rec.subject_id,
                                                   "s" + std::to_string(k + 1)));
    }

    std::vector<TypingSession> all;
    for (auto& s : sessions)
        for (auto& one : s) all.push_back(std::move(one));
    return CohortDataset(std::move(subjects), std::move(all));
}

} // namespace nqi
