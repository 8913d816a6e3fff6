#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmql/rng.hpp"

namespace mmql {

enum class ScheduleKind { flow_matching, variance_preserving };

ScheduleKind parse_schedule_kind(const std::string& tag);
const char* schedule_kind_name(ScheduleKind k);

struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::flow_matching;
};

// Interpolation coefficients (alpha_t, sigma_t). Boundary values are exact:
// (1,0) at t=0 and (0,1) at t=1 for both kinds.
std::pair<double, double> alpha_sigma(const NoiseSchedule& sched, double t);

// Signal-to-noise ratio alpha^2/sigma^2; +infinity at t=0.
double snr(const NoiseSchedule& sched, double t);

struct TimeSamplerConfig {
    double p_mean = -0.8;
    double p_std = 1.5;
    double delta_t = 0.05;
    double t_min = 1e-3;
    double t_max = 1.0 - 1e-3;

    void validate() const;
};

struct TimeTriple {
    double s = 0.0;
    double r = 0.0;
    double t = 0.0;
};

// Draws ln(sigma_hat) ~ Normal(p_mean, p_std^2), maps t = sigma_hat /
// (1 + sigma_hat), clamps to [t_min, t_max].
double sample_t(const TimeSamplerConfig& cfg, Pcg64& rng);

// s ~ Uniform[0, t].
double sample_s_given_t(double t, Pcg64& rng);

// r(s, t) = max(s, t - delta_t).
double map_r(double s, double t, double delta_t);

// Convenience: one (s, r, t) draw satisfying 0 <= s <= r <= t.
TimeTriple sample_triple(const TimeSamplerConfig& cfg, Pcg64& rng);

// Uniform grid t_i = i/N in descending order: [1, (N-1)/N, ..., 1/N, 0].
std::vector<double> inference_grid(int n_steps);

}  // namespace mmql
