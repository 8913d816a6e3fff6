#pragma once

#include <utility>
#include <vector>

#include "mmql/schedule.hpp"

namespace mmql {

struct NoisySample {
    std::vector<double> x;    // clean datum
    std::vector<double> eps;  // noise
    double t = 0.0;
    std::vector<double> x_t;  // alpha_t * x + sigma_t * eps
};

// Coefficients (c_x, c_xt) of the affine jump from time t to time s:
// result = c_x * x + c_xt * x_t, with c_x = alpha_s - (sigma_s/sigma_t) *
// alpha_t and c_xt = sigma_s / sigma_t. s == t short-circuits to (0, 1).
std::pair<double, double> ddim_coeffs(double s, double t, const NoiseSchedule& sched);

// Deterministic jump of x_t from time t down to time s given a clean estimate x.
std::vector<double> ddim_interpolate(const std::vector<double>& x_t,
                                     const std::vector<double>& x, double s, double t,
                                     const NoiseSchedule& sched);

NoisySample forward_sample(const std::vector<double>& x, const std::vector<double>& eps,
                           double t, const NoiseSchedule& sched);

// x_r = DDIM(x_t, x, r, t): the zero-variance conditional resampling that keeps
// x_r on the same noise path as x_t.
std::vector<double> conditional_resample(const std::vector<double>& x,
                                         const std::vector<double>& x_t, double r,
                                         double t, const NoiseSchedule& sched);

}  // namespace mmql
