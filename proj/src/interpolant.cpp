#include "mmql/interpolant.hpp"

#include "mmql/errors.hpp"

namespace mmql {

std::pair<double, double> ddim_coeffs(double s, double t, const NoiseSchedule& sched) {
    if (!(0.0 <= s && s <= t && t <= 1.0))
        throw DomainError("ddim_coeffs: need 0 <= s <= t <= 1");
    if (s == t) return {0.0, 1.0};
    auto [alpha_t, sigma_t] = alpha_sigma(sched, t);
    if (sigma_t == 0.0) throw DomainError("ddim_coeffs: sigma_t = 0 (degenerate ratio)");
    auto [alpha_s, sigma_s] = alpha_sigma(sched, s);
    double ratio = sigma_s / sigma_t;
    return {alpha_s - ratio * alpha_t, ratio};
}

std::vector<double> ddim_interpolate(const std::vector<double>& x_t,
                                     const std::vector<double>& x, double s, double t,
                                     const NoiseSchedule& sched) {
    if (x_t.size() != x.size())
        throw DimensionError("ddim_interpolate: x_t and x dimensions differ");
    auto [cx, cxt] = ddim_coeffs(s, t, sched);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = cx * x[i] + cxt * x_t[i];
    return out;
}

NoisySample forward_sample(const std::vector<double>& x, const std::vector<double>& eps,
                           double t, const NoiseSchedule& sched) {
    if (x.size() != eps.size())
        throw DimensionError("forward_sample: x and eps dimensions differ");
    auto [alpha_t, sigma_t] = alpha_sigma(sched, t);
    NoisySample ns;
    ns.x = x;
    ns.eps = eps;
    ns.t = t;
    ns.x_t.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) ns.x_t[i] = alpha_t * x[i] + sigma_t * eps[i];
    return ns;
}

std::vector<double> conditional_resample(const std::vector<double>& x,
                                         const std::vector<double>& x_t, double r,
                                         double t, const NoiseSchedule& sched) {
    return ddim_interpolate(x_t, x, r, t, sched);
}

}  // namespace mmql
