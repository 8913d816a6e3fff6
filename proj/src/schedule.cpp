#include "mmql/schedule.hpp"

#include <cmath>
#include <limits>

#include "mmql/errors.hpp"

namespace mmql {

ScheduleKind parse_schedule_kind(const std::string& tag) {
    if (tag == "flow-matching" || tag == "fm") return ScheduleKind::flow_matching;
    if (tag == "variance-preserving" || tag == "vp") return ScheduleKind::variance_preserving;
    throw ConfigError("unknown schedule kind '" + tag + "'");
}

const char* schedule_kind_name(ScheduleKind k) {
    return k == ScheduleKind::flow_matching ? "flow-matching" : "variance-preserving";
}

std::pair<double, double> alpha_sigma(const NoiseSchedule& sched, double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("alpha_sigma: t must lie in [0,1], got " + std::to_string(t));
    // Pin the endpoints so boundary identities hold exactly (cos(pi/2) is only
    // ~6e-17 in floating point).
    if (t == 0.0) return {1.0, 0.0};
    if (t == 1.0) return {0.0, 1.0};
    switch (sched.kind) {
        case ScheduleKind::flow_matching:
            return {1.0 - t, t};
        case ScheduleKind::variance_preserving:
            return {std::cos(0.5 * M_PI * t), std::sin(0.5 * M_PI * t)};
    }
    throw DomainError("alpha_sigma: bad schedule kind");
}

double snr(const NoiseSchedule& sched, double t) {
    auto [a, s] = alpha_sigma(sched, t);
    if (s == 0.0) return std::numeric_limits<double>::infinity();
    return (a * a) / (s * s);
}

void TimeSamplerConfig::validate() const {
    if (!(p_std > 0.0)) throw ConfigError("time sampler: p_std must be > 0");
    if (!(delta_t > 0.0)) throw ConfigError("time sampler: delta_t must be > 0");
    if (!(0.0 < t_min && t_min < t_max && t_max <= 1.0))
        throw ConfigError("time sampler: need 0 < t_min < t_max <= 1");
}

double sample_t(const TimeSamplerConfig& cfg, Pcg64& rng) {
    double log_sigma = cfg.p_mean + cfg.p_std * rng.next_gaussian();
    double sigma_hat = std::exp(log_sigma);
    double t = sigma_hat / (1.0 + sigma_hat);
    return std::min(cfg.t_max, std::max(cfg.t_min, t));
}

double sample_s_given_t(double t, Pcg64& rng) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("sample_s_given_t: t must lie in [0,1]");
    if (t == 0.0) return 0.0;
    return t * rng.next_double();
}

double map_r(double s, double t, double delta_t) {
    if (!(s >= 0.0 && s <= t && t <= 1.0))
        throw DomainError("map_r: need 0 <= s <= t <= 1");
    if (!(delta_t > 0.0)) throw DomainError("map_r: delta_t must be > 0");
    return std::max(s, t - delta_t);
}

TimeTriple sample_triple(const TimeSamplerConfig& cfg, Pcg64& rng) {
    cfg.validate();
    TimeTriple tri;
    tri.t = sample_t(cfg, rng);
    tri.s = sample_s_given_t(tri.t, rng);
    tri.r = map_r(tri.s, tri.t, cfg.delta_t);
    return tri;
}

std::vector<double> inference_grid(int n_steps) {
    if (n_steps < 1) throw DomainError("inference_grid: N must be >= 1");
    std::vector<double> grid(static_cast<size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i)
        grid[static_cast<size_t>(i)] =
            static_cast<double>(n_steps - i) / static_cast<double>(n_steps);
    return grid;
}

}  // namespace mmql
