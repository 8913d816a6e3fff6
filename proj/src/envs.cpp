#include "mmql/envs.hpp"

#include <cmath>

#include "mmql/errors.hpp"

namespace mmql {

namespace {

constexpr double kBanditJitterMixed = 0.1;
constexpr double kBanditJitterExpert = 0.05;
constexpr double kPointmassNoiseMedium = 0.3;
// Controller gains; the expert PD pair is tuned so pointmass expert returns
// clearly dominate medium (see anchor ordering test).
constexpr double kExpertKp = 4.0;
constexpr double kExpertKd = 3.0;
constexpr double kMediumKp = 1.5;

std::vector<double> clip_to(const std::vector<double>& a, const EnvSpec& spec) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        out[i] = std::min(spec.action_hi[i], std::max(spec.action_lo[i], a[i]));
    return out;
}

}  // namespace

EnvSpec make_env_spec(const std::string& name) {
    EnvSpec spec;
    spec.name = name;
    if (name == "bandit2d" || name == "bandit2d-balanced") {
        spec.kind = name == "bandit2d" ? EnvKind::bandit2d : EnvKind::bandit2d_balanced;
        spec.state_dim = 1;
        spec.action_dim = 2;
        spec.horizon = 1;
        spec.action_lo = {-1.0, -1.0};
        spec.action_hi = {1.0, 1.0};
        spec.mode1 = {0.6, 0.6};
        spec.mode2 = {-0.6, -0.6};
        spec.mode2_weight = spec.kind == EnvKind::bandit2d ? 0.5 : 1.0;
    } else if (name == "pointmass") {
        spec.kind = EnvKind::pointmass;
        spec.state_dim = 4;  // px, py, vx, vy
        spec.action_dim = 2;
        spec.horizon = 50;
        spec.action_lo = {-1.0, -1.0};
        spec.action_hi = {1.0, 1.0};
    } else {
        throw ConfigError("unknown environment '" + name + "'");
    }
    return spec;
}

std::vector<double> env_reset(const EnvSpec& spec, Pcg64& rng) {
    switch (spec.kind) {
        case EnvKind::bandit2d:
        case EnvKind::bandit2d_balanced:
            return {0.0};
        case EnvKind::pointmass: {
            double px = rng.next_uniform(-1.0, 1.0);
            double py = rng.next_uniform(-1.0, 1.0);
            return {px, py, 0.0, 0.0};
        }
    }
    throw DomainError("env_reset: bad env kind");
}

StepResult env_step(const EnvSpec& spec, const std::vector<double>& state,
                    const std::vector<double>& action) {
    if (static_cast<int>(state.size()) != spec.state_dim ||
        static_cast<int>(action.size()) != spec.action_dim)
        throw DimensionError("env_step: state/action dimensions do not match spec");
    StepResult res;
    switch (spec.kind) {
        case EnvKind::bandit2d:
        case EnvKind::bandit2d_balanced: {
            double d1 = 0.0, d2 = 0.0;
            for (int i = 0; i < 2; ++i) {
                double e1 = action[static_cast<size_t>(i)] - spec.mode1[static_cast<size_t>(i)];
                double e2 = action[static_cast<size_t>(i)] - spec.mode2[static_cast<size_t>(i)];
                d1 += e1 * e1;
                d2 += e2 * e2;
            }
            res.reward = std::exp(-d1 / 0.02) + spec.mode2_weight * std::exp(-d2 / 0.02);
            res.next_state = {0.0};
            res.done = true;
            return res;
        }
        case EnvKind::pointmass: {
            double vx = state[2] + spec.dt * action[0];
            double vy = state[3] + spec.dt * action[1];
            vx = std::min(1.0, std::max(-1.0, vx));
            vy = std::min(1.0, std::max(-1.0, vy));
            double px = state[0] + spec.dt * vx;
            double py = state[1] + spec.dt * vy;
            double dist = std::sqrt(px * px + py * py);
            res.next_state = {px, py, vx, vy};
            res.reward = -dist;
            res.done = dist < spec.goal_radius;
            return res;
        }
    }
    throw DomainError("env_step: bad env kind");
}

Behavior parse_behavior(const std::string& tag) {
    if (tag == "expert") return Behavior::expert;
    if (tag == "medium") return Behavior::medium;
    if (tag == "mixed") return Behavior::mixed;
    throw ConfigError("unknown behavior '" + tag + "'");
}

void BehaviorPolicy::begin_episode(Pcg64& rng) {
    switch (spec_.kind) {
        case EnvKind::bandit2d:
        case EnvKind::bandit2d_balanced: {
            double p_mode1 = kind_ == Behavior::expert ? 1.0
                             : kind_ == Behavior::medium ? 0.5
                                                         : 0.25;
            pick_mode1_ = rng.next_double() < p_mode1;
            return;
        }
        case EnvKind::pointmass:
            pick_expert_ = kind_ == Behavior::expert ||
                           (kind_ == Behavior::mixed && rng.next_double() < 0.5);
            return;
    }
}

std::vector<double> BehaviorPolicy::act(const std::vector<double>& state, Pcg64& rng) const {
    switch (spec_.kind) {
        case EnvKind::bandit2d:
        case EnvKind::bandit2d_balanced: {
            const std::vector<double>& mode = pick_mode1_ ? spec_.mode1 : spec_.mode2;
            double jitter = kind_ == Behavior::expert ? kBanditJitterExpert : kBanditJitterMixed;
            std::vector<double> a(2);
            for (int i = 0; i < 2; ++i)
                a[static_cast<size_t>(i)] =
                    mode[static_cast<size_t>(i)] + jitter * rng.next_gaussian();
            return clip_to(a, spec_);
        }
        case EnvKind::pointmass: {
            std::vector<double> a(2);
            if (kind_ == Behavior::expert || (kind_ == Behavior::mixed && pick_expert_)) {
                a[0] = -kExpertKp * state[0] - kExpertKd * state[2];
                a[1] = -kExpertKp * state[1] - kExpertKd * state[3];
            } else {
                a[0] = -kMediumKp * state[0] + kPointmassNoiseMedium * rng.next_gaussian();
                a[1] = -kMediumKp * state[1] + kPointmassNoiseMedium * rng.next_gaussian();
            }
            return clip_to(a, spec_);
        }
    }
    throw DomainError("BehaviorPolicy::act: bad env kind");
}

EpisodeResult rollout_episode(
    const EnvSpec& spec,
    const std::function<std::vector<double>(const std::vector<double>&)>& act,
    Pcg64& reset_rng, bool record) {
    EpisodeResult ep;
    std::vector<double> state = env_reset(spec, reset_rng);
    for (int step = 0; step < spec.horizon; ++step) {
        std::vector<double> action = act(state);
        StepResult sr = env_step(spec, state, action);
        bool done = sr.done || step == spec.horizon - 1;
        ep.ret += sr.reward;
        if (record) {
            Transition t;
            t.s = state;
            t.a = std::move(action);
            t.r = sr.reward;
            t.s2 = sr.next_state;
            t.done = done;
            ep.transitions.push_back(std::move(t));
        }
        state = std::move(sr.next_state);
        if (done) break;
    }
    return ep;
}

Dataset gen_dataset(const EnvSpec& spec, Behavior behavior, int episodes, uint64_t seed) {
    if (episodes < 1) throw ConfigError("gen_dataset: episodes must be >= 1");
    Pcg64 rng = derive_rng(seed, "data");
    BehaviorPolicy pol(spec, behavior);
    std::vector<Transition> raw;
    for (int ep = 0; ep < episodes; ++ep) {
        pol.begin_episode(rng);
        EpisodeResult res = rollout_episode(
            spec, [&](const std::vector<double>& s) { return pol.act(s, rng); }, rng, true);
        for (Transition& t : res.transitions) raw.push_back(std::move(t));
    }
    Dataset ds;
    ds.env = spec.name;
    ds.state_dim = spec.state_dim;
    ds.action_dim = spec.action_dim;
    ds.norm = compute_norm_stats(raw, spec.state_dim, spec.action_dim);
    ds.transitions.reserve(raw.size());
    for (const Transition& t : raw) {
        Transition n;
        n.s = ds.norm.normalize_state(t.s);
        n.a = ds.norm.normalize_action(t.a);
        n.r = t.r;
        n.s2 = ds.norm.normalize_state(t.s2);
        n.done = t.done;
        ds.transitions.push_back(std::move(n));
    }
    return ds;
}

Anchors compute_anchors(const EnvSpec& spec, int episodes, uint64_t seed) {
    if (episodes < 1) throw ConfigError("compute_anchors: episodes must be >= 1");
    Anchors anchors;
    {
        Pcg64 rng = derive_rng(seed, "anchor-random");
        double total = 0.0;
        for (int ep = 0; ep < episodes; ++ep) {
            auto uniform_act = [&](const std::vector<double>&) {
                std::vector<double> a(static_cast<size_t>(spec.action_dim));
                for (int i = 0; i < spec.action_dim; ++i)
                    a[static_cast<size_t>(i)] =
                        rng.next_uniform(spec.action_lo[static_cast<size_t>(i)],
                                         spec.action_hi[static_cast<size_t>(i)]);
                return a;
            };
            total += rollout_episode(spec, uniform_act, rng, false).ret;
        }
        anchors.j_random = total / episodes;
    }
    {
        Pcg64 rng = derive_rng(seed, "anchor-expert");
        BehaviorPolicy expert(spec, Behavior::expert);
        double total = 0.0;
        for (int ep = 0; ep < episodes; ++ep) {
            expert.begin_episode(rng);
            total += rollout_episode(
                         spec, [&](const std::vector<double>& s) { return expert.act(s, rng); },
                         rng, false)
                         .ret;
        }
        anchors.j_expert = total / episodes;
    }
    return anchors;
}

double normalized_score(const Anchors& anchors, double mean_return) {
    double gap = anchors.j_expert - anchors.j_random;
    if (std::fabs(gap) < 1e-9)
        throw DomainError("normalized_score: degenerate anchors (expert == random)");
    return 100.0 * (mean_return - anchors.j_random) / gap;
}

}  // namespace mmql
