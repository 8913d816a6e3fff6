#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmql/dataset.hpp"
#include "mmql/rng.hpp"

namespace mmql {

enum class EnvKind { bandit2d, bandit2d_balanced, pointmass };

// bandit2d: one-step env with a constant dummy state and a two-bump reward
// whose high-value mode is the *rarer* one in the mixed dataset. The
// "-balanced" variant weights both bumps equally (used where mode values must
// not matter). pointmass: 2-D double integrator steered to the origin.
struct EnvSpec {
    EnvKind kind = EnvKind::bandit2d;
    std::string name;
    int state_dim = 0;
    int action_dim = 0;
    int horizon = 1;
    std::vector<double> action_lo, action_hi;

    // bandit parameters
    std::vector<double> mode1, mode2;
    double mode2_weight = 0.5;

    // pointmass parameters
    double dt = 0.1;
    double goal_radius = 0.05;
};

EnvSpec make_env_spec(const std::string& name);

std::vector<double> env_reset(const EnvSpec& spec, Pcg64& rng);

struct StepResult {
    std::vector<double> next_state;
    double reward = 0.0;
    bool done = false;  // true termination only; the horizon cut is the caller's
};

StepResult env_step(const EnvSpec& spec, const std::vector<double>& state,
                    const std::vector<double>& action);

enum class Behavior { expert, medium, mixed };
Behavior parse_behavior(const std::string& tag);

// Scripted data-collection policy. Episode-level choices (e.g. which bandit
// mode, expert-vs-medium controller) are drawn in begin_episode.
class BehaviorPolicy {
public:
    BehaviorPolicy(const EnvSpec& spec, Behavior kind) : spec_(spec), kind_(kind) {}
    void begin_episode(Pcg64& rng);
    std::vector<double> act(const std::vector<double>& state, Pcg64& rng) const;

private:
    const EnvSpec& spec_;
    Behavior kind_;
    bool pick_mode1_ = true;   // bandit episodes
    bool pick_expert_ = true;  // pointmass mixed episodes
};

// Full-episode rollout under an arbitrary action function; the horizon cut is
// applied here and marked done in the recorded transitions.
struct EpisodeResult {
    double ret = 0.0;
    std::vector<Transition> transitions;  // raw (unnormalized)
};
EpisodeResult rollout_episode(const EnvSpec& spec,
                              const std::function<std::vector<double>(const std::vector<double>&)>& act,
                              Pcg64& reset_rng, bool record);

// Scripted-behavior dataset: raw rollouts, then normalization to
// zero-mean/std-0.5 with the stats recorded in the header.
Dataset gen_dataset(const EnvSpec& spec, Behavior behavior, int episodes, uint64_t seed);

struct Anchors {
    double j_random = 0.0;
    double j_expert = 0.0;
};

// Mean returns of the uniform-random and scripted-expert policies.
Anchors compute_anchors(const EnvSpec& spec, int episodes, uint64_t seed);

// 100 * (J - J_random) / (J_expert - J_random).
double normalized_score(const Anchors& anchors, double mean_return);

}  // namespace mmql
