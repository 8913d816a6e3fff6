#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "mmql/critic.hpp"
#include "mmql/dataset.hpp"
#include "mmql/envs.hpp"
#include "mmql/mmd.hpp"
#include "mmql/policy.hpp"
#include "mmql/schedule.hpp"

namespace mmql {

enum class TrainMode { bc, offline, online_finetune };
TrainMode parse_train_mode(const std::string& tag);
const char* train_mode_name(TrainMode m);

struct TrainConfig {
    int batch = 256;
    int particles_m = 4;
    double eta = 0.5;
    double gamma = 0.99;
    double ema_alpha = 0.995;
    double lr = 1e-3;
    double grad_clip = 8.0;
    int steps_per_epoch = 1000;
    int epochs = 10;
    bool q_normalize = false;
    uint64_t seed = 1;
    TrainMode mode = TrainMode::offline;
    long online_steps = 0;
    size_t online_buffer_capacity = 1000000;
    int eval_episodes = 20;
    int eval_every = 1000;

    int policy_hidden = 256;
    int policy_layers = 3;
    int num_steps = 2;  // sampler steps N
    double sigma_d = 0.5;
    int critic_hidden = 256;
    int critic_layers = 3;

    NoiseSchedule sched;
    TimeSamplerConfig time;
    KernelConfig kernel;

    std::string config_hash;  // recorded in checkpoints

    void validate() const;
};

struct ActorLossResult {
    double loss = 0.0;
    double bc_term = 0.0;  // weighted grouped MMD^2
    double q_term = 0.0;   // mean min-Q under the sampler (0 when eta == 0)
    ParamStore grads;      // d loss / d policy params
};

// Eq-for-eq assembly of the actor objective: grouped-MMD consistency loss on
// (states, actions) plus -eta * mean min-Q of freshly sampled actions.
// Gradients flow only into policy.params; teacher and critics are constants.
ActorLossResult actor_loss(const PolicyNet& policy, const CriticPair& critics,
                           const Mat& states, const Mat& actions, const TrainConfig& cfg,
                           const ActionSpaceSpec& space, Pcg64& rng_time, Pcg64& rng_noise,
                           Pcg64& rng_actor);

struct RunMetricsRow {
    long step = 0;
    double critic_loss = 0.0;
    double bc_loss = 0.0;
    double q_term = 0.0;
    double q_abs_mean = 0.0;
    bool has_eval = false;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
    double norm_score = 0.0;
    double wallclock_s = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,critic_loss,bc_loss,q_term,q_abs_mean,eval_return_mean,eval_return_std,"
    "norm_score,wallclock_s";

std::string metrics_row_csv(const RunMetricsRow& row);

struct EvalResult {
    double mean_return = 0.0;
    double std_return = 0.0;
    double norm_score = 0.0;
};

class Trainer {
public:
    // Fresh networks; dataset supplies dimensions and normalization.
    Trainer(Dataset ds, TrainConfig cfg);

    // Resume from a checkpoint directory (finetune). `buffer_seed` is the
    // offline dataset used to pre-fill the replay buffer; its normalization
    // stats must match the checkpoint's.
    Trainer(const std::string& ckpt_dir, Dataset buffer_seed, TrainConfig cfg);

    // Offline/bc loop: epochs * steps_per_epoch steps of uniform minibatches.
    void train(const std::string& run_dir);
    // Online loop: one env step + one gradient step per iteration.
    void finetune(const std::string& run_dir);

    EvalResult evaluate(int episodes, uint64_t eval_seed) const;

    void save_checkpoint_dir(const std::string& dir) const;

    // One optimization step on explicit indices into the current data source;
    // exposed for tests.
    RunMetricsRow train_step_on(const std::vector<size_t>& indices);
    std::vector<size_t> draw_batch_indices();

    const PolicyNet& policy() const { return policy_; }
    PolicyNet& policy() { return policy_; }
    const CriticPair& critics() const { return critics_; }
    const ActionSpaceSpec& action_space() const { return space_; }
    const EnvSpec& env() const { return env_; }
    const Anchors& anchors() const { return anchors_; }
    const Dataset& dataset() const { return data_; }
    long step() const { return step_; }
    long reward_reads() const { return reward_reads_; }
    const TrainConfig& config() const { return cfg_; }

private:
    void init_common();
    TransitionBatch gather_batch(const std::vector<size_t>& indices, bool with_reward);
    const Transition& data_at(size_t i) const;
    size_t data_size() const;

    TrainConfig cfg_;
    Dataset data_;
    EnvSpec env_;
    ActionSpaceSpec space_;  // normalized-space bounds
    Anchors anchors_;
    PolicyNet policy_;
    CriticPair critics_;
    AdamState opt_policy_, opt_q1_, opt_q2_;
    Pcg64 rng_batch_, rng_time_, rng_noise_, rng_actor_, rng_critic_, rng_env_;
    long step_ = 0;
    long reward_reads_ = 0;
    std::optional<ReplayBuffer> buffer_;  // engaged in finetune mode
};

// The normalized-space action bounds corresponding to the raw env bounds.
ActionSpaceSpec normalized_action_space(const EnvSpec& env, const NormStats& norm,
                                        double sigma_d);

// Stand-alone evaluation of a frozen policy against the raw environment;
// states are normalized on the way in, actions denormalized and clipped on
// the way out. Deterministic given eval_seed.
EvalResult evaluate_policy(const PolicyNet& policy, const ParamStore& params,
                           const EnvSpec& env, const NormStats& norm,
                           const ActionSpaceSpec& space, const NoiseSchedule& sched,
                           int n_steps, int episodes, uint64_t eval_seed,
                           const Anchors& anchors);

// Checkpoint directory I/O: manifest.txt plus one nn-core checkpoint per
// network.
struct TrainerSnapshot {
    std::map<std::string, std::string> manifest;
    EnvSpec env;
    NormStats norm;
    PolicyNet policy;
    CriticPair critics;
    long step = 0;
    double sigma_d = 0.5;
    ScheduleKind sched_kind = ScheduleKind::flow_matching;
};
TrainerSnapshot load_checkpoint_dir(const std::string& dir);

// Evaluation entry point used by the CLI.
EvalResult evaluate_checkpoint(const std::string& ckpt_dir, int episodes, int n_steps,
                               uint64_t eval_seed);

}  // namespace mmql
