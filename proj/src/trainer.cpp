#include "mmql/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmql/checkpoint.hpp"
#include "mmql/errors.hpp"

namespace mmql {

namespace fs = std::filesystem;

// Fixed seed/size for the normalized-score anchors so every run agrees on the
// score scale.
constexpr uint64_t kAnchorSeed = 1000003;
constexpr int kAnchorEpisodes = 1000;

TrainMode parse_train_mode(const std::string& tag) {
    if (tag == "bc") return TrainMode::bc;
    if (tag == "offline") return TrainMode::offline;
    if (tag == "online-finetune") return TrainMode::online_finetune;
    throw ConfigError("unknown mode '" + tag + "'");
}

const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::bc: return "bc";
        case TrainMode::offline: return "offline";
        case TrainMode::online_finetune: return "online-finetune";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (batch < 1) throw ConfigError("train.batch must be >= 1");
    if (particles_m < 1) throw ConfigError("mmd.particles_M must be >= 1");
    if (batch % particles_m != 0)
        throw ConfigError("mmd.particles_M must divide train.batch (" +
                          std::to_string(particles_m) + " does not divide " +
                          std::to_string(batch) + ")");
    if (eta < 0.0) throw ConfigError("train.eta must be >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train.gamma must be in [0,1)");
    if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0))
        throw ConfigError("train.ema_alpha must be in [0,1]");
    if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
    if (!(grad_clip > 0.0)) throw ConfigError("train.grad_clip must be > 0");
    if (steps_per_epoch < 1) throw ConfigError("train.steps_per_epoch must be >= 1");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (online_steps < 0) throw ConfigError("online.steps must be >= 0");
    if (online_buffer_capacity < 1) throw ConfigError("online.buffer_capacity must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval.episodes must be >= 1");
    if (eval_every < 1) throw ConfigError("eval.every must be >= 1");
    if (policy_hidden < 1 || policy_layers < 1 || critic_hidden < 1 || critic_layers < 1)
        throw ConfigError("network dimensions must be >= 1");
    if (num_steps < 1) throw ConfigError("policy.num_steps must be >= 1");
    if (!(sigma_d > 0.0)) throw ConfigError("policy.sigma_d must be > 0");
    time.validate();
    kernel.validate();
}

ActorLossResult actor_loss(const PolicyNet& policy, const CriticPair& critics,
                           const Mat& states, const Mat& actions, const TrainConfig& cfg,
                           const ActionSpaceSpec& space, Pcg64& rng_time, Pcg64& rng_noise,
                           Pcg64& rng_actor) {
    int n = states.rows;
    int ad = policy.action_dim;
    if (n == 0) throw DimensionError("actor_loss: empty batch");
    if (n % cfg.particles_m != 0)
        throw ConfigError("actor_loss: particles M must divide the batch size");
    int m = cfg.particles_m;
    int n_groups = n / m;

    std::vector<TimeTriple> triples(static_cast<size_t>(n_groups));
    for (auto& tri : triples) tri = sample_triple(cfg.time, rng_time);
    std::vector<double> svec(static_cast<size_t>(n)), rvec(static_cast<size_t>(n)),
        tvec(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const TimeTriple& tri = triples[static_cast<size_t>(i / m)];
        svec[static_cast<size_t>(i)] = tri.s;
        rvec[static_cast<size_t>(i)] = tri.r;
        tvec[static_cast<size_t>(i)] = tri.t;
    }

    // Noised actions a_t and their on-path resamplings a_r (constants).
    Mat a_t(n, ad), a_r(n, ad);
    for (int i = 0; i < n; ++i) {
        auto [alpha_t, sigma_t] = alpha_sigma(cfg.sched, tvec[static_cast<size_t>(i)]);
        auto [cx, cxt] =
            ddim_coeffs(rvec[static_cast<size_t>(i)], tvec[static_cast<size_t>(i)], cfg.sched);
        for (int c = 0; c < ad; ++c) {
            double eps = space.sigma_d * rng_noise.next_gaussian();
            double at = alpha_t * actions.at(i, c) + sigma_t * eps;
            a_t.at(i, c) = at;
            a_r.at(i, c) = cx * actions.at(i, c) + cxt * at;
        }
    }

    Tape tape;
    Tape::Ref u = jump_node(tape, policy, policy.params, /*trainable=*/true, states,
                            tape.constant(a_t), svec, tvec, cfg.sched);
    Mat v = jump(policy, policy.target, states, a_r, svec, rvec, cfg.sched);
    Tape::Ref bc = mmd2_vstat_node(tape, cfg.kernel, u, std::move(v), triples, m, cfg.sched);

    Tape::Ref loss = bc;
    double q_term_val = 0.0;
    if (cfg.eta > 0.0) {
        Mat noise(n, ad);
        for (double& x : noise.d) x = space.sigma_d * rng_actor.next_gaussian();
        Tape::Ref a_hat = sample_actions_node(tape, policy, policy.params, states,
                                              std::move(noise), cfg.num_steps, space, cfg.sched);
        Tape::Ref q_in = tape.concat_cols({tape.constant(states), a_hat});
        Tape::Ref q1 = mlp_forward(tape, critics.spec, critics.q1, q_in, /*trainable=*/false);
        Tape::Ref q2 = mlp_forward(tape, critics.spec, critics.q2, q_in, /*trainable=*/false);
        Tape::Ref q_min = tape.min2(q1, q2);
        Tape::Ref q_term = tape.mean_all(q_min);
        q_term_val = tape.value(q_term).d[0];
        double eta_eff = cfg.eta;
        if (cfg.q_normalize) {
            double q_abs = 0.0;
            for (double qv : tape.value(q_min).d) q_abs += std::fabs(qv);
            eta_eff = cfg.eta / std::max(q_abs / n, 1e-3);
        }
        loss = tape.add(bc, tape.mul_scalar(q_term, -eta_eff));
    }

    if (tape.has_params_from(policy.target) || tape.has_params_from(critics.q1) ||
        tape.has_params_from(critics.q2) || tape.has_params_from(critics.q1_target) ||
        tape.has_params_from(critics.q2_target))
        throw UsageError("actor_loss: gradient leaked into frozen parameters");

    ActorLossResult res;
    res.loss = tape.value(loss).d[0];
    res.bc_term = tape.value(bc).d[0];
    res.q_term = q_term_val;
    if (!std::isfinite(res.loss)) throw DivergenceError("actor_loss: non-finite loss");
    tape.backward(loss);
    res.grads = tape.grads_for(policy.params);
    return res;
}

std::string metrics_row_csv(const RunMetricsRow& row) {
    std::ostringstream ss;
    ss << row.step << "," << format_double(row.critic_loss) << ","
       << format_double(row.bc_loss) << "," << format_double(row.q_term) << ","
       << format_double(row.q_abs_mean) << ",";
    if (row.has_eval)
        ss << format_double(row.eval_return_mean) << "," << format_double(row.eval_return_std)
           << "," << format_double(row.norm_score);
    else
        ss << ",,";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", row.wallclock_s);
    ss << "," << buf;
    return ss.str();
}

ActionSpaceSpec normalized_action_space(const EnvSpec& env, const NormStats& norm,
                                        double sigma_d) {
    ActionSpaceSpec sp;
    sp.dim = env.action_dim;
    sp.sigma_d = sigma_d;
    sp.lo.resize(static_cast<size_t>(env.action_dim));
    sp.hi.resize(static_cast<size_t>(env.action_dim));
    for (int i = 0; i < env.action_dim; ++i) {
        size_t k = static_cast<size_t>(i);
        sp.lo[k] = (env.action_lo[k] - norm.action_mean[k]) * norm.action_scale[k];
        sp.hi[k] = (env.action_hi[k] - norm.action_mean[k]) * norm.action_scale[k];
    }
    sp.validate();
    return sp;
}

EvalResult evaluate_policy(const PolicyNet& policy, const ParamStore& params,
                           const EnvSpec& env, const NormStats& norm,
                           const ActionSpaceSpec& space, const NoiseSchedule& sched,
                           int n_steps, int episodes, uint64_t eval_seed,
                           const Anchors& anchors) {
    if (episodes < 1) throw ConfigError("evaluate_policy: episodes must be >= 1");
    std::vector<double> returns(static_cast<size_t>(episodes));
    for (int ep = 0; ep < episodes; ++ep) {
        Pcg64 rng = derive_rng(eval_seed, "eval", static_cast<uint64_t>(ep));
        auto act = [&](const std::vector<double>& raw_state) {
            std::vector<double> obs = norm.normalize_state(raw_state);
            std::vector<double> a_norm =
                sample_action(policy, params, obs, n_steps, space, sched, rng);
            std::vector<double> a_raw = norm.denormalize_action(a_norm);
            for (int i = 0; i < env.action_dim; ++i) {
                size_t k = static_cast<size_t>(i);
                a_raw[k] = std::min(env.action_hi[k], std::max(env.action_lo[k], a_raw[k]));
            }
            return a_raw;
        };
        returns[static_cast<size_t>(ep)] = rollout_episode(env, act, rng, false).ret;
    }
    EvalResult res;
    for (double r : returns) res.mean_return += r;
    res.mean_return /= episodes;
    double ss = 0.0;
    for (double r : returns) ss += (r - res.mean_return) * (r - res.mean_return);
    res.std_return = std::sqrt(ss / episodes);
    res.norm_score = normalized_score(anchors, res.mean_return);
    return res;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(Dataset ds, TrainConfig cfg) : cfg_(std::move(cfg)), data_(std::move(ds)) {
    if (cfg_.mode == TrainMode::bc) cfg_.eta = 0.0;
    cfg_.validate();
    data_.validate();
    if (data_.transitions.empty()) throw DataError("trainer: dataset is empty");
    env_ = make_env_spec(data_.env);
    if (env_.state_dim != data_.state_dim || env_.action_dim != data_.action_dim)
        throw DataError("trainer: dataset dimensions do not match env '" + env_.name + "'");
    Pcg64 rng_policy = derive_rng(cfg_.seed, "init/policy");
    policy_ = make_policy_net(env_.state_dim, env_.action_dim, cfg_.policy_hidden,
                              cfg_.policy_layers, rng_policy);
    Pcg64 rng_critic = derive_rng(cfg_.seed, "init/critic");
    critics_ = make_critic_pair(env_.state_dim, env_.action_dim, cfg_.critic_hidden,
                                cfg_.critic_layers, rng_critic);
    init_common();
}

Trainer::Trainer(const std::string& ckpt_dir, Dataset buffer_seed, TrainConfig cfg)
    : cfg_(std::move(cfg)), data_(std::move(buffer_seed)) {
    if (cfg_.mode == TrainMode::bc) cfg_.eta = 0.0;
    cfg_.validate();
    data_.validate();
    TrainerSnapshot snap = load_checkpoint_dir(ckpt_dir);
    if (data_.env != snap.env.name)
        throw DataError("finetune: dataset env '" + data_.env + "' does not match checkpoint env '" +
                        snap.env.name + "'");
    auto same = [](const std::vector<double>& a, const std::vector<double>& b) { return a == b; };
    if (!same(data_.norm.state_mean, snap.norm.state_mean) ||
        !same(data_.norm.state_scale, snap.norm.state_scale) ||
        !same(data_.norm.action_mean, snap.norm.action_mean) ||
        !same(data_.norm.action_scale, snap.norm.action_scale))
        throw DataError("finetune: dataset normalization stats do not match checkpoint");
    env_ = snap.env;
    policy_ = std::move(snap.policy);
    critics_ = std::move(snap.critics);
    // Architecture comes from the checkpoint.
    cfg_.policy_hidden = policy_.spec.hidden_dim;
    cfg_.policy_layers = policy_.spec.layers;
    cfg_.critic_hidden = critics_.spec.hidden_dim;
    cfg_.critic_layers = critics_.spec.layers;
    step_ = snap.step;
    init_common();
    buffer_.emplace(cfg_.online_buffer_capacity);
    for (const Transition& t : data_.transitions) buffer_->push(t);
}

void Trainer::init_common() {
    space_ = normalized_action_space(env_, data_.norm, cfg_.sigma_d);
    anchors_ = compute_anchors(env_, kAnchorEpisodes, kAnchorSeed);
    opt_policy_ = AdamState::init(policy_.params, cfg_.lr);
    opt_q1_ = AdamState::init(critics_.q1, cfg_.lr);
    opt_q2_ = AdamState::init(critics_.q2, cfg_.lr);
    rng_batch_ = derive_rng(cfg_.seed, "batch");
    rng_time_ = derive_rng(cfg_.seed, "time");
    rng_noise_ = derive_rng(cfg_.seed, "noise");
    rng_actor_ = derive_rng(cfg_.seed, "actor-action");
    rng_critic_ = derive_rng(cfg_.seed, "critic-action");
    rng_env_ = derive_rng(cfg_.seed, "env");
}

const Transition& Trainer::data_at(size_t i) const {
    return buffer_ ? buffer_->at(i) : data_.transitions[i];
}

size_t Trainer::data_size() const { return buffer_ ? buffer_->size() : data_.transitions.size(); }

std::vector<size_t> Trainer::draw_batch_indices() {
    size_t n = data_size();
    if (n == 0) throw DataError("trainer: no transitions to sample");
    std::vector<size_t> idx(static_cast<size_t>(cfg_.batch));
    for (auto& i : idx) i = rng_batch_.next_below(n);
    return idx;
}

TransitionBatch Trainer::gather_batch(const std::vector<size_t>& indices, bool with_reward) {
    int n = static_cast<int>(indices.size());
    TransitionBatch b;
    b.states = Mat(n, env_.state_dim);
    b.actions = Mat(n, env_.action_dim);
    if (with_reward) {
        b.rewards = Mat(n, 1);
        b.next_states = Mat(n, env_.state_dim);
        b.dones.resize(static_cast<size_t>(n));
        reward_reads_ += n;  // instrumented: counts reward-field materializations
    }
    for (int i = 0; i < n; ++i) {
        const Transition& t = data_at(indices[static_cast<size_t>(i)]);
        for (int c = 0; c < env_.state_dim; ++c) b.states.at(i, c) = t.s[static_cast<size_t>(c)];
        for (int c = 0; c < env_.action_dim; ++c) b.actions.at(i, c) = t.a[static_cast<size_t>(c)];
        if (with_reward) {
            b.rewards.at(i, 0) = t.r;
            for (int c = 0; c < env_.state_dim; ++c)
                b.next_states.at(i, c) = t.s2[static_cast<size_t>(c)];
            b.dones[static_cast<size_t>(i)] = t.done ? 1.0 : 0.0;
        }
    }
    return b;
}

RunMetricsRow Trainer::train_step_on(const std::vector<size_t>& indices) {
    RunMetricsRow row;
    row.step = ++step_;
    if (cfg_.mode != TrainMode::bc) {
        TransitionBatch cb = gather_batch(indices, /*with_reward=*/true);
        CriticLossResult cres = critic_loss(critics_, cb, policy_, space_, cfg_.sched,
                                            cfg_.gamma, cfg_.num_steps, rng_critic_);
        clip_global_norm(cres.grad_q1, cfg_.grad_clip);
        adam_step(critics_.q1, cres.grad_q1, opt_q1_);
        clip_global_norm(cres.grad_q2, cfg_.grad_clip);
        adam_step(critics_.q2, cres.grad_q2, opt_q2_);
        row.critic_loss = cres.loss;
        row.q_abs_mean = cres.q_abs_mean;
    }
    TransitionBatch ab = gather_batch(indices, /*with_reward=*/false);
    ActorLossResult ares = actor_loss(policy_, critics_, ab.states, ab.actions, cfg_, space_,
                                      rng_time_, rng_noise_, rng_actor_);
    clip_global_norm(ares.grads, cfg_.grad_clip);
    adam_step(policy_.params, ares.grads, opt_policy_);
    row.bc_loss = ares.bc_term;
    row.q_term = ares.q_term;
    ema_update(policy_.target, policy_.params, cfg_.ema_alpha);
    if (cfg_.mode != TrainMode::bc) {
        ema_update(critics_.q1_target, critics_.q1, cfg_.ema_alpha);
        ema_update(critics_.q2_target, critics_.q2, cfg_.ema_alpha);
    }
    return row;
}

EvalResult Trainer::evaluate(int episodes, uint64_t eval_seed) const {
    return evaluate_policy(policy_, policy_.params, env_, data_.norm, space_, cfg_.sched,
                           cfg_.num_steps, episodes, eval_seed, anchors_);
}

namespace {

std::string ckpt_step_dir(const std::string& run_dir, long step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_step_%08ld", step);
    return run_dir + "/" + buf;
}

void write_anchors_file(const std::string& run_dir, const EnvSpec& env, const Anchors& a) {
    std::ofstream os(run_dir + "/anchors.txt", std::ios::binary);
    os << "env\t" << env.name << "\nj_random\t" << format_double(a.j_random) << "\nj_expert\t"
       << format_double(a.j_expert) << "\nepisodes\t" << kAnchorEpisodes << "\nseed\t"
       << kAnchorSeed << "\n";
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void Trainer::train(const std::string& run_dir) {
    fs::create_directories(run_dir);
    std::ofstream metrics(run_dir + "/metrics.csv", std::ios::binary);
    if (!metrics) throw DataError("trainer: cannot write metrics.csv in '" + run_dir + "'");
    metrics << kMetricsHeader << "\n";
    write_anchors_file(run_dir, env_, anchors_);
    long total = static_cast<long>(cfg_.epochs) * cfg_.steps_per_epoch;
    auto t0 = std::chrono::steady_clock::now();
    for (long k = 0; k < total; ++k) {
        RunMetricsRow row = train_step_on(draw_batch_indices());
        if (step_ % cfg_.eval_every == 0 || k == total - 1) {
            EvalResult er = evaluate(cfg_.eval_episodes, cfg_.seed + static_cast<uint64_t>(step_));
            row.has_eval = true;
            row.eval_return_mean = er.mean_return;
            row.eval_return_std = er.std_return;
            row.norm_score = er.norm_score;
            save_checkpoint_dir(ckpt_step_dir(run_dir, step_));
        }
        row.wallclock_s = elapsed_s(t0);
        metrics << metrics_row_csv(row) << "\n";
    }
    save_checkpoint_dir(run_dir + "/ckpt_final");
}

void Trainer::finetune(const std::string& run_dir) {
    if (!buffer_) throw UsageError("finetune: trainer was not constructed from a checkpoint");
    fs::create_directories(run_dir);
    std::ofstream metrics(run_dir + "/metrics.csv", std::ios::binary);
    if (!metrics) throw DataError("trainer: cannot write metrics.csv in '" + run_dir + "'");
    metrics << kMetricsHeader << "\n";
    write_anchors_file(run_dir, env_, anchors_);
    auto t0 = std::chrono::steady_clock::now();

    if (cfg_.online_steps == 0) {
        EvalResult er = evaluate(cfg_.eval_episodes, cfg_.seed + static_cast<uint64_t>(step_));
        RunMetricsRow row;
        row.step = step_;
        row.has_eval = true;
        row.eval_return_mean = er.mean_return;
        row.eval_return_std = er.std_return;
        row.norm_score = er.norm_score;
        row.wallclock_s = elapsed_s(t0);
        metrics << metrics_row_csv(row) << "\n";
        save_checkpoint_dir(run_dir + "/ckpt_final");
        return;
    }

    std::vector<double> cur_state;
    int ep_step = 0;
    bool need_reset = true;
    for (long k = 0; k < cfg_.online_steps; ++k) {
        if (need_reset) {
            cur_state = env_reset(env_, rng_env_);
            ep_step = 0;
            need_reset = false;
        }
        std::vector<double> obs = data_.norm.normalize_state(cur_state);
        std::vector<double> a_norm = sample_action(policy_, policy_.params, obs, cfg_.num_steps,
                                                   space_, cfg_.sched, rng_env_);
        std::vector<double> a_raw = data_.norm.denormalize_action(a_norm);
        for (int i = 0; i < env_.action_dim; ++i) {
            size_t c = static_cast<size_t>(i);
            a_raw[c] = std::min(env_.action_hi[c], std::max(env_.action_lo[c], a_raw[c]));
        }
        StepResult sr = env_step(env_, cur_state, a_raw);
        ++ep_step;
        bool done = sr.done || ep_step >= env_.horizon;
        Transition t;
        t.s = std::move(obs);
        t.a = data_.norm.normalize_action(a_raw);
        t.r = sr.reward;
        t.s2 = data_.norm.normalize_state(sr.next_state);
        t.done = done;
        buffer_->push(std::move(t));
        cur_state = std::move(sr.next_state);
        if (done) need_reset = true;

        RunMetricsRow row = train_step_on(buffer_->sample_indices(
            static_cast<size_t>(cfg_.batch), rng_batch_));
        if (step_ % cfg_.eval_every == 0 || k == cfg_.online_steps - 1) {
            EvalResult er = evaluate(cfg_.eval_episodes, cfg_.seed + static_cast<uint64_t>(step_));
            row.has_eval = true;
            row.eval_return_mean = er.mean_return;
            row.eval_return_std = er.std_return;
            row.norm_score = er.norm_score;
            save_checkpoint_dir(ckpt_step_dir(run_dir, step_));
        }
        row.wallclock_s = elapsed_s(t0);
        metrics << metrics_row_csv(row) << "\n";
    }
    save_checkpoint_dir(run_dir + "/ckpt_final");
}

// ---------------------------------------------------------------------------
// Checkpoint directories

namespace {

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::strtod(tok.c_str(), nullptr));
    return out;
}

const std::string& manifest_get(const std::map<std::string, std::string>& m,
                                const std::string& key, const std::string& dir) {
    auto it = m.find(key);
    if (it == m.end())
        throw DataError("checkpoint dir '" + dir + "': manifest missing key '" + key + "'");
    return it->second;
}

}  // namespace

void Trainer::save_checkpoint_dir(const std::string& dir) const {
    fs::create_directories(dir);
    std::ofstream mf(dir + "/manifest.txt", std::ios::binary);
    if (!mf) throw DataError("save_checkpoint_dir: cannot write manifest in '" + dir + "'");
    auto put = [&](const std::string& k, const std::string& v) { mf << k << "\t" << v << "\n"; };
    put("format", "mmql-checkpoint-dir");
    put("version", "1");
    put("config_hash", cfg_.config_hash.empty() ? "-" : cfg_.config_hash);
    put("env", env_.name);
    put("state_dim", std::to_string(env_.state_dim));
    put("action_dim", std::to_string(env_.action_dim));
    put("step", std::to_string(step_));
    put("policy_hidden", std::to_string(policy_.spec.hidden_dim));
    put("policy_layers", std::to_string(policy_.spec.layers));
    put("critic_hidden", std::to_string(critics_.spec.hidden_dim));
    put("critic_layers", std::to_string(critics_.spec.layers));
    put("num_steps", std::to_string(cfg_.num_steps));
    put("sigma_d", format_double(cfg_.sigma_d));
    put("schedule_kind", schedule_kind_name(cfg_.sched.kind));
    put("norm_state_mean", join_doubles(data_.norm.state_mean));
    put("norm_state_scale", join_doubles(data_.norm.state_scale));
    put("norm_action_mean", join_doubles(data_.norm.action_mean));
    put("norm_action_scale", join_doubles(data_.norm.action_scale));
    if (!mf) throw DataError("save_checkpoint_dir: manifest write failed in '" + dir + "'");

    std::map<std::string, std::string> meta{
        {"config_hash", cfg_.config_hash.empty() ? "-" : cfg_.config_hash}};
    auto save_net = [&](const std::string& name, const ParamStore& store) {
        auto m = meta;
        m["net"] = name;
        save_checkpoint(dir + "/" + name + ".ckpt", m, store);
    };
    save_net("policy", policy_.params);
    save_net("policy_target", policy_.target);
    save_net("q1", critics_.q1);
    save_net("q2", critics_.q2);
    save_net("q1_target", critics_.q1_target);
    save_net("q2_target", critics_.q2_target);
}

TrainerSnapshot load_checkpoint_dir(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.txt", std::ios::binary);
    if (!mf) throw DataError("load_checkpoint_dir: cannot open manifest in '" + dir + "'");
    TrainerSnapshot snap;
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("load_checkpoint_dir: malformed manifest line in '" + dir + "'");
        snap.manifest[line.substr(0, tab)] = line.substr(tab + 1);
    }
    if (manifest_get(snap.manifest, "format", dir) != "mmql-checkpoint-dir")
        throw DataError("load_checkpoint_dir: '" + dir + "' is not a checkpoint directory");

    snap.env = make_env_spec(manifest_get(snap.manifest, "env", dir));
    snap.step = std::stol(manifest_get(snap.manifest, "step", dir));
    snap.sigma_d = std::strtod(manifest_get(snap.manifest, "sigma_d", dir).c_str(), nullptr);
    snap.sched_kind = parse_schedule_kind(manifest_get(snap.manifest, "schedule_kind", dir));
    snap.norm.state_mean = split_doubles(manifest_get(snap.manifest, "norm_state_mean", dir));
    snap.norm.state_scale = split_doubles(manifest_get(snap.manifest, "norm_state_scale", dir));
    snap.norm.action_mean = split_doubles(manifest_get(snap.manifest, "norm_action_mean", dir));
    snap.norm.action_scale = split_doubles(manifest_get(snap.manifest, "norm_action_scale", dir));

    int state_dim = std::stoi(manifest_get(snap.manifest, "state_dim", dir));
    int action_dim = std::stoi(manifest_get(snap.manifest, "action_dim", dir));
    if (state_dim != snap.env.state_dim || action_dim != snap.env.action_dim)
        throw DataError("load_checkpoint_dir: manifest dims do not match env '" +
                        snap.env.name + "'");

    snap.policy.state_dim = state_dim;
    snap.policy.action_dim = action_dim;
    snap.policy.spec.in_dim = action_dim + state_dim + 2 * kTimeFeatDim;
    snap.policy.spec.hidden_dim = std::stoi(manifest_get(snap.manifest, "policy_hidden", dir));
    snap.policy.spec.layers = std::stoi(manifest_get(snap.manifest, "policy_layers", dir));
    snap.policy.spec.out_dim = action_dim;
    snap.policy.spec.act = Act::silu;
    snap.critics.state_dim = state_dim;
    snap.critics.action_dim = action_dim;
    snap.critics.spec.in_dim = state_dim + action_dim;
    snap.critics.spec.hidden_dim = std::stoi(manifest_get(snap.manifest, "critic_hidden", dir));
    snap.critics.spec.layers = std::stoi(manifest_get(snap.manifest, "critic_layers", dir));
    snap.critics.spec.out_dim = 1;
    snap.critics.spec.act = Act::silu;

    auto load_net = [&](const std::string& name) {
        Checkpoint ck = load_checkpoint(dir + "/" + name + ".ckpt");
        return std::move(ck.params);
    };
    snap.policy.params = load_net("policy");
    snap.policy.target = load_net("policy_target");
    snap.critics.q1 = load_net("q1");
    snap.critics.q2 = load_net("q2");
    snap.critics.q1_target = load_net("q1_target");
    snap.critics.q2_target = load_net("q2_target");
    if (snap.policy.params.count() != 2 * static_cast<size_t>(snap.policy.spec.layers) ||
        snap.critics.q1.count() != 2 * static_cast<size_t>(snap.critics.spec.layers))
        throw DataError("load_checkpoint_dir: parameter layout does not match manifest specs");
    return snap;
}

EvalResult evaluate_checkpoint(const std::string& ckpt_dir, int episodes, int n_steps,
                               uint64_t eval_seed) {
    TrainerSnapshot snap = load_checkpoint_dir(ckpt_dir);
    ActionSpaceSpec space = normalized_action_space(snap.env, snap.norm, snap.sigma_d);
    NoiseSchedule sched{snap.sched_kind};
    Anchors anchors = compute_anchors(snap.env, kAnchorEpisodes, kAnchorSeed);
    return evaluate_policy(snap.policy, snap.policy.params, snap.env, snap.norm, space, sched,
                           n_steps, episodes, eval_seed, anchors);
}

}  // namespace mmql
