#include "mmql/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <utility>
#include <vector>

#include "mmql/errors.hpp"
#include "mmql/mmd.hpp"

namespace mmql {

namespace {

// The full key registry with defaults. Paper-table values where one exists;
// everything here can be set from a config file or a --key flag.
const std::vector<std::pair<const char*, const char*>>& registry() {
    static const std::vector<std::pair<const char*, const char*>> kRegistry = {
        {"mode", "offline"},
        {"seed", "1"},
        {"env", ""},
        {"data", ""},
        {"out", ""},
        {"ckpt", ""},
        {"gen.behavior", "mixed"},
        {"gen.episodes", "5000"},
        {"schedule.kind", "flow-matching"},
        {"schedule.p_mean", "-0.8"},
        {"schedule.p_std", "1.5"},
        {"schedule.delta_t", "0.05"},
        {"schedule.t_min", "0.001"},
        {"schedule.t_max", "0.999"},
        {"mmd.kernel", "rbf"},
        {"mmd.sigma", "1.2"},
        {"mmd.a", "4"},
        {"mmd.b", "2"},
        {"mmd.weight_mode", "base"},
        {"mmd.particles_M", "4"},
        {"mmd.kernel_k", "8"},
        {"mmd.bandwidth_mixture", "false"},
        {"policy.hidden_dim", "256"},
        {"policy.layers", "3"},
        {"policy.num_steps", "2"},
        {"policy.sigma_d", "0.5"},
        {"critic.hidden_dim", "256"},
        {"critic.layers", "3"},
        {"train.batch", "256"},
        {"train.eta", "0.5"},
        {"train.gamma", "0.99"},
        {"train.ema_alpha", "0.995"},
        {"train.lr", "0.001"},
        {"train.grad_clip", "8"},
        {"train.steps_per_epoch", "1000"},
        {"train.epochs", "10"},
        {"train.q_normalize", "false"},
        {"online.steps", "0"},
        {"online.buffer_capacity", "1000000"},
        {"eval.episodes", "20"},
        {"eval.every", "1000"},
        {"sample.state", ""},
    };
    return kRegistry;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
    for (const auto& [k, v] : registry()) values_.emplace(k, v);
}

void RunConfig::set(const std::string& key, const std::string& value,
                    const std::string& origin) {
    auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError("unknown config key '" + key + "' (" + origin + ")");
    it->second = value;
    explicit_.insert(key);
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)),
            "file " + path + " line " + std::to_string(lineno));
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

namespace {

// Whole-string numeric parses; trailing garbage is a config error.
double parse_double_full(const std::string& key, const std::string& v) {
    if (v.empty()) throw ConfigError("config key '" + key + "' has no value");
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    return x;
}

long parse_long_full(const std::string& key, const std::string& v) {
    if (v.empty()) throw ConfigError("config key '" + key + "' has no value");
    char* end = nullptr;
    long x = std::strtol(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    return x;
}

}  // namespace

int RunConfig::get_int(const std::string& key) const {
    long x = parse_long_full(key, get(key));
    if (x < -2147483647L || x > 2147483647L)
        throw ConfigError("config key '" + key + "' out of range");
    return static_cast<int>(x);
}

long RunConfig::get_long(const std::string& key) const { return parse_long_full(key, get(key)); }

uint64_t RunConfig::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    if (v.empty()) throw ConfigError("config key '" + key + "' has no value");
    char* end = nullptr;
    unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size() || v[0] == '-')
        throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
    return static_cast<uint64_t>(x);
}

double RunConfig::get_double(const std::string& key) const {
    return parse_double_full(key, get(key));
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean (true/false)");
}

std::string RunConfig::resolved_text() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(resolved_text())));
    return buf;
}

TrainConfig train_config_from(const RunConfig& rc) {
    TrainConfig cfg;
    cfg.batch = rc.get_int("train.batch");
    cfg.particles_m = rc.get_int("mmd.particles_M");
    cfg.eta = rc.get_double("train.eta");
    cfg.gamma = rc.get_double("train.gamma");
    cfg.ema_alpha = rc.get_double("train.ema_alpha");
    cfg.lr = rc.get_double("train.lr");
    cfg.grad_clip = rc.get_double("train.grad_clip");
    cfg.steps_per_epoch = rc.get_int("train.steps_per_epoch");
    cfg.epochs = rc.get_int("train.epochs");
    cfg.q_normalize = rc.get_bool("train.q_normalize");
    cfg.seed = rc.get_u64("seed");
    cfg.mode = parse_train_mode(rc.get("mode"));
    cfg.online_steps = rc.get_long("online.steps");
    long cap = rc.get_long("online.buffer_capacity");
    if (cap < 1) throw ConfigError("online.buffer_capacity must be >= 1");
    cfg.online_buffer_capacity = static_cast<size_t>(cap);
    cfg.eval_episodes = rc.get_int("eval.episodes");
    cfg.eval_every = rc.get_int("eval.every");
    cfg.policy_hidden = rc.get_int("policy.hidden_dim");
    cfg.policy_layers = rc.get_int("policy.layers");
    cfg.num_steps = rc.get_int("policy.num_steps");
    cfg.sigma_d = rc.get_double("policy.sigma_d");
    cfg.critic_hidden = rc.get_int("critic.hidden_dim");
    cfg.critic_layers = rc.get_int("critic.layers");
    cfg.sched.kind = parse_schedule_kind(rc.get("schedule.kind"));
    cfg.time.p_mean = rc.get_double("schedule.p_mean");
    cfg.time.p_std = rc.get_double("schedule.p_std");
    cfg.time.delta_t = rc.get_double("schedule.delta_t");
    cfg.time.t_min = rc.get_double("schedule.t_min");
    cfg.time.t_max = rc.get_double("schedule.t_max");
    cfg.kernel.family = parse_kernel_family(rc.get("mmd.kernel"));
    cfg.kernel.sigma = rc.get_double("mmd.sigma");
    cfg.kernel.a = rc.get_double("mmd.a");
    cfg.kernel.b = rc.get_double("mmd.b");
    cfg.kernel.weight_mode = parse_weight_mode(rc.get("mmd.weight_mode"));
    cfg.kernel.bandwidth_mixture = rc.get_bool("mmd.bandwidth_mixture");
    cfg.kernel.kernel_k = rc.get_int("mmd.kernel_k");
    cfg.config_hash = rc.hash();
    cfg.validate();
    return cfg;
}

}  // namespace mmql
