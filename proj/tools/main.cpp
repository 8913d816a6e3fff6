// mmql command-line driver: data generation, training, fine-tuning,
// evaluation, and single-action sampling.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mmql/checkpoint.hpp"
#include "mmql/config.hpp"
#include "mmql/envs.hpp"
#include "mmql/errors.hpp"
#include "mmql/trainer.hpp"

namespace fs = std::filesystem;
using namespace mmql;

namespace {

constexpr const char* kUsage =
    "mmql - moment matching Q-learning on built-in toy environments\n"
    "\n"
    "usage: mmql <command> [--config FILE] [--KEY VALUE ...]\n"
    "\n"
    "commands:\n"
    "  gen-data   generate a scripted-behavior dataset\n"
    "             (--env --behavior --episodes --seed --out FILE.ndjson)\n"
    "  train      train from a dataset\n"
    "             (--mode bc|offline --data FILE --out DIR --epochs --seed)\n"
    "  finetune   resume a checkpoint with online interaction\n"
    "             (--ckpt DIR --out DIR --online-steps [--data FILE])\n"
    "  eval       evaluate a checkpoint; prints mean,std,norm_score\n"
    "             (--ckpt DIR --episodes --seed [--n])\n"
    "  sample     print one action for a state as CSV\n"
    "             (--ckpt DIR --state \"x1,x2,...\" [--n] [--seed])\n"
    "\n"
    "Any config key doubles as a flag, e.g. --train.eta 0.25 or\n"
    "--schedule.kind variance-preserving. Flags override --config file\n"
    "entries, which override built-in defaults. See README.md.\n";

// Shorthand flags; everything else must be a registry key.
std::string resolve_alias(const std::string& cmd, const std::string& key) {
    if (key == "behavior") return "gen.behavior";
    if (key == "episodes") return cmd == "gen-data" ? "gen.episodes" : "eval.episodes";
    if (key == "epochs") return "train.epochs";
    if (key == "eta") return "train.eta";
    if (key == "n") return "policy.num_steps";
    if (key == "online-steps") return "online.steps";
    if (key == "state") return "sample.state";
    if (key == "batch") return "train.batch";
    return key;
}

std::string require(const RunConfig& rc, const std::string& key, const std::string& flag) {
    std::string v = rc.get(key);
    if (v.empty()) throw ConfigError("missing required flag " + flag);
    return v;
}

std::vector<double> parse_csv_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos);
        char* end = nullptr;
        double x = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size())
            throw ConfigError(what + ": '" + tok + "' is not a number");
        out.push_back(x);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

void write_resolved_config(const RunConfig& rc, const std::string& run_dir) {
    fs::create_directories(run_dir);
    std::ofstream os(run_dir + "/resolved_config", std::ios::binary);
    if (!os) throw DataError("cannot write resolved_config in '" + run_dir + "'");
    os << rc.resolved_text();
}

// In bc mode the critic is out of the loop; a nonzero eta would silently mean
// something else, so it is forced to 0 (with a warning) before hashing.
void normalize_bc_eta(RunConfig& rc) {
    if (rc.get("mode") == "bc" && rc.get_double("train.eta") != 0.0) {
        std::cerr << "warning: mode bc ignores the critic; forcing train.eta = 0\n";
        rc.set("train.eta", "0", "bc mode");
    }
}

void check_env_flag(const RunConfig& rc, const std::string& ckpt_env) {
    const std::string& env = rc.get("env");
    if (!env.empty() && env != ckpt_env)
        throw DataError("--env " + env + " does not match checkpoint env '" + ckpt_env + "'");
}

int cmd_gen_data(RunConfig& rc) {
    std::string env_name = require(rc, "env", "--env");
    std::string out = require(rc, "out", "--out");
    int episodes = rc.get_int("gen.episodes");
    if (episodes < 1) throw ConfigError("gen.episodes must be >= 1");
    EnvSpec spec = make_env_spec(env_name);
    Behavior behavior = parse_behavior(rc.get("gen.behavior"));
    Dataset ds = gen_dataset(spec, behavior, episodes, rc.get_u64("seed"));
    save_dataset(ds, out);
    std::cout << "wrote " << out << ": " << ds.transitions.size() << " transitions ("
              << env_name << ", " << rc.get("gen.behavior") << ")\n";
    return 0;
}

int cmd_train(RunConfig& rc) {
    const std::string& mode = rc.get("mode");
    if (mode != "bc" && mode != "offline")
        throw ConfigError("train supports --mode bc|offline (use the finetune command for "
                          "online-finetune)");
    std::string data_path = require(rc, "data", "--data");
    std::string out = require(rc, "out", "--out");
    normalize_bc_eta(rc);
    write_resolved_config(rc, out);
    Dataset ds = load_dataset(data_path);
    Trainer trainer(std::move(ds), train_config_from(rc));
    trainer.train(out);
    EvalResult er = trainer.evaluate(rc.get_int("eval.episodes"),
                                     rc.get_u64("seed") + static_cast<uint64_t>(trainer.step()));
    std::cout << "done: " << trainer.step() << " steps, norm_score "
              << format_double(er.norm_score) << ", run dir " << out << "\n";
    return 0;
}

int cmd_finetune(RunConfig& rc) {
    std::string ckpt = require(rc, "ckpt", "--ckpt");
    std::string out = require(rc, "out", "--out");
    rc.set("mode", "online-finetune", "finetune command");
    write_resolved_config(rc, out);
    Dataset ds;
    if (!rc.get("data").empty()) {
        ds = load_dataset(rc.get("data"));
    } else {
        // No buffer seed: adopt the checkpoint's env and normalization and
        // start from an empty replay buffer.
        TrainerSnapshot snap = load_checkpoint_dir(ckpt);
        ds.env = snap.env.name;
        ds.state_dim = snap.env.state_dim;
        ds.action_dim = snap.env.action_dim;
        ds.norm = snap.norm;
    }
    check_env_flag(rc, ds.env);
    Trainer trainer(ckpt, std::move(ds), train_config_from(rc));
    trainer.finetune(out);
    std::cout << "done: step " << trainer.step() << ", run dir " << out << "\n";
    return 0;
}

int cmd_eval(RunConfig& rc) {
    std::string ckpt = require(rc, "ckpt", "--ckpt");
    TrainerSnapshot snap = load_checkpoint_dir(ckpt);
    check_env_flag(rc, snap.env.name);
    int n_steps = rc.is_set("policy.num_steps") ? rc.get_int("policy.num_steps")
                                                : std::stoi(snap.manifest.at("num_steps"));
    EvalResult er = evaluate_checkpoint(ckpt, rc.get_int("eval.episodes"), n_steps,
                                        rc.get_u64("seed"));
    std::cout << format_double(er.mean_return) << "," << format_double(er.std_return) << ","
              << format_double(er.norm_score) << "\n";
    return 0;
}

int cmd_sample(RunConfig& rc) {
    std::string ckpt = require(rc, "ckpt", "--ckpt");
    std::string state_str = require(rc, "sample.state", "--state");
    TrainerSnapshot snap = load_checkpoint_dir(ckpt);
    check_env_flag(rc, snap.env.name);
    std::vector<double> raw_state = parse_csv_doubles(state_str, "--state");
    if (static_cast<int>(raw_state.size()) != snap.env.state_dim)
        throw ConfigError("--state has " + std::to_string(raw_state.size()) +
                          " components; env '" + snap.env.name + "' has state_dim " +
                          std::to_string(snap.env.state_dim));
    int n_steps = rc.is_set("policy.num_steps") ? rc.get_int("policy.num_steps")
                                                : std::stoi(snap.manifest.at("num_steps"));
    ActionSpaceSpec space = normalized_action_space(snap.env, snap.norm, snap.sigma_d);
    NoiseSchedule sched{snap.sched_kind};
    Pcg64 rng = derive_rng(rc.get_u64("seed"), "sample");
    std::vector<double> a_norm = sample_action(snap.policy, snap.policy.params,
                                               snap.norm.normalize_state(raw_state), n_steps,
                                               space, sched, rng);
    std::vector<double> a_raw = snap.norm.denormalize_action(a_norm);
    for (int i = 0; i < snap.env.action_dim; ++i) {
        size_t k = static_cast<size_t>(i);
        a_raw[k] = std::min(snap.env.action_hi[k], std::max(snap.env.action_lo[k], a_raw[k]));
    }
    for (size_t i = 0; i < a_raw.size(); ++i)
        std::cout << (i ? "," : "") << format_double(a_raw[i]);
    std::cout << "\n";
    return 0;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) {
        std::cerr << kUsage;
        throw ConfigError("no command given");
    }
    std::string cmd = args[0];
    if (cmd == "-h" || cmd == "--help" || cmd == "help") {
        std::cout << kUsage;
        return 0;
    }
    if (cmd != "gen-data" && cmd != "train" && cmd != "finetune" && cmd != "eval" &&
        cmd != "sample")
        throw ConfigError("unknown command '" + cmd + "' (try --help)");

    std::string config_path;
    std::vector<std::pair<std::string, std::string>> flags;
    for (size_t i = 1; i < args.size(); ++i) {
        const std::string& tok = args[i];
        if (tok == "-h" || tok == "--help") {
            std::cout << kUsage;
            return 0;
        }
        if (tok.rfind("--", 0) != 0)
            throw ConfigError("unexpected argument '" + tok + "' (flags look like --key value)");
        std::string key = tok.substr(2);
        if (i + 1 >= args.size()) throw ConfigError("flag --" + key + " needs a value");
        std::string val = args[++i];
        if (key == "config")
            config_path = val;
        else
            flags.emplace_back(resolve_alias(cmd, key), val);
    }

    RunConfig rc;
    if (!config_path.empty()) rc.load_file(config_path);
    for (const auto& [k, v] : flags) rc.set(k, v, "flag --" + k);

    if (cmd == "gen-data") return cmd_gen_data(rc);
    if (cmd == "train") return cmd_train(rc);
    if (cmd == "finetune") return cmd_finetune(rc);
    if (cmd == "eval") return cmd_eval(rc);
    return cmd_sample(rc);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {  // Dimension/DomainError
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::logic_error& e) {  // UsageError
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
