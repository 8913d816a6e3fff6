#pragma once

#include <map>
#include <set>
#include <string>

#include "mmql/trainer.hpp"

namespace mmql {

// Flat dotted-key configuration with a fixed key registry. Every key has a
// built-in default; precedence is defaults < config file < command-line
// flags. Unknown keys are rejected no matter where they come from.
class RunConfig {
public:
    RunConfig();

    // `origin` names the source ("file <path> line N", "flag --x") for error
    // messages.
    void set(const std::string& key, const std::string& value, const std::string& origin);

    // `key = value` lines; '#' lines are comments.
    void load_file(const std::string& path);

    const std::string& get(const std::string& key) const;
    // True once a key was set from a file or flag (as opposed to its default).
    bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }
    int get_int(const std::string& key) const;
    long get_long(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // All keys in sorted order, one `key = value` per line. This is the text
    // that gets echoed as resolved_config and hashed into checkpoints.
    std::string resolved_text() const;
    std::string hash() const;  // fnv1a64 of resolved_text, 16 hex digits

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> explicit_;
};

// Assembles the trainer-facing view (mode, schedule, kernel, ...) from the
// flat keys and stamps in the config hash.
TrainConfig train_config_from(const RunConfig& rc);

}  // namespace mmql
