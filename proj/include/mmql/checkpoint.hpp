#pragma once

#include <map>
#include <string>

#include "mmql/param_store.hpp"

namespace mmql {

// One network per file: a text manifest (format line, key/value metadata,
// name -> (offset, shape) index) followed by the flat little-endian 64-bit
// float payload. save/load round-trips are bitwise exact.
void save_checkpoint(const std::string& path,
                     const std::map<std::string, std::string>& meta,
                     const ParamStore& params);

struct Checkpoint {
    std::map<std::string, std::string> meta;
    ParamStore params;
};

Checkpoint load_checkpoint(const std::string& path);

// Shortest decimal string that parses back to exactly x (%.17g fallback).
std::string format_double(double x);

}  // namespace mmql
