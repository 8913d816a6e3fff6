#include "mmql/dataset.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mmql/errors.hpp"

namespace mmql {

using ojson = nlohmann::ordered_json;

namespace {

std::vector<double> apply_norm(const std::vector<double>& x, const std::vector<double>& mean,
                               const std::vector<double>& scale) {
    if (x.size() != mean.size())
        throw DimensionError("normalize: vector length != stats length");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) * scale[i];
    return out;
}

std::vector<double> apply_denorm(const std::vector<double>& x, const std::vector<double>& mean,
                                 const std::vector<double>& scale) {
    if (x.size() != mean.size())
        throw DimensionError("denormalize: vector length != stats length");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] / scale[i] + mean[i];
    return out;
}

}  // namespace

std::vector<double> NormStats::normalize_state(const std::vector<double>& raw) const {
    return apply_norm(raw, state_mean, state_scale);
}
std::vector<double> NormStats::denormalize_state(const std::vector<double>& norm) const {
    return apply_denorm(norm, state_mean, state_scale);
}
std::vector<double> NormStats::normalize_action(const std::vector<double>& raw) const {
    return apply_norm(raw, action_mean, action_scale);
}
std::vector<double> NormStats::denormalize_action(const std::vector<double>& norm) const {
    return apply_denorm(norm, action_mean, action_scale);
}

NormStats compute_norm_stats(const std::vector<Transition>& raw, int state_dim,
                             int action_dim) {
    if (raw.empty()) throw DataError("compute_norm_stats: no transitions");
    auto stats_for = [&](int dim, auto&& getter) {
        std::vector<double> mean(static_cast<size_t>(dim), 0.0);
        std::vector<double> scale(static_cast<size_t>(dim), 1.0);
        double n = static_cast<double>(raw.size());
        for (auto& tr : raw) {
            const std::vector<double>& v = getter(tr);
            if (static_cast<int>(v.size()) != dim)
                throw DimensionError("compute_norm_stats: inconsistent dimensions");
            for (int i = 0; i < dim; ++i) mean[static_cast<size_t>(i)] += v[static_cast<size_t>(i)];
        }
        for (double& m : mean) m /= n;
        for (int i = 0; i < dim; ++i) {
            double ss = 0.0;
            for (auto& tr : raw) {
                double d = getter(tr)[static_cast<size_t>(i)] - mean[static_cast<size_t>(i)];
                ss += d * d;
            }
            double sd = std::sqrt(ss / n);
            if (sd >= 1e-6) scale[static_cast<size_t>(i)] = 0.5 / sd;
        }
        return std::make_pair(std::move(mean), std::move(scale));
    };
    NormStats st;
    auto [sm, ssc] = stats_for(state_dim, [](const Transition& t) -> const std::vector<double>& {
        return t.s;
    });
    st.state_mean = std::move(sm);
    st.state_scale = std::move(ssc);
    auto [am, asc] = stats_for(action_dim, [](const Transition& t) -> const std::vector<double>& {
        return t.a;
    });
    st.action_mean = std::move(am);
    st.action_scale = std::move(asc);
    return st;
}

void Dataset::validate() const {
    if (state_dim < 1 || action_dim < 1) throw DataError("dataset: bad dimensions");
    if (static_cast<int>(norm.state_mean.size()) != state_dim ||
        static_cast<int>(norm.action_mean.size()) != action_dim)
        throw DataError("dataset: normalization stats do not match dimensions");
    for (size_t i = 0; i < transitions.size(); ++i) {
        const Transition& t = transitions[i];
        if (static_cast<int>(t.s.size()) != state_dim ||
            static_cast<int>(t.s2.size()) != state_dim ||
            static_cast<int>(t.a.size()) != action_dim)
            throw DataError("dataset: transition " + std::to_string(i) +
                            " has inconsistent dimensions");
    }
}

void save_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_dataset: cannot open '" + path + "'");
    ojson header;
    header["format"] = "mmql-dataset";
    header["version"] = 1;
    header["env"] = ds.env;
    header["state_dim"] = ds.state_dim;
    header["action_dim"] = ds.action_dim;
    header["count"] = ds.transitions.size();
    ojson norm;
    norm["state_mean"] = ds.norm.state_mean;
    norm["state_scale"] = ds.norm.state_scale;
    norm["action_mean"] = ds.norm.action_mean;
    norm["action_scale"] = ds.norm.action_scale;
    header["norm"] = std::move(norm);
    os << header.dump() << "\n";
    for (const Transition& t : ds.transitions) {
        ojson rec;
        rec["s"] = t.s;
        rec["a"] = t.a;
        rec["r"] = t.r;
        rec["s2"] = t.s2;
        rec["done"] = t.done ? 1 : 0;
        os << rec.dump() << "\n";
    }
    if (!os) throw DataError("save_dataset: write failed for '" + path + "'");
}

namespace {

ojson parse_line(const std::string& line, size_t lineno, const std::string& path) {
    try {
        return ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_dataset: parse error at line " + std::to_string(lineno) +
                        " of '" + path + "': " + e.what());
    }
}

std::vector<double> as_vec(const ojson& j, const char* field, size_t lineno) {
    if (!j.contains(field) || !j[field].is_array())
        throw DataError("load_dataset: line " + std::to_string(lineno) + ": missing array '" +
                        field + "'");
    std::vector<double> out;
    for (auto& v : j[field]) {
        if (!v.is_number())
            throw DataError("load_dataset: line " + std::to_string(lineno) +
                            ": non-numeric entry in '" + field + "'");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_dataset: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line)) throw DataError("load_dataset: empty file '" + path + "'");
    ojson header = parse_line(line, 1, path);
    if (!header.contains("format") || header["format"] != "mmql-dataset")
        throw DataError("load_dataset: '" + path + "' is not an mmql dataset");
    if (!header.contains("version") || header["version"].get<int>() != 1)
        throw DataError("load_dataset: unsupported dataset version in '" + path + "'");

    Dataset ds;
    ds.env = header.at("env").get<std::string>();
    ds.state_dim = header.at("state_dim").get<int>();
    ds.action_dim = header.at("action_dim").get<int>();
    size_t count = header.at("count").get<size_t>();
    const ojson& norm = header.at("norm");
    ds.norm.state_mean = norm.at("state_mean").get<std::vector<double>>();
    ds.norm.state_scale = norm.at("state_scale").get<std::vector<double>>();
    ds.norm.action_mean = norm.at("action_mean").get<std::vector<double>>();
    ds.norm.action_scale = norm.at("action_scale").get<std::vector<double>>();

    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        ojson rec = parse_line(line, lineno, path);
        Transition t;
        t.s = as_vec(rec, "s", lineno);
        t.a = as_vec(rec, "a", lineno);
        if (!rec.contains("r") || !rec["r"].is_number())
            throw DataError("load_dataset: line " + std::to_string(lineno) +
                            ": missing numeric 'r'");
        t.r = rec["r"].get<double>();
        t.s2 = as_vec(rec, "s2", lineno);
        if (!rec.contains("done"))
            throw DataError("load_dataset: line " + std::to_string(lineno) + ": missing 'done'");
        t.done = rec["done"].get<int>() != 0;
        if (static_cast<int>(t.s.size()) != ds.state_dim ||
            static_cast<int>(t.s2.size()) != ds.state_dim ||
            static_cast<int>(t.a.size()) != ds.action_dim)
            throw DataError("load_dataset: line " + std::to_string(lineno) +
                            ": dimensions do not match header");
        ds.transitions.push_back(std::move(t));
    }
    if (ds.transitions.size() != count)
        throw DataError("load_dataset: header count " + std::to_string(count) + " but " +
                        std::to_string(ds.transitions.size()) + " records in '" + path + "'");
    ds.validate();
    return ds;
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw UsageError("ReplayBuffer: capacity must be > 0");
    ring_.reserve(std::min<size_t>(capacity_, 1u << 20));
}

void ReplayBuffer::push(Transition t) {
    if (ring_.size() < capacity_) {
        ring_.push_back(std::move(t));
    } else {
        ring_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

std::vector<size_t> ReplayBuffer::sample_indices(size_t batch, Pcg64& rng) const {
    if (ring_.empty()) throw UsageError("ReplayBuffer: sample from empty buffer");
    std::vector<size_t> idx(batch);
    for (size_t i = 0; i < batch; ++i) idx[i] = rng.next_below(ring_.size());
    return idx;
}

}  // namespace mmql
