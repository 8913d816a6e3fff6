#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mmql/errors.hpp"
#include "mmql/mat.hpp"

namespace mmql {

// Named parameter arrays. std::map keeps iteration order deterministic
// (lexicographic by name), which fixes the flattening order used by the
// optimizer, gradient clipping and checkpoints.
class ParamStore {
public:
    Mat& add(const std::string& name, int rows, int cols) {
        auto [it, fresh] = params_.emplace(name, Mat(rows, cols));
        if (!fresh) throw UsageError("ParamStore::add: duplicate name '" + name + "'");
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Mat& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw UsageError("ParamStore::get: unknown name '" + name + "'");
        return it->second;
    }
    const Mat& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw UsageError("ParamStore::get: unknown name '" + name + "'");
        return it->second;
    }

    size_t count() const { return params_.size(); }
    size_t total_size() const {
        size_t n = 0;
        for (auto& [k, v] : params_) n += v.size();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (auto& [k, v] : params_) out.push_back(k);
        return out;
    }

    // Gradient accumulator with the same shapes, all zeros.
    ParamStore zeros_like() const {
        ParamStore g;
        for (auto& [k, v] : params_) g.add(k, v.rows, v.cols);
        return g;
    }

    double global_norm() const {
        double ss = 0.0;
        for (auto& [k, v] : params_)
            for (double x : v.d) ss += x * x;
        return std::sqrt(ss);
    }

    // EMA update: this <- alpha * this + (1 - alpha) * src, elementwise.
    void ema_from(const ParamStore& src, double alpha) {
        if (params_.size() != src.params_.size())
            throw DimensionError("ParamStore::ema_from: store layout mismatch");
        auto it = params_.begin();
        auto js = src.params_.begin();
        for (; it != params_.end(); ++it, ++js) {
            if (it->first != js->first || !it->second.same_shape(js->second))
                throw DimensionError("ParamStore::ema_from: store layout mismatch");
            double* a = it->second.d.data();
            const double* b = js->second.d.data();
            size_t n = it->second.size();
            for (size_t i = 0; i < n; ++i) a[i] = alpha * a[i] + (1.0 - alpha) * b[i];
        }
    }

    bool bitwise_equal(const ParamStore& o) const {
        if (params_.size() != o.params_.size()) return false;
        auto it = params_.begin();
        auto js = o.params_.begin();
        for (; it != params_.end(); ++it, ++js) {
            if (it->first != js->first || !it->second.same_shape(js->second)) return false;
            if (it->second.d != js->second.d) return false;
        }
        return true;
    }

private:
    std::map<std::string, Mat> params_;
};

}  // namespace mmql
