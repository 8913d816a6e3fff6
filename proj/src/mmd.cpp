#include "mmql/mmd.hpp"

#include <cmath>
#include <memory>

#include "mmql/errors.hpp"

namespace mmql {

KernelFamily parse_kernel_family(const std::string& tag) {
    if (tag == "rbf") return KernelFamily::rbf;
    if (tag == "neg-sq-dist") return KernelFamily::neg_sq_dist;
    if (tag == "laplacian") return KernelFamily::laplacian;
    throw ConfigError("unknown kernel family '" + tag + "'");
}

WeightMode parse_weight_mode(const std::string& tag) {
    if (tag == "base") return WeightMode::base;
    if (tag == "ablation") return WeightMode::ablation;
    if (tag == "unit") return WeightMode::unit;
    throw ConfigError("unknown weight mode '" + tag + "'");
}

void KernelConfig::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("kernel: sigma must be > 0");
}

void ParticleGroups::validate() const {
    if (M < 1) throw DimensionError("ParticleGroups: M must be >= 1");
    if (triples.empty()) throw DimensionError("ParticleGroups: no groups");
    int b = group_count() * M;
    if (u.rows != b || v.rows != b)
        throw DimensionError("ParticleGroups: branch rows != groups*M");
    if (u.cols != v.cols) throw DimensionError("ParticleGroups: branch dims differ");
}

namespace {

double sqdist(const double* x, const double* y, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        double diff = x[i] - y[i];
        s += diff * diff;
    }
    return s;
}

double l1dist(const double* x, const double* y, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += std::fabs(x[i] - y[i]);
    return s;
}

void bandwidths(const KernelConfig& cfg, double out[3], int& n) {
    if (cfg.bandwidth_mixture) {
        out[0] = 0.5 * cfg.sigma;
        out[1] = cfg.sigma;
        out[2] = 2.0 * cfg.sigma;
        n = 3;
    } else {
        out[0] = cfg.sigma;
        n = 1;
    }
}

double kernel_raw(const KernelConfig& cfg, const double* x, const double* y, int d) {
    switch (cfg.family) {
        case KernelFamily::neg_sq_dist:
            return -sqdist(x, y, d);
        case KernelFamily::rbf: {
            double bw[3];
            int n;
            bandwidths(cfg, bw, n);
            double q = sqdist(x, y, d);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += std::exp(-q / (2.0 * bw[i] * bw[i]));
            return acc / n;
        }
        case KernelFamily::laplacian: {
            double bw[3];
            int n;
            bandwidths(cfg, bw, n);
            double q = l1dist(x, y, d);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += std::exp(-q / bw[i]);
            return acc / n;
        }
    }
    throw DomainError("kernel_raw: bad family");
}

// Accumulates scale * d k(x,y)/dx into gx.
void kernel_grad1(const KernelConfig& cfg, const double* x, const double* y, int d,
                  double scale, double* gx) {
    switch (cfg.family) {
        case KernelFamily::neg_sq_dist:
            for (int i = 0; i < d; ++i) gx[i] += scale * (-2.0) * (x[i] - y[i]);
            return;
        case KernelFamily::rbf: {
            double bw[3];
            int n;
            bandwidths(cfg, bw, n);
            double q = sqdist(x, y, d);
            double coeff = 0.0;  // sum over bandwidths of -k_bw / bw^2
            for (int i = 0; i < n; ++i) {
                double b2 = bw[i] * bw[i];
                coeff += -std::exp(-q / (2.0 * b2)) / b2;
            }
            coeff *= scale / n;
            for (int i = 0; i < d; ++i) gx[i] += coeff * (x[i] - y[i]);
            return;
        }
        case KernelFamily::laplacian: {
            double bw[3];
            int n;
            bandwidths(cfg, bw, n);
            double q = l1dist(x, y, d);
            double coeff = 0.0;
            for (int i = 0; i < n; ++i) coeff += -std::exp(-q / bw[i]) / bw[i];
            coeff *= scale / n;
            for (int i = 0; i < d; ++i) {
                double diff = x[i] - y[i];
                double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                gx[i] += coeff * sgn;
            }
            return;
        }
    }
    throw DomainError("kernel_grad1: bad family");
}

}  // namespace

double kernel_eval(const KernelConfig& cfg, const std::vector<double>& x,
                   const std::vector<double>& y) {
    cfg.validate();
    if (x.size() != y.size()) throw DimensionError("kernel_eval: dimension mismatch");
    return kernel_raw(cfg, x.data(), y.data(), static_cast<int>(x.size()));
}

double weight(const KernelConfig& cfg, const NoiseSchedule& sched, double /*s*/, double t) {
    if (cfg.weight_mode == WeightMode::unit) return 1.0;
    auto [alpha_t, sigma_t] = alpha_sigma(sched, t);
    double base = 1.0 / (alpha_t * alpha_t + sigma_t * sigma_t);
    if (cfg.weight_mode == WeightMode::base) return base;
    double log_snr = std::log(snr(sched, t));
    double sig = 1.0 / (1.0 + std::exp(-(cfg.b - log_snr)));
    return sig * std::pow(alpha_t, cfg.a) * base;
}

double mmd2_vstat_grouped(const KernelConfig& cfg, const ParticleGroups& groups,
                          const NoiseSchedule& sched) {
    cfg.validate();
    groups.validate();
    int d = groups.u.cols;
    int m = groups.M;
    double total = 0.0;
    for (int g = 0; g < groups.group_count(); ++g) {
        const TimeTriple& tri = groups.triples[static_cast<size_t>(g)];
        const double* u0 = groups.u.d.data() + static_cast<size_t>(g) * m * d;
        const double* v0 = groups.v.d.data() + static_cast<size_t>(g) * m * d;
        double s_g = 0.0;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) {
                s_g += kernel_raw(cfg, u0 + j * d, u0 + k * d, d);
                s_g += kernel_raw(cfg, v0 + j * d, v0 + k * d, d);
                s_g -= 2.0 * kernel_raw(cfg, u0 + j * d, v0 + k * d, d);
            }
        total += weight(cfg, sched, tri.s, tri.t) * s_g / (m * m);
    }
    return total / groups.group_count();
}

Mat mmd2_vstat_grad_u(const KernelConfig& cfg, const ParticleGroups& groups,
                      const NoiseSchedule& sched) {
    cfg.validate();
    groups.validate();
    int d = groups.u.cols;
    int m = groups.M;
    Mat grad(groups.u.rows, d);
    for (int g = 0; g < groups.group_count(); ++g) {
        const TimeTriple& tri = groups.triples[static_cast<size_t>(g)];
        double w = weight(cfg, sched, tri.s, tri.t) /
                   (static_cast<double>(groups.group_count()) * m * m);
        const double* u0 = groups.u.d.data() + static_cast<size_t>(g) * m * d;
        const double* v0 = groups.v.d.data() + static_cast<size_t>(g) * m * d;
        double* g0 = grad.d.data() + static_cast<size_t>(g) * m * d;
        for (int a = 0; a < m; ++a)
            for (int k = 0; k < m; ++k) {
                kernel_grad1(cfg, u0 + a * d, u0 + k * d, d, 2.0 * w, g0 + a * d);
                kernel_grad1(cfg, u0 + a * d, v0 + k * d, d, -2.0 * w, g0 + a * d);
            }
    }
    return grad;
}

Tape::Ref mmd2_vstat_node(Tape& tape, const KernelConfig& cfg, Tape::Ref u, Mat v,
                          std::vector<TimeTriple> triples, int M,
                          const NoiseSchedule& sched) {
    auto groups = std::make_shared<ParticleGroups>();
    groups->M = M;
    groups->u = tape.value(u);
    groups->v = std::move(v);
    groups->triples = std::move(triples);
    double val = mmd2_vstat_grouped(cfg, *groups, sched);
    return tape.custom(Mat(1, 1, {val}), {u},
                       [cfg, groups, sched, u](Tape& t, Tape::Ref self) {
                           double gout = t.grad(self).d[0];
                           Mat gu = mmd2_vstat_grad_u(cfg, *groups, sched);
                           for (double& x : gu.d) x *= gout;
                           t.accumulate_grad(u, gu);
                       });
}

double mmd2_ustat(const KernelConfig& cfg, const std::vector<std::vector<double>>& xs,
                  const std::vector<std::vector<double>>& ys) {
    cfg.validate();
    size_t n = xs.size(), m = ys.size();
    if (n < 2 || m < 2) throw DimensionError("mmd2_ustat: need >= 2 samples per side");
    // All three kernels are symmetric, so each within-set pair is counted once
    // and doubled.
    double xx = 0.0, yy = 0.0, xy = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) xx += kernel_eval(cfg, xs[i], xs[j]);
    xx *= 2.0;
    for (size_t i = 0; i < m; ++i)
        for (size_t j = i + 1; j < m; ++j) yy += kernel_eval(cfg, ys[i], ys[j]);
    yy *= 2.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) xy += kernel_eval(cfg, xs[i], ys[j]);
    double nn_ = static_cast<double>(n), mm_ = static_cast<double>(m);
    return xx / (nn_ * (nn_ - 1.0)) + yy / (mm_ * (mm_ - 1.0)) - 2.0 * xy / (nn_ * mm_);
}

double mmd2_analytic_gaussian(double sigma_mmd, int d, const std::vector<double>& m1,
                              double s1, const std::vector<double>& m2, double s2) {
    if (!(sigma_mmd > 0.0)) throw DomainError("mmd2_analytic_gaussian: sigma must be > 0");
    if (s1 < 0.0 || s2 < 0.0) throw DomainError("mmd2_analytic_gaussian: stds must be >= 0");
    if (static_cast<int>(m1.size()) != d || static_cast<int>(m2.size()) != d)
        throw DimensionError("mmd2_analytic_gaussian: mean dimension != d");
    double s2k = sigma_mmd * sigma_mmd;
    auto term = [&](const std::vector<double>& ma, double sa, const std::vector<double>& mb,
                    double sb) {
        double denom = s2k + sa * sa + sb * sb;
        double q = 0.0;
        for (int i = 0; i < d; ++i) {
            double diff = ma[i] - mb[i];
            q += diff * diff;
        }
        return std::pow(s2k / denom, 0.5 * d) * std::exp(-q / (2.0 * denom));
    };
    return term(m1, s1, m1, s1) + term(m2, s2, m2, s2) - 2.0 * term(m1, s1, m2, s2);
}

}  // namespace mmql
