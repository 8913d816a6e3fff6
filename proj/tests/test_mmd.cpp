#include <cmath>
#include <vector>

#include "doctest.h"
#include "mmql/errors.hpp"
#include "mmql/mmd.hpp"
#include "mmql/rng.hpp"

using namespace mmql;

namespace {

// Oracle values computed independently at 30 digits (mpmath).
constexpr double kRbf0011 = 0.49935178859927615;     // rbf sigma=1.2, (0,0) vs (1,1)
constexpr double kLap0011 = 0.18887560283756183;     // laplacian, same pair
constexpr double kRbf3d = 0.7653966283281375;        // rbf, |x-y|^2 = 0.77
constexpr double kLap3d = 0.2865047968601901;        // laplacian, L1 = 1.5
constexpr double kRbfMix0011 = 0.46738401865196594;  // mixture {0.6,1.2,2.4}
constexpr double kLapMix0011 = 0.2197159348972975;
constexpr double kWBaseFm030 = 1.7241379310344827;   // 1/0.58
constexpr double kWAblFm030 = 0.2383460708620467;    // a=4, b=2
constexpr double kWAblVp040 = 0.3409640430396344;
constexpr double kAnalyticG1 = 0.13975546921099413;  // (0,0,.3) vs (.5,-.2,.5)
constexpr double kAnalyticC1 = 0.11325717730627104;  // N(0,I2) vs N((1,0),I2)

KernelConfig cfg_for(KernelFamily fam, WeightMode wm = WeightMode::base,
                     bool mixture = false) {
    KernelConfig cfg;
    cfg.family = fam;
    cfg.weight_mode = wm;
    cfg.bandwidth_mixture = mixture;
    return cfg;
}

ParticleGroups random_groups(int G, int M, int dim, Pcg64& rng, double vshift = 0.4) {
    ParticleGroups pg;
    pg.M = M;
    pg.u = Mat(G * M, dim);
    pg.v = Mat(G * M, dim);
    for (auto& x : pg.u.d) x = rng.next_gaussian();
    for (auto& x : pg.v.d) x = rng.next_gaussian() + vshift;
    for (int g = 0; g < G; ++g) {
        double t = 0.1 + 0.8 * rng.next_double();
        double s = t * rng.next_double();
        pg.triples.push_back({s, std::max(s, t - 0.05), t});
    }
    return pg;
}

// Straight-line reimplementation of the grouped V-statistic for cross-checking.
double vstat_naive(const KernelConfig& cfg, const ParticleGroups& pg,
                   const NoiseSchedule& sched) {
    const int G = pg.group_count(), M = pg.M, d = pg.u.cols;
    double total = 0.0;
    for (int g = 0; g < G; ++g) {
        auto row = [&](const Mat& m, int j) {
            std::vector<double> out(d);
            for (int c = 0; c < d; ++c) out[c] = m.at(g * M + j, c);
            return out;
        };
        double acc = 0.0;
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < M; ++k)
                acc += kernel_eval(cfg, row(pg.u, j), row(pg.u, k)) +
                       kernel_eval(cfg, row(pg.v, j), row(pg.v, k)) -
                       2.0 * kernel_eval(cfg, row(pg.u, j), row(pg.v, k));
        double w = weight(cfg, sched, pg.triples[g].s, pg.triples[g].t);
        total += w * acc / (M * M);
    }
    return total / G;
}

}  // namespace

TEST_CASE("kernel values match independent oracles") {
    std::vector<double> a2{0.0, 0.0}, b2{1.0, 1.0};
    std::vector<double> a3{0.1, -0.4, 0.7}, b3{0.6, 0.2, 0.3};
    CHECK(kernel_eval(cfg_for(KernelFamily::rbf), a2, b2) ==
          doctest::Approx(kRbf0011).epsilon(1e-14));
    CHECK(kernel_eval(cfg_for(KernelFamily::laplacian), a2, b2) ==
          doctest::Approx(kLap0011).epsilon(1e-14));
    CHECK(kernel_eval(cfg_for(KernelFamily::rbf), a3, b3) ==
          doctest::Approx(kRbf3d).epsilon(1e-14));
    CHECK(kernel_eval(cfg_for(KernelFamily::laplacian), a3, b3) ==
          doctest::Approx(kLap3d).epsilon(1e-14));
    CHECK(kernel_eval(cfg_for(KernelFamily::neg_sq_dist), a2, b2) == -2.0);
    CHECK(kernel_eval(cfg_for(KernelFamily::neg_sq_dist), a3, b3) ==
          doctest::Approx(-0.77).epsilon(1e-14));
    // bandwidth mixture averages over {sigma/2, sigma, 2 sigma}
    CHECK(kernel_eval(cfg_for(KernelFamily::rbf, WeightMode::base, true), a2, b2) ==
          doctest::Approx(kRbfMix0011).epsilon(1e-14));
    CHECK(kernel_eval(cfg_for(KernelFamily::laplacian, WeightMode::base, true), a2, b2) ==
          doctest::Approx(kLapMix0011).epsilon(1e-14));
    CHECK(kernel_eval(cfg_for(KernelFamily::neg_sq_dist, WeightMode::base, true), a2, b2) ==
          -2.0);
    // k(x,x): 1 for the exponential families, 0 for neg-sq-dist
    CHECK(kernel_eval(cfg_for(KernelFamily::rbf), a3, a3) == 1.0);
    CHECK(kernel_eval(cfg_for(KernelFamily::laplacian), a3, a3) == 1.0);
    CHECK(kernel_eval(cfg_for(KernelFamily::neg_sq_dist), a3, a3) == 0.0);
}

TEST_CASE("loss weights match oracles and ignore s") {
    NoiseSchedule fm{ScheduleKind::flow_matching};
    NoiseSchedule vp{ScheduleKind::variance_preserving};
    KernelConfig base = cfg_for(KernelFamily::rbf, WeightMode::base);
    KernelConfig abl = cfg_for(KernelFamily::rbf, WeightMode::ablation);
    KernelConfig unit = cfg_for(KernelFamily::rbf, WeightMode::unit);
    CHECK(weight(base, fm, 0.1, 0.3) == doctest::Approx(kWBaseFm030).epsilon(1e-14));
    CHECK(weight(abl, fm, 0.1, 0.3) == doctest::Approx(kWAblFm030).epsilon(1e-14));
    // vp keeps alpha^2 + sigma^2 = 1, so the base weight is identically 1
    CHECK(weight(base, vp, 0.2, 0.4) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(weight(abl, vp, 0.2, 0.4) == doctest::Approx(kWAblVp040).epsilon(1e-14));
    CHECK(weight(unit, fm, 0.1, 0.3) == 1.0);
    CHECK(weight(unit, vp, 0.0, 0.9) == 1.0);
    // w depends on t only
    CHECK(weight(base, fm, 0.0, 0.3) == weight(base, fm, 0.29, 0.3));
    CHECK(weight(abl, fm, 0.05, 0.7) == weight(abl, fm, 0.42, 0.7));
}

TEST_CASE("grouped V-statistic matches a naive reimplementation") {
    NoiseSchedule sched{ScheduleKind::flow_matching};
    Pcg64 rng(11, 0);
    for (auto fam : {KernelFamily::rbf, KernelFamily::neg_sq_dist, KernelFamily::laplacian})
        for (auto wm : {WeightMode::base, WeightMode::ablation, WeightMode::unit})
            for (bool mix : {false, true}) {
                KernelConfig cfg = cfg_for(fam, wm, mix);
                ParticleGroups pg = random_groups(5, 3, 2, rng);
                double got = mmd2_vstat_grouped(cfg, pg, sched);
                double want = vstat_naive(cfg, pg, sched);
                CHECK(got == doctest::Approx(want).epsilon(1e-12));
            }
}

TEST_CASE("V-statistic of identical branches is zero; rbf V-statistic is nonnegative") {
    NoiseSchedule sched{ScheduleKind::flow_matching};
    Pcg64 rng(12, 0);
    ParticleGroups pg = random_groups(4, 4, 3, rng);
    pg.v = pg.u;
    for (auto fam : {KernelFamily::rbf, KernelFamily::neg_sq_dist, KernelFamily::laplacian}) {
        KernelConfig cfg = cfg_for(fam);
        CHECK(std::fabs(mmd2_vstat_grouped(cfg, pg, sched)) <= 1e-12);
    }
    // V-statistic of a PSD kernel is a squared RKHS norm: >= 0 for any data
    for (int rep = 0; rep < 20; ++rep) {
        ParticleGroups q = random_groups(3, 2, 2, rng, 0.2 * rep);
        CHECK(mmd2_vstat_grouped(cfg_for(KernelFamily::rbf), q, sched) >= 0.0);
    }
}

TEST_CASE("grad_u matches central finite differences") {
    NoiseSchedule sched{ScheduleKind::flow_matching};
    Pcg64 rng(13, 0);
    const double h = 1e-6;
    for (auto fam : {KernelFamily::rbf, KernelFamily::neg_sq_dist, KernelFamily::laplacian})
        for (auto wm : {WeightMode::base, WeightMode::unit})
            for (bool mix : {false, true}) {
                KernelConfig cfg = cfg_for(fam, wm, mix);
                ParticleGroups pg = random_groups(3, 3, 2, rng);
                Mat grad = mmd2_vstat_grad_u(cfg, pg, sched);
                REQUIRE(grad.same_shape(pg.u));
                for (size_t i = 0; i < pg.u.size(); ++i) {
                    double orig = pg.u.d[i];
                    pg.u.d[i] = orig + h;
                    double up = mmd2_vstat_grouped(cfg, pg, sched);
                    pg.u.d[i] = orig - h;
                    double down = mmd2_vstat_grouped(cfg, pg, sched);
                    pg.u.d[i] = orig;
                    double fd = (up - down) / (2.0 * h);
                    double rel = std::fabs(grad.d[i] - fd) / std::max(std::fabs(fd), 1e-3);
                    INFO("family/weight/mix entry ", i, " ad=", grad.d[i], " fd=", fd);
                    REQUIRE(rel <= 1e-4);
                }
            }
}

TEST_CASE("tape node reproduces the value and routes gradients into u only") {
    NoiseSchedule sched{ScheduleKind::flow_matching};
    Pcg64 rng(14, 0);
    KernelConfig cfg = cfg_for(KernelFamily::rbf);
    ParticleGroups pg = random_groups(4, 3, 2, rng);

    ParamStore ps;
    ps.add("u", pg.u.rows, pg.u.cols) = pg.u;
    Tape t;
    Tape::Ref u = t.param(ps, "u");
    Tape::Ref loss = mmd2_vstat_node(t, cfg, u, pg.v, pg.triples, pg.M, sched);
    CHECK(t.value(loss).d[0] ==
          doctest::Approx(mmd2_vstat_grouped(cfg, pg, sched)).epsilon(1e-12));
    t.backward(loss);
    const Mat& g_tape = t.grad(u);
    Mat g_direct = mmd2_vstat_grad_u(cfg, pg, sched);
    REQUIRE(g_tape.same_shape(g_direct));
    for (size_t i = 0; i < g_tape.size(); ++i)
        CHECK(g_tape.d[i] == doctest::Approx(g_direct.d[i]).epsilon(1e-12));
}

TEST_CASE("tape node composes with upstream ops (scaled loss scales the gradient)") {
    NoiseSchedule sched{ScheduleKind::variance_preserving};
    Pcg64 rng(15, 0);
    KernelConfig cfg = cfg_for(KernelFamily::laplacian);
    ParticleGroups pg = random_groups(2, 2, 3, rng);
    ParamStore ps;
    ps.add("u", pg.u.rows, pg.u.cols) = pg.u;
    Tape t;
    Tape::Ref u = t.param(ps, "u");
    Tape::Ref loss = t.mul_scalar(mmd2_vstat_node(t, cfg, u, pg.v, pg.triples, pg.M, sched), -2.5);
    t.backward(loss);
    Mat g_direct = mmd2_vstat_grad_u(cfg, pg, sched);
    const Mat& g_tape = t.grad(u);
    for (size_t i = 0; i < g_tape.size(); ++i)
        CHECK(g_tape.d[i] == doctest::Approx(-2.5 * g_direct.d[i]).epsilon(1e-12));
}

TEST_CASE("U-statistic: symmetric, near zero on same-distribution samples, matches "
          "the closed form on Gaussians") {
    KernelConfig cfg = cfg_for(KernelFamily::rbf);
    Pcg64 rng(16, 0);
    const int n = 2048, d = 2;
    auto draw = [&](double shift0) {
        std::vector<std::vector<double>> out(n, std::vector<double>(d));
        for (auto& row : out) {
            row[0] = rng.next_gaussian() + shift0;
            row[1] = rng.next_gaussian();
        }
        return out;
    };
    auto xs = draw(0.0), ys = draw(1.0), zs = draw(0.0);
    double est = mmd2_ustat(cfg, xs, ys);
    CHECK(est == doctest::Approx(mmd2_ustat(cfg, ys, xs)).epsilon(1e-12));
    // MC tolerance: the U-statistic SE at n=2048 is ~2e-3 for this pair
    CHECK(std::fabs(est - kAnalyticC1) < 0.012);
    CHECK(std::fabs(mmd2_ustat(cfg, xs, zs)) < 0.008);  // same law, mean 0
}

TEST_CASE("analytic Gaussian MMD matches the pinned oracle and is zero for equal laws") {
    CHECK(mmd2_analytic_gaussian(1.2, 2, {0.0, 0.0}, 0.3, {0.5, -0.2}, 0.5) ==
          doctest::Approx(kAnalyticG1).epsilon(1e-14));
    CHECK(mmd2_analytic_gaussian(1.2, 2, {0.0, 0.0}, 1.0, {1.0, 0.0}, 1.0) ==
          doctest::Approx(kAnalyticC1).epsilon(1e-14));
    CHECK(mmd2_analytic_gaussian(1.2, 3, {0.4, -0.1, 2.0}, 0.7, {0.4, -0.1, 2.0}, 0.7) ==
          doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("config and group validation") {
    KernelConfig cfg;
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.sigma = 1.2;
    cfg.validate();

    ParticleGroups pg;
    pg.M = 0;
    CHECK_THROWS_AS(pg.validate(), DimensionError);
    pg.M = 2;
    pg.u = Mat(4, 2);
    pg.v = Mat(4, 3);  // branch width mismatch
    pg.triples = {{0.0, 0.1, 0.2}, {0.0, 0.2, 0.3}};
    CHECK_THROWS_AS(pg.validate(), DimensionError);
    pg.v = Mat(6, 2);  // row count disagrees with M * groups
    CHECK_THROWS_AS(pg.validate(), DimensionError);
    pg.v = Mat(4, 2);
    pg.validate();
}

TEST_CASE("kernel family and weight mode parsing") {
    CHECK(parse_kernel_family("rbf") == KernelFamily::rbf);
    CHECK(parse_kernel_family("neg-sq-dist") == KernelFamily::neg_sq_dist);
    CHECK(parse_kernel_family("laplacian") == KernelFamily::laplacian);
    CHECK_THROWS_AS(parse_kernel_family("cauchy"), ConfigError);
    CHECK(parse_weight_mode("base") == WeightMode::base);
    CHECK(parse_weight_mode("ablation") == WeightMode::ablation);
    CHECK(parse_weight_mode("unit") == WeightMode::unit);
    CHECK_THROWS_AS(parse_weight_mode("snr"), ConfigError);
}
