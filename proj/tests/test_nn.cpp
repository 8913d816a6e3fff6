#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "mmql/errors.hpp"
#include "mmql/nn.hpp"

using namespace mmql;

namespace {

Mat random_mat(int r, int c, Pcg64& rng, double scale = 1.0) {
    Mat m(r, c);
    for (auto& x : m.d) x = scale * rng.next_gaussian();
    return m;
}

// Central finite differences of a scalar function of `store`, checked
// entry-by-entry against `grads`. Relative error uses a floor so entries with
// near-zero true gradient don't blow the ratio up.
void check_grads_fd(ParamStore& store, const ParamStore& grads,
                    const std::function<double()>& f, double h = 1e-5,
                    double tol = 1e-4) {
    for (const auto& [name, g] : grads) {
        Mat& p = store.get(name);
        for (size_t i = 0; i < p.size(); ++i) {
            double orig = p.d[i];
            p.d[i] = orig + h;
            double up = f();
            p.d[i] = orig - h;
            double down = f();
            p.d[i] = orig;
            double fd = (up - down) / (2.0 * h);
            double rel = std::fabs(g.d[i] - fd) / std::max(std::fabs(fd), 1e-3);
            INFO(name, "[", i, "] ad=", g.d[i], " fd=", fd);
            REQUIRE(rel <= tol);
        }
    }
}

}  // namespace

TEST_CASE("matmul matches a hand-rolled triple loop") {
    Pcg64 rng(1, 0);
    Mat a = random_mat(7, 11, rng), b = random_mat(11, 5, rng);
    Tape t;
    const Mat& c = t.value(t.matmul(t.constant(a), t.constant(b)));
    REQUIRE(c.rows == 7);
    REQUIRE(c.cols == 5);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += a.at(i, k) * b.at(k, j);
            CHECK(c.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("mlp spec layout") {
    MlpSpec spec{10, 32, 3, 4, Act::silu};
    spec.validate();
    CHECK(spec.fan_in(0) == 10);
    CHECK(spec.fan_out(0) == 32);
    CHECK(spec.fan_in(1) == 32);
    CHECK(spec.fan_in(2) == 32);
    CHECK(spec.fan_out(2) == 4);
    MlpSpec linear{10, 32, 1, 4, Act::silu};
    CHECK(linear.fan_in(0) == 10);
    CHECK(linear.fan_out(0) == 4);
}

TEST_CASE("fan-in uniform init respects bounds; zero_last zeroes the output layer") {
    MlpSpec spec{6, 16, 3, 2, Act::silu};
    ParamStore ps;
    Pcg64 rng(2, 0);
    mlp_init_params(spec, ps, rng, /*zero_last=*/true);
    CHECK(ps.count() == 6);
    for (int l = 0; l < 2; ++l) {
        double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(l)));
        bool any_nonzero = false;
        for (double x : ps.get(spec.w_name(l)).d) {
            CHECK(std::fabs(x) <= bound);
            any_nonzero = any_nonzero || x != 0.0;
        }
        CHECK(any_nonzero);
    }
    for (double x : ps.get(spec.w_name(2)).d) CHECK(x == 0.0);
    for (double x : ps.get(spec.b_name(2)).d) CHECK(x == 0.0);

    Mat in = random_mat(5, 6, rng);
    Mat out = mlp_forward(spec, ps, in);
    for (double x : out.d) CHECK(x == 0.0);
}

TEST_CASE("tape forward equals gradient-free forward") {
    MlpSpec spec{4, 8, 3, 3, Act::silu};
    ParamStore ps;
    Pcg64 rng(3, 0);
    mlp_init_params(spec, ps, rng);
    Mat in = random_mat(6, 4, rng);
    Mat plain = mlp_forward(spec, ps, in);
    Tape t;
    const Mat& taped = t.value(mlp_forward(t, spec, ps, t.constant(in), true));
    REQUIRE(plain.same_shape(taped));
    for (size_t i = 0; i < plain.size(); ++i) CHECK(plain.d[i] == taped.d[i]);
}

TEST_CASE("mlp gradients match finite differences (several nets and activations)") {
    Pcg64 rng(4, 0);
    for (auto [layers, act] : std::vector<std::pair<int, Act>>{
             {1, Act::identity}, {2, Act::relu}, {3, Act::silu}, {4, Act::tanh_fn}}) {
        MlpSpec spec{3, 5, layers, 2, act};
        ParamStore ps;
        mlp_init_params(spec, ps, rng);
        Mat in = random_mat(4, 3, rng);
        Mat target = random_mat(4, 2, rng);

        auto loss_value = [&]() {
            Tape t;
            Tape::Ref pred = mlp_forward(t, spec, ps, t.constant(in), true);
            Tape::Ref loss = t.mean_all(t.square(t.sub(pred, t.constant(target))));
            return t.value(loss).d[0];
        };
        Tape t;
        Tape::Ref pred = mlp_forward(t, spec, ps, t.constant(in), true);
        Tape::Ref loss = t.mean_all(t.square(t.sub(pred, t.constant(target))));
        t.backward(loss);
        ParamStore grads = t.grads_for(ps);
        check_grads_fd(ps, grads, loss_value);
    }
}

TEST_CASE("per-op gradients match finite differences") {
    Pcg64 rng(5, 0);
    ParamStore ps;
    Mat& w = ps.add("w", 3, 4);
    w = random_mat(3, 4, rng);
    Mat other = random_mat(3, 4, rng);
    Mat rowv = random_mat(1, 4, rng);

    auto run = [&](const std::function<Tape::Ref(Tape&, Tape::Ref)>& build) {
        auto loss_value = [&]() {
            Tape t;
            return t.value(t.mean_all(build(t, t.param(ps, "w")))).d[0];
        };
        Tape t;
        Tape::Ref loss = t.mean_all(build(t, t.param(ps, "w")));
        t.backward(loss);
        ParamStore grads = t.grads_for(ps);
        check_grads_fd(ps, grads, loss_value);
    };

    run([&](Tape& t, Tape::Ref x) { return t.add(x, t.constant(other)); });
    run([&](Tape& t, Tape::Ref x) { return t.sub(t.constant(other), x); });
    run([&](Tape& t, Tape::Ref x) { return t.mul_scalar(x, -2.5); });
    run([&](Tape& t, Tape::Ref x) { return t.add_rowvec(x, t.constant(rowv)); });
    run([&](Tape& t, Tape::Ref x) { return t.rowscale(x, {0.5, -1.0, 2.0}); });
    run([&](Tape& t, Tape::Ref x) { return t.square(x); });
    run([&](Tape& t, Tape::Ref x) { return t.activation(x, Act::silu); });
    run([&](Tape& t, Tape::Ref x) { return t.activation(x, Act::tanh_fn); });
    run([&](Tape& t, Tape::Ref x) { return t.min2(x, t.constant(other)); });
    run([&](Tape& t, Tape::Ref x) { return t.min2(t.constant(other), x); });
    run([&](Tape& t, Tape::Ref x) { return t.concat_cols({x, t.constant(other)}); });
    run([&](Tape& t, Tape::Ref x) { return t.sum_all(x); });
    // rowvec bias as the trainable leaf
    ParamStore pb;
    pb.add("b", 1, 4) = rowv;
    auto loss_value = [&]() {
        Tape t;
        return t.value(t.mean_all(t.add_rowvec(t.constant(other), t.param(pb, "b")))).d[0];
    };
    Tape t;
    Tape::Ref loss = t.mean_all(t.add_rowvec(t.constant(other), t.param(pb, "b")));
    t.backward(loss);
    check_grads_fd(pb, t.grads_for(pb), loss_value);
}

TEST_CASE("clip_rows gradient is the true clip gradient (zero outside bounds)") {
    ParamStore ps;
    Mat& w = ps.add("w", 2, 2);
    w.d = {0.5, 3.0, -4.0, 0.1};  // two entries strictly inside, two outside
    std::vector<double> lo{-1.0, -1.0}, hi{1.0, 1.0};
    Tape t;
    Tape::Ref clipped = t.clip_rows(t.param(ps, "w"), lo, hi);
    t.backward(t.sum_all(clipped));
    ParamStore grads = t.grads_for(ps);
    CHECK(grads.get("w").d[0] == 1.0);
    CHECK(grads.get("w").d[1] == 0.0);
    CHECK(grads.get("w").d[2] == 0.0);
    CHECK(grads.get("w").d[3] == 1.0);
    // forward values are clipped
    CHECK(t.value(clipped).d[1] == 1.0);
    CHECK(t.value(clipped).d[2] == -1.0);
}

TEST_CASE("reusing a parameter accumulates both branch gradients") {
    Pcg64 rng(6, 0);
    ParamStore ps;
    ps.add("w", 2, 3) = random_mat(2, 3, rng);
    Mat a = random_mat(4, 2, rng), b = random_mat(4, 2, rng);
    auto loss_value = [&]() {
        Tape t;
        Tape::Ref w1 = t.param(ps, "w");
        Tape::Ref w2 = t.param(ps, "w");
        CHECK(w1 == w2);  // deduplicated leaf
        Tape::Ref y = t.add(t.matmul(t.constant(a), w1), t.matmul(t.constant(b), w2));
        return t.value(t.mean_all(t.square(y))).d[0];
    };
    Tape t;
    Tape::Ref y = t.add(t.matmul(t.constant(a), t.param(ps, "w")),
                        t.matmul(t.constant(b), t.param(ps, "w")));
    Tape::Ref loss = t.mean_all(t.square(y));
    t.backward(loss);
    check_grads_fd(ps, t.grads_for(ps), loss_value);
}

TEST_CASE("frozen parameters receive no gradient and do not count as trainable") {
    Pcg64 rng(7, 0);
    ParamStore ps, frozen;
    ps.add("w", 3, 3) = random_mat(3, 3, rng);
    frozen.add("w", 3, 3) = random_mat(3, 3, rng);
    Tape t;
    Tape::Ref y = t.matmul(t.param(ps, "w"), t.frozen(frozen, "w"));
    t.backward(t.mean_all(y));
    CHECK(t.has_params_from(ps));
    CHECK_FALSE(t.has_params_from(frozen));
    ParamStore gf = t.grads_for(frozen);
    for (double x : gf.get("w").d) CHECK(x == 0.0);
    ParamStore gp = t.grads_for(ps);
    double nonzero = 0;
    for (double x : gp.get("w").d) nonzero += std::fabs(x);
    CHECK(nonzero > 0.0);
}

TEST_CASE("backward twice is an API error") {
    ParamStore ps;
    ps.add("w", 1, 1).d[0] = 2.0;
    Tape t;
    Tape::Ref loss = t.sum_all(t.square(t.param(ps, "w")));
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), UsageError);
}

TEST_CASE("backward requires a 1x1 loss") {
    ParamStore ps;
    ps.add("w", 2, 2);
    Tape t;
    Tape::Ref w = t.param(ps, "w");
    CHECK_THROWS_AS(t.backward(w), UsageError);
}

TEST_CASE("clip_global_norm scales only above the threshold and is idempotent") {
    ParamStore g;
    g.add("a", 1, 2).d = {3.0, 0.0};
    g.add("b", 1, 1).d = {4.0};  // global norm 5
    SUBCASE("below threshold: untouched") {
        double factor = clip_global_norm(g, 8.0);
        CHECK(factor == 1.0);
        CHECK(g.get("a").d[0] == 3.0);
        CHECK(g.get("b").d[0] == 4.0);
    }
    SUBCASE("above threshold: scaled to max_norm, then stable") {
        double factor = clip_global_norm(g, 2.5);
        CHECK(factor == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(g.global_norm() == doctest::Approx(2.5).epsilon(1e-12));
        clip_global_norm(g, 2.5);
        CHECK(g.global_norm() == doctest::Approx(2.5).epsilon(1e-9));
    }
}

TEST_CASE("adam: first step moves by ~lr against the gradient sign") {
    ParamStore ps;
    ps.add("w", 1, 1).d[0] = 1.0;
    AdamState st = AdamState::init(ps, 0.01);
    ParamStore g = ps.zeros_like();
    g.get("w").d[0] = 7.0;  // any positive gradient: bias correction makes step ~= lr
    adam_step(ps, g, st);
    CHECK(ps.get("w").d[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-7));
    CHECK(st.step == 1);
}

TEST_CASE("adam drives a quadratic to its minimum") {
    ParamStore ps;
    ps.add("w", 1, 2).d = {3.0, -2.0};
    AdamState st = AdamState::init(ps, 0.05);
    for (int i = 0; i < 2000; ++i) {
        ParamStore g = ps.zeros_like();
        g.get("w").d[0] = 2.0 * ps.get("w").d[0];
        g.get("w").d[1] = 2.0 * ps.get("w").d[1];
        adam_step(ps, g, st);
    }
    CHECK(std::fabs(ps.get("w").d[0]) < 1e-3);
    CHECK(std::fabs(ps.get("w").d[1]) < 1e-3);
}

TEST_CASE("adam rejects non-finite gradients") {
    ParamStore ps;
    ps.add("w", 1, 1).d[0] = 1.0;
    AdamState st = AdamState::init(ps, 0.01);
    ParamStore g = ps.zeros_like();
    g.get("w").d[0] = std::nan("");
    CHECK_THROWS_AS(adam_step(ps, g, st), DivergenceError);
}

TEST_CASE("activation forward values") {
    Tape t;
    Mat in(1, 3, {0.5, -1.3, 0.0});
    const Mat& silu = t.value(t.activation(t.constant(in), Act::silu));
    CHECK(silu.d[0] == doctest::Approx(0.3112296656009273).epsilon(1e-14));
    CHECK(silu.d[1] == doctest::Approx(-0.2784145220446738).epsilon(1e-14));
    CHECK(silu.d[2] == 0.0);
    const Mat& relu = t.value(t.activation(t.constant(in), Act::relu));
    CHECK(relu.d[0] == 0.5);
    CHECK(relu.d[1] == 0.0);
}

TEST_CASE("shape errors are loud") {
    Tape t;
    Tape::Ref a = t.constant(Mat(2, 3));
    Tape::Ref b = t.constant(Mat(2, 2));
    CHECK_THROWS_AS(t.add(a, b), DimensionError);
    CHECK_THROWS_AS(t.matmul(a, a), DimensionError);
}
