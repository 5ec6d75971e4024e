#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <limits>

#include "sd2nn/errors.hpp"
#include "sd2nn/optimizer.hpp"
#include "sd2nn/rng.hpp"

using namespace sd2nn;

namespace {

bool bits_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("learning-rate schedules") {
    AdamState opt(4);
    CHECK(opt.lr_at(0) == 2e-4);
    CHECK(opt.lr_at(20000) == doctest::Approx(1e-4).epsilon(1e-12));

    SUBCASE("inverse-time decay is strictly decreasing") {
        double prev = opt.lr_at(0);
        for (long e : {1L, 10L, 100L, 1000L, 10000L, 100000L}) {
            const double lr = opt.lr_at(e);
            CHECK(lr < prev);
            CHECK(lr > 0.0);
            prev = lr;
        }
    }
    SUBCASE("zero decay keeps the rate constant") {
        AdamConfig cfg;
        cfg.decay = 0.0;
        AdamState flat(4, cfg);
        CHECK(flat.lr_at(0) == cfg.lr0);
        CHECK(flat.lr_at(123456) == cfg.lr0);
    }
    SUBCASE("exponential variant") {
        AdamConfig cfg;
        cfg.decay_formula = AdamConfig::Decay::Exponential;
        AdamState ex(4, cfg);
        CHECK(ex.lr_at(0) == cfg.lr0);
        CHECK(ex.lr_at(20000) ==
              doctest::Approx(cfg.lr0 * std::exp(-1.0)).epsilon(1e-12));
        double prev = ex.lr_at(0);
        for (long e : {1L, 100L, 10000L}) {
            const double lr = ex.lr_at(e);
            CHECK(lr < prev);
            prev = lr;
        }
    }
    SUBCASE("negative epoch is rejected") {
        CHECK_THROWS_AS((void)opt.lr_at(-1), ConfigError);
    }
}

TEST_CASE("a zero gradient leaves the parameters bit-identical") {
    AdamState opt(5);
    Eigen::VectorXd params(5);
    params << 0.1, -0.2, 0.3, -0.4, 0.5;
    const Eigen::VectorXd before = params;
    opt.step(params, Eigen::VectorXd::Zero(5), 0);
    CHECK(bits_equal(params, before));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("first step reproduces the hand-evaluated Adam update") {
    AdamConfig cfg;  // defaults: lr0 2e-4, beta1 0.9, beta2 0.999, eps 1e-8
    AdamState opt(1, cfg);
    Eigen::VectorXd params(1);
    params << 0.5;
    Eigen::VectorXd grad(1);
    grad << 2.0;
    opt.step(params, grad, 0);

    const double m = (1.0 - cfg.beta1) * grad[0];
    const double v = (1.0 - cfg.beta2) * grad[0] * grad[0];
    const double mhat = m / (1.0 - cfg.beta1);
    const double vhat = v / (1.0 - cfg.beta2);
    const double want = 0.5 - cfg.lr0 * mhat / (std::sqrt(vhat) + cfg.eps);
    CHECK(params[0] == doctest::Approx(want).epsilon(1e-15));
    CHECK(opt.first_moment()[0] == doctest::Approx(m).epsilon(1e-15));
    CHECK(opt.second_moment()[0] == doctest::Approx(v).epsilon(1e-15));

    SUBCASE("the epoch argument selects the decayed rate") {
        AdamState late(1, cfg);
        Eigen::VectorXd p2(1);
        p2 << 0.5;
        late.step(p2, grad, 20000);
        const double want_late = 0.5 - late.lr_at(20000) * mhat / (std::sqrt(vhat) + cfg.eps);
        CHECK(p2[0] == doctest::Approx(want_late).epsilon(1e-15));
    }
}

TEST_CASE("Adam drives a quadratic bowl to ~0 within 5000 steps") {
    AdamConfig cfg;
    cfg.lr0 = 0.01;
    cfg.decay = 0.0;
    const int n = 8;
    AdamState opt(n, cfg);

    rng::Engine eng(97);
    Eigen::VectorXd theta(n);
    for (int i = 0; i < n; ++i) theta[i] = 2.0 * eng.uniform01() - 1.0;
    REQUIRE(theta.norm() <= std::sqrt(static_cast<double>(n)));

    for (long e = 0; e < 5000; ++e) opt.step(theta, theta, e);
    CHECK(theta.norm() <= 1e-6);
}

TEST_CASE("identical gradient streams give bit-identical trajectories") {
    const int n = 6;
    AdamState a(n), b(n);
    Eigen::VectorXd pa = Eigen::VectorXd::LinSpaced(n, -0.3, 0.4);
    Eigen::VectorXd pb = pa;
    rng::Engine eng(13);
    for (long e = 0; e < 50; ++e) {
        Eigen::VectorXd grad(n);
        for (int i = 0; i < n; ++i) grad[i] = eng.gaussian();
        a.step(pa, grad, e);
        b.step(pb, grad, e);
    }
    CHECK(bits_equal(pa, pb));
    CHECK(a.step_count() == 50);
}

TEST_CASE("optimizer validation errors") {
    CHECK_THROWS_AS(AdamState(0), ConfigError);
    {
        AdamConfig cfg;
        cfg.lr0 = 0.0;
        CHECK_THROWS_AS(AdamState(4, cfg), ConfigError);
    }
    {
        AdamConfig cfg;
        cfg.beta1 = 1.0;
        CHECK_THROWS_AS(AdamState(4, cfg), ConfigError);
    }
    {
        AdamConfig cfg;
        cfg.beta2 = -0.1;
        CHECK_THROWS_AS(AdamState(4, cfg), ConfigError);
    }
    {
        AdamConfig cfg;
        cfg.eps = 0.0;
        CHECK_THROWS_AS(AdamState(4, cfg), ConfigError);
    }
    {
        AdamConfig cfg;
        cfg.decay = -1e-3;
        CHECK_THROWS_AS(AdamState(4, cfg), ConfigError);
    }

    AdamState opt(3);
    Eigen::VectorXd params = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(opt.step(params, Eigen::VectorXd::Zero(2), 0), ConfigError);

    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    bad[1] = std::nan("");
    CHECK_THROWS_AS(opt.step(params, bad, 0), NumericError);
    bad[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(opt.step(params, bad, 0), NumericError);
}
