#include "sd2nn/activation.hpp"

#include <cmath>

#include "doctest.h"
#include "sd2nn/errors.hpp"
#include "sd2nn/rng.hpp"

using namespace sd2nn;

namespace {

// central differences on the scalar activations
double fd1(Act k, double z, double h) {
    return (act_value(k, z + h) - act_value(k, z - h)) / (2.0 * h);
}
double fd2(Act k, double z, double h) {
    return (act_d1(k, z + h) - act_d1(k, z - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("activation derivatives match finite differences") {
    const double h = 1e-6;
    struct Probe {
        Act kind;
        std::vector<double> pts;
    };
    const std::vector<Probe> probes = {
        {Act::Tanh, {-2.1, -0.7, 0.0, 0.4, 1.3}},
        {Act::Relu, {-1.5, -0.2, 0.3, 2.0}},
        {Act::Srelu, {0.12, 0.35, 0.5, 0.88, -0.5, 1.5}},
        {Act::S2relu, {0.12, 0.35, 0.5, 0.88, -0.5, 1.5}},
    };
    for (const auto& p : probes) {
        for (double z : p.pts) {
            CAPTURE(static_cast<int>(p.kind));
            CAPTURE(z);
            CHECK(act_d1(p.kind, z) == doctest::Approx(fd1(p.kind, z, h)).epsilon(1e-6));
            CHECK(act_d2(p.kind, z) == doctest::Approx(fd2(p.kind, z, h)).epsilon(1e-6));
        }
    }
}

TEST_CASE("windowed activations vanish outside (0,1) and at the kinks") {
    for (Act k : {Act::Srelu, Act::S2relu}) {
        for (double z : {-0.3, 0.0, 1.0, 1.7}) {
            CHECK(act_value(k, z) == 0.0);
            CHECK(act_d1(k, z) == 0.0);
            CHECK(act_d2(k, z) == 0.0);
        }
    }
    CHECK(act_d1(Act::Relu, 0.0) == 0.0);
    // s2relu is C^1: the one-sided slopes at 0 and 1 vanish
    CHECK(std::abs(act_d1(Act::S2relu, 1e-9)) < 1e-7);
    CHECK(std::abs(act_d1(Act::S2relu, 1.0 - 1e-9)) < 1e-7);
}

TEST_CASE("s2relu closed form") {
    // sin(2 pi z) relu(z) relu(1-z), checked directly against the factors
    for (double z : {0.1, 0.25, 0.6, 0.93}) {
        double expect = std::sin(2.0 * M_PI * z) * std::max(z, 0.0) * std::max(1.0 - z, 0.0);
        CHECK(act_value(Act::S2relu, z) == doctest::Approx(expect).epsilon(1e-15));
    }
    // srelu likewise
    for (double z : {0.1, 0.25, 0.6, 0.93}) {
        double expect = std::max(z, 0.0) * std::max(1.0 - z, 0.0);
        CHECK(act_value(Act::Srelu, z) == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("sfm doubles the width and lands on the circle of radius s") {
    Eigen::VectorXd z(3);
    z << 0.0, 1.2, -4.5;
    for (double s : {1.0, 0.5}) {
        Eigen::VectorXd out = activate(Activation::sfm(s), z);
        REQUIRE(out.size() == 6);
        // z = 0 maps to (s, 0) exactly
        CHECK(out[0] == s);
        CHECK(out[3] == 0.0);
        for (int i = 0; i < 3; ++i) {
            double n2 = out[i] * out[i] + out[i + 3] * out[i + 3];
            CHECK(n2 == doctest::Approx(s * s).epsilon(4e-16));
        }
    }
    CHECK(Activation::sfm(0.5).out_width(30) == 60);
    CHECK(Activation::tanh().out_width(30) == 30);
}

TEST_CASE("activation id parsing round-trips") {
    for (const char* id : {"tanh", "relu", "srelu", "s2relu", "sfm(1)", "sfm(0.5)"}) {
        Activation a = parse_activation(id);
        CHECK(parse_activation(to_string(a)) == a);
    }
    CHECK(parse_activation("sfm") == Activation::sfm(1.0));
    CHECK_THROWS_AS(parse_activation("selu"), ConfigError);
    CHECK_THROWS_AS(parse_activation("sfm(0)"), ConfigError);
    CHECK_THROWS_AS(parse_activation("sfm(1.5)"), ConfigError);
    CHECK_THROWS_AS(parse_activation("sfm[0.5]"), ConfigError);
}

TEST_CASE("batch evaluation agrees with the scalar path bit for bit") {
    rng::Engine eng(77);
    Eigen::MatrixXd z(5, 4);
    for (int i = 0; i < z.size(); ++i) z.data()[i] = eng.uniform(-1.5, 1.5);
    for (Act k : {Act::Tanh, Act::Relu, Act::Srelu, Act::S2relu}) {
        Eigen::MatrixXd v, d1, d2;
        act_eval(k, z, &v, &d1, &d2);
        for (int i = 0; i < z.size(); ++i) {
            CHECK(v.data()[i] == act_value(k, z.data()[i]));
            CHECK(d1.data()[i] == act_d1(k, z.data()[i]));
            CHECK(d2.data()[i] == act_d2(k, z.data()[i]));
        }
    }
    CHECK_THROWS_AS(act_value(Act::Sfm, 0.3), TapeError);
}
