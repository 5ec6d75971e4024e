#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <cstring>

#include "sd2nn/composite.hpp"
#include "sd2nn/errors.hpp"

using namespace sd2nn;

namespace {

CompositeModel two_net_model(std::uint64_t seed) {
    CompositeModel m;
    m.nets.push_back(ScaledNet::build(1, {6, 5}, LambdaSpec::ones(), Activation::tanh(),
                                      Activation::tanh(), true, seed));
    m.nets.push_back(ScaledNet::build(1, {8, 6}, LambdaSpec::arithmetic(1, 1),
                                      Activation::s2relu(), Activation::s2relu(), true,
                                      seed + 1));
    m.alphas = {0.01};
    m.validate();
    return m;
}

CompositeModel planar_model(std::uint64_t seed) {
    CompositeModel m;
    m.nets.push_back(ScaledNet::build(2, {6, 6}, LambdaSpec::ones(), Activation::tanh(),
                                      Activation::tanh(), true, seed));
    m.nets.push_back(ScaledNet::build(2, {6, 6}, LambdaSpec::arithmetic(2, 2),
                                      Activation::sfm(0.5), Activation::tanh(), true, seed + 1));
    m.alphas = {0.05};
    m.validate();
    return m;
}

// constant-output model: every weight zero, final bias per submodule
CompositeModel constant_model(const std::vector<double>& outputs,
                              const std::vector<double>& alphas) {
    CompositeModel m;
    for (double c : outputs) {
        ScaledNet net = ScaledNet::build(1, {3}, LambdaSpec::ones(), Activation::tanh(),
                                         Activation::tanh(), true, 9);
        for (auto& wl : net.w) wl.setZero();
        for (auto& bl : net.b) bl.setZero();
        net.b.back()[0] = c;
        m.nets.push_back(std::move(net));
    }
    m.alphas = alphas;
    m.validate();
    return m;
}

Eigen::MatrixXd grid_points(int n, int d) {
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            x(i, j) = (static_cast<double>(i) + 0.5 * (j + 1)) / (n + d);
    return x;
}

}  // namespace

TEST_CASE("parts are the alpha-weighted submodule outputs, total is their sum") {
    const CompositeModel m = two_net_model(17);
    const Eigen::MatrixXd x = grid_points(9, 1);
    Eigen::VectorXd total;
    Eigen::MatrixXd parts;
    m.eval_parts(x, &total, &parts);
    REQUIRE(parts.rows() == 9);
    REQUIRE(parts.cols() == 2);

    const Eigen::VectorXd y0 = m.nets[0].eval(x);
    const Eigen::VectorXd y1 = m.nets[1].eval(x);
    for (int i = 0; i < 9; ++i) {
        CHECK(parts(i, 0) == y0[i]);
        CHECK(parts(i, 1) == 0.01 * y1[i]);
        CHECK(total[i] == doctest::Approx(parts(i, 0) + parts(i, 1)).epsilon(1e-15));
    }
}

TEST_CASE("constant submodules combine linearly: 0.25 + 0.01*2.0 = 0.27") {
    const CompositeModel m = constant_model({0.25, 2.0}, {0.01});
    Eigen::MatrixXd x(3, 1);
    x << 0.2, 0.5, 0.8;
    Eigen::VectorXd total;
    m.eval_parts(x, &total, nullptr);
    for (int i = 0; i < 3; ++i) CHECK(total[i] == doctest::Approx(0.27).epsilon(1e-15));
}

TEST_CASE("zero fine net leaves the coarse output untouched") {
    CompositeModel m = two_net_model(23);
    for (auto& wl : m.nets[1].w) wl.setZero();
    for (auto& bl : m.nets[1].b) bl.setZero();
    const Eigen::MatrixXd x = grid_points(5, 1);
    Eigen::VectorXd total;
    m.eval_parts(x, &total, nullptr);
    const Eigen::VectorXd coarse = m.nets[0].eval(x);
    for (int i = 0; i < 5; ++i) CHECK(total[i] == coarse[i]);
}

TEST_CASE("three-submodule combination with alphas (0.1, 0.01)") {
    CompositeModel m;
    for (int k = 0; k < 3; ++k)
        m.nets.push_back(ScaledNet::build(1, {5, 5}, LambdaSpec::arithmetic(1 + 3 * k, 1),
                                          Activation::s2relu(), Activation::s2relu(), true,
                                          50 + k));
    m.alphas = {0.1, 0.01};
    m.validate();

    const Eigen::MatrixXd x = grid_points(7, 1);
    Eigen::VectorXd total;
    Eigen::MatrixXd parts;
    m.eval_parts(x, &total, &parts);
    const Eigen::VectorXd w0 = m.nets[0].eval(x);
    const Eigen::VectorXd w1 = m.nets[1].eval(x);
    const Eigen::VectorXd w2 = m.nets[2].eval(x);
    for (int i = 0; i < 7; ++i) {
        const double want = w0[i] + 0.1 * w1[i] + 0.01 * w2[i];
        CHECK(total[i] == doctest::Approx(want).epsilon(1e-14));
        CHECK(parts(i, 1) == 0.1 * w1[i]);
        CHECK(parts(i, 2) == 0.01 * w2[i]);
    }
}

TEST_CASE("input gradients: additivity and a finite-difference cross-check") {
    const CompositeModel m = planar_model(31);
    const Eigen::MatrixXd x = grid_points(10, 2);

    Eigen::VectorXd total;
    Eigen::MatrixXd parts, grad_total;
    std::vector<Eigen::MatrixXd> grad_parts;
    m.eval_parts_with_grad(x, &total, &parts, &grad_total, &grad_parts);
    REQUIRE(grad_parts.size() == 2);

    Eigen::MatrixXd sum = grad_parts[0] + grad_parts[1];
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(grad_total(i, j) ==
                  doctest::Approx(sum(i, j)).epsilon(1e-14));

    const double h = 1e-5;
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 2; ++j) {
            Eigen::MatrixXd xp = x, xm = x;
            xp(i, j) += h;
            xm(i, j) -= h;
            Eigen::VectorXd up, um;
            m.eval_parts(xp, &up, nullptr);
            m.eval_parts(xm, &um, nullptr);
            const double fd = (up[i] - um[i]) / (2.0 * h);
            CHECK(std::abs(grad_total(i, j) - fd) <= 1e-6 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("constant model has exactly zero input gradients") {
    const CompositeModel m = constant_model({0.4, -1.0}, {0.5});
    const Eigen::MatrixXd x = grid_points(6, 1);
    Eigen::MatrixXd grad_total;
    m.eval_parts_with_grad(x, nullptr, nullptr, &grad_total, nullptr);
    CHECK(grad_total.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("a loss touching only the coarse output leaves the fine parameter block at zero") {
    const CompositeModel m = two_net_model(41);
    const Eigen::MatrixXd xb = grid_points(12, 1);
    const Eigen::VectorXd g = Eigen::VectorXd::Zero(12);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.n_params());
    const double val = loss_gradient(
        m,
        [&](ad::Tape& tape) {
            const ad::NodeId xin = tape.input(xb, false);
            const CompositeModel::Recorded rec = m.record(tape, xin, true);
            const ad::NodeId diff = tape.shift(rec.coarse, -g);
            return tape.mean_scaled(tape.mul(diff, diff), 1.0);
        },
        grad);
    CHECK(val >= 0.0);

    const long off1 = m.offset_of(1);
    CHECK(grad.segment(0, off1).lpNorm<Eigen::Infinity>() > 0.0);
    CHECK(grad.segment(off1, m.nets[1].n_params()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("recorded total equals eval_parts total on the same batch") {
    const CompositeModel m = two_net_model(55);
    const Eigen::MatrixXd x = grid_points(8, 1);

    ad::Tape tape;
    const CompositeModel::Recorded rec = m.record(tape, tape.input(x, false), false);
    const Eigen::VectorXd via_tape = tape.value(rec.total).col(0);

    Eigen::VectorXd total;
    m.eval_parts(x, &total, nullptr);
    for (int i = 0; i < 8; ++i)
        CHECK(via_tape[i] == doctest::Approx(total[i]).epsilon(1e-15));
}

TEST_CASE("flat parameter vector round trip and block offsets") {
    CompositeModel m = two_net_model(71);
    const Eigen::VectorXd flat = m.params_flat();
    REQUIRE(flat.size() == m.n_params());
    CHECK(m.offset_of(0) == 0);
    CHECK(m.offset_of(1) == m.nets[0].n_params());

    const Eigen::MatrixXd x = grid_points(5, 1);
    Eigen::VectorXd coarse_before = m.nets[0].eval(x);

    Eigen::VectorXd bumped = flat;
    bumped[m.offset_of(1) + 2] += 1.0;  // perturb the fine block only
    m.set_params_flat(bumped);
    CHECK(std::memcmp(m.nets[0].eval(x).data(), coarse_before.data(), 5 * sizeof(double)) == 0);

    m.set_params_flat(flat);
    const Eigen::VectorXd back = m.params_flat();
    CHECK(std::memcmp(back.data(), flat.data(), sizeof(double) * flat.size()) == 0);
}

TEST_CASE("validation rejects inconsistent models") {
    CompositeModel empty;
    CHECK_THROWS_AS(empty.validate(), ConfigError);

    CompositeModel m = two_net_model(81);
    m.alphas = {0.01, 0.02};
    CHECK_THROWS_AS(m.validate(), ConfigError);

    m.alphas = {-0.01};
    CHECK_THROWS_AS(m.validate(), ConfigError);

    m.alphas = {0.01};
    m.nets.push_back(ScaledNet::build(2, {4}, LambdaSpec::ones(), Activation::tanh(),
                                      Activation::tanh(), true, 1));
    m.alphas = {0.01, 0.02};
    CHECK_THROWS_AS(m.validate(), ConfigError);  // input dims disagree

    Eigen::VectorXd wrong(3);
    wrong.setZero();
    CompositeModel ok = two_net_model(82);
    CHECK_THROWS_AS(ok.set_params_flat(wrong), ConfigError);
}
