#include "sd2nn/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "doctest.h"
#include "sd2nn/errors.hpp"
#include "sd2nn/rng.hpp"

using namespace sd2nn;
using ad::NodeId;
using ad::RowMat;
using ad::Tape;

namespace {

void fill_gaussian(rng::Engine& eng, double scale, double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = scale * eng.gaussian();
}

// flat views into a parameter set, in tape offset order, for FD probing
struct Slots {
    std::vector<double*> p;
    void add(RowMat& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) p.push_back(m.data() + i);
    }
    void add(Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) p.push_back(v.data() + i);
    }
    long size() const { return static_cast<long>(p.size()); }
};

Eigen::VectorXd fd_gradient(const std::function<double()>& value, Slots& slots, double h) {
    Eigen::VectorXd g(slots.size());
    for (long k = 0; k < slots.size(); ++k) {
        const double save = *slots.p[k];
        *slots.p[k] = save + h;
        const double up = value();
        *slots.p[k] = save - h;
        const double dn = value();
        *slots.p[k] = save;
        g[k] = (up - dn) / (2.0 * h);
    }
    return g;
}

void check_close(const Eigen::VectorXd& got, const Eigen::VectorXd& want, double tol) {
    REQUIRE(got.size() == want.size());
    for (Eigen::Index i = 0; i < got.size(); ++i) {
        CAPTURE(i);
        CAPTURE(got[i]);
        CAPTURE(want[i]);
        CHECK(std::abs(got[i] - want[i]) <= tol * std::max(1.0, std::abs(want[i])));
    }
}

}  // namespace

TEST_CASE("input node carries per-sample identity tangents") {
    Eigen::MatrixXd x(3, 2);
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    Tape tape;
    NodeId xin = tape.input(x, true);
    REQUIRE(tape.tangents(xin).size() == 2);
    CHECK(tape.tangents(xin)[0].col(0).isOnes());
    CHECK(tape.tangents(xin)[0].col(1).isZero());
    CHECK(tape.tangents(xin)[1].col(1).isOnes());
    CHECK(tape.tangents(xin)[1].col(0).isZero());

    Tape flat;
    NodeId xn = flat.input(x, false);
    CHECK(flat.tangents(xn).empty());
}

TEST_CASE("spatial tangents of a scaled tanh net match finite differences") {
    rng::Engine eng(11);
    const int batch = 6;
    RowMat w1(8, 2), w2(1, 8);
    Eigen::VectorXd b1(8), b2(1), lam(8);
    fill_gaussian(eng, 0.8, w1.data(), w1.size());
    fill_gaussian(eng, 0.3, b1.data(), b1.size());
    fill_gaussian(eng, 0.7, w2.data(), w2.size());
    fill_gaussian(eng, 0.3, b2.data(), b2.size());
    lam << 1, 1, 2, 2, 3, 3, 4, 4;

    Eigen::MatrixXd x(batch, 2);
    fill_gaussian(eng, 0.5, x.data(), x.size());

    auto eval_u = [&](const Eigen::MatrixXd& pts) {
        Tape t;
        NodeId xin = t.input(pts, false);
        NodeId a1 = t.affine(xin, w1, b1, -1, -1);
        NodeId s1 = t.scale(a1, lam);
        NodeId h1 = t.activation(s1, Activation::tanh());
        NodeId u = t.affine(h1, w2, b2, -1, -1);
        return Eigen::MatrixXd(t.value(u));
    };

    Tape tape;
    NodeId xin = tape.input(x, true);
    NodeId a1 = tape.affine(xin, w1, b1, -1, -1);
    NodeId s1 = tape.scale(a1, lam);
    NodeId h1 = tape.activation(s1, Activation::tanh());
    NodeId u = tape.affine(h1, w2, b2, -1, -1);

    // forward value against the plain dense computation
    Eigen::MatrixXd manual =
        ((((x * w1.transpose()).rowwise() + b1.transpose()).array().rowwise() *
          lam.transpose().array())
             .tanh()
             .matrix() *
         w2.transpose())
            .rowwise() +
        b2.transpose();
    CHECK((tape.value(u) - manual).cwiseAbs().maxCoeff() < 1e-14);

    const double h = 1e-5;
    for (int j = 0; j < 2; ++j) {
        Eigen::MatrixXd xp = x, xm = x;
        xp.col(j).array() += h;
        xm.col(j).array() -= h;
        Eigen::MatrixXd fd = (eval_u(xp) - eval_u(xm)) / (2.0 * h);
        const Eigen::MatrixXd& got = tape.tangents(u)[j];
        for (int i = 0; i < batch; ++i) {
            CAPTURE(i);
            CAPTURE(j);
            CHECK(std::abs(got(i, 0) - fd(i, 0)) <=
                  1e-6 * std::max(1.0, std::abs(fd(i, 0))));
        }
    }
}

TEST_CASE("parameter gradients match finite differences: tanh net with energy assembly") {
    rng::Engine eng(23);
    const int batch = 7;
    RowMat w1(8, 2), w2(1, 8);
    Eigen::VectorXd b1(8), b2(1), lam(8);
    fill_gaussian(eng, 0.8, w1.data(), w1.size());
    fill_gaussian(eng, 0.3, b1.data(), b1.size());
    fill_gaussian(eng, 0.7, w2.data(), w2.size());
    fill_gaussian(eng, 0.3, b2.data(), b2.size());
    lam << 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4;

    Eigen::MatrixXd x(batch, 2);
    fill_gaussian(eng, 0.5, x.data(), x.size());
    Eigen::VectorXd fvec(batch), avec(batch);
    fill_gaussian(eng, 1.0, fvec.data(), batch);
    for (int i = 0; i < batch; ++i) avec[i] = 0.5 + 0.3 * eng.uniform01();

    Slots slots;
    slots.add(w1);
    slots.add(b1);
    slots.add(w2);
    slots.add(b2);
    const long n = slots.size();
    const long off_b1 = w1.size(), off_w2 = off_b1 + 8, off_b2 = off_w2 + 8;

    // 0.5 mean(A |grad u|^2) - mean(f u) + 0.3 mean(u^2)
    auto record = [&](Tape& t, bool train) {
        NodeId xin = t.input(x, true);
        NodeId a1 = t.affine(xin, w1, b1, train ? 0 : -1, train ? off_b1 : -1, 0, 0);
        NodeId s1 = t.scale(a1, lam, 0);
        NodeId h1 = t.activation(s1, Activation::tanh(), 0, 0);
        NodeId u = t.affine(h1, w2, b2, train ? off_w2 : -1, train ? off_b2 : -1, 0, 1);
        NodeId gsn = t.grad_sq_norm(u);
        NodeId agsn = t.cmul(gsn, avec);
        NodeId e1 = t.mean_scaled(agsn, 0.5);
        NodeId fu = t.cmul(u, fvec);
        NodeId e2 = t.mean_scaled(fu, -1.0);
        NodeId usq = t.mul(u, u);
        NodeId e3 = t.mean_scaled(usq, 0.3);
        return t.add(t.add(e1, e2), e3);
    };
    auto value = [&]() {
        Tape t;
        return t.scalar(record(t, false));
    };

    Tape tape;
    NodeId root = record(tape, true);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    tape.backward(root, grad);

    Eigen::VectorXd fd = fd_gradient(value, slots, 1e-4);
    check_close(grad, fd, 5e-6);
}

TEST_CASE("parameter gradients match finite differences: sfm feature layer") {
    rng::Engine eng(31);
    const int batch = 5;
    RowMat w1(6, 2), w2(1, 12);
    Eigen::VectorXd b1(6), b2(1), lam(6);
    fill_gaussian(eng, 0.9, w1.data(), w1.size());
    fill_gaussian(eng, 0.4, b1.data(), b1.size());
    fill_gaussian(eng, 0.6, w2.data(), w2.size());
    fill_gaussian(eng, 0.2, b2.data(), b2.size());
    lam << 1, 2, 4, 8, 16, 32;

    Eigen::MatrixXd x(batch, 2);
    fill_gaussian(eng, 0.4, x.data(), x.size());
    Eigen::VectorXd fvec(batch);
    fill_gaussian(eng, 1.0, fvec.data(), batch);

    Slots slots;
    slots.add(w1);
    slots.add(b1);
    slots.add(w2);
    slots.add(b2);
    const long off_b1 = w1.size(), off_w2 = off_b1 + 6, off_b2 = off_w2 + 12;

    auto record = [&](Tape& t, bool train) {
        NodeId xin = t.input(x, true);
        NodeId a1 = t.affine(xin, w1, b1, train ? 0 : -1, train ? off_b1 : -1, 1, 0);
        NodeId s1 = t.scale(a1, lam, 1);
        NodeId h1 = t.activation(s1, Activation::sfm(0.7), 1, 0);
        NodeId u = t.affine(h1, w2, b2, train ? off_w2 : -1, train ? off_b2 : -1, 1, 1);
        NodeId gsn = t.grad_sq_norm(u);
        NodeId e1 = t.mean_scaled(gsn, 0.5);
        NodeId fu = t.cmul(u, fvec);
        NodeId e2 = t.mean_scaled(fu, -1.0);
        return t.add(e1, e2);
    };
    auto value = [&]() {
        Tape t;
        return t.scalar(record(t, false));
    };

    Tape tape;
    NodeId root = record(tape, true);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(slots.size());
    tape.backward(root, grad);

    Eigen::VectorXd fd = fd_gradient(value, slots, 1e-4);
    check_close(grad, fd, 2e-5);
}

TEST_CASE("parameter gradients match finite differences: s2relu resnet blocks") {
    rng::Engine eng(47);
    const int batch = 6;
    const int width = 10;
    RowMat w0(width, 2), w1(width, width), w2(1, width);
    Eigen::VectorXd b0(width), b1(width), b2(1);
    fill_gaussian(eng, 0.25, w0.data(), w0.size());
    b0.setConstant(0.5);
    fill_gaussian(eng, 0.2, w1.data(), w1.size());
    b1.setConstant(0.5);
    fill_gaussian(eng, 0.8, w2.data(), w2.size());
    fill_gaussian(eng, 0.2, b2.data(), b2.size());

    Eigen::MatrixXd x(batch, 2);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = eng.uniform(0.05, 0.95);
    Eigen::VectorXd fvec(batch);
    fill_gaussian(eng, 1.0, fvec.data(), batch);

    Slots slots;
    slots.add(w0);
    slots.add(b0);
    slots.add(w1);
    slots.add(b1);
    slots.add(w2);
    slots.add(b2);
    const long o_b0 = w0.size();
    const long o_w1 = o_b0 + width;
    const long o_b1 = o_w1 + w1.size();
    const long o_w2 = o_b1 + width;
    const long o_b2 = o_w2 + width;

    double kink_margin = 1.0;
    auto record = [&](Tape& t, bool train) {
        NodeId xin = t.input(x, true);
        NodeId z0 = t.affine(xin, w0, b0, train ? 0 : -1, train ? o_b0 : -1, 0, 0);
        NodeId y1 = t.activation(z0, Activation::s2relu(), 0, 0);
        NodeId z1 = t.affine(y1, w1, b1, train ? o_w1 : -1, train ? o_b1 : -1, 0, 1);
        NodeId h1 = t.activation(z1, Activation::s2relu(), 0, 1);
        NodeId y2 = t.add(y1, h1);  // skip connection
        NodeId u = t.affine(y2, w2, b2, train ? o_w2 : -1, train ? o_b2 : -1, 0, 2);
        for (NodeId z : {z0, z1}) {
            const Eigen::MatrixXd& v = t.value(z);
            for (Eigen::Index i = 0; i < v.size(); ++i)
                kink_margin = std::min(
                    {kink_margin, std::abs(v.data()[i]), std::abs(v.data()[i] - 1.0)});
        }
        NodeId gsn = t.grad_sq_norm(u);
        NodeId e1 = t.mean_scaled(gsn, 0.5);
        NodeId fu = t.cmul(u, fvec);
        NodeId e2 = t.mean_scaled(fu, -1.0);
        return t.add(e1, e2);
    };
    auto value = [&]() {
        Tape t;
        return t.scalar(record(t, false));
    };

    Tape tape;
    NodeId root = record(tape, true);
    // all pre-activations must sit safely inside the (0,1) window, or the FD
    // probe itself would step across a kink
    REQUIRE(kink_margin > 5e-3);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(slots.size());
    tape.backward(root, grad);

    Eigen::VectorXd fd = fd_gradient(value, slots, 5e-5);
    check_close(grad, fd, 5e-5);
}

TEST_CASE("parameter gradients match finite differences: p = 8 energy density") {
    rng::Engine eng(59);
    const int batch = 5;
    RowMat w1(6, 1), w2(1, 6);
    Eigen::VectorXd b1(6), b2(1);
    fill_gaussian(eng, 0.9, w1.data(), w1.size());
    fill_gaussian(eng, 0.3, b1.data(), b1.size());
    fill_gaussian(eng, 0.8, w2.data(), w2.size());
    fill_gaussian(eng, 0.2, b2.data(), b2.size());

    Eigen::MatrixXd x(batch, 1);
    fill_gaussian(eng, 0.6, x.data(), x.size());
    Eigen::VectorXd avec(batch), fvec(batch);
    for (int i = 0; i < batch; ++i) avec[i] = 0.4 + 0.4 * eng.uniform01();
    fill_gaussian(eng, 1.0, fvec.data(), batch);

    Slots slots;
    slots.add(w1);
    slots.add(b1);
    slots.add(w2);
    slots.add(b2);

    // (1/8) mean(A (|u'|^2 + eps)^4) - mean(f u)
    auto record = [&](Tape& t, bool train) {
        NodeId xin = t.input(x, true);
        NodeId a1 = t.affine(xin, w1, b1, train ? 0 : -1, train ? 6 : -1);
        NodeId h1 = t.activation(a1, Activation::tanh());
        NodeId u = t.affine(h1, w2, b2, train ? 12 : -1, train ? 18 : -1);
        NodeId gsn = t.grad_sq_norm(u);
        NodeId gp = t.pow_shifted(gsn, 4.0, 1e-30);
        NodeId agp = t.cmul(gp, avec);
        NodeId e1 = t.mean_scaled(agp, 1.0 / 8.0);
        NodeId fu = t.cmul(u, fvec);
        NodeId e2 = t.mean_scaled(fu, -1.0);
        return t.add(e1, e2);
    };
    auto value = [&]() {
        Tape t;
        return t.scalar(record(t, false));
    };

    Tape tape;
    NodeId root = record(tape, true);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(slots.size());
    tape.backward(root, grad);

    Eigen::VectorXd fd = fd_gradient(value, slots, 1e-4);
    check_close(grad, fd, 5e-5);
}

TEST_CASE("backward over two roots accumulates like the combined root") {
    rng::Engine eng(71);
    const int batch = 4;
    RowMat w1(5, 2), w2(1, 5);
    Eigen::VectorXd b1(5), b2(1);
    fill_gaussian(eng, 0.7, w1.data(), w1.size());
    fill_gaussian(eng, 0.3, b1.data(), b1.size());
    fill_gaussian(eng, 0.7, w2.data(), w2.size());
    fill_gaussian(eng, 0.3, b2.data(), b2.size());
    Eigen::MatrixXd x(batch, 2);
    fill_gaussian(eng, 0.5, x.data(), x.size());
    const long n = w1.size() + 5 + 5 + 1;

    auto record = [&](Tape& t) {
        NodeId xin = t.input(x, true);
        NodeId a1 = t.affine(xin, w1, b1, 0, w1.size());
        NodeId h1 = t.activation(a1, Activation::tanh());
        NodeId u = t.affine(h1, w2, b2, w1.size() + 5, n - 1);
        NodeId e1 = t.mean_scaled(t.grad_sq_norm(u), 0.5);
        NodeId e2 = t.mean_scaled(t.mul(u, u), 1.0);
        return std::pair<NodeId, NodeId>(e1, e2);
    };

    Tape t1;
    auto [a, b] = record(t1);
    Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(n);
    t1.backward(a, g_sum);
    t1.backward(b, g_sum);  // accumulates on top

    Tape t2;
    auto [c, d] = record(t2);
    Eigen::VectorXd g_comb = Eigen::VectorXd::Zero(n);
    t2.backward(t2.add(c, d), g_comb);

    for (long i = 0; i < n; ++i) {
        CAPTURE(i);
        CHECK(g_sum[i] == doctest::Approx(g_comb[i]).epsilon(1e-12));
    }

    // a second sweep over the same root must not be polluted by the first
    Eigen::VectorXd g_a1 = Eigen::VectorXd::Zero(n), g_a2 = Eigen::VectorXd::Zero(n);
    t1.backward(a, g_a1);
    t1.backward(a, g_a2);
    CHECK(std::memcmp(g_a1.data(), g_a2.data(), sizeof(double) * n) == 0);
}

TEST_CASE("replaying the tape reproduces the recorded values bit for bit") {
    rng::Engine eng(83);
    const int batch = 5;
    RowMat w1(6, 2), w2(1, 12);
    Eigen::VectorXd b1(6), b2(1), lam(6);
    fill_gaussian(eng, 0.9, w1.data(), w1.size());
    fill_gaussian(eng, 0.4, b1.data(), b1.size());
    fill_gaussian(eng, 0.6, w2.data(), w2.size());
    fill_gaussian(eng, 0.2, b2.data(), b2.size());
    lam << 1, 2, 3, 5, 8, 13;
    Eigen::MatrixXd x(batch, 2);
    fill_gaussian(eng, 0.5, x.data(), x.size());
    Eigen::VectorXd fvec(batch);
    fill_gaussian(eng, 1.0, fvec.data(), batch);

    auto record = [&](Tape& t) {
        NodeId xin = t.input(x, true);
        NodeId a1 = t.affine(xin, w1, b1, 0, w1.size());
        NodeId s1 = t.scale(a1, lam);
        NodeId h1 = t.activation(s1, Activation::sfm(0.5));
        NodeId u = t.affine(h1, w2, b2, 18, 30);
        NodeId e1 = t.mean_scaled(t.grad_sq_norm(u), 0.5);
        NodeId e2 = t.mean_scaled(t.cmul(u, fvec), -1.0);
        return t.add(e1, e2);
    };

    Tape t1, t2;
    NodeId r1 = record(t1);
    NodeId r2 = record(t2);
    const double v1 = t1.scalar(r1);
    const double v2 = t2.scalar(r2);
    CHECK(std::memcmp(&v1, &v2, sizeof(double)) == 0);
    CHECK(t1.replay_matches());

    Eigen::VectorXd g = Eigen::VectorXd::Zero(31);
    t1.backward(r1, g);
    CHECK(t1.replay_matches());  // the reverse sweep must not disturb the values

    Eigen::VectorXd g2 = Eigen::VectorXd::Zero(31);
    t2.backward(r2, g2);
    CHECK(std::memcmp(g.data(), g2.data(), sizeof(double) * 31) == 0);
}

TEST_CASE("tape rejects invalid programs") {
    Eigen::MatrixXd x(3, 2);
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    RowMat w(4, 2);
    w.setConstant(0.5);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(4);

    SUBCASE("derivative queries need the tangent channel") {
        Tape t;
        NodeId xin = t.input(x, false);
        RowMat w2(1, 2);
        w2.setConstant(0.3);
        Eigen::VectorXd b2 = Eigen::VectorXd::Zero(1);
        NodeId u = t.affine(xin, w2, b2, -1, -1);
        CHECK_THROWS_AS(t.grad_sq_norm(u), TapeError);
    }
    SUBCASE("shape mismatches are config errors") {
        Tape t;
        NodeId xin = t.input(x, true);
        RowMat bad(4, 3);
        bad.setZero();
        CHECK_THROWS_AS(t.affine(xin, bad, b, -1, -1), ConfigError);
        Eigen::VectorXd lam3 = Eigen::VectorXd::Ones(3);
        CHECK_THROWS_AS(t.scale(xin, lam3), ConfigError);
    }
    SUBCASE("reductions demand width-1 nodes") {
        Tape t;
        NodeId xin = t.input(x, true);
        CHECK_THROWS_AS(t.mean_scaled(xin, 1.0), TapeError);
        CHECK_THROWS_AS(t.grad_sq_norm(xin), TapeError);
    }
    SUBCASE("backward needs a scalar root") {
        Tape t;
        NodeId xin = t.input(x, true);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(1);
        CHECK_THROWS_AS(t.backward(xin, g), TapeError);
    }
    SUBCASE("non-finite results are reported with their location") {
        Tape t;
        NodeId xin = t.input(x, true);
        RowMat winf = w;
        winf(0, 0) = std::numeric_limits<double>::infinity();
        try {
            t.affine(xin, winf, b, -1, -1, 2, 1);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            std::string msg = e.what();
            CHECK(msg.find("affine") != std::string::npos);
            CHECK(msg.find("submodule 2") != std::string::npos);
        }
    }
    SUBCASE("mixed tangent presence cannot be added") {
        Tape t;
        NodeId a = t.input(x, true);
        NodeId c = t.input(x, false);
        CHECK_THROWS_AS(t.add(a, c), TapeError);
    }
}
