#include "sd2nn/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sd2nn/composite.hpp"
#include "sd2nn/experiments.hpp"
#include "sd2nn/format.hpp"
#include "sd2nn/loss.hpp"
#include "sd2nn/reference.hpp"
#include "sd2nn/rng.hpp"
#include "sd2nn/sampling.hpp"

namespace sd2nn {

namespace {

constexpr double kPi = 3.14159265358979323846;

CheckResult make_result(const std::string& name, bool pass, const std::string& detail) {
    return {name, pass, detail};
}

// -------- activation identities ----------------------------------------

struct ScalarAct {
    std::function<double(double)> v, d1, d2;
};

ScalarAct library_act(Act kind) {
    return {[kind](double z) { return act_value(kind, z); },
            [kind](double z) { return act_d1(kind, z); },
            [kind](double z) { return act_d2(kind, z); }};
}

// the fault-injection fixture: s2relu with the sine factor dropped
ScalarAct corrupted_s2relu() {
    auto window = [](double z) { return z > 0.0 && z < 1.0; };
    return {[window](double z) { return window(z) ? z * (1.0 - z) : 0.0; },
            [window](double z) { return window(z) ? 1.0 - 2.0 * z : 0.0; },
            [window](double z) { return window(z) ? -2.0 : 0.0; }};
}

CheckResult check_activation_identities(bool corrupt) {
    const double h = 1e-6;
    const double tol_fd = 2e-6;
    double worst = 0.0;
    std::string worst_what = "-";

    auto note = [&](double err, const std::string& what) {
        if (err > worst) {
            worst = err;
            worst_what = what;
        }
    };

    // derivative identities against central differences, away from kinks
    const double zs[] = {-1.3, -0.42, 0.07, 0.31, 0.55, 0.86, 1.72};
    for (Act kind : {Act::Tanh, Act::Relu, Act::Srelu, Act::S2relu}) {
        ScalarAct a = library_act(kind);
        if (corrupt && kind == Act::S2relu) a = corrupted_s2relu();
        for (double z : zs) {
            const double fd1 = (a.v(z + h) - a.v(z - h)) / (2.0 * h);
            const double fd2 = (a.d1(z + h) - a.d1(z - h)) / (2.0 * h);
            note(std::abs(a.d1(z) - fd1) / std::max(1.0, std::abs(fd1)), "d1 fd");
            note(std::abs(a.d2(z) - fd2) / std::max(1.0, std::abs(fd2)), "d2 fd");
        }
        // closed forms
        if (kind == Act::S2relu) {
            for (double z : {0.1, 0.25, 0.6, 0.93}) {
                const double want = std::sin(2.0 * kPi * z) * z * (1.0 - z);
                note(std::abs(a.v(z) - want), "s2relu closed form");
            }
        }
        if (kind == Act::Srelu) {
            note(std::abs(a.v(0.25) - 0.1875), "srelu closed form");
        }
    }

    // sfm circle identity: the feature pair lies on a circle of radius s
    for (double s : {1.0, 0.5}) {
        Eigen::VectorXd z(3);
        z << 0.0, 0.7, -2.3;
        const Eigen::VectorXd out = activate(Activation::sfm(s), z);
        for (int i = 0; i < 3; ++i) {
            const double n2 = out[i] * out[i] + out[3 + i] * out[3 + i];
            note(std::abs(n2 - s * s), "sfm circle");
        }
    }

    const bool pass = worst <= tol_fd;
    return make_result("activation_identities", pass,
                       "worst deviation " + format_double(worst) + " (" + worst_what +
                           "), tolerance " + format_double(tol_fd));
}

// -------- staged boundary penalty table ---------------------------------

CheckResult check_gamma_table() {
    const double g0 = 100.0;
    const long t = 100000;
    const long epochs[] = {0, 5000, 15000, 22000, 40000, 70000, 99000};
    const double want[] = {g0, g0, 10 * g0, 50 * g0, 100 * g0, 200 * g0, 500 * g0};
    for (int i = 0; i < 7; ++i) {
        if (gamma_schedule(epochs[i], t, g0) != want[i])
            return make_result("gamma_table", false,
                               "epoch " + std::to_string(epochs[i]) + ": got " +
                                   format_double(gamma_schedule(epochs[i], t, g0)) +
                                   ", want " + format_double(want[i]));
    }
    return make_result("gamma_table", true, "six stages exact at t_max 100000");
}

// -------- loss gradient vs finite differences ---------------------------

CheckResult check_loss_gradient() {
    CompositeModel model;
    model.nets.push_back(ScaledNet::build(1, {4, 4}, LambdaSpec::ones(), Activation::tanh(),
                                          Activation::tanh(), true, 11));
    model.nets.push_back(ScaledNet::build(1, {4, 4}, LambdaSpec::arithmetic(1.0, 1.0),
                                          Activation::sfm(0.5), Activation::s2relu(), true,
                                          12));
    model.alphas = {0.01};
    model.validate();

    const EnergyForm form = EnergyForm::p_laplacian(
        2.0, coeff_1d_linear(0.1), [](const Eigen::VectorXd&) { return 1.0; });
    LossConfig cfg;
    const Domain dom = Domain::unit_interval();
    const Eigen::MatrixXd xi = sample_interior(dom, 16, 101);
    const Eigen::MatrixXd xb = sample_boundary(dom, 8, 102);
    const Eigen::VectorXd g = Eigen::VectorXd::Zero(8);

    Eigen::VectorXd grad(model.n_params());
    grad.setZero();
    total_loss(form, model, cfg, dom.volume(), xi, xb, g, 0, 1000, &grad);

    Eigen::VectorXd theta = model.params_flat();
    const double h = 1e-4;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        model.set_params_flat(tp);
        const double lp =
            total_loss(form, model, cfg, dom.volume(), xi, xb, g, 0, 1000, nullptr).total;
        model.set_params_flat(tm);
        const double lm =
            total_loss(form, model, cfg, dom.volume(), xi, xb, g, 0, 1000, nullptr).total;
        const double fd = (lp - lm) / (2.0 * h);
        worst = std::max(worst, std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)));
    }
    model.set_params_flat(theta);
    const bool pass = worst <= 1e-5;
    return make_result("loss_gradient_fd", pass,
                       "worst rel. deviation " + format_double(worst) + " over " +
                           std::to_string(theta.size()) + " parameters, tolerance 1e-05");
}

// -------- solver convergence ---------------------------------------------

CheckResult check_fd1d_convergence() {
    auto a1 = [](double) { return 1.0; };
    auto f1 = [](double x) { return kPi * kPi * std::sin(kPi * x); };
    double errs[3];
    const int ns[3] = {64, 128, 256};
    for (int k = 0; k < 3; ++k) {
        const GridSolution sol = fd_solve_1d(a1, f1, ns[k]);
        double e = 0.0;
        for (int i = 0; i <= ns[k]; ++i)
            e = std::max(e, std::abs(sol.node(i) - std::sin(kPi * sol.node_coord(i))));
        errs[k] = e;
    }
    const double o1 = std::log2(errs[0] / errs[1]);
    const double o2 = std::log2(errs[1] / errs[2]);

    // quadratic solutions are reproduced to solver precision
    const GridSolution quad = fd_solve_1d([](double) { return 1.0; },
                                          [](double) { return 2.0; }, 100);
    double qerr = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double x = quad.node_coord(i);
        qerr = std::max(qerr, std::abs(quad.node(i) - x * (1.0 - x)));
    }

    const bool pass = o1 >= 1.9 && o2 >= 1.9 && qerr <= 1e-12;
    return make_result("fd1d_convergence", pass,
                       "orders " + format_double(o1) + ", " + format_double(o2) +
                           " (>= 1.9); quadratic exactness " + format_double(qerr) +
                           " (<= 1e-12)");
}

CheckResult check_fd2d_convergence() {
    const FieldN a1 = [](const Eigen::VectorXd&) { return 1.0; };
    const FieldN f1 = [](const Eigen::VectorXd& x) {
        return 2.0 * kPi * kPi * std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
    };
    double errs[3];
    const int ns[3] = {16, 32, 64};
    for (int k = 0; k < 3; ++k) {
        const GridSolution sol = fd_solve_2d(a1, f1, ns[k], 0.0, 1.0);
        double e = 0.0;
        for (int j = 0; j <= ns[k]; ++j)
            for (int i = 0; i <= ns[k]; ++i) {
                const double want =
                    std::sin(kPi * sol.node_coord(i)) * std::sin(kPi * sol.node_coord(j));
                e = std::max(e, std::abs(sol.node(i, j) - want));
            }
        errs[k] = e;
    }
    const double o1 = std::log2(errs[0] / errs[1]);
    const double o2 = std::log2(errs[1] / errs[2]);
    const bool pass = o1 >= 1.9 && o2 >= 1.9;
    return make_result("fd2d_convergence", pass,
                       "orders " + format_double(o1) + ", " + format_double(o2) + " (>= 1.9)");
}

// -------- exact-solution residual spot checks ----------------------------

// residual of -(A u')' = f via central differences of A(x) u'(x)
double residual_1d(const FieldN& A, const ExactSolution& ex, const FieldN& f, double x,
                   double h) {
    auto flux = [&](double t) {
        Eigen::VectorXd v(1);
        v << t;
        return A(v) * ex.grad_u(v)[0];
    };
    Eigen::VectorXd v(1);
    v << x;
    return -(flux(x + h) - flux(x - h)) / (2.0 * h) - f(v);
}

CheckResult check_exact_residuals() {
    rng::Engine eng(2024);
    double worst = 0.0;
    std::string worst_what;

    auto note = [&](double err, const char* what) {
        if (err > worst) {
            worst = err;
            worst_what = what;
        }
    };

    {
        const ExactSolution ex = exact_1d_linear(0.1);
        const FieldN a = coeff_1d_linear(0.1);
        for (int i = 0; i < 100; ++i) {
            const double x = 0.02 + 0.96 * eng.uniform01();
            note(std::abs(residual_1d(a, ex, [](const Eigen::VectorXd&) { return 1.0; }, x,
                                      1e-6)) /
                     2.0,
                 "lin1d");
        }
    }
    {
        const ExactSolution ex = exact_three_scale(0.1, 0.01);
        const FieldN a = coeff_three_scale(0.1, 0.01);
        const FieldN f = source_three_scale(0.1, 0.01);
        for (int i = 0; i < 100; ++i) {
            const double x = 0.02 + 0.96 * eng.uniform01();
            Eigen::VectorXd v(1);
            v << x;
            note(std::abs(residual_1d(a, ex, f, x, 5e-8)) / (1.0 + std::abs(f(v))),
                 "threescale");
        }
    }
    {
        // Poisson-Boltzmann residual in 3D: -div(A grad u) + pi^2 u - f
        const ExactSolution ex = exact_pb_3d();
        const FieldN a = coeff_pb_3d();
        const FieldN f = source_pb_3d();
        const double h = 1e-5;
        for (int i = 0; i < 40; ++i) {
            Eigen::VectorXd x(3);
            for (int d = 0; d < 3; ++d) x[d] = 0.05 + 0.9 * eng.uniform01();
            double div = 0.0;
            for (int d = 0; d < 3; ++d) {
                Eigen::VectorXd xp = x, xm = x;
                xp[d] += h;
                xm[d] -= h;
                div += (a(xp) * ex.grad_u(xp)[d] - a(xm) * ex.grad_u(xm)[d]) / (2.0 * h);
            }
            const double res = -div + kPi * kPi * ex.u(x) - f(x);
            note(std::abs(res) / (1.0 + std::abs(f(x))), "pb3d");
        }
    }

    const bool pass = worst <= 1e-4;
    return make_result("exact_residuals", pass,
                       "worst scaled residual " + format_double(worst) + " (" + worst_what +
                           "), tolerance 1e-04");
}

// -------- sampler statistics and geometry --------------------------------

CheckResult check_sampler_uniformity() {
    const Domain dom = Domain::unit_interval();
    const int n = 20000, bins = 20;
    const Eigen::MatrixXd x = sample_interior(dom, n, 555);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(bins);
    for (Eigen::Index i = 0; i < n; ++i) {
        int b = static_cast<int>(x(i, 0) * bins);
        b = std::clamp(b, 0, bins - 1);
        counts[b] += 1.0;
    }
    const double expect = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (int b = 0; b < bins; ++b)
        chi2 += (counts[b] - expect) * (counts[b] - expect) / expect;
    // 0.999 quantile of chi^2 with 19 degrees of freedom
    const double limit = 43.82;
    return make_result("sampler_uniformity", chi2 <= limit,
                       "chi^2 " + format_double(chi2) + " over " + std::to_string(bins) +
                           " bins, limit " + format_double(limit));
}

CheckResult check_hole_predicates() {
    const Domain dom = Domain::perforated_cube();
    const Eigen::MatrixXd xi = sample_interior(dom, 5000, 777);
    long bad_inside = 0;
    for (Eigen::Index i = 0; i < xi.rows(); ++i)
        if (!dom.contains(xi.row(i).transpose())) ++bad_inside;

    const Eigen::MatrixXd xb = sample_boundary(dom, 2000, 778);
    long bad_boundary = 0;
    for (Eigen::Index i = 0; i < xb.rows(); ++i) {
        const Eigen::VectorXd x = xb.row(i).transpose();
        bool on_face = false;
        for (int d = 0; d < 3; ++d)
            if (std::abs(x[d] - dom.lo[d]) <= 1e-12 || std::abs(x[d] - dom.hi[d]) <= 1e-12)
                on_face = true;
        bool on_hole = false;
        for (const Sphere& s : dom.holes)
            if (std::abs((x - s.center).norm() - s.radius) <= 1e-9) on_hole = true;
        if (!on_face && !on_hole) ++bad_boundary;
    }
    const bool pass = bad_inside == 0 && bad_boundary == 0;
    return make_result("hole_predicates", pass,
                       std::to_string(bad_inside) + " interior points in holes, " +
                           std::to_string(bad_boundary) + " boundary points off-surface");
}

CheckResult check_init_variance() {
    const ScaledNet net = ScaledNet::build(10, {300, 300}, LambdaSpec::ones(),
                                           Activation::tanh(), Activation::tanh(), true, 303);
    double worst = 0.0;
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        const auto& W = net.w[l];
        const double want = 2.0 / static_cast<double>(W.rows() + W.cols());
        const double mean = W.mean();
        const double var = (W.array() - mean).square().sum() / (W.size() - 1);
        if (W.size() < 1000) continue;  // skip layers too small to estimate
        worst = std::max(worst, std::abs(var - want) / want);
    }
    const bool pass = worst <= 0.05;
    return make_result("init_variance", pass,
                       "worst relative deviation from 2/(fan_in+fan_out): " +
                           format_double(worst) + ", tolerance 0.05");
}

}  // namespace

std::vector<CheckResult> run_selftests(const SelftestOptions& opt) {
    std::vector<CheckResult> out;
    out.push_back(check_activation_identities(opt.corrupt_s2relu));
    out.push_back(check_gamma_table());
    out.push_back(check_loss_gradient());
    out.push_back(check_fd1d_convergence());
    out.push_back(check_fd2d_convergence());
    out.push_back(check_exact_residuals());
    out.push_back(check_sampler_uniformity());
    out.push_back(check_hole_predicates());
    out.push_back(check_init_variance());
    return out;
}

}  // namespace sd2nn
