#include "sd2nn/reference.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

#include "sd2nn/errors.hpp"

namespace sd2nn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_integral_inverse(double eps, const char* what) {
    if (!(eps > 0.0)) throw ConfigError(std::string(what) + ": eps must be > 0");
    const double inv = 1.0 / eps;
    if (std::abs(inv - std::llround(inv)) > 1e-9 || std::llround(inv) < 1)
        throw ConfigError(std::string(what) + ": 1/eps must be a positive integer, got eps = " +
                          std::to_string(eps));
}

}  // namespace

double GridSolution::at(const Eigen::VectorXd& x) const {
    const double hh = h();
    auto clamp_cell = [&](double c, int& i, double& t) {
        double s = (c - lo) / hh;
        s = std::clamp(s, 0.0, static_cast<double>(n_cells));
        i = std::min(static_cast<int>(s), n_cells - 1);
        t = s - i;
    };
    if (dim == 1) {
        int i;
        double t;
        clamp_cell(x[0], i, t);
        return (1.0 - t) * node(i) + t * node(i + 1);
    }
    int i, j;
    double t, s;
    clamp_cell(x[0], i, t);
    clamp_cell(x[1], j, s);
    return (1.0 - t) * (1.0 - s) * node(i, j) + t * (1.0 - s) * node(i + 1, j) +
           (1.0 - t) * s * node(i, j + 1) + t * s * node(i + 1, j + 1);
}

void GridSolution::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot open " + path + " for writing");
    out.precision(17);
    if (dim == 1) {
        out << "x,u\n";
        for (int i = 0; i <= n_cells; ++i) out << node_coord(i) << ',' << node(i) << '\n';
    } else {
        out << "x1,x2,u\n";
        for (int j = 0; j <= n_cells; ++j)
            for (int i = 0; i <= n_cells; ++i)
                out << node_coord(i) << ',' << node_coord(j) << ',' << node(i, j) << '\n';
    }
}

ExactSolution exact_1d_linear(double eps) {
    require_integral_inverse(eps, "exact_1d_linear");
    const double a = kTwoPi / eps;
    ExactSolution sol;
    sol.dim = 1;
    sol.coarse_part = [](const Eigen::VectorXd& x) { return x[0] - x[0] * x[0]; };
    sol.fine_part = [a, eps](const Eigen::VectorXd& xv) {
        const double x = xv[0];
        const double c = eps / kTwoPi;  // = 1/a
        return c * (0.5 - x) * std::sin(a * x) + c * c * (1.0 - std::cos(a * x));
    };
    sol.u = [sol](const Eigen::VectorXd& x) { return sol.coarse_part(x) + sol.fine_part(x); };
    sol.grad_u = [a](const Eigen::VectorXd& xv) {
        Eigen::VectorXd g(1);
        g[0] = (0.5 - xv[0]) * (2.0 + std::cos(a * xv[0]));
        return g;
    };
    return sol;
}

FieldN coeff_1d_linear(double eps) {
    require_integral_inverse(eps, "coeff_1d_linear");
    const double a = kTwoPi / eps;
    return [a](const Eigen::VectorXd& x) { return 1.0 / (2.0 + std::cos(a * x[0])); };
}

FieldN source_for_p8(double eps) {
    require_integral_inverse(eps, "source_for_p8");
    const double a = kTwoPi / eps;
    // u' = (1/2 - x)(2 + cos(ax)) and A = (2 + cos(ax))^-1, so the flux is
    // A (u')^7 = (1/2 - x)^7 (2 + cos(ax))^6 and f = -(flux)'
    return [a](const Eigen::VectorXd& xv) {
        const double x = xv[0];
        const double s = 0.5 - x;
        const double c = 2.0 + std::cos(a * x);
        const double s6 = std::pow(s, 6);
        const double c5 = std::pow(c, 5);
        return s6 * c5 * (7.0 * c + 6.0 * a * s * std::sin(a * x));
    };
}

ExactSolution exact_three_scale(double eps1, double eps2) {
    require_integral_inverse(eps1, "exact_three_scale");
    require_integral_inverse(eps2, "exact_three_scale");
    if (!(eps1 < 1.0 && eps2 < eps1))
        throw ConfigError("exact_three_scale: requires 1 > eps1 > eps2 > 0");
    const double a1 = kTwoPi / eps1, a2 = kTwoPi / eps2;
    ExactSolution sol;
    sol.dim = 1;
    sol.coarse_part = [](const Eigen::VectorXd& x) { return x[0] - x[0] * x[0]; };
    sol.meso_part = [a1, eps1](const Eigen::VectorXd& x) {
        return eps1 / (4.0 * kPi) * std::sin(a1 * x[0]);
    };
    sol.fine_part = [a2, eps2](const Eigen::VectorXd& x) {
        return eps2 / (4.0 * kPi) * std::sin(a2 * x[0]);
    };
    sol.u = [sol](const Eigen::VectorXd& x) {
        return sol.coarse_part(x) + sol.meso_part(x) + sol.fine_part(x);
    };
    sol.grad_u = [a1, a2](const Eigen::VectorXd& xv) {
        const double x = xv[0];
        Eigen::VectorXd g(1);
        g[0] = 1.0 - 2.0 * x + 0.5 * std::cos(a1 * x) + 0.5 * std::cos(a2 * x);
        return g;
    };
    return sol;
}

FieldN coeff_three_scale(double eps1, double eps2) {
    const double a1 = kTwoPi / eps1, a2 = kTwoPi / eps2;
    return [a1, a2](const Eigen::VectorXd& x) {
        return (2.0 + std::cos(a1 * x[0])) * (2.0 + std::cos(a2 * x[0]));
    };
}

FieldN source_three_scale(double eps1, double eps2) {
    require_integral_inverse(eps1, "source_three_scale");
    require_integral_inverse(eps2, "source_three_scale");
    const double a1 = kTwoPi / eps1, a2 = kTwoPi / eps2;
    // f = -(A u')' = -(A' u' + A u'')
    return [a1, a2](const Eigen::VectorXd& xv) {
        const double x = xv[0];
        const double c1 = std::cos(a1 * x), s1 = std::sin(a1 * x);
        const double c2 = std::cos(a2 * x), s2 = std::sin(a2 * x);
        const double A1 = 2.0 + c1, A2 = 2.0 + c2;
        const double Ap = -a1 * s1 * A2 - a2 * s2 * A1;
        const double up = 1.0 - 2.0 * x + 0.5 * c1 + 0.5 * c2;
        const double upp = -2.0 - 0.5 * a1 * s1 - 0.5 * a2 * s2;
        return -(Ap * up + A1 * A2 * upp);
    };
}

ExactSolution exact_pb_3d() {
    ExactSolution sol;
    sol.dim = 3;
    sol.coarse_part = [](const Eigen::VectorXd& x) {
        return std::sin(kPi * x[0]) * std::sin(kPi * x[1]) * std::sin(kPi * x[2]);
    };
    sol.fine_part = [](const Eigen::VectorXd& x) {
        return 0.05 * std::sin(10.0 * kPi * x[0]) * std::sin(20.0 * kPi * x[1]) *
               std::sin(30.0 * kPi * x[2]);
    };
    sol.u = [sol](const Eigen::VectorXd& x) { return sol.coarse_part(x) + sol.fine_part(x); };
    sol.grad_u = [](const Eigen::VectorXd& x) {
        const double s1 = std::sin(kPi * x[0]), c1 = std::cos(kPi * x[0]);
        const double s2 = std::sin(kPi * x[1]), c2 = std::cos(kPi * x[1]);
        const double s3 = std::sin(kPi * x[2]), c3 = std::cos(kPi * x[2]);
        const double S1 = std::sin(10.0 * kPi * x[0]), C1 = std::cos(10.0 * kPi * x[0]);
        const double S2 = std::sin(20.0 * kPi * x[1]), C2 = std::cos(20.0 * kPi * x[1]);
        const double S3 = std::sin(30.0 * kPi * x[2]), C3 = std::cos(30.0 * kPi * x[2]);
        Eigen::VectorXd g(3);
        g[0] = kPi * c1 * s2 * s3 + 0.05 * 10.0 * kPi * C1 * S2 * S3;
        g[1] = kPi * s1 * c2 * s3 + 0.05 * 20.0 * kPi * S1 * C2 * S3;
        g[2] = kPi * s1 * s2 * c3 + 0.05 * 30.0 * kPi * S1 * S2 * C3;
        return g;
    };
    return sol;
}

FieldN coeff_pb_3d() {
    return [](const Eigen::VectorXd& x) {
        return 0.5 * (2.0 + std::cos(10.0 * kPi * x[0]) * std::cos(20.0 * kPi * x[1]) *
                                std::cos(30.0 * kPi * x[2]));
    };
}

FieldN source_pb_3d() {
    // f = -(grad A . grad u) - A laplace(u) + pi^2 u, all factors closed form
    return [](const Eigen::VectorXd& x) {
        const double s1 = std::sin(kPi * x[0]), c1 = std::cos(kPi * x[0]);
        const double s2 = std::sin(kPi * x[1]), c2 = std::cos(kPi * x[1]);
        const double s3 = std::sin(kPi * x[2]), c3 = std::cos(kPi * x[2]);
        const double S1 = std::sin(10.0 * kPi * x[0]), C1 = std::cos(10.0 * kPi * x[0]);
        const double S2 = std::sin(20.0 * kPi * x[1]), C2 = std::cos(20.0 * kPi * x[1]);
        const double S3 = std::sin(30.0 * kPi * x[2]), C3 = std::cos(30.0 * kPi * x[2]);

        const double uc = s1 * s2 * s3;
        const double uf = 0.05 * S1 * S2 * S3;
        const double u = uc + uf;

        const double ux = kPi * c1 * s2 * s3 + 0.5 * kPi * C1 * S2 * S3;
        const double uy = kPi * s1 * c2 * s3 + kPi * S1 * C2 * S3;
        const double uz = kPi * s1 * s2 * c3 + 1.5 * kPi * S1 * S2 * C3;
        // laplace u = -3 pi^2 uc - (100+400+900) pi^2 * 0.05 * S1 S2 S3
        const double lap = -3.0 * kPi * kPi * uc - 70.0 * kPi * kPi * S1 * S2 * S3;

        const double A = 0.5 * (2.0 + C1 * C2 * C3);
        const double Ax = -5.0 * kPi * S1 * C2 * C3;
        const double Ay = -10.0 * kPi * C1 * S2 * C3;
        const double Az = -15.0 * kPi * C1 * C2 * S3;

        return -(Ax * ux + Ay * uy + Az * uz) - A * lap + kPi * kPi * u;
    };
}

FieldN coeff_2d_multiscale() {
    return [](const Eigen::VectorXd& x) {
        double a = 1.0;
        double pw = 2.0;  // 2^i for i = 1..6
        for (int i = 1; i <= 6; ++i) {
            a *= (1.0 + 0.5 * std::cos(pw * kPi * (x[0] + x[1]))) *
                 (1.0 + 0.5 * std::sin(pw * kPi * (x[1] - 3.0 * x[0])));
            pw *= 2.0;
        }
        return a;
    };
}

GridSolution fd_solve_1d(const std::function<double(double)>& A,
                         const std::function<double(double)>& f, int n_cells) {
    if (n_cells < 2) throw ConfigError("fd_solve_1d: need at least 2 cells");
    const int n = n_cells;
    const double h = 1.0 / n;
    const int m = n - 1;  // interior unknowns
    Eigen::VectorXd diag(m), lower(m), upper(m), rhs(m);
    for (int i = 1; i <= m; ++i) {
        const double aw = A((i - 0.5) * h);
        const double ae = A((i + 0.5) * h);
        if (!(aw > 0.0) || !(ae > 0.0))
            throw ConfigError("fd_solve_1d: coefficient not positive at a midpoint");
        diag[i - 1] = (aw + ae) / (h * h);
        lower[i - 1] = -aw / (h * h);
        upper[i - 1] = -ae / (h * h);
        rhs[i - 1] = f(i * h);
    }
    // Thomas elimination
    for (int i = 1; i < m; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    Eigen::VectorXd u(m);
    u[m - 1] = rhs[m - 1] / diag[m - 1];
    for (int i = m - 2; i >= 0; --i) u[i] = (rhs[i] - upper[i] * u[i + 1]) / diag[i];

    GridSolution sol;
    sol.dim = 1;
    sol.lo = 0.0;
    sol.hi = 1.0;
    sol.n_cells = n;
    sol.values = Eigen::VectorXd::Zero(n + 1);
    sol.values.segment(1, m) = u;
    return sol;
}

GridSolution fd_solve_2d(const FieldN& A, const FieldN& f, int n_cells, double lo, double hi) {
    if (n_cells < 4) throw ConfigError("fd_solve_2d: need at least 4 cells");
    const int n = n_cells;
    const double h = (hi - lo) / n;
    const int m = n - 1;  // interior unknowns per side
    const long nun = static_cast<long>(m) * m;

    // node coefficient values
    Eigen::MatrixXd a(n + 1, n + 1);
    Eigen::VectorXd p(2);
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            p << lo + i * h, lo + j * h;
            a(i, j) = A(p);
            if (!(a(i, j) > 0.0))
                throw ConfigError("fd_solve_2d: coefficient not positive at a grid node");
        }
    auto harm = [](double x, double y) { return 2.0 / (1.0 / x + 1.0 / y); };
    auto idx = [m](int i, int j) { return static_cast<long>(j - 1) * m + (i - 1); };

    using SpMat = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(5 * nun);
    Eigen::VectorXd rhs(nun);
    const double ih2 = 1.0 / (h * h);
    for (int j = 1; j <= m; ++j)
        for (int i = 1; i <= m; ++i) {
            const double aw = harm(a(i - 1, j), a(i, j)) * ih2;
            const double ae = harm(a(i, j), a(i + 1, j)) * ih2;
            const double as = harm(a(i, j - 1), a(i, j)) * ih2;
            const double an = harm(a(i, j), a(i, j + 1)) * ih2;
            const long r = idx(i, j);
            trips.emplace_back(r, r, aw + ae + as + an);
            if (i > 1) trips.emplace_back(r, idx(i - 1, j), -aw);
            if (i < m) trips.emplace_back(r, idx(i + 1, j), -ae);
            if (j > 1) trips.emplace_back(r, idx(i, j - 1), -as);
            if (j < m) trips.emplace_back(r, idx(i, j + 1), -an);
            p << lo + i * h, lo + j * h;
            rhs[r] = f(p);
        }
    SpMat mat(nun, nun);
    mat.setFromTriplets(trips.begin(), trips.end());

    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setMaxIterations(50L * n);
    cg.setTolerance(1e-13);
    cg.compute(mat);
    if (cg.info() != Eigen::Success)
        throw SolverError("fd_solve_2d: preconditioner setup failed");
    Eigen::VectorXd u = cg.solve(rhs);
    if (cg.info() != Eigen::Success) {
        // accept if the residual still meets the contract
        const double rel = (rhs - mat * u).norm() / rhs.norm();
        if (!(rel <= 1e-10))
            throw SolverError("fd_solve_2d: conjugate gradients stalled at relative residual " +
                              std::to_string(rel) + " after " + std::to_string(cg.iterations()) +
                              " iterations");
    }

    GridSolution sol;
    sol.dim = 2;
    sol.lo = lo;
    sol.hi = hi;
    sol.n_cells = n;
    sol.values = Eigen::VectorXd::Zero(static_cast<long>(n + 1) * (n + 1));
    for (int j = 1; j <= m; ++j)
        for (int i = 1; i <= m; ++i)
            sol.values[static_cast<long>(j) * (n + 1) + i] = u[idx(i, j)];
    return sol;
}

}  // namespace sd2nn
