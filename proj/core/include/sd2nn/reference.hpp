#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

namespace sd2nn {

using FieldN = std::function<double(const Eigen::VectorXd&)>;
using GradN = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Closed-form reference solution split into its scale components,
// u = coarse + (meso) + fine.
struct ExactSolution {
    int dim = 1;
    FieldN u;
    GradN grad_u;
    FieldN coarse_part;
    FieldN meso_part;  // only for the three-scale problem, otherwise null
    FieldN fine_part;
};

// Node values of a finite-difference solve on a uniform square grid with
// homogeneous Dirichlet data.
struct GridSolution {
    int dim = 1;
    double lo = 0.0, hi = 1.0;
    int n_cells = 0;
    Eigen::VectorXd values;  // 1D: n+1 nodes; 2D: (n+1)^2, index j*(n+1)+i

    double h() const { return (hi - lo) / n_cells; }
    double node_coord(int i) const { return lo + i * h(); }
    double node(int i) const { return values[i]; }
    double node(int i, int j) const { return values[static_cast<long>(j) * (n_cells + 1) + i]; }
    // multilinear interpolation, clamped to the box
    double at(const Eigen::VectorXd& x) const;
    void write_csv(const std::string& path) const;
};

// -div(A u') = f on (0,1), u(0) = u(1) = 0 with A = (2 + cos(2 pi x / eps))^-1
// and f = 1; 1/eps must be a positive integer so the boundary data closes.
ExactSolution exact_1d_linear(double eps);
FieldN coeff_1d_linear(double eps);

// source for the p = 8 problem -(A |u'|^6 u')' = f with the same u and A
FieldN source_for_p8(double eps);

// A = (2 + cos(2 pi x/eps1)) (2 + cos(2 pi x/eps2)),
// u = x - x^2 + (eps1/4pi) sin(2 pi x/eps1) + (eps2/4pi) sin(2 pi x/eps2)
ExactSolution exact_three_scale(double eps1, double eps2);
FieldN coeff_three_scale(double eps1, double eps2);
FieldN source_three_scale(double eps1, double eps2);

// -div(A grad u) + pi^2 u = f on the perforated unit cube with
// A = 0.5 (2 + cos(10 pi x1) cos(20 pi x2) cos(30 pi x3))
ExactSolution exact_pb_3d();
FieldN coeff_pb_3d();
FieldN source_pb_3d();

// the oscillatory 2D coefficient of the planar benchmark on [-1,1]^2
FieldN coeff_2d_multiscale();

// conservative FD with midpoint coefficients on [0,1], tridiagonal solve
GridSolution fd_solve_1d(const std::function<double(double)>& A,
                         const std::function<double(double)>& f, int n_cells);

// 5-point conservative FD with harmonic-mean face coefficients on the square
// [lo,hi]^2, zero Dirichlet data, preconditioned conjugate-gradient solve
GridSolution fd_solve_2d(const FieldN& A, const FieldN& f, int n_cells, double lo = -1.0,
                         double hi = 1.0);

}  // namespace sd2nn
