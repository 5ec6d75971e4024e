#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace sd2nn {

struct Sphere {
    Eigen::VectorXd center;
    double radius = 0.0;
};

// Axis-aligned box, optionally with disjoint spherical holes removed
// (training samples avoid the holes; boundary samples cover faces and hole
// surfaces).
struct Domain {
    enum class Kind { Box, PerforatedCube };
    Kind kind = Kind::Box;
    Eigen::VectorXd lo, hi;
    std::vector<Sphere> holes;

    int dim() const { return static_cast<int>(lo.size()); }
    double box_volume() const;
    double volume() const;  // box volume minus hole volumes
    bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    void validate() const;

    static Domain box(Eigen::VectorXd lo, Eigen::VectorXd hi);
    static Domain unit_interval() {
        return box(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
    }
    static Domain unit_cube(int d) {
        return box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d));
    }
    // [0,1]^3 with 8 spheres of radius 0.1 on the lattice {1/4,3/4}^3 and
    // 27 spheres of radius 0.04 on {1/8,1/2,7/8}^3
    static Domain perforated_cube();
    static Domain perforated_cube(std::vector<Sphere> holes);
};

Eigen::MatrixXd sample_interior(const Domain& dom, int n, std::uint64_t seed);
Eigen::MatrixXd sample_boundary(const Domain& dom, int n, std::uint64_t seed);

}  // namespace sd2nn
