#include "sd2nn/sampling.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sd2nn/errors.hpp"
#include "sd2nn/rng.hpp"

namespace sd2nn {

namespace {

double sphere_volume(int d, double r) {
    // d in {1,2,3} is all we pose
    switch (d) {
        case 1: return 2.0 * r;
        case 2: return std::numbers::pi * r * r;
        case 3: return 4.0 / 3.0 * std::numbers::pi * r * r * r;
    }
    throw GeometryError("holes supported only in dimensions 1-3");
}

}  // namespace

double Domain::box_volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
}

double Domain::volume() const {
    double v = box_volume();
    for (const auto& h : holes) v -= sphere_volume(dim(), h.radius);
    return v;
}

bool Domain::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    for (int i = 0; i < dim(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    for (const auto& h : holes)
        if ((x - h.center).norm() <= h.radius) return false;
    return true;
}

void Domain::validate() const {
    if (lo.size() == 0 || lo.size() != hi.size())
        throw ConfigError("domain: lo/hi must be non-empty and equal length");
    for (int i = 0; i < dim(); ++i)
        if (!(lo[i] < hi[i])) throw ConfigError("domain: requires lo < hi componentwise");
    for (const auto& h : holes) {
        if (h.center.size() != dim()) throw ConfigError("domain: hole center dimension mismatch");
        if (!(h.radius > 0.0)) throw ConfigError("domain: hole radius must be > 0");
        for (int i = 0; i < dim(); ++i)
            if (!(h.center[i] - h.radius > lo[i] && h.center[i] + h.radius < hi[i]))
                throw GeometryError("domain: hole not strictly inside the box");
    }
    for (std::size_t a = 0; a < holes.size(); ++a)
        for (std::size_t b = a + 1; b < holes.size(); ++b)
            if ((holes[a].center - holes[b].center).norm() <=
                holes[a].radius + holes[b].radius)
                throw GeometryError("domain: holes " + std::to_string(a) + " and " +
                                    std::to_string(b) + " intersect");
}

Domain Domain::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    Domain d;
    d.kind = Kind::Box;
    d.lo = std::move(lo);
    d.hi = std::move(hi);
    d.validate();
    return d;
}

Domain Domain::perforated_cube(std::vector<Sphere> holes) {
    Domain d;
    d.kind = Kind::PerforatedCube;
    d.lo = Eigen::VectorXd::Zero(3);
    d.hi = Eigen::VectorXd::Ones(3);
    d.holes = std::move(holes);
    d.validate();
    return d;
}

Domain Domain::perforated_cube() {
    std::vector<Sphere> holes;
    const double big[] = {0.25, 0.75};
    for (double x : big)
        for (double y : big)
            for (double z : big) {
                Eigen::VectorXd c(3);
                c << x, y, z;
                holes.push_back({c, 0.1});
            }
    const double small[] = {0.125, 0.5, 0.875};
    for (double x : small)
        for (double y : small)
            for (double z : small) {
                Eigen::VectorXd c(3);
                c << x, y, z;
                holes.push_back({c, 0.04});
            }
    return perforated_cube(std::move(holes));
}

Eigen::MatrixXd sample_interior(const Domain& dom, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_interior: n must be >= 1");
    const int d = dom.dim();
    rng::Engine eng(seed);
    Eigen::MatrixXd pts(n, d);
    if (dom.holes.empty()) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) pts(i, j) = eng.uniform(dom.lo[j], dom.hi[j]);
        return pts;
    }
    // rejection against the holes
    if (dom.volume() < 0.01 * dom.box_volume())
        throw GeometryError("sample_interior: holes fill more than 99% of the box");
    Eigen::VectorXd x(d);
    long attempts = 0;
    for (int i = 0; i < n;) {
        for (int j = 0; j < d; ++j) x[j] = eng.uniform(dom.lo[j], dom.hi[j]);
        ++attempts;
        if (dom.contains(x)) {
            pts.row(i++) = x.transpose();
        } else if (attempts >= 10000 && i < attempts / 100) {
            throw GeometryError("sample_interior: acceptance rate fell below 1%");
        }
    }
    return pts;
}

namespace {

double sphere_area(int d, double r) {
    switch (d) {
        case 2: return 2.0 * std::numbers::pi * r;
        case 3: return 4.0 * std::numbers::pi * r * r;
    }
    throw GeometryError("hole surfaces supported only in dimensions 2-3");
}

// uniform point on a sphere surface via a normalized gaussian draw
Eigen::VectorXd sphere_point(rng::Engine& eng, const Sphere& s, int d) {
    Eigen::VectorXd g(d);
    double norm = 0.0;
    do {
        for (int j = 0; j < d; ++j) g[j] = eng.gaussian();
        norm = g.norm();
    } while (!(norm > 1e-12));
    return s.center + (s.radius / norm) * g;
}

}  // namespace

Eigen::MatrixXd sample_boundary(const Domain& dom, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_boundary: n must be >= 1");
    const int d = dom.dim();
    rng::Engine eng(seed);
    Eigen::MatrixXd pts(n, d);

    if (d == 1) {
        for (int i = 0; i < n; ++i) pts(i, 0) = eng.uniform01() < 0.5 ? dom.lo[0] : dom.hi[0];
        return pts;
    }

    // measures: 2d box faces, then one entry per hole surface
    std::vector<double> measure;
    for (int j = 0; j < d; ++j) {
        double face = 1.0;
        for (int i = 0; i < d; ++i)
            if (i != j) face *= dom.hi[i] - dom.lo[i];
        measure.push_back(face);  // low face, normal -e_j
        measure.push_back(face);  // high face, normal +e_j
    }
    for (const auto& h : dom.holes) measure.push_back(sphere_area(d, h.radius));
    double total = 0.0;
    for (double m : measure) total += m;

    for (int i = 0; i < n; ++i) {
        double pick = eng.uniform01() * total;
        std::size_t c = 0;
        while (c + 1 < measure.size() && pick >= measure[c]) pick -= measure[c], ++c;
        if (c < static_cast<std::size_t>(2 * d)) {
            const int j = static_cast<int>(c) / 2;
            for (int k = 0; k < d; ++k)
                pts(i, k) = (k == j) ? (c % 2 ? dom.hi[j] : dom.lo[j])
                                     : eng.uniform(dom.lo[k], dom.hi[k]);
        } else {
            pts.row(i) = sphere_point(eng, dom.holes[c - 2 * d], d).transpose();
        }
    }
    return pts;
}

}  // namespace sd2nn
