#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace minsg {

/// Box [-R, R]^dim with R = scale * index, sampled on a uniform lattice of
/// spacing h that contains the origin. Nodes with |x| < R are interior; the
/// rest of the box is the absorbing exterior of the ball B_R.
///
/// Lattices of equal spacing are nested: node coordinates are integer offsets
/// from the origin times h, so shared nodes carry bit-identical coordinates.
class BallDomain {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    BallDomain(std::size_t dim, int index, double scale, double spacing);

    std::size_t dim() const { return dim_; }
    int index() const { return index_; }
    double scale() const { return scale_; }
    double spacing() const { return h_; }
    double radius() const { return radius_; }
    int half() const { return half_; }
    std::size_t axis_nodes() const { return axis_; }
    std::size_t node_count() const { return count_; }
    double cell_volume() const { return volume_; }

    /// Lattice offsets (i_k - half) of a node, each in [-half, half].
    std::vector<int> offsets(std::size_t node) const;
    std::size_t node_at(std::span<const int> offsets) const;
    std::vector<double> coordinates(std::size_t node) const;
    double coordinate(std::size_t node, std::size_t axis) const;
    double norm(std::size_t node) const;

    /// Node reached by moving `step` lattice units, or npos if it leaves the box.
    std::size_t shifted(std::size_t node, std::span<const int> step) const;
    std::size_t neighbor(std::size_t node, std::size_t axis, int dir) const;

    bool is_interior(std::size_t node) const { return interior_flag_[node]; }
    bool in_ball(std::size_t node) const { return ball_flag_[node]; }
    const std::vector<std::size_t>& interior_nodes() const { return interior_; }
    std::size_t origin() const;
    std::size_t nearest_node(std::span<const double> x) const;

    bool same_lattice(const BallDomain& other) const;
    /// Index of `node` inside `other` (same lattice), or npos if not covered.
    std::size_t map_node(std::size_t node, const BallDomain& other) const;

private:
    std::size_t dim_;
    int index_;
    double scale_;
    double h_;
    double radius_;
    int half_;
    std::size_t axis_;
    std::size_t count_;
    double volume_;
    std::vector<char> interior_flag_;
    std::vector<char> ball_flag_;
    std::vector<std::size_t> interior_;
};

enum class Semantics { function, density };

/// Nodal values over every node of a BallDomain box.
struct GridFunction {
    BallDomain domain;
    Eigen::VectorXd values;
    Semantics semantics = Semantics::function;

    GridFunction(BallDomain d, Semantics s = Semantics::function);
    GridFunction(BallDomain d, Eigen::VectorXd v, Semantics s = Semantics::function);

    double sup_norm() const;
    /// Sum of |v| times cell volume.
    double l1_norm() const;
    /// Sum of v times cell volume.
    double mass() const;

    /// Copy onto another lattice-compatible domain; nodes not covered become zero.
    GridFunction transfer(const BallDomain& target) const;
};

using ScalarField = std::function<double(std::span<const double>)>;

/// Nodewise evaluation. Throws ValidationError naming the node on a non-finite value.
GridFunction build_grid_function(const ScalarField& expr, const BallDomain& domain,
                                 Semantics semantics = Semantics::function);

/// Smooth radial cutoff: 1 on |x| <= (n - 1/2) scale, 0 on |x| >= n scale.
struct CutoffFunction {
    int index;
    GridFunction values;

    /// g = 1 on every node (no mollification).
    static CutoffFunction ones(const BallDomain& domain);
};

/// Profile G(s) = int_s^{n^2} f_n / int_{(n-1/2)^2}^{n^2} f_n with
/// f_n(t) = exp(1 / ((t - n^2)(t - (n-1/2)^2))), evaluated at s = |x|^2 / scale^2.
double cutoff_value(int index, double scale, double r);

CutoffFunction cutoff_eval(int index, const BallDomain& domain);

}  // namespace minsg
