#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "minsg/grid.hpp"
#include "minsg/model.hpp"

namespace minsg {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Drift discretizations. `exponential` is exponentially fitted
/// (Scharfetter-Gummel) and reproduces the Gibbs density exactly for gradient
/// drifts; `upwind` is first-order upwinding; `central` is centered and loses
/// the M-matrix property once the cell Peclet number exceeds 2.
enum class DriftScheme { exponential, upwind, central };
enum class Orientation { backward, forward };
/// Absorbing: unknowns are interior nodes, exits are killed.
/// Reflecting: unknowns are all nodes with |x| <= R, exits are suppressed.
enum class Boundary { absorbing, reflecting };

std::string to_string(DriftScheme s);
DriftScheme parse_scheme(const std::string& name);
std::string to_string(Orientation o);

/// Ball exhaustion parameters shared by every PDE-side computation.
struct Discretization {
    std::size_t dim = 1;
    double radius_scale = 1.0;
    int max_index = 1;
    double spacing = 0.05;
    DriftScheme scheme = DriftScheme::exponential;

    BallDomain domain(int index) const { return BallDomain(dim, index, radius_scale, spacing); }
    BallDomain largest() const { return domain(max_index); }
};

/// Sparse generator on the unknown nodes of a domain. Row/column i refers to
/// node unknowns[i].
struct OperatorMatrix {
    BallDomain domain;
    Orientation orientation;
    DriftScheme scheme;
    Boundary boundary;
    std::vector<std::size_t> unknowns;
    std::vector<std::ptrdiff_t> position;  // node -> row, or -1
    SparseMatrix matrix;

    std::size_t size() const { return unknowns.size(); }
    Eigen::VectorXd gather(const GridFunction& f) const;
    GridFunction scatter(const Eigen::VectorXd& v, Semantics s = Semantics::function) const;
};

/// Markov-chain discretization: L f(x) = sum_y q(x,y) (f(y) - f(x)).
/// The backward matrix is assembled from the emitting node, the forward
/// matrix independently from the receiving node; on uniform cells the two
/// are transposes. Throws NumericalError naming the node if mixed
/// derivatives make an axis weight negative under a monotone scheme.
OperatorMatrix assemble_generator(const DiffusionModel& model, const BallDomain& domain, Orientation orientation,
                                  DriftScheme scheme, Boundary boundary = Boundary::absorbing);

struct MaximumPrincipleReport {
    bool passed = true;
    double worst_margin = 0.0;  // min over rows/columns of diag - sum |offdiag|
    std::optional<std::size_t> first_offending_node;
    std::vector<double> first_offending_coordinates;
    std::string reason;
    double max_cell_peclet = 0.0;  // |b_k| h / D_k over unknown nodes

    std::string to_text() const;
};

/// Checks that lambda I - L is an M-matrix: positive diagonal, non-positive
/// off-diagonals, strict diagonal dominance (rows for L, columns for L*).
MaximumPrincipleReport check_maximum_principle(const OperatorMatrix& op, double lambda,
                                               const DiffusionModel* model = nullptr);

/// One line per stored entry: row_node, col_node, value.
void write_triplets(const OperatorMatrix& op, std::ostream& os);

}  // namespace minsg
