#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace secdb {

// --- Packed symmetric-matrix coordinates ------------------------------------
//
// Symmetric matrices enter the solver as packed vectors over the lower
// triangle (column-major) with off-diagonal entries scaled by sqrt(2).  The
// scaling makes the packing an isometry:
//
//   svec(a).dot(svec(b)) == trace(a * b)
//
// so inner products, norms, and Frobenius-nearest projections carry over
// between the matrix and the packed vector unchanged.

int svec_length(int n);
// Packed position of entry (row, col) of an n-by-n symmetric matrix.
int svec_index(int n, int row, int col);
Eigen::VectorXd svec(const Eigen::MatrixXd& sym);
Eigen::MatrixXd smat(const Eigen::VectorXd& packed);

// Frobenius-nearest positive semidefinite matrix (eigenvalue clipping).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& sym);

enum class ScalarCone { Free, NonNeg };

enum class SolveStatus { Optimal, Infeasible, MaxIters };

std::string solve_status_name(SolveStatus status);

struct ConicOptions {
  double tol = 1e-6;     // target for the normalized primal/dual residuals
  int max_iters = 50000;
  double rho = 1.0;      // initial penalty weight of the splitting iteration
  double over_relaxation = 1.6;  // must lie in (0, 2)
  bool adaptive_rho = true;      // rebalance rho from the residual ratio
  // Reserved switch: clique-based block splitting is not implemented, and
  // enabling it raises an error.  Dense blocks are the reference path.
  bool chordal_decomposition = false;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::MaxIters;
  int iterations = 0;
  double objective = 0.0;
  double primal_residual = 0.0;  // normalized ||x - z||_inf at exit
  double dual_residual = 0.0;    // normalized rho*||z_k - z_{k-1}||_inf at exit

  // Cone-feasible iterate: packed matrix blocks in declaration order, then
  // scalars.  Inequality slacks are stripped.
  Eigen::VectorXd primal;
  // One multiplier per constraint row: equalities first, then inequalities
  // (in <= orientation, so inequality multipliers are nonpositive).
  Eigen::VectorXd dual;

  Eigen::MatrixXd psd_value(int block) const;
  double scalar_value(int scalar_id) const;

  // Variable layout, mirrored from the problem by solve().
  std::vector<int> psd_sizes;
  std::vector<int> psd_offsets;
  int scalar_offset = 0;
  int scalar_count = 0;
};

class ConicProblem;

ConicSolution solve(const ConicProblem& problem, const ConicOptions& options);

// Linear form over the decision blocks of a ConicProblem: a sum of
// trace(coeff * X_block) matrix terms and coeff * x_scalar terms.
class LinearExpr {
 public:
  // Adds scale * trace(coeff * X_block).  coeff must be square; it is
  // symmetrized internally, which leaves the trace against a symmetric
  // variable unchanged.
  void add_matrix(int psd_block, const Eigen::MatrixXd& coeff,
                  double scale = 1.0);
  void add_scalar(int scalar_id, double coeff);
  bool empty() const { return terms_.empty(); }

 private:
  friend class ConicProblem;
  friend ConicSolution solve(const ConicProblem&, const ConicOptions&);

  struct Term {
    bool scalar = false;
    int block = 0;  // matrix block id, or scalar id when scalar == true
    int row = 0;    // matrix entry (row >= col); unused for scalar terms
    int col = 0;
    double value = 0.0;  // coefficient in packed coordinates
  };
  std::vector<Term> terms_;
};

// A conic feasibility/optimization problem over a list of symmetric-matrix
// blocks (each constrained positive semidefinite) and a block of scalars
// (each free or nonnegative, optionally grouped into second-order cones).
// Constraints are linear equalities and inequalities; the objective is a
// linear form, minimized.
class ConicProblem {
 public:
  // Returns the block id of a new n-by-n positive semidefinite block.
  int add_psd_block(int n);
  // Returns the id of a new scalar variable.
  int add_scalar(ScalarCone cone = ScalarCone::Free);
  std::vector<int> add_scalars(int count, ScalarCone cone = ScalarCone::Free);
  // Constrains x[ids[0]] >= euclidean_norm(x[ids[1..]]).  Every id must be a
  // free scalar, and a scalar can belong to at most one such cone.
  void add_second_order_cone(const std::vector<int>& scalar_ids);

  void add_equality(LinearExpr expr, double rhs);
  void add_less_equal(LinearExpr expr, double rhs);
  void add_greater_equal(LinearExpr expr, double rhs);
  // Accumulates terms into the objective; solve() minimizes the total.
  void add_objective_term(const LinearExpr& expr);

  int psd_block_count() const { return static_cast<int>(psd_sizes_.size()); }
  int psd_block_size(int block) const;
  int scalar_count() const { return static_cast<int>(scalar_cones_.size()); }
  int equality_count() const { return static_cast<int>(eq_.size()); }
  int inequality_count() const { return static_cast<int>(le_.size()); }

 private:
  friend ConicSolution solve(const ConicProblem&, const ConicOptions&);

  struct Row {
    LinearExpr expr;
    double rhs = 0.0;
  };

  std::vector<int> psd_sizes_;
  std::vector<ScalarCone> scalar_cones_;
  std::vector<char> scalar_in_soc_;
  std::vector<std::vector<int>> socs_;
  std::vector<Row> eq_;
  std::vector<Row> le_;  // normalized to expr <= rhs
  LinearExpr objective_;
};

inline ConicSolution solve(const ConicProblem& problem) {
  return solve(problem, ConicOptions{});
}

}  // namespace secdb
