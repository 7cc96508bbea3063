#include "secdb/conic.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "secdb/util.hpp"

namespace secdb {

namespace {

const double kSqrt2 = std::sqrt(2.0);

std::string row_label(bool equality, std::size_t index) {
  return (equality ? "equality row " : "inequality row ") +
         std::to_string(index);
}

}  // namespace

int svec_length(int n) { return n * (n + 1) / 2; }

int svec_index(int n, int row, int col) {
  if (row < 0 || col < 0 || row >= n || col >= n) {
    throw Error("svec_index: entry (" + std::to_string(row) + ", " +
                std::to_string(col) + ") outside a " + std::to_string(n) +
                "x" + std::to_string(n) + " matrix");
  }
  if (col > row) std::swap(row, col);
  // Column-major over the lower triangle: column j holds n - j entries.
  return col * n - col * (col - 1) / 2 + (row - col);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& sym) {
  if (sym.rows() != sym.cols()) {
    throw Error("svec: matrix is " + std::to_string(sym.rows()) + "x" +
                std::to_string(sym.cols()) + ", expected square");
  }
  const int n = static_cast<int>(sym.rows());
  Eigen::VectorXd packed(svec_length(n));
  int k = 0;
  for (int c = 0; c < n; ++c) {
    packed[k++] = sym(c, c);
    for (int r = c + 1; r < n; ++r) {
      packed[k++] = kSqrt2 * 0.5 * (sym(r, c) + sym(c, r));
    }
  }
  return packed;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& packed) {
  const auto len = packed.size();
  const int n =
      static_cast<int>(std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  if (n < 0 || svec_length(n) != len) {
    throw Error("smat: length " + std::to_string(len) +
                " is not a triangular number");
  }
  Eigen::MatrixXd sym(n, n);
  int k = 0;
  for (int c = 0; c < n; ++c) {
    sym(c, c) = packed[k++];
    for (int r = c + 1; r < n; ++r) {
      const double v = packed[k++] / kSqrt2;
      sym(r, c) = v;
      sym(c, r) = v;
    }
  }
  return sym;
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& sym) {
  if (sym.rows() != sym.cols()) {
    throw Error("project_psd: matrix is " + std::to_string(sym.rows()) + "x" +
                std::to_string(sym.cols()) + ", expected square");
  }
  const Eigen::MatrixXd symmetrized = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized);
  if (eig.info() != Eigen::Success) {
    throw Error("project_psd: eigendecomposition failed");
  }
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd projected =
      eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (projected + projected.transpose());
}

std::string solve_status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::MaxIters:
      return "max-iters";
  }
  throw Error("solve_status_name: unknown status");
}

Eigen::MatrixXd ConicSolution::psd_value(int block) const {
  if (block < 0 || block >= static_cast<int>(psd_sizes.size())) {
    throw Error("psd_value: block " + std::to_string(block) +
                " out of range (" + std::to_string(psd_sizes.size()) +
                " blocks)");
  }
  return smat(primal.segment(psd_offsets[static_cast<std::size_t>(block)],
                             svec_length(psd_sizes[static_cast<std::size_t>(block)])));
}

double ConicSolution::scalar_value(int scalar_id) const {
  if (scalar_id < 0 || scalar_id >= scalar_count) {
    throw Error("scalar_value: scalar " + std::to_string(scalar_id) +
                " out of range (" + std::to_string(scalar_count) +
                " scalars)");
  }
  return primal[scalar_offset + scalar_id];
}

void LinearExpr::add_matrix(int psd_block, const Eigen::MatrixXd& coeff,
                            double scale) {
  if (psd_block < 0) {
    throw Error("LinearExpr: negative matrix block id");
  }
  if (coeff.rows() != coeff.cols()) {
    throw Error("LinearExpr: matrix coefficient is " +
                std::to_string(coeff.rows()) + "x" +
                std::to_string(coeff.cols()) + ", expected square");
  }
  if (!coeff.allFinite() || !std::isfinite(scale)) {
    throw Error("LinearExpr: non-finite matrix coefficient");
  }
  const int n = static_cast<int>(coeff.rows());
  for (int c = 0; c < n; ++c) {
    const double diag = coeff(c, c) * scale;
    if (diag != 0.0) {
      terms_.push_back(Term{false, psd_block, c, c, diag});
    }
    for (int r = c + 1; r < n; ++r) {
      // Packed coordinates carry sqrt(2) on off-diagonals, so the pair of
      // symmetric entries contributes sqrt(2) * mean * packed_value.
      const double off = kSqrt2 * 0.5 * (coeff(r, c) + coeff(c, r)) * scale;
      if (off != 0.0) {
        terms_.push_back(Term{false, psd_block, r, c, off});
      }
    }
  }
}

void LinearExpr::add_scalar(int scalar_id, double coeff) {
  if (scalar_id < 0) {
    throw Error("LinearExpr: negative scalar id");
  }
  if (!std::isfinite(coeff)) {
    throw Error("LinearExpr: non-finite scalar coefficient");
  }
  if (coeff != 0.0) {
    terms_.push_back(Term{true, scalar_id, 0, 0, coeff});
  }
}

int ConicProblem::add_psd_block(int n) {
  if (n < 1) {
    throw Error("add_psd_block: size must be positive, got " +
                std::to_string(n));
  }
  psd_sizes_.push_back(n);
  return static_cast<int>(psd_sizes_.size()) - 1;
}

int ConicProblem::add_scalar(ScalarCone cone) {
  scalar_cones_.push_back(cone);
  scalar_in_soc_.push_back(0);
  return static_cast<int>(scalar_cones_.size()) - 1;
}

std::vector<int> ConicProblem::add_scalars(int count, ScalarCone cone) {
  if (count < 0) {
    throw Error("add_scalars: negative count");
  }
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) ids.push_back(add_scalar(cone));
  return ids;
}

void ConicProblem::add_second_order_cone(const std::vector<int>& scalar_ids) {
  if (scalar_ids.empty()) {
    throw Error("add_second_order_cone: empty id list");
  }
  std::set<int> seen;
  for (int id : scalar_ids) {
    if (id < 0 || id >= scalar_count()) {
      throw Error("add_second_order_cone: scalar " + std::to_string(id) +
                  " out of range (" + std::to_string(scalar_count()) +
                  " scalars)");
    }
    if (scalar_cones_[static_cast<std::size_t>(id)] != ScalarCone::Free) {
      throw Error("add_second_order_cone: scalar " + std::to_string(id) +
                  " must be free; it already carries a sign constraint");
    }
    if (scalar_in_soc_[static_cast<std::size_t>(id)]) {
      throw Error("add_second_order_cone: scalar " + std::to_string(id) +
                  " already belongs to a second-order cone");
    }
    if (!seen.insert(id).second) {
      throw Error("add_second_order_cone: scalar " + std::to_string(id) +
                  " listed twice");
    }
  }
  for (int id : scalar_ids) scalar_in_soc_[static_cast<std::size_t>(id)] = 1;
  socs_.push_back(scalar_ids);
}

int ConicProblem::psd_block_size(int block) const {
  if (block < 0 || block >= psd_block_count()) {
    throw Error("psd_block_size: block " + std::to_string(block) +
                " out of range (" + std::to_string(psd_block_count()) +
                " blocks)");
  }
  return psd_sizes_[static_cast<std::size_t>(block)];
}

void ConicProblem::add_equality(LinearExpr expr, double rhs) {
  if (!std::isfinite(rhs)) {
    throw Error("add_equality: non-finite right-hand side");
  }
  eq_.push_back(Row{std::move(expr), rhs});
}

void ConicProblem::add_less_equal(LinearExpr expr, double rhs) {
  if (!std::isfinite(rhs)) {
    throw Error("add_less_equal: non-finite right-hand side");
  }
  le_.push_back(Row{std::move(expr), rhs});
}

void ConicProblem::add_greater_equal(LinearExpr expr, double rhs) {
  if (!std::isfinite(rhs)) {
    throw Error("add_greater_equal: non-finite right-hand side");
  }
  for (auto& term : expr.terms_) term.value = -term.value;
  le_.push_back(Row{std::move(expr), -rhs});
}

void ConicProblem::add_objective_term(const LinearExpr& expr) {
  objective_.terms_.insert(objective_.terms_.end(), expr.terms_.begin(),
                           expr.terms_.end());
}

namespace {

// Variable layout of the standard-form vector: packed matrix blocks in
// declaration order, then scalars, then one nonnegative slack per inequality.
struct Layout {
  std::vector<int> psd_sizes;
  std::vector<int> psd_offsets;
  int scalar_offset = 0;
  int n_scalars = 0;
  int slack_offset = 0;
  int n_slacks = 0;
  int core = 0;   // variables excluding slacks
  int total = 0;  // variables including slacks
};

Layout make_layout(const std::vector<int>& psd_sizes, int n_scalars,
                   int n_slacks) {
  Layout lay;
  lay.psd_sizes = psd_sizes;
  lay.psd_offsets.reserve(psd_sizes.size());
  int offset = 0;
  for (int n : psd_sizes) {
    lay.psd_offsets.push_back(offset);
    offset += svec_length(n);
  }
  lay.scalar_offset = offset;
  lay.n_scalars = n_scalars;
  lay.core = offset + n_scalars;
  lay.slack_offset = lay.core;
  lay.n_slacks = n_slacks;
  lay.total = lay.core + n_slacks;
  return lay;
}

// Resolves a term to its column in the standard-form vector, validating
// against the declared blocks.
int term_column_impl(bool scalar, int block, int row, int col,
                     const Layout& lay, const std::string& context) {
  if (scalar) {
    if (block >= lay.n_scalars) {
      throw Error("conic: " + context + " references scalar " +
                  std::to_string(block) + " but only " +
                  std::to_string(lay.n_scalars) + " exist");
    }
    return lay.scalar_offset + block;
  }
  if (block >= static_cast<int>(lay.psd_sizes.size())) {
    throw Error("conic: " + context + " references matrix block " +
                std::to_string(block) + " but only " +
                std::to_string(lay.psd_sizes.size()) + " exist");
  }
  const int n = lay.psd_sizes[static_cast<std::size_t>(block)];
  if (row >= n || col >= n) {
    throw Error("conic: " + context + " references entry (" +
                std::to_string(row) + ", " + std::to_string(col) +
                ") outside matrix block " + std::to_string(block) +
                " of size " + std::to_string(n));
  }
  return lay.psd_offsets[static_cast<std::size_t>(block)] +
         svec_index(n, row, col);
}

// Projects the standard-form vector onto the cone product in place.
class ConeProjector {
 public:
  ConeProjector(const Layout& lay, const std::vector<ScalarCone>& scalar_cones,
                const std::vector<std::vector<int>>& socs)
      : lay_(lay), scalar_cones_(scalar_cones), socs_(socs) {
    for (int n : lay.psd_sizes) {
      buffers_.emplace_back(n, n);
      solvers_.emplace_back();
    }
  }

  void apply(Eigen::VectorXd& v) {
    for (std::size_t b = 0; b < lay_.psd_sizes.size(); ++b) {
      const int n = lay_.psd_sizes[b];
      const int off = lay_.psd_offsets[b];
      Eigen::MatrixXd& m = buffers_[b];
      int k = off;
      for (int c = 0; c < n; ++c) {
        m(c, c) = v[k++];
        for (int r = c + 1; r < n; ++r) {
          const double entry = v[k++] / kSqrt2;
          m(r, c) = entry;
          m(c, r) = entry;
        }
      }
      auto& eig = solvers_[b];
      eig.compute(m);
      if (eig.info() != Eigen::Success) {
        throw Error("conic: eigendecomposition failed during projection");
      }
      const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
      m.noalias() =
          eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
      k = off;
      for (int c = 0; c < n; ++c) {
        v[k++] = m(c, c);
        for (int r = c + 1; r < n; ++r) {
          v[k++] = kSqrt2 * 0.5 * (m(r, c) + m(c, r));
        }
      }
    }
    for (int s = 0; s < lay_.n_scalars; ++s) {
      if (scalar_cones_[static_cast<std::size_t>(s)] == ScalarCone::NonNeg) {
        double& entry = v[lay_.scalar_offset + s];
        entry = std::max(entry, 0.0);
      }
    }
    for (const auto& ids : socs_) {
      const double head = v[lay_.scalar_offset + ids[0]];
      double tail_sq = 0.0;
      for (std::size_t i = 1; i < ids.size(); ++i) {
        const double entry = v[lay_.scalar_offset + ids[i]];
        tail_sq += entry * entry;
      }
      const double tail = std::sqrt(tail_sq);
      if (tail <= head) continue;  // inside the cone
      if (tail <= -head) {
        for (int id : ids) v[lay_.scalar_offset + id] = 0.0;
        continue;
      }
      const double beta = 0.5 * (head + tail);
      const double scale = tail > 0.0 ? beta / tail : 0.0;
      v[lay_.scalar_offset + ids[0]] = beta;
      for (std::size_t i = 1; i < ids.size(); ++i) {
        v[lay_.scalar_offset + ids[i]] *= scale;
      }
    }
    for (int s = 0; s < lay_.n_slacks; ++s) {
      double& entry = v[lay_.slack_offset + s];
      entry = std::max(entry, 0.0);
    }
  }

 private:
  Layout lay_;
  std::vector<ScalarCone> scalar_cones_;
  std::vector<std::vector<int>> socs_;
  std::vector<Eigen::MatrixXd> buffers_;
  std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> solvers_;
};

}  // namespace

ConicSolution solve(const ConicProblem& problem, const ConicOptions& options) {
  if (options.chordal_decomposition) {
    throw Error(
        "conic: chordal block splitting is not implemented; "
        "leave chordal_decomposition off to use dense blocks");
  }
  if (!(options.tol > 0.0) || !std::isfinite(options.tol)) {
    throw Error("conic: tol must be positive and finite");
  }
  if (options.max_iters < 1) {
    throw Error("conic: max_iters must be positive");
  }
  if (!(options.rho > 0.0) || !std::isfinite(options.rho)) {
    throw Error("conic: rho must be positive and finite");
  }
  if (!(options.over_relaxation > 0.0) || !(options.over_relaxation < 2.0)) {
    throw Error("conic: over_relaxation must lie in (0, 2)");
  }

  const int n_eq = problem.equality_count();
  const int n_le = problem.inequality_count();
  const int rows = n_eq + n_le;
  const Layout lay =
      make_layout(problem.psd_sizes_, problem.scalar_count(), n_le);
  if (lay.core == 0) {
    throw Error("conic: problem has no variables");
  }

  // Assemble the constraint matrix (inequalities carry a +1 slack) and the
  // objective vector over the standard-form layout.
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  for (int r = 0; r < n_eq; ++r) {
    const auto& row = problem.eq_[static_cast<std::size_t>(r)];
    for (const auto& term : row.expr.terms_) {
      const int col = term_column_impl(term.scalar, term.block, term.row,
                                       term.col, lay, row_label(true, static_cast<std::size_t>(r)));
      triplets.emplace_back(r, col, term.value);
    }
    b[r] = row.rhs;
  }
  for (int i = 0; i < n_le; ++i) {
    const int r = n_eq + i;
    const auto& row = problem.le_[static_cast<std::size_t>(i)];
    for (const auto& term : row.expr.terms_) {
      const int col = term_column_impl(term.scalar, term.block, term.row,
                                       term.col, lay, row_label(false, static_cast<std::size_t>(i)));
      triplets.emplace_back(r, col, term.value);
    }
    triplets.emplace_back(r, lay.slack_offset + i, 1.0);
    b[r] = row.rhs;
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(lay.total);
  for (const auto& term : problem.objective_.terms_) {
    const int col = term_column_impl(term.scalar, term.block, term.row,
                                     term.col, lay, "objective");
    c[col] += term.value;
  }

  // Row equilibration: scaling rows leaves the variable geometry (and the
  // cones) untouched while conditioning the normal equations.  Multipliers
  // are scaled back before they are reported.  Duplicate triplets on one
  // entry are summed by the sparse assembly, so the norm estimate here can
  // only overshoot, which merely softens the scaling.
  Eigen::VectorXd row_norm_sq = Eigen::VectorXd::Zero(rows);
  for (const auto& t : triplets) {
    row_norm_sq[t.row()] += t.value() * t.value();
  }
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(rows);
  for (int r = 0; r < rows; ++r) {
    row_scale[r] = 1.0 / std::max(std::sqrt(row_norm_sq[r]), 1e-8);
  }
  for (auto& t : triplets) {
    t = Eigen::Triplet<double>(t.row(), t.col(), t.value() * row_scale[t.row()]);
  }
  b = row_scale.asDiagonal() * b;

  Eigen::SparseMatrix<double> a(rows, lay.total);
  a.setFromTriplets(triplets.begin(), triplets.end());
  const Eigen::SparseMatrix<double> at = a.transpose();

  ConicSolution solution;
  solution.psd_sizes = lay.psd_sizes;
  solution.psd_offsets = lay.psd_offsets;
  solution.scalar_offset = lay.scalar_offset;
  solution.scalar_count = lay.n_scalars;
  solution.primal = Eigen::VectorXd::Zero(lay.core);
  solution.dual = Eigen::VectorXd::Zero(rows);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> normal;
  if (rows > 0) {
    Eigen::SparseMatrix<double> gram = a * at;
    double max_diag = 0.0;
    for (int r = 0; r < rows; ++r) {
      max_diag = std::max(max_diag, gram.coeff(r, r));
    }
    const double reg = 1e-12 * (1.0 + max_diag);
    Eigen::SparseMatrix<double> identity(rows, rows);
    identity.setIdentity();
    gram += reg * identity;
    normal.compute(gram);
    if (normal.info() != Eigen::Success) {
      throw Error("conic: factorization of the normal equations failed");
    }

    // Consistency check on the affine system: if even the least-squares
    // solution cannot satisfy the equalities, no iteration will.
    Eigen::VectorXd lam = normal.solve(b);
    Eigen::VectorXd x_ls = at * lam;
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd residual = b - a * x_ls;
      x_ls += at * normal.solve(residual);
    }
    const double ls_residual = (a * x_ls - b).lpNorm<Eigen::Infinity>();
    if (ls_residual > 1e-5 * (1.0 + b.lpNorm<Eigen::Infinity>())) {
      solution.status = SolveStatus::Infeasible;
      solution.primal_residual =
          ls_residual / (1.0 + b.lpNorm<Eigen::Infinity>());
      solution.dual_residual = 0.0;
      solution.objective = 0.0;
      return solution;
    }
  }

  ConeProjector projector(lay, problem.scalar_cones_, problem.socs_);

  double rho = options.rho;
  const double alpha = options.over_relaxation;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.total);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.total);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(lay.total);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(rows);
  Eigen::VectorXd z_prev(lay.total);
  Eigen::VectorXd v(lay.total);
  Eigen::VectorXd xhat(lay.total);

  double best_combined = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_z = z;
  Eigen::VectorXd best_lam = lam;
  double best_rp = std::numeric_limits<double>::infinity();
  double best_rd = std::numeric_limits<double>::infinity();
  double best_rho = rho;

  // Stall detector: a frozen dual residual with a flat, clearly positive
  // primal gap over consecutive windows certifies that the affine set and
  // the cone product do not intersect.
  const int window = 1000;
  std::vector<double> rp_marks;

  int iter = 0;
  bool converged = false;
  bool infeasible_stall = false;
  double rp_norm = std::numeric_limits<double>::infinity();
  double rd_norm = std::numeric_limits<double>::infinity();

  while (iter < options.max_iters) {
    ++iter;

    v = z - u - c / rho;
    if (rows > 0) {
      lam = normal.solve(a * v - b);
      x = v - at * lam;
    } else {
      x = v;
    }
    xhat = alpha * x + (1.0 - alpha) * z;
    z_prev = z;
    z = xhat + u;
    projector.apply(z);
    u += xhat - z;

    if (!x.allFinite() || !z.allFinite() || !u.allFinite()) {
      break;
    }

    const double rp = (x - z).lpNorm<Eigen::Infinity>();
    const double rd = rho * (z - z_prev).lpNorm<Eigen::Infinity>();
    const double x_scale =
        1.0 + std::max(x.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>());
    const double u_scale = 1.0 + rho * u.lpNorm<Eigen::Infinity>();
    rp_norm = rp / x_scale;
    rd_norm = rd / u_scale;

    const double combined = std::max(rp_norm, rd_norm);
    if (combined < best_combined) {
      best_combined = combined;
      best_z = z;
      best_lam = lam;
      best_rp = rp_norm;
      best_rd = rd_norm;
      best_rho = rho;
    }

    if (rp_norm <= options.tol && rd_norm <= options.tol) {
      converged = true;
      break;
    }

    if (iter % window == 0) {
      rp_marks.push_back(rp_norm);
      const std::size_t marks = rp_marks.size();
      if (marks >= 3 && iter >= 3000 && rd_norm <= options.tol &&
          rp_norm >= 1e3 * options.tol) {
        const double m2 = rp_marks[marks - 1];
        const double m1 = rp_marks[marks - 2];
        const double m0 = rp_marks[marks - 3];
        const bool flat_recent = std::abs(m2 - m1) <= 1e-2 * m2;
        const bool flat_older =
            std::abs(m1 - m0) <= 1e-2 * std::max(m1, 1e-300);
        if (flat_recent && flat_older) {
          infeasible_stall = true;
          break;
        }
      }
    }

    // Rebalance the penalty only during a burn-in phase: a bounded number of
    // changes keeps the fixed-penalty convergence guarantee, whereas
    // rebalancing forever can settle into a limit cycle on degenerate
    // problems (each rescale perturbs the iterates enough to flip the
    // residual ratio back).
    if (options.adaptive_rho && iter % 100 == 0 && iter <= 10000) {
      const double ratio = rp_norm / std::max(rd_norm, 1e-300);
      double factor = 1.0;
      if (ratio > 5.0) {
        factor = 2.0;
      } else if (ratio < 0.2) {
        factor = 0.5;
      }
      if (factor != 1.0) {
        const double rho_new =
            std::clamp(rho * factor, 1e-6, 1e6);
        if (rho_new != rho) {
          // u is the dual scaled by 1/rho; keep the underlying multiplier.
          u *= rho / rho_new;
          rho = rho_new;
          rp_marks.clear();
        }
      }
    }
  }

  solution.iterations = iter;
  if (converged) {
    solution.status = SolveStatus::Optimal;
    solution.primal = z.head(lay.core);
    solution.dual = -(rho * row_scale.asDiagonal() * lam);
    solution.primal_residual = rp_norm;
    solution.dual_residual = rd_norm;
    solution.objective = c.dot(z);
    return solution;
  }

  solution.status =
      infeasible_stall ? SolveStatus::Infeasible : SolveStatus::MaxIters;
  solution.primal = best_z.head(lay.core);
  solution.dual = -(best_rho * row_scale.asDiagonal() * best_lam);
  solution.primal_residual = best_rp;
  solution.dual_residual = best_rd;
  solution.objective = c.dot(best_z);
  return solution;
}

}  // namespace secdb
