#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/netmodel.hpp"
#include "secdb/powerflow.hpp"

namespace secdb {

struct DynamicsOptions {
  // Eigenvalues with |lambda| below this are structural zero modes (uniform
  // rotation of all angles) and are excluded from the minimum damping ratio.
  double zero_mode_tol = 1e-6;
  // When set, only complex (oscillatory) modes enter the minimum damping
  // ratio; real modes are reported but not ranked.
  bool oscillatory_only = false;
};

// Modal content of a state matrix. Right eigenvectors are the columns of
// `right_vectors`; left eigenvectors satisfy psi^T A = lambda psi^T (no
// conjugation) and are the columns of `left_vectors`, so for mode n the pair
// (left_vectors.col(n), right_vectors.col(n)) shares eigenvalues(n).
struct EigenResult {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd right_vectors;
  Eigen::MatrixXcd left_vectors;
  // Damping ratio -Re(l)/|l| per mode; NaN for zero modes.
  Eigen::VectorXd damping;
  // Mode indices eligible for zeta_min (zero modes excluded; real modes also
  // excluded under oscillatory_only).
  std::vector<int> retained;
  double zeta_min = 1.0;  // 1.0 when no mode is retained
  int min_index = -1;     // index into eigenvalues; -1 when none retained
};

// -Re(lambda)/|lambda|, in [-1, 1]. Zero for lambda == 0.
double damping_ratio(std::complex<double> lambda);

// State matrix A of the machine/controller dynamics around a converged
// operating point, with the network algebraic variables (bus angles and
// voltage magnitudes) eliminated through the algebraic-equation Jacobian.
// A is square with one row per machine state (see MachineParams::state_count;
// buses held by an infinite source contribute none and are frozen at their
// solved voltage). Throws Error when the power flow did not converge or the
// algebraic Jacobian is singular (voltage-collapse vicinity).
Eigen::MatrixXd linearize(const NetworkCase& net, const Outage& outage,
                          const PowerFlowResult& pf);

// Full eigen-decomposition of a state matrix with per-mode damping ratios.
// Throws Error when the eigensolver fails or A is not finite.
EigenResult modal_analysis(const Eigen::MatrixXd& a_matrix,
                           const DynamicsOptions& opt = {});

// Outcome of evaluating the minimum damping ratio at one dispatch and outage.
// `valid` is false when the operating point has no usable linearization
// (diverged power flow, singular algebraic Jacobian); such points are treated
// as insecure by callers.
struct DampingEval {
  bool valid = false;
  double zeta_min = 0.0;
  std::string failure;  // empty when valid
};

DampingEval minimum_damping(const NetworkCase& net, const Outage& outage,
                            const DispatchPoint& dispatch_mw,
                            const DynamicsOptions& dopt = {},
                            const PowerFlowOptions& popt = {});

// Finite-difference sensitivity of the minimum damping ratio to each free
// generator's MW setpoint (the slack absorbs every perturbation through the
// power flow). Component i is undefined (NaN, defined[i] == false) when no
// usable difference exists at that coordinate.
struct StabilityGradient {
  Eigen::VectorXd d_zeta;      // per free generator, 1/MW
  std::vector<bool> defined;
  double base_zeta = 0.0;      // NaN when the base point itself is unusable
  double step_mw = 0.0;
};

// Forward differences by default (one extra evaluation per coordinate,
// falling back to backward when the forward point is unusable); central
// differences when `central` is set (two evaluations, falling back to the
// usable side). `base_zeta`, when finite, is taken as the already-computed
// minimum damping ratio at `dispatch_mw`, saving the base evaluation.
StabilityGradient damping_gradient(const NetworkCase& net, const Outage& outage,
                                   const DispatchPoint& dispatch_mw, double step_mw,
                                   bool central = false,
                                   const DynamicsOptions& dopt = {},
                                   const PowerFlowOptions& popt = {},
                                   std::optional<double> base_zeta = std::nullopt);

}  // namespace secdb
