#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/netmodel.hpp"

namespace secdb {

struct PowerFlowOptions {
  double tol = 1e-8;        // max |mismatch| in p.u.
  int max_iter = 50;        // total Newton iterations across Q-limit rounds
  bool enforce_q_limits = true;
  bool flat_start = true;
};

struct PowerFlowResult {
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd v_mag;    // p.u., per bus
  Eigen::VectorXd v_ang;    // rad, per bus
  Eigen::VectorXd p_inj;    // p.u. net injection, per bus
  Eigen::VectorXd q_inj;    // p.u. net injection, per bus
  Eigen::VectorXd gen_p;    // p.u., per generator (slack filled from solution)
  Eigen::VectorXd gen_q;    // p.u., per generator
  std::vector<bool> q_limited;  // per generator: regulated bus released to a Q limit

  Eigen::VectorXcd v_complex() const;
};

// Newton-Raphson AC power flow for one outage state. `dispatch_mw` gives the
// active power of the non-slack generators (order of free_generators()); the
// slack generator picks up the balance. PV buses whose generator hits a
// reactive limit are released and held at that limit.
PowerFlowResult solve_power_flow(const NetworkCase& net, const Outage& outage,
                                 const DispatchPoint& dispatch_mw,
                                 const PowerFlowOptions& opt = {});

struct BranchFlow {
  double p_from = 0.0, q_from = 0.0;  // MW / MVAr into the branch at each end
  double p_to = 0.0, q_to = 0.0;
  bool in_service = true;
};

std::vector<BranchFlow> branch_flows(const NetworkCase& net, const Outage& outage,
                                     const PowerFlowResult& pf);

enum class LimitKind { PfDiverged, Voltage, SlackActive, Thermal, DispatchBounds };

std::string limit_kind_name(LimitKind k);

struct LimitViolation {
  LimitKind kind;
  int index = -1;      // bus / generator / branch index depending on kind
  double value = 0.0;  // observed quantity
  double bound = 0.0;  // violated bound
};

struct FeasibilityResult {
  bool feasible = false;
  PowerFlowResult pf;
  std::vector<LimitViolation> violations;
};

// Steady-state acceptability of a dispatch under one outage: the power flow
// must converge, bus voltages must stay inside their bands, the slack
// generator inside its active-power limits, rated branches below capacity,
// and the dispatch itself inside the generator box.
FeasibilityResult check_feasibility(const NetworkCase& net, const Outage& outage,
                                    const DispatchPoint& dispatch_mw,
                                    const PowerFlowOptions& opt = {});

}  // namespace secdb
