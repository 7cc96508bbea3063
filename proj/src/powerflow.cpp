#include "secdb/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

namespace secdb {

Eigen::VectorXcd PowerFlowResult::v_complex() const {
  Eigen::VectorXcd v(v_mag.size());
  for (int i = 0; i < v_mag.size(); ++i)
    v[i] = std::polar(v_mag[i], v_ang[i]);
  return v;
}

namespace {

enum class NodeKind { Slack, PV, PQ };

struct Spec {
  std::vector<NodeKind> kind;    // per bus, after Q-limit releases
  Eigen::VectorXd p_spec;        // p.u. injection target (non-slack)
  Eigen::VectorXd q_spec;        // p.u. injection target (PQ buses)
  Eigen::VectorXd v_target;      // regulated magnitude for PV buses
};

// Net complex injection at every bus for voltage profile (vm, va).
void injections(const Eigen::MatrixXcd& ybus, const Eigen::VectorXd& vm,
                const Eigen::VectorXd& va, Eigen::VectorXd& p, Eigen::VectorXd& q) {
  const int n = int(vm.size());
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
  const Eigen::VectorXcd s = v.array() * (ybus * v).conjugate().array();
  p = s.real();
  q = s.imag();
}

}  // namespace

PowerFlowResult solve_power_flow(const NetworkCase& net, const Outage& outage,
                                 const DispatchPoint& dispatch_mw,
                                 const PowerFlowOptions& opt) {
  const int n = net.bus_count();
  const int ng = net.gen_count();
  const auto free = net.free_generators();
  if (dispatch_mw.size() != int(free.size()))
    throw Error("dispatch has " + std::to_string(dispatch_mw.size()) + " entries, expected " +
                std::to_string(free.size()));

  AdmittanceView view(net, outage);
  const Eigen::MatrixXcd& ybus = view.ybus();

  // Generator P setpoints in p.u.; slack entry unused until the solve ends.
  Eigen::VectorXd gen_p_set = Eigen::VectorXd::Zero(ng);
  for (size_t k = 0; k < free.size(); ++k)
    gen_p_set[free[k]] = dispatch_mw[int(k)] / net.base_mva;

  Spec spec;
  spec.kind.assign(n, NodeKind::PQ);
  spec.p_spec = Eigen::VectorXd::Zero(n);
  spec.q_spec = Eigen::VectorXd::Zero(n);
  spec.v_target = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    spec.p_spec[i] = -net.buses[i].p_load;
    spec.q_spec[i] = -net.buses[i].q_load;
  }
  std::vector<int> gen_of_bus(n, -1);
  for (int g = 0; g < ng; ++g) {
    const int bi = net.bus_index(net.generators[g].bus);
    gen_of_bus[bi] = g;
    spec.v_target[bi] = net.generators[g].v_set;
    if (net.buses[bi].type == BusType::Slack) {
      spec.kind[bi] = NodeKind::Slack;
    } else {
      spec.kind[bi] = NodeKind::PV;
      spec.p_spec[bi] += gen_p_set[g];
    }
  }
  const int slack = net.slack_bus_index();

  // Flat start: regulated buses at their setpoints, the rest at 1 p.u.
  Eigen::VectorXd vm = Eigen::VectorXd::Ones(n), va = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    if (spec.kind[i] != NodeKind::PQ) vm[i] = spec.v_target[i];
  if (!opt.flat_start) {
    // retained for completeness; callers currently always flat-start
  }

  // Q-limit state per generator: 0 free, +1 pinned at q_max, -1 pinned at q_min.
  std::vector<int> pinned(ng, 0);

  PowerFlowResult res;
  res.q_limited.assign(ng, false);
  int total_iters = 0;
  bool converged = false;

  for (int round = 0; round < 2 * ng + 2 && total_iters < opt.max_iter; ++round) {
    // Index maps for the current PV/PQ split.
    std::vector<int> ang_idx, mag_idx;
    for (int i = 0; i < n; ++i) {
      if (spec.kind[i] != NodeKind::Slack) ang_idx.push_back(i);
      if (spec.kind[i] == NodeKind::PQ) mag_idx.push_back(i);
    }
    const int na = int(ang_idx.size()), nm = int(mag_idx.size());

    converged = false;
    while (total_iters < opt.max_iter) {
      Eigen::VectorXd p, q;
      injections(ybus, vm, va, p, q);

      Eigen::VectorXd mismatch(na + nm);
      for (int k = 0; k < na; ++k) mismatch[k] = spec.p_spec[ang_idx[k]] - p[ang_idx[k]];
      for (int k = 0; k < nm; ++k)
        mismatch[na + k] = spec.q_spec[mag_idx[k]] - q[mag_idx[k]];
      if (mismatch.size() == 0 || mismatch.cwiseAbs().maxCoeff() < opt.tol) {
        converged = true;
        break;
      }

      // Standard polar-form Jacobian.
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(na + nm, na + nm);
      for (int r = 0; r < na + nm; ++r) {
        const int i = r < na ? ang_idx[r] : mag_idx[r - na];
        const bool row_p = r < na;
        for (int c = 0; c < na + nm; ++c) {
          const int j = c < na ? ang_idx[c] : mag_idx[c - na];
          const bool col_ang = c < na;
          const double g = ybus(i, j).real(), b = ybus(i, j).imag();
          const double tij = va[i] - va[j];
          double val = 0.0;
          if (i != j) {
            const double vij = vm[i] * vm[j];
            const double gs = g * std::sin(tij) - b * std::cos(tij);
            const double gc = g * std::cos(tij) + b * std::sin(tij);
            if (row_p && col_ang) val = vij * gs;
            else if (row_p) val = vm[i] * gc;
            else if (col_ang) val = -vij * gc;
            else val = vm[i] * gs;
          } else {
            if (row_p && col_ang) val = -q[i] - b * vm[i] * vm[i];
            else if (row_p) val = p[i] / vm[i] + g * vm[i];
            else if (col_ang) val = p[i] - g * vm[i] * vm[i];
            else val = q[i] / vm[i] - b * vm[i];
          }
          J(r, c) = val;
        }
      }

      Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
      const Eigen::VectorXd dx = lu.solve(mismatch);
      if (!dx.allFinite()) break;
      for (int k = 0; k < na; ++k) va[ang_idx[k]] += dx[k];
      for (int k = 0; k < nm; ++k) vm[mag_idx[k]] += dx[na + k];
      if ((vm.array() <= 0.0).any()) break;  // collapsed; treat as divergence
      ++total_iters;
    }
    if (!converged) break;
    if (!opt.enforce_q_limits) break;

    // Release regulated buses whose generator left its reactive range, and
    // restore pinned ones whose voltage drifted past the setpoint again.
    Eigen::VectorXd p, q;
    injections(ybus, vm, va, p, q);
    bool changed = false;
    for (int g = 0; g < ng; ++g) {
      const int bi = net.bus_index(net.generators[g].bus);
      if (spec.kind[bi] == NodeKind::Slack) continue;
      const auto& gen = net.generators[g];
      if (pinned[g] == 0) {
        const double q_gen = q[bi] + net.buses[bi].q_load;
        if (q_gen > gen.q_max + opt.tol) {
          pinned[g] = +1;
          spec.kind[bi] = NodeKind::PQ;
          spec.q_spec[bi] = gen.q_max - net.buses[bi].q_load;
          changed = true;
        } else if (q_gen < gen.q_min - opt.tol) {
          pinned[g] = -1;
          spec.kind[bi] = NodeKind::PQ;
          spec.q_spec[bi] = gen.q_min - net.buses[bi].q_load;
          changed = true;
        }
      } else if ((pinned[g] == +1 && vm[bi] > gen.v_set + opt.tol) ||
                 (pinned[g] == -1 && vm[bi] < gen.v_set - opt.tol)) {
        pinned[g] = 0;
        spec.kind[bi] = NodeKind::PV;
        vm[bi] = gen.v_set;
        changed = true;
      }
    }
    if (!changed) break;
  }

  res.converged = converged;
  res.iterations = total_iters;
  res.v_mag = vm;
  res.v_ang = va;
  injections(ybus, vm, va, res.p_inj, res.q_inj);
  res.gen_p = Eigen::VectorXd::Zero(ng);
  res.gen_q = Eigen::VectorXd::Zero(ng);
  for (int g = 0; g < ng; ++g) {
    const int bi = net.bus_index(net.generators[g].bus);
    res.gen_p[g] = res.p_inj[bi] + net.buses[bi].p_load;
    res.gen_q[g] = res.q_inj[bi] + net.buses[bi].q_load;
    res.q_limited[g] = pinned[g] != 0;
  }
  return res;
}

std::vector<BranchFlow> branch_flows(const NetworkCase& net, const Outage& outage,
                                     const PowerFlowResult& pf) {
  std::vector<BranchFlow> flows(net.branch_count());
  const Eigen::VectorXcd v = pf.v_complex();
  for (int b = 0; b < net.branch_count(); ++b) {
    auto& fl = flows[b];
    if (std::find(outage.branches_out.begin(), outage.branches_out.end(), b) !=
        outage.branches_out.end()) {
      fl.in_service = false;
      continue;
    }
    const auto& br = net.branches[b];
    const int i = net.bus_index(br.from);
    const int j = net.bus_index(br.to);
    const std::complex<double> y = 1.0 / std::complex<double>(br.resistance, br.reactance);
    const std::complex<double> shunt(0.0, br.charging / 2.0);
    const std::complex<double> s_from = v[i] * std::conj((v[i] - v[j]) * y + v[i] * shunt);
    const std::complex<double> s_to = v[j] * std::conj((v[j] - v[i]) * y + v[j] * shunt);
    fl.p_from = s_from.real() * net.base_mva;
    fl.q_from = s_from.imag() * net.base_mva;
    fl.p_to = s_to.real() * net.base_mva;
    fl.q_to = s_to.imag() * net.base_mva;
  }
  return flows;
}

std::string limit_kind_name(LimitKind k) {
  switch (k) {
    case LimitKind::PfDiverged: return "pf_diverged";
    case LimitKind::Voltage: return "voltage";
    case LimitKind::SlackActive: return "slack_active";
    case LimitKind::Thermal: return "thermal";
    case LimitKind::DispatchBounds: return "dispatch_bounds";
  }
  return "?";
}

FeasibilityResult check_feasibility(const NetworkCase& net, const Outage& outage,
                                    const DispatchPoint& dispatch_mw,
                                    const PowerFlowOptions& opt) {
  FeasibilityResult out;
  const auto free = net.free_generators();
  for (size_t k = 0; k < free.size(); ++k) {
    const auto& g = net.generators[free[k]];
    const double p = dispatch_mw[int(k)] / net.base_mva;
    if (p < g.p_min - 1e-9 || p > g.p_max + 1e-9)
      out.violations.push_back({LimitKind::DispatchBounds, free[k], dispatch_mw[int(k)],
                                (p < g.p_min ? g.p_min : g.p_max) * net.base_mva});
  }

  out.pf = solve_power_flow(net, outage, dispatch_mw, opt);
  if (!out.pf.converged) {
    out.violations.push_back({LimitKind::PfDiverged, -1, 0.0, 0.0});
    out.feasible = false;
    return out;
  }

  for (int i = 0; i < net.bus_count(); ++i) {
    const double v = out.pf.v_mag[i];
    if (v < net.buses[i].v_min - 1e-9)
      out.violations.push_back({LimitKind::Voltage, i, v, net.buses[i].v_min});
    else if (v > net.buses[i].v_max + 1e-9)
      out.violations.push_back({LimitKind::Voltage, i, v, net.buses[i].v_max});
  }

  const int sg = net.slack_gen_index();
  const double slack_p = out.pf.gen_p[sg];
  const auto& sgen = net.generators[sg];
  if (slack_p < sgen.p_min - 1e-9)
    out.violations.push_back(
        {LimitKind::SlackActive, sg, slack_p * net.base_mva, sgen.p_min * net.base_mva});
  else if (slack_p > sgen.p_max + 1e-9)
    out.violations.push_back(
        {LimitKind::SlackActive, sg, slack_p * net.base_mva, sgen.p_max * net.base_mva});

  const auto flows = branch_flows(net, outage, out.pf);
  for (int b = 0; b < net.branch_count(); ++b) {
    if (!flows[b].in_service || net.branches[b].capacity_mw <= 0) continue;
    const double mw = std::max(std::abs(flows[b].p_from), std::abs(flows[b].p_to));
    if (mw > net.branches[b].capacity_mw + 1e-6)
      out.violations.push_back({LimitKind::Thermal, b, mw, net.branches[b].capacity_mw});
  }

  out.feasible = out.violations.empty();
  return out;
}

}  // namespace secdb
