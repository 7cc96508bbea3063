#include "secdb/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "secdb/util.hpp"

namespace secdb {

namespace {

LinearExpr trace_expr(int block, const Eigen::MatrixXd& coeff) {
  LinearExpr expr;
  expr.add_matrix(block, coeff);
  return expr;
}

}  // namespace

Hypersphere prune_radius(const NetworkCase& net, const DispatchPoint& center_mw,
                         const ContingencySet& set, const PruneOptions& opt) {
  const std::vector<int> free = net.free_generators();
  if (center_mw.size() != static_cast<Eigen::Index>(free.size())) {
    throw Error("prune_radius: center has " + std::to_string(center_mw.size()) +
                " coordinates but the case has " + std::to_string(free.size()) +
                " free generators");
  }
  if (!center_mw.allFinite()) {
    throw Error("prune_radius: non-finite center coordinate");
  }
  if (set.entries.empty() || !set.entries[0].is_intact()) {
    throw Error("prune_radius: contingency set must start with the intact system");
  }

  const int n_buses = net.bus_count();
  const double base = net.base_mva;
  const int n_free = static_cast<int>(free.size());

  const Eigen::VectorXd lo = net.free_p_min_mw();
  const Eigen::VectorXd hi = net.free_p_max_mw();
  bool outside_box = false;
  for (int j = 0; j < n_free; ++j) {
    if (center_mw[j] < lo[j] - 1e-9 || center_mw[j] > hi[j] + 1e-9) {
      outside_box = true;
    }
  }

  ConicProblem problem;
  std::vector<int> blocks;
  blocks.reserve(set.entries.size());
  for (std::size_t c = 0; c < set.entries.size(); ++c) {
    blocks.push_back(problem.add_psd_block(2 * n_buses));
  }
  const int radius_var = problem.add_scalar(ScalarCone::Free);
  const std::vector<int> deviation = problem.add_scalars(n_free, ScalarCone::Free);
  std::vector<int> cone_ids;
  cone_ids.push_back(radius_var);
  cone_ids.insert(cone_ids.end(), deviation.begin(), deviation.end());
  problem.add_second_order_cone(cone_ids);
  LinearExpr objective;
  objective.add_scalar(radius_var, 1.0);
  problem.add_objective_term(objective);

  // Active-power injection matrices of the intact system at generator buses
  // are reused by both the set-point linking rows and the deviation rows.
  std::vector<Eigen::MatrixXd> intact_p(static_cast<std::size_t>(net.gen_count()));

  for (std::size_t c = 0; c < set.entries.size(); ++c) {
    const AdmittanceView view(net, set.entries[c]);
    const int block = blocks[c];
    for (int i = 0; i < n_buses; ++i) {
      const Bus& bus = net.buses[static_cast<std::size_t>(i)];
      const Eigen::MatrixXd p_mat = view.p_injection_matrix(i);
      const Eigen::MatrixXd q_mat = view.q_injection_matrix(i);
      const int gen = net.generator_at_bus(i);
      if (c == 0 && gen >= 0) {
        intact_p[static_cast<std::size_t>(gen)] = p_mat;
      }
      if (gen >= 0) {
        const Generator& g = net.generators[static_cast<std::size_t>(gen)];
        problem.add_greater_equal(trace_expr(block, p_mat), g.p_min - bus.p_load);
        problem.add_less_equal(trace_expr(block, p_mat), g.p_max - bus.p_load);
        problem.add_greater_equal(trace_expr(block, q_mat), g.q_min - bus.q_load);
        problem.add_less_equal(trace_expr(block, q_mat), g.q_max - bus.q_load);
      } else {
        // No generator: the net injection is exactly the negated demand.
        problem.add_equality(trace_expr(block, p_mat), -bus.p_load);
        problem.add_equality(trace_expr(block, q_mat), -bus.q_load);
      }
      const Eigen::MatrixXd v_mat = AdmittanceView::voltage_matrix(i, n_buses);
      problem.add_greater_equal(trace_expr(block, v_mat), bus.v_min * bus.v_min);
      problem.add_less_equal(trace_expr(block, v_mat), bus.v_max * bus.v_max);
    }

    if (c > 0) {
      // Under an outage the non-slack machines hold their active-power
      // set-points and every machine holds its voltage set-point, tying
      // each outage block to the intact block.
      const int slack_gen = net.slack_gen_index();
      for (int g = 0; g < net.gen_count(); ++g) {
        const int bus_idx = net.bus_index(net.generators[static_cast<std::size_t>(g)].bus);
        if (g != slack_gen) {
          LinearExpr link_p;
          link_p.add_matrix(block, view.p_injection_matrix(bus_idx));
          link_p.add_matrix(blocks[0], intact_p[static_cast<std::size_t>(g)], -1.0);
          problem.add_equality(std::move(link_p), 0.0);
        }
        const Eigen::MatrixXd v_mat = AdmittanceView::voltage_matrix(bus_idx, n_buses);
        LinearExpr link_v;
        link_v.add_matrix(block, v_mat);
        link_v.add_matrix(blocks[0], v_mat, -1.0);
        problem.add_equality(std::move(link_v), 0.0);
      }
    }
  }

  // Deviation of each free generator's intact dispatch from the query point,
  // in per-unit; the second-order cone bounds their norm by the radius.
  for (int j = 0; j < n_free; ++j) {
    const Generator& g = net.generators[static_cast<std::size_t>(free[static_cast<std::size_t>(j)])];
    const int bus_idx = net.bus_index(g.bus);
    const Bus& bus = net.buses[static_cast<std::size_t>(bus_idx)];
    LinearExpr row;
    row.add_scalar(deviation[static_cast<std::size_t>(j)], 1.0);
    row.add_matrix(blocks[0], intact_p[static_cast<std::size_t>(free[static_cast<std::size_t>(j)])], -1.0);
    problem.add_equality(std::move(row), bus.p_load - center_mw[j] / base);
  }

  const ConicSolution sol = solve(problem, opt.solver);

  Hypersphere sphere;
  sphere.center = center_mw;
  sphere.contingencies.resize(set.entries.size());
  for (std::size_t c = 0; c < set.entries.size(); ++c) {
    sphere.contingencies[c] = static_cast<int>(c);
  }
  sphere.status = solve_status_name(sol.status);
  if (outside_box) sphere.status += ";center-outside-box";

  if (sol.status == SolveStatus::Optimal) {
    const double margin =
        opt.margin_mw >= 0.0
            ? opt.margin_mw
            : std::max(1e-4, 10.0 * opt.solver.tol * base);
    const double radius_mw = std::max(sol.scalar_value(radius_var), 0.0) * base;
    sphere.radius = std::max(0.0, radius_mw - margin);
  } else {
    // Without an optimality certificate the radius cannot be trusted;
    // returning zero keeps the exclusion region sound (it prunes nothing).
    sphere.radius = 0.0;
  }
  return sphere;
}

std::vector<DispatchPoint> filter_pruned(const std::vector<DispatchPoint>& points,
                                         const PrunedRegion& region) {
  std::vector<DispatchPoint> survivors;
  survivors.reserve(points.size());
  for (const auto& p : points) {
    if (!region.contains(p)) survivors.push_back(p);
  }
  return survivors;
}

}  // namespace secdb
