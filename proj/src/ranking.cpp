#include "secdb/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace secdb {

FlowGraph::FlowGraph(int n_internal) : n_(n_internal + 2) {
  head_.assign(n_, -1);
}

int FlowGraph::add_edge(int from, int to, double capacity) {
  if (from < 0 || from >= n_ || to < 0 || to >= n_)
    throw Error("flow edge endpoint out of range");
  if (capacity < 0) throw Error("flow edge capacity must be >= 0");
  if (to == source() || from == sink())
    throw Error("source must have no in-edges and sink no out-edges");
  const int idx = int(to_.size());
  // forward arc
  to_.push_back(to);
  cap_.push_back(capacity);
  cap_orig_.push_back(capacity);
  next_.push_back(head_[from]);
  head_[from] = idx;
  // residual arc
  to_.push_back(from);
  cap_.push_back(0.0);
  cap_orig_.push_back(0.0);
  next_.push_back(head_[to]);
  head_[to] = idx + 1;
  return idx / 2;
}

bool FlowGraph::bfs_levels() {
  level_.assign(n_, -1);
  std::queue<int> q;
  level_[source()] = 0;
  q.push(source());
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int a = head_[v]; a != -1; a = next_[a]) {
      if (cap_[a] > 1e-12 && level_[to_[a]] < 0) {
        level_[to_[a]] = level_[v] + 1;
        q.push(to_[a]);
      }
    }
  }
  return level_[sink()] >= 0;
}

double FlowGraph::dfs_push(int v, double limit) {
  if (v == sink()) return limit;
  for (int& a = iter_[v]; a != -1; a = next_[a]) {
    const int u = to_[a];
    if (cap_[a] > 1e-12 && level_[u] == level_[v] + 1) {
      const double pushed = dfs_push(u, std::min(limit, cap_[a]));
      if (pushed > 0) {
        cap_[a] -= pushed;
        cap_[a ^ 1] += pushed;
        return pushed;
      }
    }
  }
  level_[v] = -1;
  return 0.0;
}

double FlowGraph::max_flow() {
  double total = 0.0;
  while (bfs_levels()) {
    iter_ = head_;
    while (true) {
      const double pushed = dfs_push(source(), std::numeric_limits<double>::infinity());
      if (pushed <= 0) break;
      total += pushed;
    }
  }
  return total;
}

FlowGraph build_flow_graph(const NetworkCase& net, const Outage& outage,
                           const PowerFlowResult& pf, SourceCapacity mode) {
  const int n = net.bus_count();
  FlowGraph g(n);

  // Resolve the capacity for unrated branches.
  double largest_rated = 0.0;
  for (const auto& br : net.branches) largest_rated = std::max(largest_rated, br.capacity_mw);
  double fallback = 2.0 * largest_rated;
  if (fallback <= 0) {
    for (const auto& gen : net.generators) fallback += gen.p_max * net.base_mva;
    g.warnings.push_back("no rated branches; unrated capacity set to total generation " +
                         std::to_string(fallback) + " MW");
  }

  for (int b = 0; b < net.branch_count(); ++b) {
    if (std::find(outage.branches_out.begin(), outage.branches_out.end(), b) !=
        outage.branches_out.end())
      continue;
    const auto& br = net.branches[b];
    double cap = br.capacity_mw;
    if (cap <= 0) {
      cap = fallback;
      g.warnings.push_back("branch " + std::to_string(b) + " unrated; using " +
                           std::to_string(cap) + " MW");
    }
    const int i = net.bus_index(br.from);
    const int j = net.bus_index(br.to);
    g.add_edge(i, j, cap);
    g.add_edge(j, i, cap);
  }

  for (int i = 0; i < n; ++i) {
    double inj_mw;
    if (mode == SourceCapacity::PMax) {
      double gen_cap = 0.0;
      const int gi = net.generator_at_bus(i);
      if (gi >= 0) gen_cap = net.generators[gi].p_max;
      inj_mw = (gen_cap - net.buses[i].p_load) * net.base_mva;
    } else {
      inj_mw = pf.p_inj[i] * net.base_mva;
    }
    if (inj_mw > 0)
      g.add_edge(g.source(), i, inj_mw);
    else if (inj_mw < 0)
      g.add_edge(i, g.sink(), -inj_mw);
  }
  return g;
}

CentralityResult rank_contingencies(const NetworkCase& net, const PowerFlowResult& pf,
                                    const ContingencySet& set, SourceCapacity mode) {
  if (!pf.converged) throw Error("contingency ranking needs a converged power flow");

  CentralityResult res;
  FlowGraph g = build_flow_graph(net, Outage{}, pf, mode);
  res.f_max = g.max_flow();
  res.degenerate = res.f_max <= 1e-9;

  const auto flows = branch_flows(net, Outage{}, pf);
  res.f_actual.resize(net.branch_count());
  res.centrality.resize(net.branch_count());
  for (int b = 0; b < net.branch_count(); ++b) {
    res.f_actual[b] = std::max(std::abs(flows[b].p_from), std::abs(flows[b].p_to));
    res.centrality[b] = res.degenerate ? res.f_actual[b] : res.f_actual[b] / res.f_max;
  }

  // Score every non-intact contingency; worst branch wins for multi-outages,
  // then ascending lowest-branch index breaks exact ties.
  std::vector<std::pair<double, std::pair<int, int>>> scored;  // (-C, (min branch, idx))
  for (int c = 0; c < set.size(); ++c) {
    if (set[c].is_intact()) continue;
    double score = 0.0;
    int min_branch = net.branch_count();
    for (int b : set[c].branches_out) {
      score = std::max(score, res.centrality[b]);
      min_branch = std::min(min_branch, b);
    }
    scored.push_back({-score, {min_branch, c}});
  }
  std::sort(scored.begin(), scored.end());
  for (const auto& s : scored) res.ranking.push_back(s.second.second);
  return res;
}

std::vector<int> most_critical(const NetworkCase& net, const PowerFlowResult& pf,
                               const ContingencySet& set, int k, SourceCapacity mode) {
  CentralityResult res = rank_contingencies(net, pf, set, mode);
  if (k < int(res.ranking.size())) res.ranking.resize(k);
  return res.ranking;
}

}  // namespace secdb
