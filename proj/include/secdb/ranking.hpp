#pragma once

#include <string>
#include <vector>

#include "secdb/netmodel.hpp"
#include "secdb/powerflow.hpp"

namespace secdb {

// Directed flow network with a super-source and super-sink appended after the
// bus vertices. Edges carry residual capacities for the augmenting solver.
class FlowGraph {
public:
  // n internal vertices; source() and sink() are added automatically.
  explicit FlowGraph(int n_internal);

  int source() const { return n_ - 2; }
  int sink() const { return n_ - 1; }
  int vertex_count() const { return n_; }

  // Adds a directed edge and returns its index. Capacity must be >= 0.
  int add_edge(int from, int to, double capacity);

  int edge_count() const { return int(to_.size()) / 2; }
  double capacity(int edge) const { return cap_orig_[2 * edge]; }
  // Net flow pushed through the edge after max_flow() ran.
  double flow(int edge) const { return cap_orig_[2 * edge] - cap_[2 * edge]; }

  // Dinic-style shortest augmenting paths; returns the max s->t flow value.
  double max_flow();

  std::vector<std::string> warnings;

private:
  bool bfs_levels();
  double dfs_push(int v, double limit);

  int n_;
  std::vector<int> head_;              // per vertex: first arc index or -1
  std::vector<int> next_;              // per arc: next arc at same tail
  std::vector<int> to_;                // per arc: head vertex
  std::vector<double> cap_;            // per arc: residual capacity
  std::vector<double> cap_orig_;       // per arc: original capacity
  std::vector<int> level_, iter_;
};

enum class SourceCapacity { Dispatch, PMax };

// Builds the vertex-weighted throughput graph for one solved operating point:
// source -> net-injection buses (capacity = net generation MW, or the
// generator capability when mode = PMax), net-load buses -> sink, and an arc
// pair per in-service branch at its thermal rating. Unrated branches get
// twice the largest rating (or total generation capability if nothing is
// rated), recorded in FlowGraph::warnings.
FlowGraph build_flow_graph(const NetworkCase& net, const Outage& outage,
                           const PowerFlowResult& pf,
                           SourceCapacity mode = SourceCapacity::Dispatch);

struct CentralityResult {
  double f_max = 0.0;
  bool degenerate = false;             // f_max = 0: ranking falls back to |flow|
  std::vector<double> f_actual;        // per branch, |active MW flow|
  std::vector<double> centrality;      // per branch, f_actual / f_max
  std::vector<int> ranking;            // contingency indices, most critical first
};

// Ranks the non-intact entries of `set` for one operating point: centrality is
// the intact-system |MW flow| of the outaged branch over the maximum
// source-sink throughput, sorted descending with ties broken by ascending
// branch index. Multi-branch entries score by their worst branch.
CentralityResult rank_contingencies(const NetworkCase& net, const PowerFlowResult& pf,
                                    const ContingencySet& set,
                                    SourceCapacity mode = SourceCapacity::Dispatch);

// Convenience: top-k contingency indices from rank_contingencies.
std::vector<int> most_critical(const NetworkCase& net, const PowerFlowResult& pf,
                               const ContingencySet& set, int k,
                               SourceCapacity mode = SourceCapacity::Dispatch);

}  // namespace secdb
