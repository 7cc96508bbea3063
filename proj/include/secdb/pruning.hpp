#pragma once

#include <vector>

#include "secdb/conic.hpp"
#include "secdb/netmodel.hpp"
#include "secdb/region.hpp"

namespace secdb {

struct PruneOptions {
  // The certificate solver runs tighter than the general-purpose defaults so
  // the certified radius is accurate to well under the safety margin.
  ConicOptions solver;
  // Certified radii are shrunk by this many MW before use so solver
  // tolerance can never turn into a false prune.  Negative selects the
  // default max(1e-4, 10 * solver.tol * base_mva).
  double margin_mw = -1.0;
  // How many top-ranked contingencies the second pruning stage keeps.  Read
  // by the pipeline orchestration, not by prune_radius itself.
  int num_critical = 5;

  PruneOptions() {
    solver.tol = 1e-7;
    solver.max_iters = 200000;
  }
};

// Certifies a ball around center_mw (MW over free generators) in which no
// dispatch can satisfy the relaxed operating constraints -- voltage band,
// generator P/Q capability, and fixed active-power/voltage set-points across
// every entry of the contingency set.  Because the constraint set is a
// relaxation, infeasibility transfers to the true nonconvex problem, so the
// ball is a sound exclusion region.  The returned radius is the relaxation
// optimum minus the safety margin (floored at zero).  A center outside the
// dispatch box is kept as-is -- its certificate then covers at least the
// distance to the box -- and flagged in the status.  Non-optimal solver
// exits fall back to radius zero, which prunes nothing.
Hypersphere prune_radius(const NetworkCase& net, const DispatchPoint& center_mw,
                         const ContingencySet& set,
                         const PruneOptions& opt = PruneOptions());

// Keeps exactly the points that lie at distance >= radius from every sphere
// center, preserving input order.
std::vector<DispatchPoint> filter_pruned(const std::vector<DispatchPoint>& points,
                                         const PrunedRegion& region);

}  // namespace secdb
