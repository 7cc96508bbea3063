#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/netmodel.hpp"
#include "secdb/region.hpp"

namespace secdb {

// Sampling campaign description: initialization counts for the three stages,
// the dispatch box, the grid interval, and the seed everything derives from.
struct SamplePlan {
  int eta1 = 0, eta2 = 0, eta3 = 0;
  Eigen::VectorXd lo_mw, hi_mw;  // per non-slack generator
  double alpha_mw = 1.0;         // discretization interval
  std::uint64_t seed = 1;
  int profile = 0;               // load-profile campaign id

  void validate() const;
  static SamplePlan for_case(const NetworkCase& net, double alpha_mw, std::uint64_t seed);
  // Grid cardinality per dimension: floor(span/alpha) + 1.
  std::vector<std::int64_t> grid_cardinality() const;
};

struct LhsDesign {
  std::vector<DispatchPoint> points;
  double min_distance = 0.0;                   // of the kept design
  std::vector<double> candidate_min_distances; // one per evaluated candidate
};

// Stratified (Latin hypercube) sample of the dispatch box, snapped to the
// alpha grid: every dimension's n strata are hit exactly once, and the
// best-of-k candidate by maximin pairwise distance is kept.
LhsDesign lhs_sample_detailed(int n, const SamplePlan& plan, std::uint64_t stream,
                              int k_candidates = 32);
std::vector<DispatchPoint> lhs_sample(int n, const SamplePlan& plan, std::uint64_t stream = 0,
                                      int k_candidates = 32);

// LHS batches filtered against the pruned region, refilled until n points lie
// outside every sphere. Aborts with "search space exhausted" when the recent
// rejection rate exceeds 99.9%.
std::vector<DispatchPoint> resample_outside(int n, const SamplePlan& plan,
                                            const PrunedRegion& region,
                                            std::uint64_t stream = 0, int k_candidates = 32);

void save_samples_csv(const std::string& path, const std::vector<DispatchPoint>& samples);
std::vector<DispatchPoint> load_samples_csv(const std::string& path);

}  // namespace secdb
