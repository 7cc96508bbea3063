#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/util.hpp"

namespace secdb {

// Ball in dispatch space (MW over non-slack generators) certified infeasible
// for the listed contingency indices.
struct Hypersphere {
  Eigen::VectorXd center;
  double radius = 0.0;
  // Positions of the entries (within the contingency set the certificate was
  // computed against) that constrain the ball; 0 is the intact system.
  std::vector<int> contingencies;
  // Solver outcome that produced the certificate ("optimal", "max-iters",
  // "infeasible"), with ";center-outside-box" appended when the query point
  // lay outside the dispatch box.  Not serialized.
  std::string status;
};

struct PrunedRegion {
  std::vector<Hypersphere> spheres;

  // True when the point lies strictly inside any sphere.
  bool contains(const Eigen::VectorXd& point) const {
    for (const auto& s : spheres)
      if (s.radius > 0 && (point - s.center).norm() < s.radius) return true;
    return false;
  }
};

std::string region_to_json(const PrunedRegion& region);
PrunedRegion region_from_json(const std::string& text);
void save_region_file(const std::string& path, const PrunedRegion& region);
PrunedRegion load_region_file(const std::string& path);

}  // namespace secdb
