#include "secdb/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace secdb {

void SamplePlan::validate() const {
  if (eta1 < 0 || eta2 < 0 || eta3 < 0) throw Error("sample counts must be >= 0");
  if (lo_mw.size() != hi_mw.size()) throw Error("dispatch box bounds differ in size");
  if (lo_mw.size() == 0) throw Error("dispatch box has no dimensions");
  for (int d = 0; d < lo_mw.size(); ++d)
    if (lo_mw[d] > hi_mw[d]) throw Error("dispatch box bounds out of order");
  if (alpha_mw <= 0) throw Error("grid interval alpha must be positive");
}

SamplePlan SamplePlan::for_case(const NetworkCase& net, double alpha_mw, std::uint64_t seed) {
  SamplePlan plan;
  plan.lo_mw = net.free_p_min_mw();
  plan.hi_mw = net.free_p_max_mw();
  plan.alpha_mw = alpha_mw;
  plan.seed = seed;
  plan.validate();
  return plan;
}

std::vector<std::int64_t> SamplePlan::grid_cardinality() const {
  std::vector<std::int64_t> card(lo_mw.size());
  for (int d = 0; d < lo_mw.size(); ++d)
    card[d] = std::int64_t(std::floor((hi_mw[d] - lo_mw[d]) / alpha_mw + 1e-9)) + 1;
  return card;
}

namespace {

// One stratified design: per dimension, pick a random grid index inside each
// of the n equal-width strata, then shuffle the per-dimension assignment.
std::vector<DispatchPoint> one_design(int n, const SamplePlan& plan, Rng& rng) {
  const int dims = int(plan.lo_mw.size());
  const auto card = plan.grid_cardinality();
  std::vector<std::vector<double>> columns(dims);

  for (int d = 0; d < dims; ++d) {
    const double lo = plan.lo_mw[d], hi = plan.hi_mw[d];
    const double width = (hi - lo) / n;
    std::vector<double> vals(n);
    for (int k = 0; k < n; ++k) {
      // Grid indices whose value falls in [lo + k*width, lo + (k+1)*width),
      // the last stratum closed on the right.
      const double a = k * width;
      const double b = (k + 1) * width;
      std::int64_t i_min = std::int64_t(std::ceil(a / plan.alpha_mw - 1e-9));
      std::int64_t i_max;
      if (k == n - 1)
        i_max = card[d] - 1;
      else
        i_max = std::int64_t(std::ceil(b / plan.alpha_mw - 1e-9)) - 1;
      i_max = std::min(i_max, card[d] - 1);
      if (i_min > i_max)
        throw Error("stratum " + std::to_string(k) + " of dimension " + std::to_string(d) +
                    " contains no grid point; reduce n or alpha");
      const std::int64_t idx = i_min + std::int64_t(rng.next_below(std::uint64_t(i_max - i_min + 1)));
      vals[k] = lo + double(idx) * plan.alpha_mw;
    }
    rng.shuffle(vals);
    columns[d] = std::move(vals);
  }

  std::vector<DispatchPoint> pts(n, DispatchPoint(dims));
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < dims; ++d) pts[s][d] = columns[d][s];
  return pts;
}

double min_pairwise_distance(const std::vector<DispatchPoint>& pts) {
  if (pts.size() < 2) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      best = std::min(best, (pts[i] - pts[j]).norm());
  return best;
}

}  // namespace

LhsDesign lhs_sample_detailed(int n, const SamplePlan& plan, std::uint64_t stream,
                              int k_candidates) {
  plan.validate();
  if (n < 1) throw Error("sample count must be >= 1");
  if (k_candidates < 1) throw Error("candidate count must be >= 1");
  const auto card = plan.grid_cardinality();
  for (size_t d = 0; d < card.size(); ++d)
    if (std::int64_t(n) > card[d])
      throw Error("sample count " + std::to_string(n) + " exceeds grid cardinality " +
                  std::to_string(card[d]) + " in dimension " + std::to_string(d));

  LhsDesign best;
  double best_score = -1.0;
  for (int c = 0; c < k_candidates; ++c) {
    Rng rng = Rng::stream(plan.seed, stream * 1000003 + std::uint64_t(c));
    std::vector<DispatchPoint> pts = one_design(n, plan, rng);
    const double score = min_pairwise_distance(pts);
    best.candidate_min_distances.push_back(score);
    if (score > best_score) {
      best_score = score;
      best.points = std::move(pts);
    }
  }
  best.min_distance = best_score;
  return best;
}

std::vector<DispatchPoint> lhs_sample(int n, const SamplePlan& plan, std::uint64_t stream,
                                      int k_candidates) {
  return lhs_sample_detailed(n, plan, stream, k_candidates).points;
}

std::vector<DispatchPoint> resample_outside(int n, const SamplePlan& plan,
                                            const PrunedRegion& region, std::uint64_t stream,
                                            int k_candidates) {
  plan.validate();
  if (n < 1) throw Error("sample count must be >= 1");

  std::vector<DispatchPoint> accepted;
  std::int64_t window_drawn = 0, window_accepted = 0;
  const std::int64_t window = std::max<std::int64_t>(10000, 4 * n);

  auto is_duplicate = [&](const DispatchPoint& p) {
    for (const auto& q : accepted)
      if ((p - q).norm() < 1e-9) return true;
    return false;
  };

  for (std::uint64_t batch = 0;; ++batch) {
    const std::vector<DispatchPoint> pts =
        lhs_sample(n, plan, stream * 7919 + batch + 1, k_candidates);
    for (const auto& p : pts) {
      ++window_drawn;
      if (!region.contains(p) && !is_duplicate(p)) {
        accepted.push_back(p);
        ++window_accepted;
        if (int(accepted.size()) == n) return accepted;
      }
    }
    if (window_drawn >= window) {
      if (double(window_accepted) < 0.001 * double(window_drawn))
        throw Error("search space exhausted: rejection rate above 99.9% while resampling");
      window_drawn = window_accepted = 0;
    }
  }
}

void save_samples_csv(const std::string& path, const std::vector<DispatchPoint>& samples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write samples file: " + path);
  const int dims = samples.empty() ? 0 : int(samples[0].size());
  for (int d = 0; d < dims; ++d) out << (d ? "," : "") << "p_g" << (d + 1);
  out << "\n";
  for (const auto& p : samples) {
    for (int d = 0; d < dims; ++d) out << (d ? "," : "") << format_double(p[d]);
    out << "\n";
  }
}

std::vector<DispatchPoint> load_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open samples file: " + path);
  std::vector<DispatchPoint> samples;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    DispatchPoint p(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) p[int(i)] = vals[i];
    samples.push_back(std::move(p));
  }
  return samples;
}

}  // namespace secdb
