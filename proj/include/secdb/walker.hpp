#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/dataset.hpp"
#include "secdb/dynamics.hpp"
#include "secdb/netmodel.hpp"
#include "secdb/powerflow.hpp"
#include "secdb/sampler.hpp"

namespace secdb {

// Tuning of the boundary-search walks. The security margin, band half-width,
// and distance thresholds are damping-ratio values; steps are MW. Call
// resolve() once before use: it fills the automatic fields from the case and
// enforces the invariants.
struct WalkConfig {
  double gamma = 0.03;         // security margin (minimum acceptable damping)
  double mu = 0.0025;          // half-width of the boundary band
  double eps1 = 0.06;          // step scalars, outermost to innermost
  double eps2 = 0.03;
  double eps3 = 0.015;
  double eps4 = 0.0;           // 0 -> auto: alpha_min / max capacity
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;  // 0 -> auto: 10*mu, 4*mu, 2*mu
  int kappa_max = 25;          // moves allowed per walk
  double alpha_min_mw = 1.0;   // lattice pitch of the search grid
  double grad_step_mw = 0.0;   // 0 -> auto: 0.5 * alpha_min_mw
  // Database-deepening (simultaneous-outage) stage.
  int nk_kappa_max = 10;
  double nk_radius_mw = 0.0;   // seed-thinning distance; 0 -> auto: nk_kappa_max * alpha_min_mw

  PowerFlowOptions pf;
  DynamicsOptions dynamics;

  // Capacity vector over the free generators (MW); set by resolve().
  Eigen::VectorXd p_bar_mw;
  bool resolved = false;

  // Fill the automatic fields, validate the invariants (throws Error), and
  // return non-fatal warnings.
  std::vector<std::string> resolve(const NetworkCase& net);
  std::vector<std::string> resolve(const Eigen::VectorXd& capacity_mw);
};

// |zeta - gamma|: how far an operating point sits from the security boundary.
double boundary_distance(double zeta, double gamma);

// Per-dimension step bound for one walk move. The distance selects one of the
// four step scalars (threshold comparisons are closed from above: d == d2
// picks eps2), which scales the capacity vector; every component is floored
// at the lattice pitch.
Eigen::VectorXd step_size(double d, const WalkConfig& cfg);

struct OracleEval {
  bool valid = false;
  double zeta = std::numeric_limits<double>::quiet_NaN();  // under the critical outage
  int crit = -1;                                           // contingency-set entry
  std::string failure;
};

// What a walk needs at one dispatch: the stability value under the most
// critical contingency and its dispatch-space gradient. Implementations must
// tolerate concurrent calls from several threads.
class StabilityOracle {
public:
  virtual ~StabilityOracle() = default;
  virtual int dims() const = 0;
  virtual OracleEval evaluate(const DispatchPoint& dispatch_mw) = 0;
  // `base`, when given, is this oracle's evaluation at `dispatch_mw` under
  // entry `crit`; implementations reuse it as the finite-difference base so
  // only the perturbed points cost new assessments.
  virtual StabilityGradient gradient(const DispatchPoint& dispatch_mw, int crit,
                                     double step_mw,
                                     const OracleEval* base = nullptr) = 0;
  // Stability assessments performed so far (one per power-flow plus modal
  // analysis, gradient perturbations included; a gradient that reuses the
  // caller's base evaluation counts only its perturbed points): the budget
  // unit used when comparing database-generation strategies.
  virtual std::int64_t stability_evals() const = 0;
};

// Full-system oracle: ranks the configured contingencies by flow centrality
// at each dispatch, evaluates the minimum damping ratio under the winner,
// and differentiates it by forward MW perturbations.
class SystemOracle final : public StabilityOracle {
public:
  SystemOracle(const NetworkCase& net, const ContingencySet& set, const WalkConfig& cfg);

  // Pin every evaluation to one set entry and skip the ranking; used by the
  // deepening walks whose outage is fixed up front.
  void pin_entry(int entry);

  int dims() const override { return n_dims_; }
  OracleEval evaluate(const DispatchPoint& dispatch_mw) override;
  StabilityGradient gradient(const DispatchPoint& dispatch_mw, int crit, double step_mw,
                             const OracleEval* base = nullptr) override;
  std::int64_t stability_evals() const override { return evals_.load(); }

private:
  const NetworkCase& net_;
  const ContingencySet& set_;
  const WalkConfig& cfg_;
  int n_dims_ = 0;
  int pinned_ = -1;
  std::atomic<std::int64_t> evals_{0};
};

enum class WalkTermination { Duplicate, MaxSteps, GradientUndefined, BoxEdge };
const char* to_string(WalkTermination t);

struct WalkStep {
  DispatchPoint dispatch;   // MW
  int crit = -1;
  double zeta = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
  double distance = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd alpha;    // step bound applied when leaving this point
  Eigen::VectorXd delta;    // displacement actually taken (empty on a terminal step)
  bool in_band = false;     // distance <= mu here
  int surrounding = 0;      // neighbor evaluations performed at this point
};

struct WalkTrace {
  int walk_id = -1;
  bool reseeded = false;    // continuation of a walk that hit the step cap in the band
  std::vector<WalkStep> steps;
  WalkTermination reason = WalkTermination::MaxSteps;
  DispatchPoint final_point;   // last dispatch occupied, or the duplicate arrival
  bool ended_in_band = false;  // step cap reached while inside the band
};

// One walk plus the records it contributes. Records carry stage "walk" or
// "surrounding"; the campaign merges them in walk order, first writer wins.
struct WalkOutcome {
  WalkTrace trace;
  std::vector<SecurityRecord> records;
};

// Runs one variable-step steepest-descent walk from `start` (snapped to the
// lattice anchored at plan.lo_mw). `prior` provides duplicate detection:
// starting on -- or stepping onto -- a key recorded there (or already visited
// by this walk) with a stage other than "surrounding" terminates the walk.
// Once the walk is inside the band it assesses the lattice neighbors of each
// point and moves one coordinate per step by the lattice pitch. A walk that
// cannot move (box edge) for two consecutive attempts stops; an unusable
// gradient or a diverged operating point stops it with the point recorded.
// `skip_start_duplicate` lets a continuation round restart from its recorded
// final point; `start_hint` reuses that record's evaluation.
WalkOutcome directed_walk(const DispatchPoint& start_mw, StabilityOracle& oracle,
                          const WalkConfig& cfg, const SamplePlan& plan,
                          const Database& prior, int walk_id,
                          bool skip_start_duplicate = false,
                          const SecurityRecord* start_hint = nullptr);

struct CampaignOptions {
  int workers = 1;
};

struct CampaignResult {
  std::vector<WalkTrace> traces;     // first round, then continuation round
  std::int64_t inserted = 0;         // records newly added to the database
  std::int64_t stability_evals = 0;  // oracle budget spent by the campaign
};

// Runs one walk per start against the shared database. Within a round every
// walk sees only the records that existed when the round began, and the
// outcomes merge in walk order with first-writer-wins, so the final record
// set is identical for any worker count. Walks that hit the step cap inside
// the band are continued once from their final points.
CampaignResult run_campaign(const std::vector<DispatchPoint>& starts,
                            StabilityOracle& oracle, const WalkConfig& cfg,
                            const SamplePlan& plan, Database& db,
                            const CampaignOptions& opt = {});

struct FullCheckStats {
  std::int64_t checked = 0;          // records re-evaluated against the whole set
  std::int64_t relabeled = 0;        // labels changed by the re-evaluation
  std::int64_t stability_evals = 0;
};

// Re-evaluates every record whose estimate reaches gamma - mu against every
// set entry: steady-state feasibility plus modal analysis per entry. Stores
// the full-set minimum damping and the two most severe outages, then
// relabels; secure requires every entry feasible and the full minimum at or
// above gamma. Records below the band keep their insecure label untouched.
FullCheckStats full_contingency_check(Database& db, const NetworkCase& net,
                                      const ContingencySet& set, const WalkConfig& cfg,
                                      int workers = 1);

struct NkResult {
  Database fragment;                 // deepened records, separate from the input
  std::vector<WalkTrace> traces;
  std::vector<DispatchPoint> seeds;  // thinned initialization points
  ContingencySet check_set;          // set used for the final check
  std::vector<std::string> stages;   // stage names executed, in order
  std::vector<std::string> warnings;
  std::int64_t stability_evals = 0;
};

// Deepens a fully checked database by one outage order: seeds are the secure
// in-band records thinned to pairwise distance >= nk_radius_mw (grid-key
// order, greedy); each walk scores dispatches against the simultaneous outage
// of that seed's two most severe contingencies; the final check re-evaluates
// candidate-secure records against `final_check` (when null: intact plus
// every distinct combined outage the walks used). No sampling or pruning
// stage runs here, which the stage list documents.
NkResult extend_nk(const Database& checked_db, const NetworkCase& net,
                   const ContingencySet& n1_set, const WalkConfig& cfg,
                   const SamplePlan& plan, const ContingencySet* final_check = nullptr,
                   int workers = 1);

// One step per line, in JSON: walk id, step index, dispatch, contingency,
// stability value, distance, band flag, displacement, and (on the last line
// of a walk) the termination reason.
void export_traces_jsonl(const std::vector<WalkTrace>& traces, const std::string& path);

}  // namespace secdb
