// Tests for the boundary-search walks: step-size ladder, steepest-descent
// moves on a lattice, band behavior, termination, worker-independent
// campaigns, the whole-set relabeling pass, and the database deepening.
// Oracles: closed-form linear stability surfaces with hand-counted walks,
// and exhaustive per-contingency re-evaluation on the three-machine case.

#include "secdb/walker.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "secdb/dynamics.hpp"
#include "secdb/powerflow.hpp"
#include "secdb/util.hpp"

using namespace secdb;

namespace {

NetworkCase load_named(const char* file) {
  return load_case_file(std::string(SECDB_CASE_DIR) + "/" + file);
}

SamplePlan toy_plan(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double alpha) {
  SamplePlan plan;
  plan.lo_mw = lo;
  plan.hi_mw = hi;
  plan.alpha_mw = alpha;
  plan.seed = 11;
  plan.validate();
  return plan;
}

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Exact linear stability surface zeta(x) = c0 + slope . x with an analytic
// gradient; every point is valid unless it falls in the configured dead box.
class LinearOracle : public StabilityOracle {
public:
  LinearOracle(Eigen::VectorXd slope, double c0) : slope_(std::move(slope)), c0_(c0) {}

  double zeta_at(const DispatchPoint& x) const { return c0_ + slope_.dot(x); }

  int dims() const override { return int(slope_.size()); }

  OracleEval evaluate(const DispatchPoint& x) override {
    evals_.fetch_add(1);
    OracleEval ev;
    if (dead_lo_.size() > 0 && (x.array() >= dead_lo_.array()).all() &&
        (x.array() <= dead_hi_.array()).all()) {
      ev.failure = "power flow diverged";
      return ev;
    }
    ev.valid = true;
    ev.zeta = zeta_at(x);
    ev.crit = 0;
    return ev;
  }

  StabilityGradient gradient(const DispatchPoint& x, int, double step_mw,
                             const OracleEval* base = nullptr) override {
    evals_.fetch_add(base != nullptr && base->valid ? dims() : dims() + 1);
    StabilityGradient g;
    g.d_zeta = slope_;
    g.defined.assign(std::size_t(dims()), !undefined_);
    if (undefined_) g.d_zeta.setConstant(std::numeric_limits<double>::quiet_NaN());
    g.base_zeta = zeta_at(x);
    g.step_mw = step_mw;
    return g;
  }

  std::int64_t stability_evals() const override { return evals_.load(); }

  void set_dead_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    dead_lo_ = lo;
    dead_hi_ = hi;
  }
  void set_undefined(bool u) { undefined_ = u; }

private:
  Eigen::VectorXd slope_;
  double c0_ = 0.0;
  Eigen::VectorXd dead_lo_, dead_hi_;
  bool undefined_ = false;
  std::atomic<std::int64_t> evals_{0};
};

WalkConfig toy_config(const Eigen::VectorXd& capacity) {
  WalkConfig cfg;
  cfg.gamma = 0.03;
  cfg.mu = 0.0025;
  std::vector<std::string> warn = cfg.resolve(capacity);
  (void)warn;
  return cfg;
}

}  // namespace

TEST_CASE("boundary distance is the absolute margin gap") {
  CHECK(boundary_distance(0.03, 0.03) == 0.0);
  CHECK(boundary_distance(0.05, 0.03) == doctest::Approx(0.02).epsilon(1e-15));
  // symmetric around the margin
  for (double x : {0.001, 0.004, 0.02}) {
    CHECK(boundary_distance(0.03 + x, 0.03) ==
          doctest::Approx(boundary_distance(0.03 - x, 0.03)).epsilon(1e-15));
  }
}

TEST_CASE("the step ladder selects by distance with closed upper bounds") {
  WalkConfig cfg;
  cfg.gamma = 0.03;
  cfg.mu = 0.0025;
  cfg.eps1 = 0.05;
  cfg.eps2 = 0.03;
  cfg.eps3 = 0.015;
  cfg.eps4 = 0.005;
  cfg.d1 = 0.025;
  cfg.d2 = 0.01;
  cfg.d3 = 0.005;
  cfg.alpha_min_mw = 0.25;  // low floor so every rung is visible
  cfg.resolve(vec1(100.0));

  // far out: the coarsest scalar
  CHECK(step_size(0.030, cfg)[0] == doctest::Approx(5.0).epsilon(1e-12));
  // each threshold belongs to the branch below it (upper bounds are closed)
  CHECK(step_size(cfg.d1, cfg)[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(step_size(cfg.d2, cfg)[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(step_size(cfg.d3, cfg)[0] == doctest::Approx(0.5).epsilon(1e-12));
  // innermost branch at zero distance
  CHECK(step_size(0.0, cfg)[0] == doctest::Approx(0.5).epsilon(1e-12));
  // a tiny innermost scalar is floored at the lattice pitch
  WalkConfig fine = cfg;
  fine.eps4 = 1e-6;
  fine.resolved = false;
  fine.resolve(vec1(100.0));
  CHECK(step_size(0.0, fine)[0] == doctest::Approx(fine.alpha_min_mw).epsilon(1e-12));

  // the ladder never grows as the distance shrinks
  double prev = 1e9;
  for (double d = 0.06; d >= 0.0; d -= 1e-4) {
    const double s = step_size(d, cfg)[0];
    CHECK(s <= prev + 1e-15);
    prev = s;
  }
}

TEST_CASE("the walk configuration enforces its invariants") {
  WalkConfig cfg;
  CHECK_THROWS_AS(step_size(0.01, cfg), Error);  // unresolved

  WalkConfig bad = cfg;
  bad.eps2 = 0.08;  // above eps1
  CHECK_THROWS_AS(bad.resolve(vec1(100.0)), Error);

  bad = cfg;
  bad.d3 = 0.9;  // above d1 after auto fill
  CHECK_THROWS_AS(bad.resolve(vec1(100.0)), Error);

  bad = cfg;
  bad.mu = 0.0;
  CHECK_THROWS_AS(bad.resolve(vec1(100.0)), Error);

  // automatic fills
  WalkConfig ok;
  ok.mu = 0.004;
  std::vector<std::string> warn = ok.resolve(vec1(200.0));
  CHECK(ok.d1 == doctest::Approx(0.04));
  CHECK(ok.d2 == doctest::Approx(0.016));
  CHECK(ok.d3 == doctest::Approx(0.008));
  CHECK(ok.eps4 == doctest::Approx(1.0 / 200.0));
  CHECK(ok.grad_step_mw == doctest::Approx(0.5));
  CHECK(ok.nk_radius_mw == doctest::Approx(10.0));
  CHECK(warn.empty());

  // an oversized thinning radius warns but does not fail
  WalkConfig wide;
  wide.nk_radius_mw = 1000.0;
  warn = wide.resolve(vec1(200.0));
  REQUIRE(warn.size() == 1);
  CHECK(warn[0].find("thinning radius") != std::string::npos);
}

TEST_CASE("a linear surface is reached in the hand-counted number of coarse steps") {
  // One dimension, uniform step scalar: every coarse move shifts the
  // stability value by eps * capacity * slope, so the number of moves to the
  // band has a closed form.
  const double slope = 0.001, cap = 100.0, eps = 0.05;
  WalkConfig cfg;
  cfg.gamma = 0.03;
  cfg.mu = 0.0025;
  cfg.eps1 = cfg.eps2 = cfg.eps3 = cfg.eps4 = eps;
  cfg.kappa_max = 100;
  cfg.resolve(vec1(cap));

  const double c0 = cfg.gamma + 0.0824 - slope * 350.0;  // distance 0.0824 at x = 350
  LinearOracle oracle(vec1(slope), c0);
  SamplePlan plan = toy_plan(vec1(0.0), vec1(400.0), 1.0);
  Database db;

  WalkOutcome out = directed_walk(vec1(350.0), oracle, cfg, plan, db, 0);

  const double step_mw = eps * cap;          // 5 MW per coarse move
  const double d0 = 0.0824;
  const int expect = int(std::ceil((d0 - cfg.mu) / (step_mw * slope)));  // 16
  REQUIRE(expect == 16);

  // the first in-band point appears after exactly that many moves
  int first_band = -1;
  for (std::size_t k = 0; k < out.trace.steps.size(); ++k) {
    if (out.trace.steps[k].in_band) {
      first_band = int(k);
      break;
    }
  }
  REQUIRE(first_band == expect);
  for (int k = 0; k < first_band; ++k) {
    REQUIRE(out.trace.steps[k].delta.size() == 1);
    CHECK(std::abs(out.trace.steps[k].delta[0]) == doctest::Approx(step_mw));
  }

  // in-band moves switch to single cells until the walk folds onto itself
  CHECK(out.trace.reason == WalkTermination::Duplicate);
  for (std::size_t k = first_band; k + 1 < out.trace.steps.size(); ++k) {
    if (!out.trace.steps[k].in_band) continue;
    if (out.trace.steps[k].delta.size() == 0) continue;
    CHECK(std::abs(out.trace.steps[k].delta[0]) == doctest::Approx(cfg.alpha_min_mw));
  }

  // every consecutive displacement respects the step bound of its origin
  for (const WalkStep& st : out.trace.steps) {
    if (st.delta.size() == 0 || st.alpha.size() == 0) continue;
    for (int i = 0; i < st.delta.size(); ++i)
      CHECK(std::abs(st.delta[i]) <= st.alpha[i] + 1e-12);
  }

  // records: every visited key exactly once, classified against the band rule
  std::set<GridKey> keys;
  for (const SecurityRecord& rec : out.records) {
    CHECK(keys.insert(rec.key).second);
    const double z = oracle.zeta_at(rec.dispatch);
    CHECK(rec.zeta_min_est == doctest::Approx(z).epsilon(1e-12));
    CHECK(rec.hic == (cfg.gamma - cfg.mu < z && z < cfg.gamma + cfg.mu));
    CHECK(rec.label == Label::Insecure);  // nothing is secure before the full check
  }
}

TEST_CASE("walks approach the boundary from the unstable side as well") {
  // zeta below the margin: the distance gradient flips sign and the walk
  // must climb toward the boundary.
  const double slope = 0.001;
  WalkConfig cfg = toy_config(vec1(100.0));
  cfg.kappa_max = 60;
  LinearOracle oracle(vec1(slope), -0.03);  // zeta(50) = 0.02 < gamma, boundary at x = 60
  SamplePlan plan = toy_plan(vec1(0.0), vec1(200.0), 1.0);
  Database db;

  WalkOutcome out = directed_walk(vec1(50.0), oracle, cfg, plan, db, 0);
  REQUIRE(out.trace.steps.size() > 1);
  CHECK(out.trace.steps[0].delta[0] > 0.0);  // moves toward higher zeta

  bool entered = false;
  for (const WalkStep& st : out.trace.steps) entered = entered || st.in_band;
  CHECK(entered);
  // the walk ends in the neighborhood of the boundary crossing
  CHECK(std::abs(out.trace.final_point[0] - 60.0) <= 6.0);
}

TEST_CASE("inside the band the walk moves one coordinate by one cell") {
  const Eigen::VectorXd slope = vec2(0.001, 0.0004);
  WalkConfig cfg = toy_config(vec2(100.0, 100.0));
  cfg.kappa_max = 200;
  LinearOracle oracle(slope, 0.03 + 0.05 - 0.001 * 60.0 - 0.0004 * 50.0);
  SamplePlan plan = toy_plan(vec2(0.0, 0.0), vec2(120.0, 120.0), 1.0);
  Database db;

  WalkOutcome out = directed_walk(vec2(60.0, 50.0), oracle, cfg, plan, db, 0);

  bool any_band = false;
  for (const WalkStep& st : out.trace.steps) {
    if (!st.in_band || st.delta.size() == 0) continue;
    any_band = true;
    int changed = 0;
    for (int i = 0; i < 2; ++i)
      if (st.delta[i] != 0.0) {
        ++changed;
        CHECK(std::abs(st.delta[i]) == doctest::Approx(cfg.alpha_min_mw));
        CHECK(i == 0);  // the steeper component always wins here
      }
    CHECK(changed == 1);
  }
  REQUIRE(any_band);

  // band points sprout neighbor assessments, recorded under their own stage
  std::int64_t surrounding = 0;
  for (const WalkStep& st : out.trace.steps) surrounding += st.surrounding;
  REQUIRE(surrounding > 0);
  std::int64_t tagged = 0;
  for (const SecurityRecord& rec : out.records) tagged += rec.stage == "surrounding";
  CHECK(tagged == surrounding);

  // the step bound never grows while the distance shrinks
  for (std::size_t k = 0; k + 1 < out.trace.steps.size(); ++k) {
    const WalkStep& a = out.trace.steps[k];
    const WalkStep& b = out.trace.steps[k + 1];
    if (a.alpha.size() == 0 || b.alpha.size() == 0) continue;
    if (b.distance < a.distance)
      for (int i = 0; i < 2; ++i) CHECK(b.alpha[i] <= a.alpha[i] + 1e-12);
  }
}

TEST_CASE("termination: duplicate starts, box edges, undefined gradients, dead points") {
  WalkConfig cfg = toy_config(vec1(100.0));
  SamplePlan plan = toy_plan(vec1(0.0), vec1(200.0), 1.0);

  SUBCASE("a start already recorded ends a walk before it begins") {
    LinearOracle oracle(vec1(0.001), 0.0);
    Database db;
    SecurityRecord rec;
    rec.key = grid_key(vec1(50.0), plan.lo_mw, plan.alpha_mw);
    rec.dispatch = vec1(50.0);
    rec.stage = "walk";
    db.upsert(rec);

    WalkOutcome out = directed_walk(vec1(50.0), oracle, cfg, plan, db, 1);
    CHECK(out.trace.reason == WalkTermination::Duplicate);
    CHECK(out.trace.steps.empty());
    CHECK(out.records.empty());
    CHECK(oracle.stability_evals() == 0);
  }

  SUBCASE("a neighbor-stage record does not block a start") {
    LinearOracle oracle(vec1(0.001), 0.0);
    Database db;
    SecurityRecord rec;
    rec.key = grid_key(vec1(50.0), plan.lo_mw, plan.alpha_mw);
    rec.dispatch = vec1(50.0);
    rec.stage = "surrounding";
    db.upsert(rec);

    WalkOutcome out = directed_walk(vec1(50.0), oracle, cfg, plan, db, 1);
    // the walk runs (it may still fold onto its own path much later)
    REQUIRE(!out.trace.steps.empty());
    CHECK(out.trace.steps.size() > 1);
    REQUIRE(!out.records.empty());
    CHECK(out.records.front().stage == "walk");
  }

  SUBCASE("a gradient pushing through the box wall stalls the walk out") {
    // distance keeps shrinking toward x < 0, which the box forbids
    LinearOracle oracle(vec1(0.0001), 0.03 + 0.001);
    Database db;
    WalkOutcome out = directed_walk(vec1(3.0), oracle, cfg, plan, db, 0);
    REQUIRE(out.trace.reason == WalkTermination::BoxEdge);
    REQUIRE(out.trace.steps.size() >= 2);
    const WalkStep& last = out.trace.steps.back();
    const WalkStep& prev = out.trace.steps[out.trace.steps.size() - 2];
    CHECK(last.delta.norm() == 0.0);
    CHECK(prev.delta.norm() == 0.0);
    CHECK(out.trace.final_point[0] == 0.0);
  }

  SUBCASE("an undefined gradient stops the walk with the point kept") {
    LinearOracle oracle(vec1(0.001), 0.0);
    oracle.set_undefined(true);
    Database db;
    WalkOutcome out = directed_walk(vec1(50.0), oracle, cfg, plan, db, 0);
    CHECK(out.trace.reason == WalkTermination::GradientUndefined);
    CHECK(out.trace.steps.size() == 1);
    REQUIRE(out.records.size() == 1);
    CHECK(out.records[0].stage == "walk");
  }

  SUBCASE("a diverged operating point is recorded unusable and ends the walk") {
    LinearOracle oracle(vec1(0.001), 0.0);
    oracle.set_dead_box(vec1(49.0), vec1(51.0));
    Database db;
    WalkOutcome out = directed_walk(vec1(50.0), oracle, cfg, plan, db, 0);
    CHECK(out.trace.reason == WalkTermination::GradientUndefined);
    REQUIRE(out.records.size() == 1);
    CHECK(!std::isfinite(out.records[0].zeta_min_est));
    CHECK(out.records[0].label == Label::Insecure);
    CHECK(out.records[0].hic == false);
  }

  SUBCASE("the step cap bounds the number of moves") {
    WalkConfig capped = cfg;
    capped.kappa_max = 3;
    capped.resolved = false;
    capped.resolve(vec1(100.0));
    LinearOracle oracle(vec1(0.001), -0.2);  // far from the boundary, long descent
    Database db;
    WalkOutcome out = directed_walk(vec1(100.0), oracle, cfg, plan, db, 0);
    (void)out;
    WalkOutcome capped_out = directed_walk(vec1(100.0), oracle, capped, plan, db, 1);
    CHECK(capped_out.trace.reason == WalkTermination::MaxSteps);
    CHECK(capped_out.trace.steps.size() == 4);  // three moves, four points
    CHECK(capped_out.trace.ended_in_band == false);
  }
}

TEST_CASE("campaigns merge identically for any worker count and continue capped walks") {
  const Eigen::VectorXd slope = vec2(0.0008, 0.0005);
  WalkConfig cfg = toy_config(vec2(120.0, 90.0));
  cfg.kappa_max = 12;  // low enough that some walk caps out inside the band
  cfg.resolved = false;
  cfg.resolve(vec2(120.0, 90.0));
  SamplePlan plan = toy_plan(vec2(0.0, 0.0), vec2(120.0, 90.0), 1.0);
  plan.eta3 = 8;

  const std::vector<DispatchPoint> starts = lhs_sample(8, plan, 3);

  auto run_with = [&](int workers, CampaignResult& res) {
    LinearOracle oracle(slope, 0.03 - 0.0008 * 60.0 - 0.0005 * 45.0 + 0.004);
    Database db;
    res = run_campaign(starts, oracle, cfg, plan, db, CampaignOptions{workers});
    return db.snapshot();
  };

  CampaignResult r1, r4;
  const std::vector<SecurityRecord> s1 = run_with(1, r1);
  const std::vector<SecurityRecord> s4 = run_with(4, r4);

  REQUIRE(s1.size() == s4.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].key == s4[i].key);
    CHECK(s1[i].stage == s4[i].stage);
    CHECK(s1[i].walk_id == s4[i].walk_id);
    CHECK(s1[i].crit_cont == s4[i].crit_cont);
    CHECK(s1[i].hic == s4[i].hic);
    const bool an = std::isfinite(s1[i].zeta_min_est), bn = std::isfinite(s4[i].zeta_min_est);
    CHECK(an == bn);
    if (an && bn) CHECK(s1[i].zeta_min_est == s4[i].zeta_min_est);
  }
  CHECK(r1.inserted == r4.inserted);
  CHECK(r1.stability_evals == r4.stability_evals);
  REQUIRE(r1.traces.size() == r4.traces.size());
  for (std::size_t t = 0; t < r1.traces.size(); ++t) {
    CHECK(r1.traces[t].reason == r4.traces[t].reason);
    CHECK(r1.traces[t].steps.size() == r4.traces[t].steps.size());
    CHECK((r1.traces[t].final_point - r4.traces[t].final_point).norm() == 0.0);
  }

  // capped in-band walks get one continuation each, appended after the round
  std::size_t capped = 0;
  for (std::size_t t = 0; t < starts.size(); ++t)
    capped += r1.traces[t].reason == WalkTermination::MaxSteps && r1.traces[t].ended_in_band;
  REQUIRE(capped > 0);
  REQUIRE(r1.traces.size() == starts.size() + capped);
  for (std::size_t t = starts.size(); t < r1.traces.size(); ++t) {
    CHECK(r1.traces[t].reseeded);
    CHECK(r1.traces[t].walk_id == int(t));
  }

  // no key is stored twice and secure labels cannot appear before a full check
  std::set<GridKey> keys;
  for (const SecurityRecord& rec : s1) {
    CHECK(keys.insert(rec.key).second);
    CHECK(rec.label == Label::Insecure);
  }
}

TEST_CASE("two walks funneling to one point keep a single record") {
  const double slope = 0.001;
  WalkConfig cfg = toy_config(vec1(100.0));
  SamplePlan plan = toy_plan(vec1(0.0), vec1(200.0), 1.0);
  LinearOracle oracle(vec1(slope), -0.03);  // boundary at x = 60
  Database db;

  std::vector<DispatchPoint> starts = {vec1(40.0), vec1(80.0)};
  CampaignResult res = run_campaign(starts, oracle, cfg, plan, db, CampaignOptions{1});

  // both walks visited the band around x = 60; the shared keys exist once
  std::set<GridKey> from_zero, from_one;
  for (const SecurityRecord& rec : db.snapshot()) {
    if (rec.walk_id == 0) from_zero.insert(rec.key);
    if (rec.walk_id == 1) from_one.insert(rec.key);
  }
  CHECK(!from_zero.empty());
  CHECK(!from_one.empty());
  std::int64_t total_emitted = 0;
  for (const WalkTrace& tr : res.traces) total_emitted += std::int64_t(tr.steps.size());
  CHECK(db.size() <= total_emitted + 4 * std::int64_t(res.traces.size()));
  // every record belongs to exactly one walk although both crossed the band
  for (const SecurityRecord& rec : db.snapshot())
    CHECK((rec.walk_id == 0 || rec.walk_id == 1));
}

TEST_CASE("the full check relabels against every contingency and records the severity pair") {
  const NetworkCase net = load_named("case9.json");
  const ContingencySet set = list_contingencies(net, ContingencyPolicy::AllLines);
  REQUIRE(set.size() == 7);

  WalkConfig cfg;
  cfg.gamma = 0.05;
  cfg.mu = 0.0025;
  cfg.resolve(net);
  SamplePlan plan = SamplePlan::for_case(net, 1.0, 5);

  // the test's own exhaustive verdict for one dispatch
  struct Truth {
    double zeta_full;
    bool feasible_all;
    std::vector<std::pair<double, int>> order;  // severity-sorted non-intact entries
  };
  auto oracle_truth = [&](const DispatchPoint& x) {
    Truth t{std::numeric_limits<double>::infinity(), true, {}};
    for (int e = 0; e < set.size(); ++e) {
      const FeasibilityResult fr = check_feasibility(net, set[e], x, cfg.pf);
      const DampingEval de = minimum_damping(net, set[e], x, cfg.dynamics, cfg.pf);
      const bool ok = fr.feasible && de.valid;
      if (!ok) t.feasible_all = false;
      if (de.valid) t.zeta_full = std::min(t.zeta_full, de.zeta_min);
      if (!set[e].is_intact())
        t.order.push_back({ok ? (1000.0 + de.zeta_min) : double(e), e});
    }
    std::sort(t.order.begin(), t.order.end());
    return t;
  };

  SystemOracle sys(net, set, cfg);

  // a spread of operating points, one of them deliberately carrying an
  // intact-system estimate although another outage is binding
  std::vector<DispatchPoint> points = {vec2(160.0, 90.0), vec2(100.0, 60.0),
                                       vec2(140.0, 100.0)};
  DispatchPoint misranked;
  bool found_misranked = false;
  for (double p2 = 30.0; p2 <= 170.0 && !found_misranked; p2 += 20.0) {
    for (double p3 = 20.0; p3 <= 130.0 && !found_misranked; p3 += 20.0) {
      const DispatchPoint x = vec2(p2, p3);
      const DampingEval intact = minimum_damping(net, set[0], x, cfg.dynamics, cfg.pf);
      if (!intact.valid || intact.zeta_min < cfg.gamma) continue;
      const Truth t = oracle_truth(x);
      if (std::isfinite(t.zeta_full) && t.zeta_full < cfg.gamma - cfg.mu) {
        misranked = x;
        found_misranked = true;
      }
    }
  }
  REQUIRE(found_misranked);

  Database db;
  for (const DispatchPoint& x : points) {
    const OracleEval ev = sys.evaluate(x);
    REQUIRE(ev.valid);
    SecurityRecord rec;
    rec.key = grid_key(x, plan.lo_mw, plan.alpha_mw);
    rec.dispatch = x;
    rec.zeta_min_est = ev.zeta;
    rec.crit_cont = ev.crit;
    rec.stage = "walk";
    classify(rec, cfg.gamma, cfg.mu);
    db.upsert(rec);
  }
  {
    // the misranked record scores itself by the intact system only
    const DampingEval intact = minimum_damping(net, set[0], misranked, cfg.dynamics, cfg.pf);
    SecurityRecord rec;
    rec.key = grid_key(misranked, plan.lo_mw, plan.alpha_mw);
    rec.dispatch = misranked;
    rec.zeta_min_est = intact.zeta_min;
    rec.crit_cont = 0;
    rec.stage = "walk";
    classify(rec, cfg.gamma, cfg.mu);
    db.upsert(rec);
  }
  {
    // far below the band: the full check must not touch it
    SecurityRecord rec;
    rec.key = grid_key(vec2(10.0, 10.0), plan.lo_mw, plan.alpha_mw);
    rec.dispatch = vec2(10.0, 10.0);
    rec.zeta_min_est = cfg.gamma - 10.0 * cfg.mu;
    rec.crit_cont = 1;
    rec.stage = "walk";
    classify(rec, cfg.gamma, cfg.mu);
    db.upsert(rec);
  }

  const std::int64_t before = db.size();
  const FullCheckStats stats = full_contingency_check(db, net, set, cfg, 2);
  CHECK(db.size() == before);
  CHECK(stats.checked == 4);
  CHECK(stats.stability_evals == 4 * set.size());

  for (const SecurityRecord& rec : db.snapshot()) {
    if (rec.zeta_min_est < cfg.gamma - cfg.mu) {
      CHECK(!rec.full_checked);  // spared by the band threshold
      CHECK(rec.label == Label::Insecure);
      continue;
    }
    REQUIRE(rec.full_checked);
    const Truth t = oracle_truth(rec.dispatch);
    CHECK(rec.feasible_n1 == t.feasible_all);
    if (std::isfinite(t.zeta_full))
      CHECK(rec.zeta_min_full == doctest::Approx(t.zeta_full).epsilon(1e-12));
    const bool expect_secure = t.feasible_all && t.zeta_full >= cfg.gamma;
    CHECK((rec.label == Label::Secure) == expect_secure);
    REQUIRE(rec.critical_pair.size() == std::min<std::size_t>(2, t.order.size()));
    for (std::size_t s = 0; s < rec.critical_pair.size(); ++s)
      CHECK(rec.critical_pair[s] == t.order[s].second);
  }

  // the deliberately misranked point is repaired to insecure
  const SecurityRecord* fixed = db.find(grid_key(misranked, plan.lo_mw, plan.alpha_mw));
  REQUIRE(fixed != nullptr);
  CHECK(fixed->label == Label::Insecure);
  CHECK(stats.relabeled >= 0);

  // no record anywhere is secure without full-check evidence
  for (const SecurityRecord& rec : db.snapshot())
    if (rec.label == Label::Secure) {
      CHECK(rec.full_checked);
      CHECK(rec.feasible_n1);
      CHECK(rec.zeta_min_full >= cfg.gamma);
    }
}

TEST_CASE("deepening thins seeds, walks paired outages, and skips sampling stages") {
  // A meshed grid: on a pure ring, any two simultaneous line outages split
  // the network, so paired deepening needs redundant paths.
  const NetworkCase net = load_named("case14.json");
  const ContingencySet n1 = list_contingencies(net, ContingencyPolicy::AllLines);
  REQUIRE(n1.size() == 20);  // one radial generator line is excluded
  WalkConfig cfg;
  cfg.gamma = 0.05;
  cfg.mu = 0.0025;
  cfg.nk_kappa_max = 6;
  cfg.nk_radius_mw = 5.0;
  cfg.resolve(net);
  SamplePlan plan = SamplePlan::for_case(net, 1.0, 5);
  REQUIRE(plan.lo_mw.size() == 4);

  auto dispatch4 = [](double a, double b, double c, double d) {
    Eigen::VectorXd v(4);
    v << a, b, c, d;
    return v;
  };
  auto secure_band_record = [&](const Eigen::VectorXd& x, std::vector<int> pair) {
    SecurityRecord rec;
    rec.dispatch = x;
    rec.key = grid_key(rec.dispatch, plan.lo_mw, plan.alpha_mw);
    rec.zeta_min_est = cfg.gamma + 0.0005;
    rec.zeta_min_full = cfg.gamma + 0.0005;
    rec.crit_cont = 1;
    rec.feasible_n1 = true;
    rec.full_checked = true;
    rec.stage = "walk";
    rec.critical_pair = std::move(pair);
    classify(rec, cfg.gamma, cfg.mu);
    return rec;
  };

  SUBCASE("seeds a lattice cell apart collapse to one initialization point") {
    Database db;
    Database::UpsertOutcome a =
        db.upsert(secure_band_record(dispatch4(40.0, 30.0, 20.0, 25.0), {3, 4}));
    Database::UpsertOutcome b =
        db.upsert(secure_band_record(dispatch4(41.0, 30.0, 20.0, 25.0), {3, 4}));
    REQUIRE(a == Database::UpsertOutcome::Inserted);
    REQUIRE(b == Database::UpsertOutcome::Inserted);

    const NkResult res = extend_nk(db, net, n1, cfg, plan, nullptr, 1);
    CHECK(res.seeds.size() == 1);
    CHECK(res.traces.size() == 1);

    // the walk outage is the simultaneous pair, shared check set entry 1
    REQUIRE(res.check_set.size() == 2);
    std::vector<int> expect;
    for (int br : n1[3].branches_out) expect.push_back(br);
    for (int br : n1[4].branches_out) expect.push_back(br);
    std::sort(expect.begin(), expect.end());
    CHECK(res.check_set[1].branches_out == expect);
    for (const WalkStep& st : res.traces[0].steps)
      if (st.valid) CHECK(st.crit == 1);

    // stage log: walks and the check only, never sampling or pruning
    REQUIRE(!res.stages.empty());
    for (const std::string& s : res.stages) {
      CHECK(s.find("sampl") == std::string::npos);
      CHECK(s.find("prun") == std::string::npos);
    }
    CHECK(res.stages.front() == "nk-seed-thinning");
    CHECK(res.stages.back() == "nk-full-check");

    // deepened records: proper stages and no unchecked secure label
    REQUIRE(res.fragment.size() > 0);
    for (const SecurityRecord& rec : res.fragment.snapshot()) {
      CHECK((rec.stage == "nk-walk" || rec.stage == "nk-surrounding"));
      if (rec.label == Label::Secure) CHECK(rec.full_checked);
      CHECK(rec.crit_cont <= 1);
    }
    CHECK(res.stability_evals > 0);
  }

  SUBCASE("an islanding pair is skipped with a warning") {
    Database db;
    // lines 1-2 and 1-5 together cut the slack bus off
    db.upsert(secure_band_record(dispatch4(40.0, 30.0, 20.0, 25.0), {1, 2}));
    const NkResult res = extend_nk(db, net, n1, cfg, plan, nullptr, 1);
    CHECK(res.seeds.empty());
    CHECK(res.fragment.size() == 0);
    bool warned = false;
    for (const std::string& w : res.warnings) warned = warned || w.find("island") != std::string::npos;
    CHECK(warned);
  }

  SUBCASE("an empty stable band yields an empty fragment and a warning") {
    Database db;
    const NkResult res = extend_nk(db, net, n1, cfg, plan, nullptr, 1);
    CHECK(res.fragment.size() == 0);
    CHECK(res.traces.empty());
    REQUIRE(!res.warnings.empty());
    CHECK(res.warnings.back().find("nothing to deepen") != std::string::npos);
  }
}

TEST_CASE("trace export writes one line per step with the reason on the last") {
  WalkConfig cfg = toy_config(vec1(100.0));
  SamplePlan plan = toy_plan(vec1(0.0), vec1(200.0), 1.0);
  LinearOracle oracle(vec1(0.001), -0.03);
  Database db;

  std::vector<WalkTrace> traces;
  traces.push_back(directed_walk(vec1(40.0), oracle, cfg, plan, db, 0).trace);
  WalkTrace empty;
  empty.walk_id = 7;
  empty.reason = WalkTermination::Duplicate;
  empty.final_point = vec1(12.0);
  traces.push_back(empty);

  const std::string path = "walker_traces_test.jsonl";
  export_traces_jsonl(traces, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  in.close();
  std::remove(path.c_str());

  REQUIRE(lines.size() == traces[0].steps.size() + 1);
  for (std::size_t k = 0; k < traces[0].steps.size(); ++k) {
    CHECK(lines[k]["walk"] == 0);
    CHECK(lines[k]["step"] == int(k));
    const std::vector<double> d = lines[k]["dispatch"].get<std::vector<double>>();
    REQUIRE(d.size() == 1);
    CHECK(d[0] == traces[0].steps[k].dispatch[0]);
  }
  CHECK(lines[traces[0].steps.size() - 1].contains("reason"));
  CHECK(lines.back()["walk"] == 7);
  CHECK(lines.back()["reason"] == "duplicate");
}
