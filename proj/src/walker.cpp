#include "secdb/walker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include <json.hpp>

#include "secdb/ranking.hpp"
#include "secdb/util.hpp"

namespace secdb {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Records collected as band neighbors never terminate a walk that later
// steps onto them; everything else does.
bool blocks_walk(const SecurityRecord* rec) {
  return rec != nullptr && rec->stage.find("surrounding") == std::string::npos;
}

std::vector<std::int64_t> grid_limits(const SamplePlan& plan) {
  auto cards = plan.grid_cardinality();
  std::vector<std::int64_t> lim(cards.size());
  for (std::size_t i = 0; i < cards.size(); ++i) lim[i] = cards[i] - 1;
  return lim;
}

GridKey clamp_key(GridKey key, const std::vector<std::int64_t>& lim) {
  for (std::size_t i = 0; i < key.size(); ++i)
    key[i] = std::max<std::int64_t>(0, std::min(lim[i], key[i]));
  return key;
}

}  // namespace

std::vector<std::string> WalkConfig::resolve(const NetworkCase& net) {
  return resolve(net.free_p_max_mw());
}

std::vector<std::string> WalkConfig::resolve(const Eigen::VectorXd& capacity_mw) {
  if (capacity_mw.size() == 0) throw Error("walk config: no free generators to walk over");
  if (!capacity_mw.allFinite() || capacity_mw.minCoeff() < 0.0)
    throw Error("walk config: capacities must be finite and non-negative");
  const double cap_max = capacity_mw.maxCoeff();
  if (cap_max <= 0.0) throw Error("walk config: at least one capacity must be positive");
  if (!(mu > 0.0)) throw Error("walk config: the band half-width must be positive");
  if (!std::isfinite(gamma)) throw Error("walk config: the security margin must be finite");
  if (!(alpha_min_mw > 0.0)) throw Error("walk config: the lattice pitch must be positive");
  if (kappa_max < 1) throw Error("walk config: at least one step per walk is required");
  if (nk_kappa_max < 1) throw Error("walk config: at least one deepening step is required");

  if (d1 == 0.0) d1 = 10.0 * mu;
  if (d2 == 0.0) d2 = 4.0 * mu;
  if (d3 == 0.0) d3 = 2.0 * mu;
  if (eps4 == 0.0) eps4 = alpha_min_mw / cap_max;
  if (grad_step_mw == 0.0) grad_step_mw = 0.5 * alpha_min_mw;
  if (nk_radius_mw == 0.0) nk_radius_mw = double(nk_kappa_max) * alpha_min_mw;

  if (!(d1 > d2 && d2 > d3 && d3 > 0.0))
    throw Error("walk config: distance thresholds must satisfy d1 > d2 > d3 > 0");
  if (!(eps1 >= eps2 && eps2 >= eps3 && eps3 >= eps4 && eps4 > 0.0))
    throw Error("walk config: step scalars must satisfy eps1 >= eps2 >= eps3 >= eps4 > 0");
  if (!(grad_step_mw > 0.0)) throw Error("walk config: the gradient step must be positive");
  if (!(nk_radius_mw > 0.0)) throw Error("walk config: the thinning radius must be positive");

  p_bar_mw = capacity_mw;
  resolved = true;

  std::vector<std::string> warnings;
  if (nk_radius_mw > double(nk_kappa_max) * alpha_min_mw + 1e-12)
    warnings.push_back(
        "thinning radius exceeds the span a deepening walk can cover "
        "(nk_kappa_max * alpha_min_mw); neighboring seeds may leave gaps");
  return warnings;
}

double boundary_distance(double zeta, double gamma) { return std::abs(zeta - gamma); }

Eigen::VectorXd step_size(double d, const WalkConfig& cfg) {
  if (!cfg.resolved) throw Error("walk config: resolve() must run before step_size");
  double eps;
  if (d > cfg.d1)
    eps = cfg.eps1;
  else if (d > cfg.d2)
    eps = cfg.eps2;
  else if (d > cfg.d3)
    eps = cfg.eps3;
  else
    eps = cfg.eps4;
  return (eps * cfg.p_bar_mw).cwiseMax(cfg.alpha_min_mw);
}

SystemOracle::SystemOracle(const NetworkCase& net, const ContingencySet& set,
                           const WalkConfig& cfg)
    : net_(net), set_(set), cfg_(cfg), n_dims_(int(net.free_generators().size())) {
  if (set.size() == 0) throw Error("stability oracle: the contingency set is empty");
  if (!cfg.resolved) throw Error("stability oracle: resolve the walk config first");
  if (n_dims_ == 0) throw Error("stability oracle: the case has no free generators");
}

void SystemOracle::pin_entry(int entry) {
  if (entry < 0 || entry >= set_.size())
    throw Error("stability oracle: pinned entry out of range");
  pinned_ = entry;
}

OracleEval SystemOracle::evaluate(const DispatchPoint& x) {
  evals_.fetch_add(1, std::memory_order_relaxed);
  OracleEval ev;
  int crit = pinned_;
  if (crit < 0) {
    PowerFlowResult pf = solve_power_flow(net_, Outage{}, x, cfg_.pf);
    if (!pf.converged) {
      ev.failure = "power flow diverged";
      return ev;
    }
    std::vector<int> top = most_critical(net_, pf, set_, 1);
    crit = top.empty() ? 0 : top[0];
  }
  ev.crit = crit;
  DampingEval de = minimum_damping(net_, set_[crit], x, cfg_.dynamics, cfg_.pf);
  if (!de.valid) {
    ev.failure = de.failure;
    return ev;
  }
  ev.valid = true;
  ev.zeta = de.zeta_min;
  return ev;
}

StabilityGradient SystemOracle::gradient(const DispatchPoint& x, int crit, double step_mw,
                                         const OracleEval* base) {
  if (crit < 0 || crit >= set_.size())
    throw Error("stability oracle: gradient contingency out of range");
  // One forward point per dimension; the base assessment is reused from the
  // caller when it matches this point, and evaluated (and billed) otherwise.
  std::optional<double> base_zeta;
  if (base != nullptr && base->valid && base->crit == crit && std::isfinite(base->zeta))
    base_zeta = base->zeta;
  evals_.fetch_add(base_zeta.has_value() ? n_dims_ : n_dims_ + 1,
                   std::memory_order_relaxed);
  return damping_gradient(net_, set_[crit], x, step_mw, /*central=*/false, cfg_.dynamics,
                          cfg_.pf, base_zeta);
}

const char* to_string(WalkTermination t) {
  switch (t) {
    case WalkTermination::Duplicate: return "duplicate";
    case WalkTermination::MaxSteps: return "max-steps";
    case WalkTermination::GradientUndefined: return "gradient-undefined";
    case WalkTermination::BoxEdge: return "box-edge";
  }
  return "unknown";
}

WalkOutcome directed_walk(const DispatchPoint& start_mw, StabilityOracle& oracle,
                          const WalkConfig& cfg, const SamplePlan& plan,
                          const Database& prior, int walk_id, bool skip_start_duplicate,
                          const SecurityRecord* start_hint) {
  if (!cfg.resolved) throw Error("directed walk: resolve the walk config first");
  plan.validate();
  if (std::abs(plan.alpha_mw - cfg.alpha_min_mw) > 1e-9 * std::max(1.0, cfg.alpha_min_mw))
    throw Error("directed walk: the sampling lattice and the walk lattice disagree");
  const int n = oracle.dims();
  if (plan.lo_mw.size() != n || cfg.p_bar_mw.size() != n || start_mw.size() != n)
    throw Error("directed walk: dimension mismatch between oracle, plan, and start");

  const std::vector<std::int64_t> lim = grid_limits(plan);

  WalkOutcome out;
  out.trace.walk_id = walk_id;
  out.trace.reseeded = skip_start_duplicate;

  GridKey key = clamp_key(grid_key(start_mw, plan.lo_mw, plan.alpha_mw), lim);
  out.trace.final_point = dispatch_from_key(key, plan.lo_mw, plan.alpha_mw);

  if (!skip_start_duplicate && blocks_walk(prior.find(key))) {
    out.trace.reason = WalkTermination::Duplicate;
    return out;
  }

  std::map<GridKey, OracleEval> seen;  // this walk's evaluations, by lattice key
  std::set<GridKey> occupied;          // keys the walk has stood on

  auto emit_record = [&](const GridKey& k, const OracleEval& ev, const char* stage) {
    SecurityRecord rec;
    rec.key = k;
    rec.dispatch = dispatch_from_key(k, plan.lo_mw, plan.alpha_mw);
    rec.zeta_min_est = ev.valid ? ev.zeta : kNan;
    rec.crit_cont = ev.crit;
    rec.stage = stage;
    rec.walk_id = walk_id;
    classify(rec, cfg.gamma, cfg.mu);
    out.records.push_back(std::move(rec));
  };

  // A continuation round reuses the stored evaluation of its start.
  if (start_hint != nullptr && start_hint->key == key &&
      std::isfinite(start_hint->zeta_min_est)) {
    OracleEval ev;
    ev.valid = true;
    ev.zeta = start_hint->zeta_min_est;
    ev.crit = start_hint->crit_cont;
    seen.emplace(key, ev);
  }

  int moves = 0;
  int zero_streak = 0;

  for (;;) {
    const DispatchPoint x = dispatch_from_key(key, plan.lo_mw, plan.alpha_mw);
    out.trace.final_point = x;
    occupied.insert(key);

    OracleEval ev;
    const auto cached = seen.find(key);
    if (cached != seen.end()) {
      ev = cached->second;
    } else {
      ev = oracle.evaluate(x);
      seen.emplace(key, ev);
      emit_record(key, ev, "walk");
    }

    WalkStep st;
    st.dispatch = x;
    st.crit = ev.crit;
    st.valid = ev.valid;
    st.zeta = ev.valid ? ev.zeta : kNan;

    if (!ev.valid) {
      out.trace.steps.push_back(std::move(st));
      out.trace.reason = WalkTermination::GradientUndefined;
      return out;
    }

    const double d = boundary_distance(ev.zeta, cfg.gamma);
    st.distance = d;
    st.in_band = d <= cfg.mu;

    // Inside the band every lattice neighbor is worth assessing: it may be a
    // band member no walk will ever step on exactly.
    if (st.in_band) {
      for (int i = 0; i < n; ++i) {
        for (int sgn : {-1, +1}) {
          GridKey nb = key;
          nb[i] += sgn;
          if (nb[i] < 0 || nb[i] > lim[i]) continue;
          if (seen.count(nb) > 0 || prior.find(nb) != nullptr) continue;
          OracleEval nev = oracle.evaluate(dispatch_from_key(nb, plan.lo_mw, plan.alpha_mw));
          seen.emplace(nb, nev);
          emit_record(nb, nev, "surrounding");
          ++st.surrounding;
        }
      }
    }

    if (moves >= cfg.kappa_max) {
      out.trace.steps.push_back(std::move(st));
      out.trace.reason = WalkTermination::MaxSteps;
      out.trace.ended_in_band = st.in_band;
      return out;
    }

    const StabilityGradient grad = oracle.gradient(x, ev.crit, cfg.grad_step_mw, &ev);

    // Descent direction on the boundary distance: the gradient of
    // |zeta - gamma| flips sign with the side of the boundary we are on, so
    // walks approach it from both sides.
    const double side = (ev.zeta >= cfg.gamma) ? 1.0 : -1.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    double gmax = 0.0;
    int defined = 0;
    for (int i = 0; i < n; ++i) {
      if (i < int(grad.defined.size()) && grad.defined[i] && std::isfinite(grad.d_zeta[i])) {
        g[i] = side * grad.d_zeta[i];
        gmax = std::max(gmax, std::abs(g[i]));
        ++defined;
      }
    }
    if (defined == 0 || gmax == 0.0) {
      out.trace.steps.push_back(std::move(st));
      out.trace.reason = WalkTermination::GradientUndefined;
      return out;
    }

    const Eigen::VectorXd alpha = step_size(d, cfg);
    st.alpha = alpha;

    GridKey next = key;
    if (st.in_band) {
      // One coordinate, one lattice cell: the steepest component decides.
      int j = 0;
      double best = -1.0;
      for (int i = 0; i < n; ++i) {
        if (std::abs(g[i]) > best) {
          best = std::abs(g[i]);
          j = i;
        }
      }
      next[j] += (g[j] > 0.0) ? -1 : +1;
    } else {
      // Scale the unit descent direction by the per-dimension step bound,
      // in whole cells, so no component ever exceeds its bound.
      for (int i = 0; i < n; ++i) {
        const std::int64_t cells = std::max<std::int64_t>(
            1, std::int64_t(std::floor(alpha[i] / cfg.alpha_min_mw + 1e-9)));
        next[i] -= std::int64_t(std::llround(double(cells) * (g[i] / gmax)));
      }
    }
    next = clamp_key(std::move(next), lim);

    if (next == key) {
      st.delta = Eigen::VectorXd::Zero(n);
      out.trace.steps.push_back(std::move(st));
      if (++zero_streak >= 2) {
        out.trace.reason = WalkTermination::BoxEdge;
        return out;
      }
      continue;
    }
    zero_streak = 0;

    Eigen::VectorXd delta(n);
    for (int i = 0; i < n; ++i) delta[i] = double(next[i] - key[i]) * cfg.alpha_min_mw;
    st.delta = std::move(delta);
    out.trace.steps.push_back(std::move(st));
    ++moves;

    if (occupied.count(next) > 0 || blocks_walk(prior.find(next))) {
      out.trace.final_point = dispatch_from_key(next, plan.lo_mw, plan.alpha_mw);
      out.trace.reason = WalkTermination::Duplicate;
      return out;
    }
    key = std::move(next);
  }
}

CampaignResult run_campaign(const std::vector<DispatchPoint>& starts,
                            StabilityOracle& oracle, const WalkConfig& cfg,
                            const SamplePlan& plan, Database& db,
                            const CampaignOptions& opt) {
  if (!cfg.resolved) throw Error("campaign: resolve the walk config first");
  const std::int64_t evals0 = oracle.stability_evals();
  CampaignResult res;

  const auto merge = [&](std::vector<WalkOutcome>& outcomes) {
    for (auto& oc : outcomes) {
      for (auto& rec : oc.records)
        if (db.upsert(rec) == Database::UpsertOutcome::Inserted) ++res.inserted;
      res.traces.push_back(std::move(oc.trace));
    }
  };

  // Round one: every walk sees only the records present at entry, so the
  // merged result does not depend on scheduling.
  std::vector<WalkOutcome> round1(starts.size());
  parallel_for(starts.size(), opt.workers, [&](std::size_t i) {
    round1[i] = directed_walk(starts[i], oracle, cfg, plan, db, int(i));
  });
  merge(round1);

  // Walks the step cap stopped inside the band continue once from their
  // final points against the merged first round.
  std::vector<std::pair<DispatchPoint, const SecurityRecord*>> seeds;
  for (const WalkTrace& tr : res.traces)
    if (tr.reason == WalkTermination::MaxSteps && tr.ended_in_band)
      seeds.emplace_back(tr.final_point,
                         db.find(grid_key(tr.final_point, plan.lo_mw, plan.alpha_mw)));

  const int base_id = int(starts.size());
  std::vector<WalkOutcome> round2(seeds.size());
  parallel_for(seeds.size(), opt.workers, [&](std::size_t j) {
    round2[j] = directed_walk(seeds[j].first, oracle, cfg, plan, db, base_id + int(j),
                              /*skip_start_duplicate=*/true, seeds[j].second);
  });
  merge(round2);

  res.stability_evals = oracle.stability_evals() - evals0;
  return res;
}

FullCheckStats full_contingency_check(Database& db, const NetworkCase& net,
                                      const ContingencySet& set, const WalkConfig& cfg,
                                      int workers) {
  if (!cfg.resolved) throw Error("full check: resolve the walk config first");
  if (set.size() == 0) throw Error("full check: the contingency set is empty");

  const std::vector<SecurityRecord> snap = db.snapshot();
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < snap.size(); ++i) {
    const SecurityRecord& r = snap[i];
    if (r.full_checked) continue;  // already covered; the result would not change
    if (!std::isfinite(r.zeta_min_est) || r.zeta_min_est < cfg.gamma - cfg.mu) continue;
    targets.push_back(i);
  }

  FullCheckStats stats;
  stats.checked = std::int64_t(targets.size());
  std::vector<SecurityRecord> updated(targets.size());
  std::atomic<std::int64_t> evals{0};
  std::atomic<std::int64_t> relabeled{0};

  parallel_for(targets.size(), workers, [&](std::size_t t) {
    SecurityRecord rec = snap[targets[t]];
    const Label before = rec.label;

    double zmin = std::numeric_limits<double>::infinity();
    bool any_valid = false;
    bool all_ok = true;
    // Severity order: unusable entries first, then ascending damping, then
    // entry index so exact ties stay deterministic.
    std::vector<std::pair<std::pair<int, double>, int>> severity;

    for (int e = 0; e < set.size(); ++e) {
      const FeasibilityResult fr = check_feasibility(net, set[e], rec.dispatch, cfg.pf);
      const DampingEval de = minimum_damping(net, set[e], rec.dispatch, cfg.dynamics, cfg.pf);
      evals.fetch_add(1, std::memory_order_relaxed);
      const bool ok = fr.feasible && de.valid;
      if (!ok) all_ok = false;
      if (de.valid) {
        any_valid = true;
        zmin = std::min(zmin, de.zeta_min);
      }
      if (!set[e].is_intact())
        severity.push_back({{ok ? 1 : 0, de.valid ? de.zeta_min : 0.0}, e});
    }
    std::sort(severity.begin(), severity.end());

    rec.zeta_min_full = any_valid ? zmin : kNan;
    rec.feasible_n1 = all_ok;
    rec.full_checked = true;
    rec.critical_pair.clear();
    for (std::size_t s = 0; s < severity.size() && s < 2; ++s)
      rec.critical_pair.push_back(severity[s].second);
    classify(rec, cfg.gamma, cfg.mu);
    if (rec.label != before) relabeled.fetch_add(1, std::memory_order_relaxed);
    updated[t] = std::move(rec);
  });

  for (const SecurityRecord& rec : updated) db.replace(rec);
  stats.stability_evals = evals.load();
  stats.relabeled = relabeled.load();
  return stats;
}

NkResult extend_nk(const Database& checked_db, const NetworkCase& net,
                   const ContingencySet& n1_set, const WalkConfig& cfg,
                   const SamplePlan& plan, const ContingencySet* final_check,
                   int workers) {
  if (!cfg.resolved) throw Error("deepening: resolve the walk config first");
  NkResult res;

  // Seed selection: secure in-band records thinned so no two seeds lie
  // closer than the thinning radius (greedy, grid-key order).
  res.stages.push_back("nk-seed-thinning");
  std::vector<SecurityRecord> seeds_rec;
  for (const SecurityRecord& r : checked_db.snapshot()) {
    if (!(r.hic && r.label == Label::Secure)) continue;
    bool keep = true;
    for (const SecurityRecord& kept : seeds_rec) {
      if ((kept.dispatch - r.dispatch).norm() < cfg.nk_radius_mw) {
        keep = false;
        break;
      }
    }
    if (keep) seeds_rec.push_back(r);
  }

  // The walk outage of each seed: its two most severe contingencies applied
  // at once. Distinct combinations also make up the default final-check set.
  ContingencySet walks_set;
  walks_set.entries.push_back(Outage{});
  std::map<std::vector<int>, int> combo_entry;
  struct SeedPlan {
    DispatchPoint start;
    int entry = -1;
    Outage combo;
  };
  std::vector<SeedPlan> plans;

  for (const SecurityRecord& r : seeds_rec) {
    if (r.critical_pair.size() < 2) {
      res.warnings.push_back("seed skipped: record carries fewer than two ranked outages");
      continue;
    }
    std::vector<int> branches;
    bool in_range = true;
    for (int e : r.critical_pair) {
      if (e < 0 || e >= n1_set.size()) {
        in_range = false;
        break;
      }
      for (int b : n1_set[e].branches_out) branches.push_back(b);
    }
    if (!in_range || branches.empty()) {
      res.warnings.push_back("seed skipped: ranked outages do not match the contingency set");
      continue;
    }
    std::sort(branches.begin(), branches.end());
    branches.erase(std::unique(branches.begin(), branches.end()), branches.end());
    if (!net.connected_without(branches)) {
      res.warnings.push_back("seed skipped: its combined outage would island the grid");
      continue;
    }
    SeedPlan sp;
    sp.start = r.dispatch;
    sp.combo = Outage{branches};
    const auto it = combo_entry.find(branches);
    if (it != combo_entry.end()) {
      sp.entry = it->second;
    } else {
      sp.entry = walks_set.size();
      walks_set.entries.push_back(sp.combo);
      combo_entry.emplace(branches, sp.entry);
    }
    plans.push_back(std::move(sp));
    res.seeds.push_back(r.dispatch);
  }

  if (plans.empty()) {
    res.warnings.push_back("nothing to deepen: no secure in-band point with a usable pair");
    res.check_set = walks_set;
    return res;
  }

  // Deepening walks: each one scores dispatches against its seed's combined
  // outage only (pinned), isolated within the round and merged in seed order.
  res.stages.push_back("nk-walks");
  WalkConfig nk_cfg = cfg;
  nk_cfg.kappa_max = cfg.nk_kappa_max;
  std::vector<WalkOutcome> outcomes(plans.size());
  std::atomic<std::int64_t> walk_evals{0};
  parallel_for(plans.size(), workers, [&](std::size_t i) {
    ContingencySet ws;
    ws.entries.push_back(Outage{});
    ws.entries.push_back(plans[i].combo);
    SystemOracle oracle(net, ws, nk_cfg);
    oracle.pin_entry(1);
    WalkOutcome oc = directed_walk(plans[i].start, oracle, nk_cfg, plan, res.fragment, int(i));
    // Contingency ids switch from the walk's private two-entry set to the
    // shared deepened set; stages gain the deepening prefix.
    for (SecurityRecord& rec : oc.records) {
      if (rec.crit_cont == 1) rec.crit_cont = plans[i].entry;
      rec.stage = (rec.stage == "walk") ? "nk-walk" : "nk-surrounding";
    }
    for (WalkStep& stp : oc.trace.steps)
      if (stp.crit == 1) stp.crit = plans[i].entry;
    walk_evals.fetch_add(oracle.stability_evals(), std::memory_order_relaxed);
    outcomes[i] = std::move(oc);
  });
  for (WalkOutcome& oc : outcomes) {
    for (const SecurityRecord& rec : oc.records) res.fragment.upsert(rec);
    res.traces.push_back(std::move(oc.trace));
  }

  // Final check against the configured set (default: the outages the walks
  // actually used). Candidate-secure records get the full treatment; the
  // rest keep their insecure labels.
  res.stages.push_back("nk-full-check");
  res.check_set = (final_check != nullptr) ? *final_check : walks_set;
  const FullCheckStats fc = full_contingency_check(res.fragment, net, res.check_set, nk_cfg, workers);
  res.stability_evals = walk_evals.load() + fc.stability_evals;
  return res;
}

void export_traces_jsonl(const std::vector<WalkTrace>& traces, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open trace export file: " + path);
  const auto vec = [](const Eigen::VectorXd& v) {
    std::vector<double> a(v.data(), v.data() + v.size());
    return a;
  };
  for (const WalkTrace& tr : traces) {
    if (tr.steps.empty()) {
      nlohmann::json j;
      j["walk"] = tr.walk_id;
      j["reseeded"] = tr.reseeded;
      j["final"] = vec(tr.final_point);
      j["reason"] = to_string(tr.reason);
      out << j.dump() << "\n";
      continue;
    }
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      const WalkStep& st = tr.steps[k];
      nlohmann::json j;
      j["walk"] = tr.walk_id;
      j["reseeded"] = tr.reseeded;
      j["step"] = k;
      j["dispatch"] = vec(st.dispatch);
      j["crit"] = st.crit;
      j["valid"] = st.valid;
      j["zeta"] = st.zeta;
      j["distance"] = st.distance;
      j["in_band"] = st.in_band;
      j["surrounding"] = st.surrounding;
      if (st.alpha.size() > 0) j["alpha"] = vec(st.alpha);
      if (st.delta.size() > 0) j["delta"] = vec(st.delta);
      if (k + 1 == tr.steps.size()) {
        j["reason"] = to_string(tr.reason);
        j["final"] = vec(tr.final_point);
      }
      out << j.dump() << "\n";
    }
  }
  if (!out.good()) throw Error("trace export failed while writing: " + path);
}

}  // namespace secdb
