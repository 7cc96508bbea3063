#include "secdb/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include <json.hpp>

#include "secdb/util.hpp"

namespace secdb {

// ---------------------------------------------------------------------------
// Scoring.
// ---------------------------------------------------------------------------

double evaluate_mcc(const ConfusionCounts& c) {
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0)
    throw Error("confusion counts must be non-negative");
  const double num = double(c.tp) * double(c.tn) - double(c.fp) * double(c.fn);
  const double f1 = double(c.tp + c.fp);
  const double f2 = double(c.tp + c.fn);
  const double f3 = double(c.tn + c.fp);
  const double f4 = double(c.tn + c.fn);
  const double den = f1 * f2 * f3 * f4;
  if (den <= 0.0) return 0.0;
  return num / std::sqrt(den);
}

double accuracy(const ConfusionCounts& c) {
  const std::int64_t total = c.tp + c.tn + c.fp + c.fn;
  if (total <= 0) return 0.0;
  return double(c.tp + c.tn) / double(total);
}

// ---------------------------------------------------------------------------
// Tree structure.
// ---------------------------------------------------------------------------

int DecisionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (nodes.empty()) throw Error("cannot predict with an empty tree");
  int id = 0;
  while (nodes[std::size_t(id)].feature >= 0) {
    const TreeNode& n = nodes[std::size_t(id)];
    if (n.feature >= x.size())
      throw Error("feature vector is shorter than the tree expects");
    id = (x[n.feature] <= n.threshold) ? n.left : n.right;
  }
  return nodes[std::size_t(id)].label;
}

std::int64_t DecisionTree::leaf_count() const {
  if (nodes.empty()) return 0;
  std::int64_t leaves = 0;
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const TreeNode& n = nodes[std::size_t(stack.back())];
    stack.pop_back();
    if (n.feature < 0) {
      ++leaves;
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return leaves;
}

std::int64_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::int64_t best = 0;
  std::vector<std::pair<int, std::int64_t>> stack = {{0, 1}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    const TreeNode& n = nodes[std::size_t(id)];
    if (n.feature < 0) {
      best = std::max(best, d);
    } else {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Growing. Recursive greedy Gini splitting on index spans; thresholds sit at
// midpoints between consecutive distinct values of the winning feature.
// ---------------------------------------------------------------------------

namespace {

double gini_impurity(std::int64_t n0, std::int64_t n1) {
  const double n = double(n0 + n1);
  if (n <= 0.0) return 0.0;
  const double p0 = double(n0) / n, p1 = double(n1) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct GrowContext {
  const Eigen::MatrixXd& X;
  const std::vector<int>& y;
  std::int64_t min_leaf;
  std::vector<TreeNode>* nodes;
};

int grow_node(GrowContext& ctx, std::vector<int>& idx, int lo, int hi) {
  std::int64_t n0 = 0, n1 = 0;
  for (int k = lo; k < hi; ++k) (ctx.y[std::size_t(idx[std::size_t(k)])] == 0 ? n0 : n1)++;

  const int id = int(ctx.nodes->size());
  ctx.nodes->push_back(TreeNode{});
  {
    TreeNode& node = ctx.nodes->back();
    node.n0 = n0;
    node.n1 = n1;
    node.label = (n1 > n0) ? 1 : 0;
  }

  const std::int64_t n = n0 + n1;
  const double imp_parent = gini_impurity(n0, n1);
  if (n0 == 0 || n1 == 0 || n < 2 * ctx.min_leaf || ctx.X.cols() == 0) return id;

  // Best split over all features: maximize the weighted impurity decrease.
  double best_gain = 1e-12;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<int> order(idx.begin() + lo, idx.begin() + hi);
  for (int f = 0; f < ctx.X.cols(); ++f) {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double va = ctx.X(a, f), vb = ctx.X(b, f);
      if (va != vb) return va < vb;
      return a < b;
    });
    std::int64_t l0 = 0, l1 = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      (ctx.y[std::size_t(order[k])] == 0 ? l0 : l1)++;
      const double v = ctx.X(order[k], f), vnext = ctx.X(order[k + 1], f);
      if (v == vnext) continue;
      const std::int64_t nl = l0 + l1, nr = n - nl;
      if (nl < ctx.min_leaf || nr < ctx.min_leaf) continue;
      const double gain = imp_parent -
                          (double(nl) / double(n)) * gini_impurity(l0, l1) -
                          (double(nr) / double(n)) * gini_impurity(n0 - l0, n1 - l1);
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
        best_threshold = v + 0.5 * (vnext - v);
      }
    }
  }
  if (best_feature < 0) return id;

  const auto mid = std::stable_partition(
      idx.begin() + lo, idx.begin() + hi,
      [&](int r) { return ctx.X(r, best_feature) <= best_threshold; });
  const int split = int(mid - idx.begin());
  if (split == lo || split == hi) return id;  // numerically degenerate split

  const int left = grow_node(ctx, idx, lo, split);
  const int right = grow_node(ctx, idx, split, hi);
  TreeNode& node = (*ctx.nodes)[std::size_t(id)];
  node.feature = best_feature;
  node.threshold = best_threshold;
  node.left = left;
  node.right = right;
  return id;
}

DecisionTree grow_tree(const Eigen::MatrixXd& X, const std::vector<int>& y,
                       const std::vector<int>& rows, std::int64_t min_leaf) {
  DecisionTree tree;
  tree.n_features = int(X.cols());
  std::vector<int> idx = rows;
  GrowContext ctx{X, y, min_leaf, &tree.nodes};
  grow_node(ctx, idx, 0, int(idx.size()));
  return tree;
}

// ---------------------------------------------------------------------------
// Weakest-link cost-complexity machinery. Complexities are measured as
// misclassification counts over the training size, so alpha carries the usual
// "error rate per leaf" scale.
// ---------------------------------------------------------------------------

struct LinkStats {
  std::int64_t miss_here = 0;  // errors if the node were a leaf
  std::int64_t miss_sub = 0;   // errors of the current subtree
  std::int64_t leaves = 0;
};

void link_stats(const std::vector<TreeNode>& nodes, int id, std::vector<LinkStats>& st) {
  const TreeNode& n = nodes[std::size_t(id)];
  LinkStats& s = st[std::size_t(id)];
  s.miss_here = std::min(n.n0, n.n1);
  if (n.feature < 0) {
    s.miss_sub = s.miss_here;
    s.leaves = 1;
    return;
  }
  link_stats(nodes, n.left, st);
  link_stats(nodes, n.right, st);
  s.miss_sub = st[std::size_t(n.left)].miss_sub + st[std::size_t(n.right)].miss_sub;
  s.leaves = st[std::size_t(n.left)].leaves + st[std::size_t(n.right)].leaves;
}

// The weakest link of the reachable tree: the internal node whose collapse
// costs the least error increase per removed leaf. Returns -1 for a leaf-only
// tree, otherwise the node id (ties go to the lowest id); g receives the link
// value.
int weakest_link(const std::vector<TreeNode>& nodes, double n_total, double* g) {
  std::vector<LinkStats> st(nodes.size());
  link_stats(nodes, 0, st);
  int best = -1;
  double best_g = std::numeric_limits<double>::infinity();
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const TreeNode& n = nodes[std::size_t(id)];
    if (n.feature < 0) continue;
    const LinkStats& s = st[std::size_t(id)];
    const double gt = double(s.miss_here - s.miss_sub) / (n_total * double(s.leaves - 1));
    if (gt < best_g - 1e-15 || (std::abs(gt - best_g) <= 1e-15 && id < best)) {
      best_g = gt;
      best = id;
    }
    stack.push_back(n.left);
    stack.push_back(n.right);
  }
  if (g != nullptr) *g = best_g;
  return best;
}

void collapse(std::vector<TreeNode>& nodes, int id) {
  TreeNode& n = nodes[std::size_t(id)];
  n.feature = -1;
  n.left = n.right = -1;
  n.label = (n.n1 > n.n0) ? 1 : 0;
}

// Prunes every link with g <= alpha (repeatedly, weakest first).
void prune_at(std::vector<TreeNode>& nodes, double n_total, double alpha) {
  for (;;) {
    double g = 0.0;
    const int id = weakest_link(nodes, n_total, &g);
    if (id < 0 || g > alpha + 1e-15) return;
    collapse(nodes, id);
  }
}

// The increasing complexity ladder of a fully grown tree: the g values at
// which successive weakest links fold, ending when the root folds.
std::vector<double> alpha_ladder(std::vector<TreeNode> nodes, double n_total) {
  std::vector<double> alphas = {0.0};
  for (;;) {
    double g = 0.0;
    const int id = weakest_link(nodes, n_total, &g);
    if (id < 0) break;
    alphas.push_back(std::max(g, alphas.back()));
    // fold every link at this g before looking again
    collapse(nodes, id);
    for (;;) {
      double g2 = 0.0;
      const int id2 = weakest_link(nodes, n_total, &g2);
      if (id2 < 0 || g2 > g + 1e-15) break;
      collapse(nodes, id2);
    }
  }
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  return alphas;
}

// Drops unreachable nodes after pruning, keeping node 0 as the root.
void compact(DecisionTree& tree) {
  if (tree.nodes.empty()) return;
  std::vector<int> new_id(tree.nodes.size(), -1);
  std::vector<int> order;  // reachable nodes in preorder
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    new_id[std::size_t(id)] = int(order.size());
    order.push_back(id);
    const TreeNode& n = tree.nodes[std::size_t(id)];
    if (n.feature >= 0) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  std::vector<TreeNode> out;
  out.reserve(order.size());
  for (int id : order) {
    TreeNode n = tree.nodes[std::size_t(id)];
    if (n.feature >= 0) {
      n.left = new_id[std::size_t(n.left)];
      n.right = new_id[std::size_t(n.right)];
    }
    out.push_back(n);
  }
  tree.nodes = std::move(out);
}

std::int64_t tree_errors(const DecisionTree& tree, const Eigen::MatrixXd& X,
                         const std::vector<int>& y, const std::vector<int>& rows) {
  std::int64_t errors = 0;
  for (int r : rows) errors += tree.predict(X.row(r)) != y[std::size_t(r)];
  return errors;
}

}  // namespace

DecisionTree train_tree(const Eigen::MatrixXd& X, const std::vector<int>& y,
                        const TrainOptions& opt) {
  if (X.rows() == 0) throw Error("training a tree needs at least one sample");
  if (std::size_t(X.rows()) != y.size())
    throw Error("feature rows and labels disagree in length");
  for (int label : y)
    if (label != 0 && label != 1) throw Error("labels must be 0 or 1");
  if (opt.min_leaf < 1) throw Error("min_leaf must be at least 1");

  const int n = int(X.rows());
  std::vector<int> all_rows(static_cast<std::size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), 0);

  DecisionTree tree = grow_tree(X, y, all_rows, opt.min_leaf);
  tree.alphas = alpha_ladder(tree.nodes, double(n));
  if (!opt.prune) return tree;

  // Candidate complexities: geometric means between successive ladder rungs,
  // then the top rung itself (the root-only tree).
  const std::vector<double>& ladder = tree.alphas;
  if (ladder.size() < 2) return tree;  // nothing to prune
  std::vector<double> candidates;
  for (std::size_t j = 0; j + 1 < ladder.size(); ++j)
    candidates.push_back(std::sqrt(ladder[j] * ladder[j + 1]));
  candidates.push_back(ladder.back());

  const int k = std::max(2, std::min(opt.cv_folds, n));
  if (n < 2) return tree;

  // Deterministic fold assignment from a seeded shuffle.
  std::vector<int> shuffled = all_rows;
  Rng rng = Rng::stream(opt.seed, 0xf01d5u);
  rng.shuffle(shuffled);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) fold_of[std::size_t(shuffled[std::size_t(i)])] = i % k;

  // Per-fold error per candidate; folds are independent and order-free.
  std::vector<std::vector<std::int64_t>> fold_errors(static_cast<std::size_t>(k));
  parallel_for(std::size_t(k), opt.workers, [&](std::size_t f) {
    std::vector<int> train_rows, val_rows;
    for (int i = 0; i < n; ++i)
      (fold_of[std::size_t(i)] == int(f) ? val_rows : train_rows).push_back(i);
    std::vector<std::int64_t>& errs = fold_errors[f];
    errs.assign(candidates.size(), 0);
    if (train_rows.empty() || val_rows.empty()) return;
    DecisionTree ft = grow_tree(X, y, train_rows, opt.min_leaf);
    const double nt = double(train_rows.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      prune_at(ft.nodes, nt, candidates[c]);  // candidates ascend: prune in place
      errs[c] = tree_errors(ft, X, y, val_rows);
    }
  });

  std::vector<std::int64_t> total(candidates.size(), 0);
  for (const std::vector<std::int64_t>& errs : fold_errors)
    for (std::size_t c = 0; c < errs.size(); ++c) total[c] += errs[c];

  // Minimum cross-validated error; ties go to the larger complexity, i.e.
  // the smaller tree.
  std::size_t pick = 0;
  for (std::size_t c = 1; c < total.size(); ++c)
    if (total[c] <= total[pick]) pick = c;

  tree.alpha_selected = candidates[pick];
  tree.cv_error = double(total[pick]) / double(n);
  prune_at(tree.nodes, double(n), tree.alpha_selected);
  compact(tree);
  return tree;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

namespace {

nlohmann::json node_to_json(const DecisionTree& tree, int id) {
  const TreeNode& n = tree.nodes[std::size_t(id)];
  nlohmann::json j;
  j["n0"] = n.n0;
  j["n1"] = n.n1;
  if (n.feature < 0) {
    j["label"] = n.label;
  } else {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(tree, n.left);
    j["right"] = node_to_json(tree, n.right);
  }
  return j;
}

int node_from_json(const nlohmann::json& j, DecisionTree& tree) {
  const int id = int(tree.nodes.size());
  tree.nodes.push_back(TreeNode{});
  {
    TreeNode& n = tree.nodes.back();
    n.n0 = j.value("n0", std::int64_t(0));
    n.n1 = j.value("n1", std::int64_t(0));
  }
  if (j.contains("feature")) {
    const int feature = j.at("feature").get<int>();
    const double threshold = j.at("threshold").get<double>();
    if (!std::isfinite(threshold)) throw Error("tree threshold must be finite");
    const int left = node_from_json(j.at("left"), tree);
    const int right = node_from_json(j.at("right"), tree);
    TreeNode& n = tree.nodes[std::size_t(id)];
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    n.label = (n.n1 > n.n0) ? 1 : 0;
  } else {
    TreeNode& n = tree.nodes[std::size_t(id)];
    n.label = j.at("label").get<int>();
  }
  return id;
}

}  // namespace

std::string tree_to_json(const DecisionTree& tree) {
  nlohmann::json j;
  j["kind"] = "decision_tree";
  j["n_features"] = tree.n_features;
  j["alphas"] = tree.alphas;
  j["alpha_selected"] = tree.alpha_selected;
  j["cv_error"] = tree.cv_error;
  if (!tree.nodes.empty()) j["root"] = node_to_json(tree, 0);
  return j.dump(2);
}

DecisionTree tree_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DecisionTree tree;
  tree.n_features = j.value("n_features", 0);
  tree.alphas = j.value("alphas", std::vector<double>{});
  tree.alpha_selected = j.value("alpha_selected", 0.0);
  tree.cv_error = j.value("cv_error", 0.0);
  if (j.contains("root")) node_from_json(j.at("root"), tree);
  return tree;
}

EvalReport evaluate_tree(const DecisionTree& tree, const Eigen::MatrixXd& X,
                         const std::vector<int>& y) {
  if (std::size_t(X.rows()) != y.size())
    throw Error("feature rows and labels disagree in length");
  EvalReport report;
  report.samples = X.rows();
  for (int r = 0; r < X.rows(); ++r) {
    const int predicted = tree.predict(X.row(r));
    const int actual = y[std::size_t(r)];
    if (actual == 1)
      (predicted == 1 ? report.counts.tp : report.counts.fn)++;
    else
      (predicted == 0 ? report.counts.tn : report.counts.fp)++;
  }
  report.accuracy = accuracy(report.counts);
  report.mcc = evaluate_mcc(report.counts);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["samples"] = report.samples;
  j["accuracy"] = report.accuracy;
  j["mcc"] = report.mcc;
  j["tp"] = report.counts.tp;
  j["tn"] = report.counts.tn;
  j["fp"] = report.counts.fp;
  j["fn"] = report.counts.fn;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Features.
// ---------------------------------------------------------------------------

FeatureSet extract_flow_features(const NetworkCase& net,
                                 const std::vector<SecurityRecord>& records,
                                 const PowerFlowOptions& pf_opt) {
  FeatureSet fs;
  const int n_branch = int(net.branches.size());
  fs.names.reserve(std::size_t(2 * n_branch));
  for (int b = 0; b < n_branch; ++b) {
    fs.names.push_back("p_from_" + std::to_string(b));
    fs.names.push_back("q_from_" + std::to_string(b));
  }

  std::vector<Eigen::VectorXd> rows;
  const Outage intact;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const PowerFlowResult pf = solve_power_flow(net, intact, records[i].dispatch, pf_opt);
    if (!pf.converged) continue;
    const std::vector<BranchFlow> flows = branch_flows(net, intact, pf);
    Eigen::VectorXd row(2 * n_branch);
    for (int b = 0; b < n_branch; ++b) {
      row[2 * b] = flows[std::size_t(b)].p_from;
      row[2 * b + 1] = flows[std::size_t(b)].q_from;
    }
    rows.push_back(std::move(row));
    fs.labels.push_back(records[i].label == Label::Secure ? 1 : 0);
    fs.kept.push_back(i);
  }

  fs.X.resize(std::int64_t(rows.size()), 2 * n_branch);
  for (std::size_t r = 0; r < rows.size(); ++r) fs.X.row(std::int64_t(r)) = rows[r];
  return fs;
}

// ---------------------------------------------------------------------------
// Importance-sampling baseline.
// ---------------------------------------------------------------------------

namespace {

double normal_draw(Rng& rng, double mean, double std) {
  const double u1 = 1.0 - rng.next_double();  // (0, 1]
  const double u2 = rng.next_double();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  return mean + std * z;
}

}  // namespace

BaselineResult importance_baseline(const NetworkCase& net, const ContingencySet& set,
                                   std::int64_t budget, std::uint64_t seed,
                                   const WalkConfig& cfg_in, const SamplePlan& plan_in) {
  if (budget < 1) throw Error("baseline budget must be at least one evaluation");
  SamplePlan plan = plan_in;
  plan.validate();
  WalkConfig cfg = cfg_in;
  if (!cfg.resolved) cfg.resolve(net);

  const int dims = int(plan.lo_mw.size());
  const std::vector<std::int64_t> cards = plan.grid_cardinality();

  SystemOracle oracle(net, set, cfg);
  Rng rng = Rng::stream(seed, 0xba5e11e5ull);

  BaselineResult res;
  res.proposal_mean = Eigen::VectorXd::Zero(0);
  res.proposal_std = Eigen::VectorXd::Zero(0);

  const std::int64_t n_uniform = std::max<std::int64_t>(1, (budget + 2) / 3);
  const std::int64_t batch = std::max<std::int64_t>(1, budget / 10);
  std::vector<DispatchPoint> hits;  // boundary-band estimates seen so far

  Eigen::VectorXd mean(dims), std_dev(dims);
  auto refit = [&]() {
    if (hits.empty()) return;  // zero hits: the proposal stays uniform
    for (int i = 0; i < dims; ++i) {
      double m = 0.0;
      for (const DispatchPoint& h : hits) m += h[i];
      m /= double(hits.size());
      double var = 0.0;
      for (const DispatchPoint& h : hits) var += (h[i] - m) * (h[i] - m);
      var /= double(hits.size());
      mean[i] = m;
      std_dev[i] = std::max(std::sqrt(var), 2.0 * plan.alpha_mw);
    }
    res.biased = true;
    res.proposal_mean = mean;
    res.proposal_std = std_dev;
  };

  for (std::int64_t t = 0; t < budget; ++t) {
    if (t >= n_uniform && (t - n_uniform) % batch == 0) refit();

    GridKey key(static_cast<std::size_t>(dims));
    if (t < n_uniform || !res.biased) {
      for (int i = 0; i < dims; ++i)
        key[std::size_t(i)] = std::int64_t(rng.next_below(std::uint64_t(cards[std::size_t(i)])));
    } else {
      for (int i = 0; i < dims; ++i) {
        const double x = normal_draw(rng, mean[i], std_dev[i]);
        std::int64_t k = std::llround((x - plan.lo_mw[i]) / plan.alpha_mw);
        key[std::size_t(i)] = std::clamp<std::int64_t>(k, 0, cards[std::size_t(i)] - 1);
      }
    }

    const DispatchPoint x = dispatch_from_key(key, plan.lo_mw, plan.alpha_mw);
    const OracleEval ev = oracle.evaluate(x);

    SecurityRecord rec;
    rec.key = key;
    rec.dispatch = x;
    rec.zeta_min_est = ev.valid ? ev.zeta : std::numeric_limits<double>::quiet_NaN();
    rec.crit_cont = ev.crit;
    rec.stage = "baseline";
    classify(rec, cfg.gamma, cfg.mu);

    if (res.db.upsert(rec) == Database::UpsertOutcome::Duplicate) {
      ++res.duplicates;
    } else if (rec.hic) {
      hits.push_back(x);
    }
  }
  res.point_evals = oracle.stability_evals();

  // The fragment is labeled exactly like the main pipeline's output.
  const FullCheckStats fc = full_contingency_check(res.db, net, set, cfg, 1);
  res.check_evals = fc.stability_evals;
  res.total_evals = res.point_evals + res.check_evals;
  return res;
}

}  // namespace secdb
