#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/dataset.hpp"
#include "secdb/netmodel.hpp"
#include "secdb/powerflow.hpp"
#include "secdb/sampler.hpp"
#include "secdb/walker.hpp"

namespace secdb {

// ---------------------------------------------------------------------------
// Binary-classification scoring.
// ---------------------------------------------------------------------------

struct ConfusionCounts {
  std::int64_t tp = 0;  // predicted positive, actually positive
  std::int64_t tn = 0;  // predicted negative, actually negative
  std::int64_t fp = 0;  // predicted positive, actually negative
  std::int64_t fn = 0;  // predicted negative, actually positive
};

// Matthews correlation coefficient in [-1, 1]. Any zero factor in the
// denominator yields 0 by convention (no better than random).
double evaluate_mcc(const ConfusionCounts& counts);

// (tp + tn) / total; 0 when the counts are all zero.
double accuracy(const ConfusionCounts& counts);

// ---------------------------------------------------------------------------
// Axis-aligned binary decision tree with Gini-grown splits and
// cost-complexity pruning selected by k-fold cross-validation.
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0.0; // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  int label = 0;          // majority class at this node (0 or 1)
  std::int64_t n0 = 0;    // training samples of class 0 under this node
  std::int64_t n1 = 0;    // training samples of class 1 under this node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root when non-empty
  int n_features = 0;

  // Pruning metadata: the weakest-link alpha ladder of the fully grown tree,
  // the cross-validated complexity that was selected, and its CV error rate.
  std::vector<double> alphas;
  double alpha_selected = 0.0;
  double cv_error = 0.0;

  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  std::int64_t leaf_count() const;
  std::int64_t depth() const;
};

struct TrainOptions {
  int cv_folds = 10;          // k for the pruning cross-validation
  std::uint64_t seed = 1;     // fold assignment shuffle
  bool prune = true;          // false trains the fully grown tree only
  std::int64_t min_leaf = 1;  // minimum samples per leaf
  int workers = 1;            // folds may run in parallel (order-independent)
};

// Grows a binary CART on rows of X labeled y (0/1): greedy Gini splits with
// midpoint thresholds and no depth limit, then (by default) cost-complexity
// pruning at the alpha minimizing the k-fold cross-validated error, ties
// broken toward the larger alpha (smaller tree). Throws on an empty set.
DecisionTree train_tree(const Eigen::MatrixXd& X, const std::vector<int>& y,
                        const TrainOptions& opt = {});

// Nested-split JSON serialization; round-trips predictions exactly.
std::string tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const std::string& text);

struct EvalReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double mcc = 0.0;
  std::int64_t samples = 0;
};

// Scores the tree on labeled rows; class 1 is the positive class.
EvalReport evaluate_tree(const DecisionTree& tree, const Eigen::MatrixXd& X,
                         const std::vector<int>& y);
std::string report_to_json(const EvalReport& report);

// ---------------------------------------------------------------------------
// Features for the security classifier: intact-system line active/reactive
// flows at each stored dispatch, recomputed from the power-flow solution.
// ---------------------------------------------------------------------------

struct FeatureSet {
  Eigen::MatrixXd X;               // one row per kept record
  std::vector<int> labels;         // 1 = secure, 0 = insecure
  std::vector<std::size_t> kept;   // row -> index into the input records
  std::vector<std::string> names;  // column names, e.g. "p_from_3"
};

// Solves the intact power flow at each record's dispatch and emits per-branch
// from-end P and Q (MW / MVAr) as feature columns. Records whose power flow
// does not converge are skipped (their indices simply do not appear in kept).
FeatureSet extract_flow_features(const NetworkCase& net,
                                 const std::vector<SecurityRecord>& records,
                                 const PowerFlowOptions& pf = {});

// ---------------------------------------------------------------------------
// Importance-sampling comparison baseline (variance-reduction style): a
// documented, intentionally simple stand-in. One third of the budget seeds
// uniform lattice draws; the remainder draws from an independent per-
// dimension normal proposal refit in batches on the boundary-band hits seen
// so far (std floored at two lattice cells; with zero hits the proposal
// stays uniform). Every draw spends exactly one stability evaluation, then
// the fragment passes through the same whole-set relabeling as the main
// pipeline. Claims against this baseline are direction-only comparisons.
// ---------------------------------------------------------------------------

struct BaselineResult {
  Database db;
  std::int64_t point_evals = 0;  // sampling-phase evaluations (== budget)
  std::int64_t check_evals = 0;  // whole-set relabeling evaluations afterwards
  std::int64_t total_evals = 0;
  std::int64_t duplicates = 0;   // draws that landed on an already-stored key
  bool biased = false;           // proposal left uniform when no hits appeared
  Eigen::VectorXd proposal_mean; // last fitted proposal (empty when uniform)
  Eigen::VectorXd proposal_std;
};

BaselineResult importance_baseline(const NetworkCase& net, const ContingencySet& set,
                                   std::int64_t budget, std::uint64_t seed,
                                   const WalkConfig& cfg, const SamplePlan& plan);

}  // namespace secdb
