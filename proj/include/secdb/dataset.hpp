#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/netmodel.hpp"
#include "secdb/sampler.hpp"

namespace secdb {

using GridKey = std::vector<std::int64_t>;

// Integer grid coordinates of a dispatch on the alpha_mw lattice anchored at
// the box lower corner.
GridKey grid_key(const DispatchPoint& dispatch_mw, const Eigen::VectorXd& lo_mw,
                 double alpha_mw);
DispatchPoint dispatch_from_key(const GridKey& key, const Eigen::VectorXd& lo_mw,
                                double alpha_mw);

enum class Label { Secure, Insecure };

struct SecurityRecord {
  GridKey key;
  DispatchPoint dispatch;            // MW
  double zeta_min_est = std::numeric_limits<double>::quiet_NaN();
  double zeta_min_full = std::numeric_limits<double>::quiet_NaN();
  int crit_cont = -1;                // contingency index used for the estimate
  bool feasible_n1 = false;          // all checked outages steady-state feasible
  bool full_checked = false;         // zeta_min_full/feasible_n1 cover the whole set
  Label label = Label::Insecure;
  bool hic = false;
  std::string stage;                 // provenance: eta1/eta2/eta3/walk/surrounding/...
  int walk_id = -1;
  std::vector<int> critical_pair;    // two most severe outages from the full check

  // The stability value classification looks at: the full-set minimum when
  // checked, otherwise the single-contingency estimate.
  double zeta_for_class() const { return full_checked ? zeta_min_full : zeta_min_est; }
};

// Applies the open-interval boundary-band rule and the label policy: a record
// is HIC when gamma - mu < zeta < gamma + mu, and secure only when a completed
// full check found every outage feasible with zeta >= gamma.
void classify(SecurityRecord& rec, double gamma, double mu);

struct DatabaseSummary {
  std::int64_t records = 0;
  std::int64_t secure = 0;
  std::int64_t insecure = 0;
  std::int64_t hic_unique = 0;      // |Omega|
  double psi = 0.0;                 // search-space cardinality |Psi|
  std::map<std::string, double> stage_seconds;
};

// Helper shared with reporting: |Psi| = profiles * prod((span_d / alpha) + 1).
double search_space_cardinality(const SamplePlan& plan, int n_profiles = 1);

class Database {
public:
  Database() = default;
  // Movable for factory-style construction; never move a store other threads
  // are still writing to.
  Database(Database&& other) noexcept : records_(std::move(other.records_)) {}
  Database& operator=(Database&& other) noexcept {
    records_ = std::move(other.records_);
    return *this;
  }

  enum class UpsertOutcome { Inserted, Duplicate };

  // First writer wins; concurrent calls are safe.
  UpsertOutcome upsert(const SecurityRecord& rec);

  // Unconditional write: overwrites the record at rec.key, inserting when
  // absent. For stages that refine already-stored records.
  void replace(const SecurityRecord& rec);

  bool contains(const GridKey& key) const;
  const SecurityRecord* find(const GridKey& key) const;  // nullptr when absent
  std::int64_t size() const;
  std::vector<SecurityRecord> snapshot() const;          // key-ascending order

  void export_csv(const std::string& path) const;
  void export_jsonl(const std::string& path) const;
  static Database import_csv(const std::string& path);
  static Database import_jsonl(const std::string& path);

  DatabaseSummary summarize(const SamplePlan& plan, int n_profiles = 1) const;

  static const std::vector<std::string>& csv_columns_fixed_part();

private:
  mutable std::mutex mu_;
  std::map<GridKey, SecurityRecord> records_;
};

}  // namespace secdb
