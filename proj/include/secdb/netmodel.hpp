#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secdb/util.hpp"

namespace secdb {

enum class BusType { Slack, PV, PQ };

struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
  double v_min = 0.94;  // p.u.
  double v_max = 1.06;  // p.u.
  double p_load = 0.0;  // p.u. on system base
  double q_load = 0.0;  // p.u.
};

struct Branch {
  int from = 0;  // bus ids as given in the case file
  int to = 0;
  double resistance = 0.0;  // p.u. series
  double reactance = 0.0;   // p.u. series
  double charging = 0.0;    // p.u. total line charging susceptance
  double capacity_mw = 0.0; // 0 = unrated
  bool outage_allowed = true;
};

// Machine representation used by the small-signal model:
//  - Detailed: sixth-order machine + AVR + measurement delay (+ optional PSS)
//  - Classical: constant EMF behind the transient reactance, rotor states only
//  - InfiniteBus: an ideal source; its bus voltage and angle are frozen
enum class MachineModel { Detailed, Classical, InfiniteBus };

// Sixth-order machine + IEEE-Type-I-style AVR + measurement delay + optional
// single-state washout PSS. The exact equation set lives in docs/model.md.
struct MachineParams {
  std::string name;
  MachineModel model = MachineModel::Detailed;
  double h = 5.0;       // inertia constant, s (system base)
  double damping = 1.0; // rotor damping factor
  double ra = 0.0;      // stator resistance
  double xl = 0.1;      // leakage reactance
  double xd = 1.8, xq = 1.7;
  double xd_p = 0.3, xq_p = 0.55;
  double xd_pp = 0.2, xq_pp = 0.2;
  double td0_p = 8.0, tq0_p = 0.4;
  double td0_pp = 0.03, tq0_pp = 0.05;
  // AVR (3 states) + voltage measurement delay (1 state)
  double ka = 50.0, ta = 0.05;
  double ke = 1.0, te = 0.5;
  double kf = 0.05, tf = 1.0;
  double tr = 0.02;
  // optional PSS (1 state)
  bool has_pss = false;
  double ks = 0.0, tw = 10.0;

  int state_count() const {
    switch (model) {
      case MachineModel::Classical: return 2;
      case MachineModel::InfiniteBus: return 0;
      case MachineModel::Detailed: break;
    }
    return has_pss ? 11 : 10;
  }
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;  // p.u.
  double q_min = 0.0, q_max = 0.0;  // p.u.
  double v_set = 1.0;               // regulated voltage magnitude, p.u.
  MachineParams machine;
};

// Dispatch of the non-slack generators in MW, ordered as in
// NetworkCase::free_generators(). These are the walk-space coordinates.
using DispatchPoint = Eigen::VectorXd;

class NetworkCase {
public:
  double base_mva = 100.0;
  double freq_hz = 60.0;
  std::string name;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  // Checks every structural invariant; throws Error with a field-level
  // message on the first violation.
  void validate() const;

  int bus_count() const { return int(buses.size()); }
  int branch_count() const { return int(branches.size()); }
  int gen_count() const { return int(generators.size()); }

  int bus_index(int bus_id) const;  // throws on unknown id
  int slack_bus_index() const;
  int slack_gen_index() const;

  // Generator indices excluding the slack generator, in generator-list order.
  std::vector<int> free_generators() const;

  // Walk-space box bounds in MW over free generators.
  Eigen::VectorXd free_p_min_mw() const;
  Eigen::VectorXd free_p_max_mw() const;

  // True when removing `branches_out` leaves all buses connected.
  bool connected_without(const std::vector<int>& branches_out) const;

  int generator_at_bus(int bus_idx) const;  // -1 when none
};

// Outage descriptor: indices into NetworkCase::branches. Empty = intact.
struct Outage {
  std::vector<int> branches_out;
  bool is_intact() const { return branches_out.empty(); }
};

class ContingencySet {
public:
  // Entry 0 is always the intact system.
  std::vector<Outage> entries;

  int size() const { return int(entries.size()); }
  const Outage& operator[](int i) const { return entries.at(i); }

  // Appends an outage, rejecting islanding ones with Error.
  void add(const NetworkCase& net, Outage o);
};

enum class ContingencyPolicy { AllLines, ExclusionList };

// All single-line outages in ascending branch order, intact state prepended.
// Islanding outages and branches with outage_allowed=false are skipped.
ContingencySet list_contingencies(const NetworkCase& net, ContingencyPolicy policy,
                                  const std::vector<int>& excluded_branches = {});

// Complex bus admittance matrix for one outage plus the derived per-bus real
// matrices used by the semidefinite relaxation.
class AdmittanceView {
public:
  AdmittanceView(const NetworkCase& net, const Outage& outage);

  const Eigen::MatrixXcd& ybus() const { return ybus_; }
  int size() const { return int(ybus_.rows()); }

  // Real 2N x 2N matrix whose trace product with W = [e;f][e;f]^T gives the
  // active power injection at bus i.
  Eigen::MatrixXd p_injection_matrix(int bus_idx) const;
  // Same for reactive power injection.
  Eigen::MatrixXd q_injection_matrix(int bus_idx) const;
  // Trace product with W gives |V_i|^2.
  static Eigen::MatrixXd voltage_matrix(int bus_idx, int n_buses);

private:
  Eigen::MatrixXcd row_outer(int bus_idx) const;  // e_i e_i^T Y
  Eigen::MatrixXcd ybus_;
};

// Case file I/O. The schema is documented in docs/case_schema.json.
NetworkCase load_case(const std::string& json_text);
NetworkCase load_case_file(const std::string& path);
std::string save_case(const NetworkCase& net);

}  // namespace secdb
