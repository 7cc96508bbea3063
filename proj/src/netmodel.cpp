#include "secdb/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace secdb {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// NetworkCase

int NetworkCase::bus_index(int bus_id) const {
  for (int i = 0; i < int(buses.size()); ++i)
    if (buses[i].id == bus_id) return i;
  throw Error("unknown bus id " + std::to_string(bus_id));
}

int NetworkCase::slack_bus_index() const {
  for (int i = 0; i < int(buses.size()); ++i)
    if (buses[i].type == BusType::Slack) return i;
  throw Error("case has no slack bus");
}

int NetworkCase::slack_gen_index() const {
  const int sb = slack_bus_index();
  for (int g = 0; g < int(generators.size()); ++g)
    if (bus_index(generators[g].bus) == sb) return g;
  throw Error("no generator at the slack bus");
}

std::vector<int> NetworkCase::free_generators() const {
  const int slack = slack_gen_index();
  std::vector<int> out;
  for (int g = 0; g < int(generators.size()); ++g)
    if (g != slack) out.push_back(g);
  return out;
}

Eigen::VectorXd NetworkCase::free_p_min_mw() const {
  const auto free = free_generators();
  Eigen::VectorXd v(free.size());
  for (size_t i = 0; i < free.size(); ++i) v[i] = generators[free[i]].p_min * base_mva;
  return v;
}

Eigen::VectorXd NetworkCase::free_p_max_mw() const {
  const auto free = free_generators();
  Eigen::VectorXd v(free.size());
  for (size_t i = 0; i < free.size(); ++i) v[i] = generators[free[i]].p_max * base_mva;
  return v;
}

int NetworkCase::generator_at_bus(int bus_idx) const {
  for (int g = 0; g < int(generators.size()); ++g)
    if (bus_index(generators[g].bus) == bus_idx) return g;
  return -1;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

bool NetworkCase::connected_without(const std::vector<int>& branches_out) const {
  const int n = bus_count();
  if (n == 0) return true;
  UnionFind uf(n);
  for (int b = 0; b < branch_count(); ++b) {
    if (std::find(branches_out.begin(), branches_out.end(), b) != branches_out.end())
      continue;
    uf.unite(bus_index(branches[b].from), bus_index(branches[b].to));
  }
  const int root = uf.find(0);
  for (int i = 1; i < n; ++i)
    if (uf.find(i) != root) return false;
  return true;
}

void NetworkCase::validate() const {
  if (base_mva <= 0) throw Error("base_mva must be positive");
  if (freq_hz <= 0) throw Error("freq_hz must be positive");
  if (buses.empty()) throw Error("case has no buses");

  int slack_count = 0;
  for (const auto& b : buses) {
    if (b.type == BusType::Slack) ++slack_count;
    if (!(b.v_min > 0)) throw Error("bus " + std::to_string(b.id) + ": v_min must be positive");
    if (b.v_min > b.v_max)
      throw Error("bus " + std::to_string(b.id) + ": v_min exceeds v_max");
  }
  if (slack_count != 1)
    throw Error("case must have exactly one slack bus, found " + std::to_string(slack_count));

  for (size_t i = 0; i < buses.size(); ++i)
    for (size_t j = i + 1; j < buses.size(); ++j)
      if (buses[i].id == buses[j].id)
        throw Error("duplicate bus id " + std::to_string(buses[i].id));

  for (int b = 0; b < branch_count(); ++b) {
    const auto& br = branches[b];
    bus_index(br.from);
    bus_index(br.to);
    if (br.from == br.to)
      throw Error("branch " + std::to_string(b) + ": self-loop at bus " + std::to_string(br.from));
    if (br.resistance == 0.0 && br.reactance == 0.0)
      throw Error("branch " + std::to_string(b) + ": zero series impedance");
    if (br.capacity_mw < 0)
      throw Error("branch " + std::to_string(b) + ": negative capacity");
  }

  bool slack_has_gen = false;
  const int slack_bus = slack_bus_index();
  std::vector<int> gen_buses;
  for (size_t g = 0; g < generators.size(); ++g) {
    const auto& gen = generators[g];
    const int bi = bus_index(gen.bus);
    if (std::find(gen_buses.begin(), gen_buses.end(), bi) != gen_buses.end())
      throw Error("multiple generators at bus " + std::to_string(gen.bus));
    gen_buses.push_back(bi);
    if (bi == slack_bus) slack_has_gen = true;
    if (buses[bi].type == BusType::PQ)
      throw Error("generator at PQ bus " + std::to_string(gen.bus));
    if (gen.p_min > gen.p_max)
      throw Error("generator at bus " + std::to_string(gen.bus) + ": p_min exceeds p_max");
    if (gen.q_min > gen.q_max)
      throw Error("generator at bus " + std::to_string(gen.bus) + ": q_min exceeds q_max");
    if (gen.v_set <= 0)
      throw Error("generator at bus " + std::to_string(gen.bus) + ": v_set must be positive");
    const auto& m = gen.machine;
    if (m.model == MachineModel::InfiniteBus) continue;
    if (m.h <= 0) throw Error("machine at bus " + std::to_string(gen.bus) + ": h must be positive");
    if (m.model == MachineModel::Classical) {
      if (m.xd_p <= 0)
        throw Error("machine at bus " + std::to_string(gen.bus) + ": xd_p must be positive");
      if (m.has_pss)
        throw Error("machine at bus " + std::to_string(gen.bus) +
                    ": a stabilizer requires the detailed model");
      continue;
    }
    for (double t : {m.td0_p, m.tq0_p, m.td0_pp, m.tq0_pp, m.ta, m.te, m.tf, m.tr})
      if (t <= 0)
        throw Error("machine at bus " + std::to_string(gen.bus) + ": time constants must be positive");
    if (m.has_pss && m.tw <= 0)
      throw Error("machine at bus " + std::to_string(gen.bus) + ": tw must be positive");
    // The transient ladder must be strictly ordered for the flux model.
    if (!(m.xd > m.xd_p && m.xd_p > m.xd_pp && m.xd_pp > m.xl))
      throw Error("machine at bus " + std::to_string(gen.bus) +
                  ": reactances must satisfy xd > xd' > xd'' > xl");
    if (!(m.xq > m.xq_p && m.xq_p > m.xq_pp && m.xq_pp > m.xl))
      throw Error("machine at bus " + std::to_string(gen.bus) +
                  ": reactances must satisfy xq > xq' > xq'' > xl");
  }
  for (const auto& b : buses) {
    if (b.type == BusType::PQ) continue;
    bool has_gen = false;
    for (const auto& g : generators)
      if (bus_index(g.bus) == bus_index(b.id)) has_gen = true;
    if (!has_gen)
      throw Error("bus " + std::to_string(b.id) + " is PV/slack but has no generator");
  }
  if (!slack_has_gen) throw Error("no generator at the slack bus");

  if (!connected_without({})) throw Error("network is not connected");
}

// ---------------------------------------------------------------------------
// Contingencies

void ContingencySet::add(const NetworkCase& net, Outage o) {
  if (!o.is_intact() && !net.connected_without(o.branches_out)) {
    std::string ids;
    for (int b : o.branches_out) ids += (ids.empty() ? "" : ",") + std::to_string(b);
    throw Error("outage {" + ids + "} islands the network");
  }
  entries.push_back(std::move(o));
}

ContingencySet list_contingencies(const NetworkCase& net, ContingencyPolicy policy,
                                  const std::vector<int>& excluded_branches) {
  ContingencySet set;
  set.entries.push_back(Outage{});  // intact
  for (int b = 0; b < net.branch_count(); ++b) {
    if (!net.branches[b].outage_allowed) continue;
    if (policy == ContingencyPolicy::ExclusionList &&
        std::find(excluded_branches.begin(), excluded_branches.end(), b) !=
            excluded_branches.end())
      continue;
    if (!net.connected_without({b})) continue;
    set.entries.push_back(Outage{{b}});
  }
  return set;
}

// ---------------------------------------------------------------------------
// AdmittanceView

AdmittanceView::AdmittanceView(const NetworkCase& net, const Outage& outage) {
  const int n = net.bus_count();
  ybus_ = Eigen::MatrixXcd::Zero(n, n);
  for (int b = 0; b < net.branch_count(); ++b) {
    if (std::find(outage.branches_out.begin(), outage.branches_out.end(), b) !=
        outage.branches_out.end())
      continue;
    const auto& br = net.branches[b];
    const int i = net.bus_index(br.from);
    const int j = net.bus_index(br.to);
    const std::complex<double> y = 1.0 / std::complex<double>(br.resistance, br.reactance);
    const std::complex<double> shunt(0.0, br.charging / 2.0);
    ybus_(i, i) += y + shunt;
    ybus_(j, j) += y + shunt;
    ybus_(i, j) -= y;
    ybus_(j, i) -= y;
  }
}

Eigen::MatrixXcd AdmittanceView::row_outer(int bus_idx) const {
  const int n = size();
  Eigen::MatrixXcd yi = Eigen::MatrixXcd::Zero(n, n);
  yi.row(bus_idx) = ybus_.row(bus_idx);
  return yi;
}

Eigen::MatrixXd AdmittanceView::p_injection_matrix(int bus_idx) const {
  const int n = size();
  const Eigen::MatrixXcd yi = row_outer(bus_idx);
  const Eigen::MatrixXd re_s = (yi + yi.transpose()).real();
  const Eigen::MatrixXd im_a = (yi.transpose() - yi).imag();
  Eigen::MatrixXd m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = re_s;
  m.topRightCorner(n, n) = im_a;
  m.bottomLeftCorner(n, n) = -im_a;
  m.bottomRightCorner(n, n) = re_s;
  return 0.5 * m;
}

Eigen::MatrixXd AdmittanceView::q_injection_matrix(int bus_idx) const {
  const int n = size();
  const Eigen::MatrixXcd yi = row_outer(bus_idx);
  const Eigen::MatrixXd im_s = (yi + yi.transpose()).imag();
  const Eigen::MatrixXd re_a = (yi - yi.transpose()).real();
  Eigen::MatrixXd m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = im_s;
  m.topRightCorner(n, n) = re_a;
  m.bottomLeftCorner(n, n) = -re_a;
  m.bottomRightCorner(n, n) = im_s;
  return -0.5 * m;
}

Eigen::MatrixXd AdmittanceView::voltage_matrix(int bus_idx, int n_buses) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n_buses, 2 * n_buses);
  m(bus_idx, bus_idx) = 1.0;
  m(n_buses + bus_idx, n_buses + bus_idx) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// JSON I/O

namespace {

double require_number(const json& j, const std::string& ctx, const std::string& key) {
  if (!j.contains(key)) throw Error(ctx + ": missing field '" + key + "'");
  if (!j[key].is_number()) throw Error(ctx + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

double optional_number(const json& j, const std::string& ctx, const std::string& key,
                       double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) throw Error(ctx + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

bool optional_bool(const json& j, const std::string& ctx, const std::string& key, bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_boolean()) throw Error(ctx + ": field '" + key + "' must be a boolean");
  return j[key].get<bool>();
}

BusType parse_bus_type(const std::string& s, const std::string& ctx) {
  if (s == "slack") return BusType::Slack;
  if (s == "pv") return BusType::PV;
  if (s == "pq") return BusType::PQ;
  throw Error(ctx + ": unknown bus type '" + s + "' (expected slack|pv|pq)");
}

std::string bus_type_name(BusType t) {
  switch (t) {
    case BusType::Slack: return "slack";
    case BusType::PV: return "pv";
    case BusType::PQ: return "pq";
  }
  return "pq";
}

MachineParams parse_machine(const json& j, const std::string& ctx) {
  MachineParams m;
  if (j.contains("name")) m.name = j["name"].get<std::string>();
  if (j.contains("model")) {
    const std::string kind = j["model"].get<std::string>();
    if (kind == "detailed") {
      m.model = MachineModel::Detailed;
    } else if (kind == "classical") {
      m.model = MachineModel::Classical;
    } else if (kind == "infinite") {
      m.model = MachineModel::InfiniteBus;
    } else {
      throw Error(ctx + ".model: unknown machine model '" + kind + "'");
    }
  }
  if (m.model == MachineModel::InfiniteBus) {
    m.h = optional_number(j, ctx, "h", m.h);
    return m;
  }
  if (m.model == MachineModel::Classical) {
    m.h = require_number(j, ctx, "h");
    m.damping = optional_number(j, ctx, "damping", m.damping);
    m.ra = optional_number(j, ctx, "ra", m.ra);
    m.xd_p = require_number(j, ctx, "xd_p");
    return m;
  }
  m.h = require_number(j, ctx, "h");
  m.damping = optional_number(j, ctx, "damping", m.damping);
  m.ra = optional_number(j, ctx, "ra", m.ra);
  m.xl = require_number(j, ctx, "xl");
  m.xd = require_number(j, ctx, "xd");
  m.xq = require_number(j, ctx, "xq");
  m.xd_p = require_number(j, ctx, "xd_p");
  m.xq_p = require_number(j, ctx, "xq_p");
  m.xd_pp = require_number(j, ctx, "xd_pp");
  m.xq_pp = require_number(j, ctx, "xq_pp");
  m.td0_p = require_number(j, ctx, "td0_p");
  m.tq0_p = require_number(j, ctx, "tq0_p");
  m.td0_pp = require_number(j, ctx, "td0_pp");
  m.tq0_pp = require_number(j, ctx, "tq0_pp");
  m.ka = optional_number(j, ctx, "ka", m.ka);
  m.ta = optional_number(j, ctx, "ta", m.ta);
  m.ke = optional_number(j, ctx, "ke", m.ke);
  m.te = optional_number(j, ctx, "te", m.te);
  m.kf = optional_number(j, ctx, "kf", m.kf);
  m.tf = optional_number(j, ctx, "tf", m.tf);
  m.tr = optional_number(j, ctx, "tr", m.tr);
  m.has_pss = optional_bool(j, ctx, "pss", false);
  if (m.has_pss) {
    m.ks = require_number(j, ctx, "ks");
    m.tw = optional_number(j, ctx, "tw", m.tw);
  }
  return m;
}

json machine_to_json(const MachineParams& m) {
  json j;
  if (!m.name.empty()) j["name"] = m.name;
  if (m.model == MachineModel::InfiniteBus) {
    j["model"] = "infinite";
    return j;
  }
  if (m.model == MachineModel::Classical) {
    j["model"] = "classical";
    j["h"] = m.h;
    j["damping"] = m.damping;
    j["ra"] = m.ra;
    j["xd_p"] = m.xd_p;
    return j;
  }
  j["h"] = m.h;
  j["damping"] = m.damping;
  j["ra"] = m.ra;
  j["xl"] = m.xl;
  j["xd"] = m.xd;
  j["xq"] = m.xq;
  j["xd_p"] = m.xd_p;
  j["xq_p"] = m.xq_p;
  j["xd_pp"] = m.xd_pp;
  j["xq_pp"] = m.xq_pp;
  j["td0_p"] = m.td0_p;
  j["tq0_p"] = m.tq0_p;
  j["td0_pp"] = m.td0_pp;
  j["tq0_pp"] = m.tq0_pp;
  j["ka"] = m.ka;
  j["ta"] = m.ta;
  j["ke"] = m.ke;
  j["te"] = m.te;
  j["kf"] = m.kf;
  j["tf"] = m.tf;
  j["tr"] = m.tr;
  if (m.has_pss) {
    j["pss"] = true;
    j["ks"] = m.ks;
    j["tw"] = m.tw;
  }
  return j;
}

}  // namespace

NetworkCase load_case(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("case file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("case file root must be an object");

  NetworkCase net;
  net.base_mva = optional_number(j, "case", "base_mva", 100.0);
  net.freq_hz = optional_number(j, "case", "freq_hz", 60.0);
  if (j.contains("name")) net.name = j["name"].get<std::string>();
  const bool per_unit = optional_bool(j, "case", "per_unit", true);
  const double p_scale = per_unit ? 1.0 : 1.0 / net.base_mva;

  if (!j.contains("buses") || !j["buses"].is_array())
    throw Error("case: missing 'buses' array");
  for (const auto& jb : j["buses"]) {
    const std::string ctx = "bus[" + std::to_string(net.buses.size()) + "]";
    Bus b;
    b.id = int(require_number(jb, ctx, "id"));
    if (!jb.contains("type")) throw Error(ctx + ": missing field 'type'");
    b.type = parse_bus_type(jb["type"].get<std::string>(), ctx);
    b.v_min = optional_number(jb, ctx, "v_min", b.v_min);
    b.v_max = optional_number(jb, ctx, "v_max", b.v_max);
    b.p_load = optional_number(jb, ctx, "p_load", 0.0) * p_scale;
    b.q_load = optional_number(jb, ctx, "q_load", 0.0) * p_scale;
    net.buses.push_back(b);
  }

  if (!j.contains("branches") || !j["branches"].is_array())
    throw Error("case: missing 'branches' array");
  for (const auto& jb : j["branches"]) {
    const std::string ctx = "branch[" + std::to_string(net.branches.size()) + "]";
    Branch br;
    br.from = int(require_number(jb, ctx, "from"));
    br.to = int(require_number(jb, ctx, "to"));
    br.resistance = optional_number(jb, ctx, "r", 0.0);
    br.reactance = require_number(jb, ctx, "x");
    br.charging = optional_number(jb, ctx, "b", 0.0);
    br.capacity_mw = optional_number(jb, ctx, "capacity_mw", 0.0);
    br.outage_allowed = optional_bool(jb, ctx, "outage_allowed", true);
    net.branches.push_back(br);
  }

  if (!j.contains("generators") || !j["generators"].is_array())
    throw Error("case: missing 'generators' array");
  for (const auto& jg : j["generators"]) {
    const std::string ctx = "generator[" + std::to_string(net.generators.size()) + "]";
    Generator g;
    g.bus = int(require_number(jg, ctx, "bus"));
    g.p_min = require_number(jg, ctx, "p_min") * p_scale;
    g.p_max = require_number(jg, ctx, "p_max") * p_scale;
    g.q_min = require_number(jg, ctx, "q_min") * p_scale;
    g.q_max = require_number(jg, ctx, "q_max") * p_scale;
    g.v_set = optional_number(jg, ctx, "v_set", 1.0);
    if (!jg.contains("machine")) throw Error(ctx + ": missing field 'machine'");
    g.machine = parse_machine(jg["machine"], ctx + ".machine");
    net.generators.push_back(g);
  }

  net.validate();
  return net;
}

NetworkCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open case file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str());
}

std::string save_case(const NetworkCase& net) {
  json j;
  j["name"] = net.name;
  j["base_mva"] = net.base_mva;
  j["freq_hz"] = net.freq_hz;
  j["per_unit"] = true;
  j["buses"] = json::array();
  for (const auto& b : net.buses) {
    json jb;
    jb["id"] = b.id;
    jb["type"] = bus_type_name(b.type);
    jb["v_min"] = b.v_min;
    jb["v_max"] = b.v_max;
    jb["p_load"] = b.p_load;
    jb["q_load"] = b.q_load;
    j["buses"].push_back(jb);
  }
  j["branches"] = json::array();
  for (const auto& br : net.branches) {
    json jb;
    jb["from"] = br.from;
    jb["to"] = br.to;
    jb["r"] = br.resistance;
    jb["x"] = br.reactance;
    jb["b"] = br.charging;
    jb["capacity_mw"] = br.capacity_mw;
    jb["outage_allowed"] = br.outage_allowed;
    j["branches"].push_back(jb);
  }
  j["generators"] = json::array();
  for (const auto& g : net.generators) {
    json jg;
    jg["bus"] = g.bus;
    jg["p_min"] = g.p_min;
    jg["p_max"] = g.p_max;
    jg["q_min"] = g.q_min;
    jg["q_max"] = g.q_max;
    jg["v_set"] = g.v_set;
    jg["machine"] = machine_to_json(g.machine);
    j["generators"].push_back(jg);
  }
  return j.dump(2) + "\n";
}

}  // namespace secdb
