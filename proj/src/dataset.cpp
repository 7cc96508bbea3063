#include "secdb/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace secdb {

using json = nlohmann::json;

GridKey grid_key(const DispatchPoint& dispatch_mw, const Eigen::VectorXd& lo_mw,
                 double alpha_mw) {
  if (dispatch_mw.size() != lo_mw.size())
    throw Error("dispatch and box dimensions differ");
  GridKey key(dispatch_mw.size());
  for (int d = 0; d < dispatch_mw.size(); ++d)
    key[d] = std::llround((dispatch_mw[d] - lo_mw[d]) / alpha_mw);
  return key;
}

DispatchPoint dispatch_from_key(const GridKey& key, const Eigen::VectorXd& lo_mw,
                                double alpha_mw) {
  DispatchPoint p(key.size());
  for (size_t d = 0; d < key.size(); ++d) p[int(d)] = lo_mw[int(d)] + double(key[d]) * alpha_mw;
  return p;
}

void classify(SecurityRecord& rec, double gamma, double mu) {
  const double zeta = rec.zeta_for_class();
  rec.hic = std::isfinite(zeta) && (gamma - mu < zeta) && (zeta < gamma + mu);
  const bool stable = std::isfinite(zeta) && zeta >= gamma;
  rec.label = (rec.full_checked && rec.feasible_n1 && stable) ? Label::Secure
                                                              : Label::Insecure;
}

double search_space_cardinality(const SamplePlan& plan, int n_profiles) {
  double psi = double(n_profiles);
  for (std::int64_t c : plan.grid_cardinality()) psi *= double(c);
  return psi;
}

Database::UpsertOutcome Database::upsert(const SecurityRecord& rec) {
  if (rec.key.empty()) throw Error("record has an empty grid key");
  std::lock_guard<std::mutex> lock(mu_);
  const auto [it, inserted] = records_.try_emplace(rec.key, rec);
  (void)it;
  return inserted ? UpsertOutcome::Inserted : UpsertOutcome::Duplicate;
}

void Database::replace(const SecurityRecord& rec) {
  if (rec.key.empty()) throw Error("record has an empty grid key");
  std::lock_guard<std::mutex> lock(mu_);
  records_[rec.key] = rec;
}

bool Database::contains(const GridKey& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.count(key) > 0;
}

const SecurityRecord* Database::find(const GridKey& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

std::int64_t Database::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return std::int64_t(records_.size());
}

std::vector<SecurityRecord> Database::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<SecurityRecord> out;
  out.reserve(records_.size());
  for (const auto& [key, rec] : records_) out.push_back(rec);
  return out;
}

const std::vector<std::string>& Database::csv_columns_fixed_part() {
  static const std::vector<std::string> cols = {
      "key",      "zeta_min_est", "zeta_min_full", "crit_cont",
      "feasible_n1", "label",     "hic",           "stage"};
  return cols;
}

namespace {

std::string key_to_string(const GridKey& key) {
  std::string s;
  for (size_t i = 0; i < key.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(key[i]);
  }
  return s;
}

GridKey key_from_string(const std::string& s) {
  GridKey key;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ';')) key.push_back(std::stoll(part));
  return key;
}

std::string zeta_to_string(double z) {
  return std::isfinite(z) ? format_double(z) : std::string();
}

double zeta_from_string(const std::string& s) {
  return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
}

}  // namespace

void Database::export_csv(const std::string& path) const {
  const std::vector<SecurityRecord> rows = snapshot();
  std::ofstream out(path);
  if (!out) throw Error("cannot write database file: " + path);

  const int dims = rows.empty() ? 0 : int(rows[0].dispatch.size());
  out << "key";
  for (int d = 0; d < dims; ++d) out << ",P_g" << (d + 1);
  out << ",zeta_min_est,zeta_min_full,crit_cont,feasible_n1,label,hic,stage\n";

  for (const auto& r : rows) {
    out << key_to_string(r.key);
    for (int d = 0; d < dims; ++d) out << ',' << format_double(r.dispatch[d]);
    out << ',' << zeta_to_string(r.zeta_min_est);
    out << ',' << zeta_to_string(r.zeta_min_full);
    out << ',' << r.crit_cont;
    out << ',' << (r.feasible_n1 ? "true" : "false");
    out << ',' << (r.label == Label::Secure ? "secure" : "insecure");
    out << ',' << (r.hic ? "true" : "false");
    out << ',' << r.stage << '\n';
  }
}

Database Database::import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open database file: " + path);
  Database db;
  std::string line;
  if (!std::getline(in, line)) return db;  // empty file: empty database

  // Column layout is fixed; the dispatch width comes from the header.
  int dims = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ','))
      if (col.rfind("P_g", 0) == 0) ++dims;
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (int(cells.size()) < dims + 8) cells.push_back("");  // trailing empties
    if (int(cells.size()) != dims + 8)
      throw Error("malformed database row: " + line);

    SecurityRecord r;
    r.key = key_from_string(cells[0]);
    r.dispatch.resize(dims);
    for (int d = 0; d < dims; ++d) r.dispatch[d] = std::stod(cells[1 + d]);
    r.zeta_min_est = zeta_from_string(cells[dims + 1]);
    r.zeta_min_full = zeta_from_string(cells[dims + 2]);
    r.crit_cont = std::stoi(cells[dims + 3]);
    r.feasible_n1 = cells[dims + 4] == "true";
    r.label = cells[dims + 5] == "secure" ? Label::Secure : Label::Insecure;
    r.hic = cells[dims + 6] == "true";
    r.stage = cells[dims + 7];
    r.full_checked = std::isfinite(r.zeta_min_full);
    db.upsert(r);
  }
  return db;
}

void Database::export_jsonl(const std::string& path) const {
  const std::vector<SecurityRecord> rows = snapshot();
  std::ofstream out(path);
  if (!out) throw Error("cannot write journal file: " + path);
  for (const auto& r : rows) {
    json j;
    j["key"] = r.key;
    std::vector<double> d(r.dispatch.data(), r.dispatch.data() + r.dispatch.size());
    j["dispatch_mw"] = d;
    if (std::isfinite(r.zeta_min_est)) j["zeta_min_est"] = r.zeta_min_est;
    if (std::isfinite(r.zeta_min_full)) j["zeta_min_full"] = r.zeta_min_full;
    j["crit_cont"] = r.crit_cont;
    j["feasible_n1"] = r.feasible_n1;
    j["full_checked"] = r.full_checked;
    j["label"] = r.label == Label::Secure ? "secure" : "insecure";
    j["hic"] = r.hic;
    j["stage"] = r.stage;
    if (r.walk_id >= 0) j["walk_id"] = r.walk_id;
    if (!r.critical_pair.empty()) j["critical_pair"] = r.critical_pair;
    out << j.dump() << '\n';
  }
}

Database Database::import_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open journal file: " + path);
  Database db;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(std::string("bad journal line: ") + e.what());
    }
    SecurityRecord r;
    r.key = j.at("key").get<GridKey>();
    const auto d = j.at("dispatch_mw").get<std::vector<double>>();
    r.dispatch.resize(d.size());
    for (size_t i = 0; i < d.size(); ++i) r.dispatch[int(i)] = d[i];
    if (j.contains("zeta_min_est")) r.zeta_min_est = j["zeta_min_est"].get<double>();
    if (j.contains("zeta_min_full")) r.zeta_min_full = j["zeta_min_full"].get<double>();
    r.crit_cont = j.value("crit_cont", -1);
    r.feasible_n1 = j.value("feasible_n1", false);
    r.full_checked = j.value("full_checked", false);
    r.label = j.value("label", std::string("insecure")) == "secure" ? Label::Secure
                                                                    : Label::Insecure;
    r.hic = j.value("hic", false);
    r.stage = j.value("stage", std::string());
    r.walk_id = j.value("walk_id", -1);
    if (j.contains("critical_pair"))
      r.critical_pair = j["critical_pair"].get<std::vector<int>>();
    db.upsert(r);
  }
  return db;
}

DatabaseSummary Database::summarize(const SamplePlan& plan, int n_profiles) const {
  DatabaseSummary s;
  const auto rows = snapshot();
  s.records = std::int64_t(rows.size());
  for (const auto& r : rows) {
    if (r.label == Label::Secure)
      ++s.secure;
    else
      ++s.insecure;
    if (r.hic) ++s.hic_unique;
  }
  s.psi = search_space_cardinality(plan, n_profiles);
  return s;
}

}  // namespace secdb
