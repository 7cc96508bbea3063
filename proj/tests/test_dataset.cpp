#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "secdb/dataset.hpp"
#include "secdb/util.hpp"

using namespace secdb;

namespace {

SecurityRecord make_record(std::vector<std::int64_t> key, double zeta_est,
                           const std::string& stage = "eta3") {
  SecurityRecord r;
  r.key = std::move(key);
  r.dispatch.resize(r.key.size());
  for (size_t d = 0; d < r.key.size(); ++d) r.dispatch[int(d)] = double(r.key[d]) * 2.5;
  r.zeta_min_est = zeta_est;
  r.crit_cont = 1;
  r.stage = stage;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("grid keys round-trip dispatches") {
  Eigen::VectorXd lo(3);
  lo << 0.0, 10.0, -5.0;
  DispatchPoint p(3);
  p << 7.5, 12.5, 0.0;
  const GridKey key = grid_key(p, lo, 2.5);
  CHECK(key == GridKey{3, 1, 2});
  const DispatchPoint back = dispatch_from_key(key, lo, 2.5);
  CHECK((back - p).norm() == 0.0);
}

TEST_CASE("classification follows the open boundary band") {
  const double gamma = 0.03, mu = 0.0025;

  SecurityRecord r = make_record({0}, 0.030);
  SUBCASE("value on the target is in-band; secure needs the full check") {
    classify(r, gamma, mu);
    CHECK(r.hic);
    CHECK(r.label == Label::Insecure);  // no full-check evidence yet
    r.full_checked = true;
    r.feasible_n1 = true;
    r.zeta_min_full = 0.030;
    classify(r, gamma, mu);
    CHECK(r.hic);
    CHECK(r.label == Label::Secure);
  }
  SUBCASE("band edges are excluded") {
    r.zeta_min_est = gamma + mu;
    classify(r, gamma, mu);
    CHECK_FALSE(r.hic);
    r.zeta_min_est = gamma - mu;
    classify(r, gamma, mu);
    CHECK_FALSE(r.hic);
    r.zeta_min_est = std::nextafter(gamma + mu, 0.0);
    classify(r, gamma, mu);
    CHECK(r.hic);
  }
  SUBCASE("comfortably stable checked point is secure and out of band") {
    r.zeta_min_est = 0.10;
    r.zeta_min_full = 0.10;
    r.full_checked = true;
    r.feasible_n1 = true;
    classify(r, gamma, mu);
    CHECK(r.label == Label::Secure);
    CHECK_FALSE(r.hic);
  }
  SUBCASE("full check overrides the estimate") {
    r.zeta_min_est = 0.10;        // looked stable under the critical outage
    r.zeta_min_full = 0.001;      // another outage was worse
    r.full_checked = true;
    r.feasible_n1 = true;
    classify(r, gamma, mu);
    CHECK(r.label == Label::Insecure);
  }
  SUBCASE("infeasible points are insecure regardless of damping") {
    r.zeta_min_est = 0.10;
    r.zeta_min_full = 0.10;
    r.full_checked = true;
    r.feasible_n1 = false;
    classify(r, gamma, mu);
    CHECK(r.label == Label::Insecure);
  }
  SUBCASE("undefined stability value is neither HIC nor secure") {
    r.zeta_min_est = std::numeric_limits<double>::quiet_NaN();
    classify(r, gamma, mu);
    CHECK_FALSE(r.hic);
    CHECK(r.label == Label::Insecure);
  }
}

TEST_CASE("first writer wins") {
  Database db;
  SecurityRecord a = make_record({1, 2}, 0.05, "walk");
  SecurityRecord b = make_record({1, 2}, 0.99, "later");
  CHECK(db.upsert(a) == Database::UpsertOutcome::Inserted);
  CHECK(db.upsert(b) == Database::UpsertOutcome::Duplicate);
  CHECK(db.size() == 1);
  const SecurityRecord* kept = db.find({1, 2});
  REQUIRE(kept != nullptr);
  CHECK(kept->zeta_min_est == doctest::Approx(0.05));
  CHECK(kept->stage == "walk");

  CHECK(db.upsert(make_record({1, 3}, 0.1)) == Database::UpsertOutcome::Inserted);
  CHECK(db.size() == 2);
}

TEST_CASE("concurrent insert storm keeps exactly one record per key") {
  Database db;
  std::atomic<int> inserted{0};
  parallel_for(256, 64, [&](std::size_t i) {
    SecurityRecord r = make_record({7, 7}, double(i));
    r.stage = "w" + std::to_string(i);
    if (db.upsert(r) == Database::UpsertOutcome::Inserted) ++inserted;
  });
  CHECK(db.size() == 1);
  CHECK(inserted.load() == 1);
}

TEST_CASE("csv export round trip is byte identical") {
  Database db;
  for (int i = 0; i < 30; ++i) {
    SecurityRecord r = make_record({i % 10, i / 10}, 0.01 * i + 0.001234567890123,
                                   i % 2 ? "walk" : "eta3");
    if (i % 3 == 0) {
      r.full_checked = true;
      r.feasible_n1 = true;
      r.zeta_min_full = r.zeta_min_est - 1e-4;
    }
    classify(r, 0.03, 0.0025);
    db.upsert(r);
  }
  db.export_csv("db_a.csv");
  Database db2 = Database::import_csv("db_a.csv");
  db2.export_csv("db_b.csv");
  CHECK(slurp("db_a.csv") == slurp("db_b.csv"));
  CHECK(db2.size() == db.size());

  SUBCASE("fields survive the trip") {
    const SecurityRecord* r = db2.find({0, 0});
    REQUIRE(r != nullptr);
    CHECK(r->zeta_min_est == doctest::Approx(0.001234567890123).epsilon(1e-15));
    CHECK(r->full_checked);
  }
  std::remove("db_a.csv");
  std::remove("db_b.csv");
}

TEST_CASE("csv schema: header and unchecked rows") {
  Database db;
  db.export_csv("db_empty.csv");
  CHECK(slurp("db_empty.csv") ==
        "key,zeta_min_est,zeta_min_full,crit_cont,feasible_n1,label,hic,stage\n");

  SecurityRecord r = make_record({4, 2}, 0.05);
  db.upsert(r);
  db.export_csv("db_one.csv");
  const std::string text = slurp("db_one.csv");
  CHECK(text.find("key,P_g1,P_g2,zeta_min_est,zeta_min_full,crit_cont,feasible_n1,label,"
                  "hic,stage\n") == 0);
  // zeta_min_full sits empty between est and crit_cont for unchecked rows
  CHECK(text.find(",,1,false,insecure,false,eta3") != std::string::npos);
  CHECK(text.find("4;2,") == text.find('\n') + 1);
  std::remove("db_empty.csv");
  std::remove("db_one.csv");
}

TEST_CASE("hic rows in the export match the hic record count") {
  Database db;
  int expect_hic = 0;
  for (int i = 0; i < 57; ++i) {
    SecurityRecord r = make_record({i}, 0.02 + 0.0005 * i);
    classify(r, 0.03, 0.0025);
    if (r.hic) ++expect_hic;
    db.upsert(r);
  }
  REQUIRE(expect_hic > 0);
  db.export_csv("db_hic.csv");
  std::ifstream in("db_hic.csv");
  std::string line;
  std::getline(in, line);
  int seen = 0;
  while (std::getline(in, line))
    if (line.find(",true,") != std::string::npos &&
        line.rfind(",true,") > line.find(",insecure,"))
      ++seen;
  // count hic=true column explicitly instead: re-import and recount
  Database db2 = Database::import_csv("db_hic.csv");
  int reimported_hic = 0;
  for (const auto& r : db2.snapshot())
    if (r.hic) ++reimported_hic;
  CHECK(reimported_hic == expect_hic);
  std::remove("db_hic.csv");
}

TEST_CASE("jsonl journal keeps walk metadata") {
  Database db;
  SecurityRecord r = make_record({3, 1}, 0.04, "walk");
  r.walk_id = 17;
  r.critical_pair = {2, 5};
  db.upsert(r);
  db.export_jsonl("db.jsonl");
  Database db2 = Database::import_jsonl("db.jsonl");
  const SecurityRecord* back = db2.find({3, 1});
  REQUIRE(back != nullptr);
  CHECK(back->walk_id == 17);
  CHECK(back->critical_pair == std::vector<int>{2, 5});
  std::remove("db.jsonl");
}

TEST_CASE("summary counts and search-space size") {
  SamplePlan plan;
  plan.alpha_mw = 1.0;

  SUBCASE("single dimension span 10") {
    plan.lo_mw = Eigen::VectorXd::Zero(1);
    plan.hi_mw = Eigen::VectorXd::Constant(1, 10.0);
    CHECK(search_space_cardinality(plan) == doctest::Approx(11.0));
  }
  SUBCASE("two dimensions multiply") {
    plan.lo_mw = Eigen::VectorXd::Zero(2);
    plan.hi_mw = Eigen::VectorXd::Constant(2, 10.0);
    CHECK(search_space_cardinality(plan) == doctest::Approx(121.0));
  }
  SUBCASE("profiles multiply") {
    plan.lo_mw = Eigen::VectorXd::Zero(2);
    plan.hi_mw = Eigen::VectorXd::Constant(2, 10.0);
    CHECK(search_space_cardinality(plan, 3) == doctest::Approx(363.0));
  }
  SUBCASE("four dimensions at the published spans reach ~2.5 million") {
    plan.lo_mw = Eigen::VectorXd::Zero(4);
    plan.hi_mw.resize(4);
    plan.hi_mw << 60.0, 60.0, 25.0, 25.0;
    const double psi = search_space_cardinality(plan);
    CHECK(psi == doctest::Approx(61.0 * 61.0 * 26.0 * 26.0));
    CHECK(psi > 2.4e6);
    CHECK(psi < 2.6e6);
  }
  SUBCASE("summary totals match a recount") {
    plan.lo_mw = Eigen::VectorXd::Zero(1);
    plan.hi_mw = Eigen::VectorXd::Constant(1, 100.0);
    Database db;
    for (int i = 0; i < 40; ++i) {
      SecurityRecord r = make_record({i}, 0.02 + 0.001 * i);
      if (i % 2 == 0) {
        r.full_checked = true;
        r.feasible_n1 = true;
        r.zeta_min_full = r.zeta_min_est;
      }
      classify(r, 0.03, 0.005);
      db.upsert(r);
    }
    const DatabaseSummary s = db.summarize(plan);
    CHECK(s.records == 40);
    CHECK(s.secure + s.insecure == s.records);
    std::int64_t hic = 0, secure = 0;
    for (const auto& r : db.snapshot()) {
      hic += r.hic ? 1 : 0;
      secure += r.label == Label::Secure ? 1 : 0;
    }
    CHECK(s.hic_unique == hic);
    CHECK(s.secure == secure);
    CHECK(s.psi == doctest::Approx(101.0));
  }
}
