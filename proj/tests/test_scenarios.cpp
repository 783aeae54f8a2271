#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "gridlearn/scenarios.hpp"

using namespace gridlearn;
using scen::DistributionSpec;
using scen::Family;

namespace {

std::string fixture(const std::string& name) {
  return std::string(GRIDLEARN_FIXTURE_DIR) + "/" + name;
}

LoadScenario make_scenario(std::initializer_list<double> p,
                           std::initializer_list<double> q,
                           const std::string& tag = "") {
  LoadScenario s;
  s.p_load.resize(static_cast<Eigen::Index>(p.size()));
  s.q_load.resize(static_cast<Eigen::Index>(q.size()));
  Eigen::Index i = 0;
  for (double v : p) s.p_load[i++] = v;
  i = 0;
  for (double v : q) s.q_load[i++] = v;
  s.tag = tag;
  return s;
}

}  // namespace

TEST_CASE("uniform fit takes the per-dimension historical limits") {
  const auto spec = scen::fit(Family::UNIFORM_INDEP,
                              {make_scenario({1.0}, {0.5}), make_scenario({3.0}, {0.2})});
  CHECK(spec.lo[0] == 1.0);
  CHECK(spec.hi[0] == 3.0);
  CHECK(spec.lo[1] == 0.2);
  CHECK(spec.hi[1] == 0.5);
}

TEST_CASE("normal fit uses the sample mean and (n-1)-denominator deviation") {
  const auto spec = scen::fit(Family::NORMAL_INDEP,
                              {make_scenario({0.0}, {0.0}), make_scenario({2.0}, {0.0})});
  CHECK(spec.mean[0] == doctest::Approx(1.0));
  CHECK(spec.sdev[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(spec.sdev[1] == 0.0);
}

TEST_CASE("fit rejects fewer than two samples") {
  CHECK_THROWS(scen::fit(Family::MVN, {make_scenario({1.0}, {0.0})}));
}

TEST_CASE("MVN fit recovers known generating parameters") {
  // Known 3-dim generator (one P and two Q entries is immaterial to the fit),
  // strong off-diagonals so 5% relative tolerances are meaningful.
  DistributionSpec truth;
  truth.family = Family::MVN;
  truth.mvn_mean = Eigen::VectorXd(4);
  truth.mvn_mean << 1.0, 2.0, 3.0, 0.0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  cov.topLeftCorner(3, 3) << 1.0, 0.6, 0.5,
                             0.6, 1.4, 0.7,
                             0.5, 0.7, 1.2;
  truth.cov = cov;
  truth.chol = Eigen::MatrixXd::Zero(4, 4);
  truth.chol.topLeftCorner(3, 3) =
      Eigen::MatrixXd(Eigen::LLT<Eigen::MatrixXd>(cov.topLeftCorner(3, 3)).matrixL());

  const int n = 10000;
  const auto draws = scen::sample(truth, n, 77);
  const auto fitted = scen::fit(Family::MVN, draws);

  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(cov(i, i) / n);
    CHECK(std::abs(fitted.mvn_mean[i] - truth.mvn_mean[i]) < 3.0 * se);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(fitted.cov(i, j) - cov(i, j)) / std::abs(cov(i, j)) < 0.05);
}

TEST_CASE("degenerate uniform bounds and zero MVN covariance collapse to a point") {
  DistributionSpec uni;
  uni.family = Family::UNIFORM_INDEP;
  uni.lo = Eigen::Vector4d{1.0, 2.0, 0.1, 0.2};
  uni.hi = uni.lo;
  for (const auto& s : scen::sample(uni, 50, 5)) {
    CHECK(s.p_load[0] == 1.0);
    CHECK(s.p_load[1] == 2.0);
    CHECK(s.q_load[0] == 0.1);
    CHECK(s.q_load[1] == 0.2);
  }

  DistributionSpec mvn;
  mvn.family = Family::MVN;
  mvn.mvn_mean = Eigen::Vector2d{0.7, 0.1};
  mvn.cov = Eigen::Matrix2d::Zero();
  mvn.chol = Eigen::Matrix2d::Zero();
  for (const auto& s : scen::sample(mvn, 20, 5)) {
    CHECK(s.p_load[0] == 0.7);
    CHECK(s.q_load[0] == 0.1);
  }
}

TEST_CASE("uniform draws never leave their bounds") {
  DistributionSpec spec;
  spec.family = Family::UNIFORM_INDEP;
  spec.lo = Eigen::Vector4d{-1.0, 0.0, 2.0, -5.0};
  spec.hi = Eigen::Vector4d{1.0, 0.5, 2.5, -4.0};
  for (const auto& s : scen::sample(spec, 20000, 11)) {
    Eigen::Vector4d v;
    v << s.p_load, s.q_load;
    for (int i = 0; i < 4; ++i) {
      CHECK(v[i] >= spec.lo[i]);
      CHECK(v[i] < spec.hi[i]);
    }
  }
}

TEST_CASE("MVN sample correlation approaches the specified value") {
  // Two correlated P dims; the two Q dims are deterministic zeros.
  DistributionSpec spec;
  spec.family = Family::MVN;
  spec.mvn_mean = Eigen::Vector4d{0.0, 0.0, 0.0, 0.0};
  spec.cov = Eigen::Matrix4d::Zero();
  spec.cov.topLeftCorner(2, 2) << 1.0, 0.8, 0.8, 1.0;
  spec.chol = Eigen::Matrix4d::Zero();
  spec.chol.topLeftCorner(2, 2) = Eigen::MatrixXd(
      Eigen::LLT<Eigen::MatrixXd>(spec.cov.topLeftCorner(2, 2)).matrixL());

  const auto draws = scen::sample(spec, 10000, 2024);
  const double corr = scen::correlation(draws, 0, 1);
  CHECK(std::abs(corr - 0.8) < 0.03);
}

TEST_CASE("MVN empirical covariance converges in Frobenius norm") {
  DistributionSpec spec;
  spec.family = Family::MVN;
  spec.mvn_mean = Eigen::Vector4d{1.0, -0.5, 2.0, 0.0};
  Eigen::Matrix4d cov;
  cov << 2.0, 0.6, 0.3, 0.2,
         0.6, 1.5, 0.4, 0.1,
         0.3, 0.4, 1.0, 0.5,
         0.2, 0.1, 0.5, 0.8;
  spec.cov = cov;
  spec.chol = Eigen::LLT<Eigen::MatrixXd>(spec.cov).matrixL();

  const auto draws = scen::sample(spec, 10000, 31);
  const auto fitted = scen::fit(Family::MVN, draws);
  const double err = (fitted.cov - cov).norm() / cov.norm();
  CHECK(err <= 0.05);
}

TEST_CASE("sampling is bit-identical under a fixed seed") {
  DistributionSpec spec;
  spec.family = Family::NORMAL_INDEP;
  spec.mean = Eigen::Vector2d{1.0, 2.0};
  spec.sdev = Eigen::Vector2d{0.1, 0.4};
  const auto a = scen::sample(spec, 500, 999);
  const auto b = scen::sample(spec, 500, 999);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].p_load == b[i].p_load);  // exact equality, not approximate
    CHECK(a[i].q_load == b[i].q_load);
  }
  const auto c = scen::sample(spec, 500, 1000);
  CHECK(a[0].p_load != c[0].p_load);
}

TEST_CASE("correlation endpoints and the strongly-correlated fixture") {
  std::vector<LoadScenario> identical, negated;
  std::mt19937_64 mt(4);
  for (int i = 0; i < 100; ++i) {
    const double v = (mt() >> 11) * 0x1.0p-53;
    identical.push_back(make_scenario({v, v}, {0.0, 0.0}));
    negated.push_back(make_scenario({v, -v}, {0.0, 0.0}));
  }
  CHECK(scen::correlation(identical, 0, 1) == doctest::Approx(1.0));
  CHECK(scen::correlation(negated, 0, 1) == doctest::Approx(-1.0));

  // Fixture generated with correlation 0.86 at the realistic sample count.
  DistributionSpec gen;
  gen.family = Family::MVN;
  gen.mvn_mean = Eigen::Vector4d{5.0, 8.0, 0.0, 0.0};
  gen.cov = Eigen::Matrix4d::Zero();
  gen.cov.topLeftCorner(2, 2) << 1.0, 0.86, 0.86, 1.0;
  gen.chol = Eigen::Matrix4d::Zero();
  gen.chol.topLeftCorner(2, 2) = Eigen::MatrixXd(
      Eigen::LLT<Eigen::MatrixXd>(gen.cov.topLeftCorner(2, 2)).matrixL());
  const auto draws = scen::sample(gen, 7284, 86);
  CHECK(std::abs(scen::correlation(draws, 0, 1) - 0.86) < 0.02);

  std::vector<LoadScenario> constant{make_scenario({1.0, 2.0}, {0, 0}),
                                     make_scenario({1.0, 2.5}, {0, 0})};
  CHECK_THROWS(scen::correlation(constant, 0, 1));
}

TEST_CASE("fit-sample round trip recovers uniform and normal parameters") {
  DistributionSpec uni;
  uni.family = Family::UNIFORM_INDEP;
  uni.lo = Eigen::Vector2d{2.0, -1.0};
  uni.hi = Eigen::Vector2d{3.0, 1.0};
  const auto udraws = scen::sample(uni, 50000, 123);
  const auto ufit = scen::fit(Family::UNIFORM_INDEP, udraws);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(ufit.lo[i] - uni.lo[i]) < 1e-3 * (uni.hi[i] - uni.lo[i]));
    CHECK(std::abs(ufit.hi[i] - uni.hi[i]) < 1e-3 * (uni.hi[i] - uni.lo[i]));
  }

  DistributionSpec nrm;
  nrm.family = Family::NORMAL_INDEP;
  nrm.mean = Eigen::Vector2d{4.0, -2.0};
  nrm.sdev = Eigen::Vector2d{0.5, 1.5};
  const auto ndraws = scen::sample(nrm, 50000, 321);
  const auto nfit = scen::fit(Family::NORMAL_INDEP, ndraws);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(nfit.mean[i] - nrm.mean[i]) < 3.0 * nrm.sdev[i] / std::sqrt(50000.0));
    CHECK(std::abs(nfit.sdev[i] - nrm.sdev[i]) / nrm.sdev[i] < 0.02);
  }
}

TEST_CASE("near-singular covariance factorizes through the jitter ladder") {
  // rank-1 covariance: all dims perfectly correlated
  std::vector<LoadScenario> hist;
  std::mt19937_64 mt(9);
  for (int i = 0; i < 200; ++i) {
    const double v = (mt() >> 11) * 0x1.0p-53;
    hist.push_back(make_scenario({v, 2 * v}, {0.5 * v, v}));
  }
  const auto spec = scen::fit(Family::MVN, hist);
  CHECK(spec.chol.allFinite());
  const auto draws = scen::sample(spec, 100, 55);
  for (const auto& s : draws) {
    CHECK(s.p_load.allFinite());
    CHECK(s.q_load.allFinite());
  }
}

TEST_CASE("labeling pairs feasible scenarios and excludes hopeless ones") {
  const net::Network net = net::load_case_file(fixture("case9.json"));
  LoadScenario nominal = make_scenario({0.0, 0.9, 0.0, 1.0, 0.0, 1.25},
                                       {0.0, 0.3, 0.0, 0.35, 0.0, 0.5}, "t0");
  LoadScenario hopeless = nominal;
  hopeless.p_load *= 12.0;  // beyond total generation capacity
  hopeless.tag = "t1";

  const auto labeled = scen::label({nominal, hopeless}, net, scen::WarmPolicy::FLAT, 1);
  REQUIRE(labeled.size() == 1);
  CHECK(labeled.excluded == std::vector<int>{1});
  CHECK(labeled.solutions[0].status == opf::SolveStatus::OPTIMAL);
  CHECK(labeled.scenarios[0].tag == "t0");
}

TEST_CASE("serial and concurrent labeling produce identical objectives") {
  const net::Network net = net::load_case_file(fixture("case9.json"));
  std::vector<LoadScenario> scenarios;
  std::mt19937_64 mt(17);
  for (int i = 0; i < 24; ++i) {
    LoadScenario s = make_scenario({0.0, 0.9, 0.0, 1.0, 0.0, 1.25},
                                   {0.0, 0.3, 0.0, 0.35, 0.0, 0.5},
                                   "t" + std::to_string(i));
    const double scale = 0.7 + 0.5 * ((mt() >> 11) * 0x1.0p-53);
    s.p_load *= scale;
    s.q_load *= scale;
    scenarios.push_back(std::move(s));
  }
  const auto serial = scen::label(scenarios, net, scen::WarmPolicy::BASE, 1);
  const auto parallel = scen::label(scenarios, net, scen::WarmPolicy::BASE, 4);
  REQUIRE(serial.size() == parallel.size());
  REQUIRE(serial.size() == scenarios.size());  // all solvable
  for (std::size_t i = 0; i < serial.size(); ++i)
    CHECK(serial.solutions[i].objective == parallel.solutions[i].objective);
}

TEST_CASE("chronological split sizes and policies") {
  auto dataset_of = [](int n) {
    scen::LabeledDataset d;
    for (int i = 0; i < n; ++i) {
      d.scenarios.push_back(make_scenario({1.0}, {0.1}, "t" + std::to_string(i)));
      d.solutions.emplace_back();
    }
    return d;
  };

  const auto big = dataset_of(7284);
  const auto [train, test] = scen::split(big, scen::SplitPolicy::FIRST_HALF_TRAIN);
  CHECK(train.size() == 3642);
  CHECK(test.size() == 3642);
  CHECK(train.scenarios.front().tag == "t0");
  CHECK(test.scenarios.front().tag == "t3642");

  const auto [atrain, atest] = scen::split(big, scen::SplitPolicy::ALL);
  CHECK(atest.size() == 7284);
  CHECK(atrain.size() == 7284);

  const auto odd = dataset_of(5);
  const auto [otrain, otest] = scen::split(odd, scen::SplitPolicy::FIRST_HALF_TRAIN);
  CHECK(otrain.size() == 3);
  CHECK(otest.size() == 2);

  scen::LabeledDataset untagged;
  untagged.scenarios.push_back(make_scenario({1.0}, {0.1}));
  untagged.solutions.emplace_back();
  CHECK_THROWS(scen::split(untagged, scen::SplitPolicy::FIRST_HALF_TRAIN));
}

TEST_CASE("scenario CSV and distribution specs survive a round trip") {
  const std::string csv = std::string(GRIDLEARN_FIXTURE_DIR) + "/tmp_scen.csv";
  std::vector<LoadScenario> scenarios{make_scenario({0.5, 0.25}, {0.1, 0.05}, "a"),
                                      make_scenario({0.7, 0.33}, {0.2, 0.15}, "b")};
  scen::write_scenarios_csv(csv, scenarios, {4, 5});
  const auto back = scen::read_scenarios_csv(csv, {4, 5});
  REQUIRE(back.size() == 2);
  CHECK(back[0].tag == "a");
  CHECK(back[0].p_load == scenarios[0].p_load);
  CHECK(back[1].q_load == scenarios[1].q_load);
  CHECK_THROWS(scen::read_scenarios_csv(csv, {4, 6}));
  std::remove(csv.c_str());

  DistributionSpec spec;
  spec.family = Family::MVN;
  spec.pq_bus_ids = {4, 5};
  spec.mvn_mean = Eigen::Vector4d{1, 2, 3, 4};
  Eigen::Matrix4d cov = Eigen::Vector4d{1, 2, 3, 4}.asDiagonal();
  spec.cov = cov;
  spec.chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
  const std::string spath = std::string(GRIDLEARN_FIXTURE_DIR) + "/tmp_spec.json";
  scen::save_spec(spec, spath);
  const auto loaded = scen::load_spec(spath);
  CHECK(loaded.family == Family::MVN);
  CHECK(loaded.pq_bus_ids == spec.pq_bus_ids);
  CHECK((loaded.mvn_mean - spec.mvn_mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.chol - spec.chol).cwiseAbs().maxCoeff() == 0.0);
  std::remove(spath.c_str());
}

TEST_CASE("labeled datasets survive a round trip") {
  const net::Network net = net::load_case_file(fixture("case9.json"));
  const LoadScenario nominal = make_scenario({0.0, 0.9, 0.0, 1.0, 0.0, 1.25},
                                             {0.0, 0.3, 0.0, 0.35, 0.0, 0.5}, "t0");
  auto labeled = scen::label({nominal}, net, scen::WarmPolicy::FLAT, 1);
  labeled.excluded = {7};
  const std::string path = std::string(GRIDLEARN_FIXTURE_DIR) + "/tmp_dataset.jsonl";
  scen::save_dataset(labeled, path, net.pq_bus_ids());
  const auto back = scen::load_dataset(path);
  REQUIRE(back.size() == 1);
  CHECK(back.excluded == std::vector<int>{7});
  CHECK(back.scenarios[0].tag == "t0");
  CHECK(back.solutions[0].objective == labeled.solutions[0].objective);
  CHECK(back.solutions[0].status == opf::SolveStatus::OPTIMAL);
  std::remove(path.c_str());
}
