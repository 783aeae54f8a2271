#include <doctest.h>

#include <cmath>
#include <random>

#include "gauss_seidel.hpp"
#include "gridlearn/powerflow.hpp"

using namespace gridlearn;
using pf::PfInit;
using pf::PfSetpoint;
using pf::PfSolution;

namespace {

std::string fixture(const std::string& name) {
  return std::string(GRIDLEARN_FIXTURE_DIR) + "/" + name;
}

LoadScenario scenario_for(const net::Network& net, std::initializer_list<double> p,
                          std::initializer_list<double> q) {
  LoadScenario s;
  s.p_load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.pq_indices().size()));
  s.q_load = Eigen::VectorXd::Zero(s.p_load.size());
  Eigen::Index i = 0;
  for (double v : p) s.p_load[i++] = v;
  i = 0;
  for (double v : q) s.q_load[i++] = v;
  return s;
}

// Nominal nine-bus operating point: loads at buses 5, 7, 9 and the two
// non-slack machines dispatched at 1.63 and 0.85 pu.
struct NineBus {
  net::Network net = net::load_case_file(fixture("case9.json"));
  LoadScenario scenario = scenario_for(net, {0.0, 0.9, 0.0, 1.0, 0.0, 1.25},
                                       {0.0, 0.3, 0.0, 0.35, 0.0, 0.5});
  PfSetpoint setpoint{Eigen::Vector3d{1.0, 1.0, 1.0}, Eigen::Vector2d{1.63, 0.85}};
};

}  // namespace

TEST_CASE("flat no-load case solves to the flat profile with zero injections") {
  const net::Network net = net::load_case_file(fixture("case2.json"));
  const LoadScenario s = scenario_for(net, {0.0}, {0.0});
  PfSetpoint sp;
  sp.v_set = Eigen::VectorXd::Ones(1);
  sp.p_set = Eigen::VectorXd(0);
  const PfSolution sol = pf::solve_pf(net, s, sp, pf::flat_init(net));
  CHECK(sol.converged);
  CHECK(sol.iterations == 0);  // the flat start already satisfies the equations
  CHECK(sol.v_mag[1] == doctest::Approx(1.0));
  CHECK(sol.theta[1] == doctest::Approx(0.0));
  CHECK(sol.p_slack == doctest::Approx(0.0));
  CHECK(sol.q_gen[0] == doctest::Approx(0.0));
}

TEST_CASE("two-bus lossless case matches the closed-form solution") {
  // Q=0 load on a pure reactance: v2 = cos(theta2), sin(2 theta2) = -P*x*2
  // (from the polar balance equations solved by hand, V1 = 1, x = 0.1).
  const net::Network net = net::load_case_file(fixture("case2.json"));
  const LoadScenario s = scenario_for(net, {0.5}, {0.0});
  PfSetpoint sp;
  sp.v_set = Eigen::VectorXd::Ones(1);
  sp.p_set = Eigen::VectorXd(0);
  const PfSolution sol = pf::solve_pf(net, s, sp, pf::flat_init(net));
  REQUIRE(sol.converged);
  const double theta2 = -std::asin(2.0 * 0.5 * 0.1) / 2.0;
  const double v2 = std::cos(theta2);
  CHECK(std::abs(sol.theta[1] - theta2) < 1e-6);
  CHECK(std::abs(sol.v_mag[1] - v2) < 1e-6);
  // lossless line: slack supplies exactly the load
  CHECK(sol.p_slack == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("nine-bus case converges tightly and matches the Gauss-Seidel oracle") {
  NineBus fix;
  const PfSolution sol = pf::solve_pf(fix.net, fix.scenario, fix.setpoint,
                                      pf::flat_init(fix.net));
  REQUIRE(sol.converged);
  CHECK(sol.mismatch <= 1e-8);

  const auto gs = testoracle::gauss_seidel_pf(fix.net, fix.scenario, fix.setpoint);
  REQUIRE(gs.converged);
  for (int i = 0; i < fix.net.n_buses(); ++i) {
    CHECK(std::abs(sol.v_mag[i] - gs.v_mag[i]) < 1e-6);
    CHECK(std::abs(sol.theta[i] - gs.theta[i]) < 1e-6);
  }
}

TEST_CASE("converged solutions satisfy the balance equations when recomputed") {
  NineBus fix;
  const PfSolution sol = pf::solve_pf(fix.net, fix.scenario, fix.setpoint,
                                      pf::flat_init(fix.net));
  REQUIRE(sol.converged);

  const Eigen::MatrixXcd ybus = net::build_ybus(fix.net);
  const Eigen::VectorXcd vc = pf::complex_voltage(sol.v_mag, sol.theta);
  const Eigen::VectorXcd s_inj = pf::injected_power(ybus, vc);
  const Eigen::VectorXcd load = pf::scenario_injections(fix.net, fix.scenario);

  const int slack = fix.net.slack_index();
  Eigen::VectorXd p_gen_bus = Eigen::VectorXd::Zero(fix.net.n_buses());
  p_gen_bus[fix.net.index_of(2)] = fix.setpoint.p_set[0];
  p_gen_bus[fix.net.index_of(3)] = fix.setpoint.p_set[1];
  p_gen_bus[slack] = sol.p_slack;

  for (int i = 0; i < fix.net.n_buses(); ++i) {
    CHECK(std::abs(s_inj[i].real() - (p_gen_bus[i] - load[i].real())) < 1e-8);
    if (fix.net.buses()[static_cast<std::size_t>(i)].kind == net::BusKind::PQ)
      CHECK(std::abs(s_inj[i].imag() + load[i].imag()) < 1e-8);
  }

  // Generation covers load plus nonnegative losses.
  const double total_gen = sol.p_slack + fix.setpoint.p_set.sum();
  const double total_load = fix.scenario.p_load.sum();
  const double losses = s_inj.real().sum();
  CHECK(losses >= 0.0);
  CHECK(std::abs(total_gen - (total_load + losses)) < 1e-8);
}

TEST_CASE("restarting from the converged profile converges within two iterations") {
  NineBus fix;
  const PfSolution first = pf::solve_pf(fix.net, fix.scenario, fix.setpoint,
                                        pf::flat_init(fix.net));
  REQUIRE(first.converged);
  const PfSolution again = pf::solve_pf(fix.net, fix.scenario, fix.setpoint,
                                        PfInit{first.v_mag, first.theta});
  CHECK(again.converged);
  CHECK(again.iterations <= 2);
}

TEST_CASE("analytic injection derivatives match finite differences on the 3-bus case") {
  const net::Network net = net::load_case_file(fixture("case3.json"));
  const Eigen::MatrixXcd ybus = net::build_ybus(net);
  const Eigen::VectorXd v_mag = Eigen::VectorXd::Ones(3);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
  const auto d = pf::dsbus_dv(ybus, pf::complex_voltage(v_mag, theta));

  const double h = 1e-6;
  double scale_a = 0.0, scale_m = 0.0;
  Eigen::MatrixXcd fd_va(3, 3), fd_vm(3, 3);
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    fd_va.col(k) = (pf::injected_power(ybus, pf::complex_voltage(v_mag, tp)) -
                    pf::injected_power(ybus, pf::complex_voltage(v_mag, tm))) /
                   (2 * h);
    Eigen::VectorXd vp = v_mag, vm = v_mag;
    vp[k] += h;
    vm[k] -= h;
    fd_vm.col(k) = (pf::injected_power(ybus, pf::complex_voltage(vp, theta)) -
                    pf::injected_power(ybus, pf::complex_voltage(vm, theta))) /
                   (2 * h);
  }
  scale_a = d.dS_dVa.cwiseAbs().maxCoeff();
  scale_m = d.dS_dVm.cwiseAbs().maxCoeff();
  CHECK((d.dS_dVa - fd_va).cwiseAbs().maxCoeff() / scale_a < 1e-6);
  CHECK((d.dS_dVm - fd_vm).cwiseAbs().maxCoeff() / scale_m < 1e-6);
}

TEST_CASE("branch flows: zero at equal voltages, hand formula on two buses") {
  const net::Network net2 = net::load_case_file(fixture("case2.json"));
  const auto zero = pf::branch_flows(net2, Eigen::Vector2d{1.0, 1.0},
                                     Eigen::Vector2d{0.0, 0.0});
  CHECK(std::abs(zero[0].s_from) < 1e-14);
  CHECK(std::abs(zero[0].s_to) < 1e-14);

  // known angle gap: |S| = |V1 (V1* - V2*) y*|
  const double th2 = -0.05;
  const auto f = pf::branch_flows(net2, Eigen::Vector2d{1.0, 0.98},
                                  Eigen::Vector2d{0.0, th2});
  const std::complex<double> v1(1.0, 0.0);
  const std::complex<double> v2 = std::polar(0.98, th2);
  const std::complex<double> y = 1.0 / std::complex<double>(0.0, 0.1);
  const std::complex<double> hand = v1 * std::conj((v1 - v2) * y);
  CHECK(std::abs(f[0].s_from - hand) < 1e-12);
}

TEST_CASE("sending minus receiving active power is the nonnegative line loss") {
  NineBus fix;
  const PfSolution sol = pf::solve_pf(fix.net, fix.scenario, fix.setpoint,
                                      pf::flat_init(fix.net));
  REQUIRE(sol.converged);
  const auto flows = pf::branch_flows(fix.net, sol.v_mag, sol.theta);
  for (const auto& f : flows) {
    const double loss = f.s_from.real() + f.s_to.real();
    CHECK(loss >= -1e-12);
  }
}

TEST_CASE("mean_init averages voltage profiles") {
  PfSolution a, b;
  a.v_mag = Eigen::Vector2d{1.0, 1.02};
  a.theta = Eigen::Vector2d{0.0, 0.1};
  b.v_mag = Eigen::Vector2d{1.0, 0.98};
  b.theta = Eigen::Vector2d{0.0, -0.1};

  const PfInit single = pf::mean_init({a});
  CHECK(single.v_mag0 == a.v_mag);
  CHECK(single.theta0 == a.theta);

  const PfInit pair = pf::mean_init({a, b});
  CHECK(pair.theta0[1] == doctest::Approx(0.0));
  CHECK(pair.v_mag0[1] == doctest::Approx(1.0));

  std::mt19937_64 mt(31);
  std::vector<PfSolution> many(100);
  Eigen::VectorXd sum_v = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd sum_t = Eigen::VectorXd::Zero(4);
  for (auto& s : many) {
    s.v_mag = Eigen::VectorXd::NullaryExpr(4, [&](Eigen::Index) {
      return 0.9 + 0.2 * ((mt() >> 11) * 0x1.0p-53);
    });
    s.theta = Eigen::VectorXd::NullaryExpr(4, [&](Eigen::Index) {
      return -0.5 + ((mt() >> 11) * 0x1.0p-53);
    });
    sum_v += s.v_mag;
    sum_t += s.theta;
  }
  const PfInit mean = pf::mean_init(many);
  CHECK((mean.v_mag0 - sum_v / 100.0).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((mean.theta0 - sum_t / 100.0).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS(pf::mean_init({}));
}

TEST_CASE("absurd loading fails to converge without throwing") {
  NineBus fix;
  fix.scenario.p_load *= 80.0;
  const PfSolution sol = pf::solve_pf(fix.net, fix.scenario, fix.setpoint,
                                      pf::flat_init(fix.net));
  CHECK(!sol.converged);
  CHECK(sol.iterations == pf::PfOptions{}.max_iter);
}

TEST_CASE("scenario size mismatches are rejected") {
  NineBus fix;
  LoadScenario bad;
  bad.p_load = Eigen::VectorXd::Zero(3);
  bad.q_load = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(pf::solve_pf(fix.net, bad, fix.setpoint, pf::flat_init(fix.net)),
                  pf::PfError);
}
