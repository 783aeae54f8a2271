#include "gridlearn/powerflow.hpp"

#include <cmath>

namespace gridlearn::pf {

namespace {

using Complex = std::complex<double>;

void check_setpoint(const net::Network& net, const PfSetpoint& setpoint) {
  if (setpoint.v_set.size() !=
      static_cast<Eigen::Index>(net.gen_bus_indices().size()))
    throw PfError("v_set must have one entry per PV/slack bus");
  if (setpoint.p_set.size() !=
      static_cast<Eigen::Index>(net.nonslack_gen_indices().size()))
    throw PfError("p_set must have one entry per non-slack generator");
}

}  // namespace

PfInit flat_init(const net::Network& net) {
  return PfInit{Eigen::VectorXd::Ones(net.n_buses()),
                Eigen::VectorXd::Zero(net.n_buses())};
}

PfInit mean_init(const std::vector<PfSolution>& solutions) {
  if (solutions.empty()) throw PfError("mean_init over empty solution set");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(solutions.front().v_mag.size());
  Eigen::VectorXd th = Eigen::VectorXd::Zero(solutions.front().theta.size());
  for (const auto& s : solutions) {
    v += s.v_mag;
    th += s.theta;
  }
  const double inv = 1.0 / static_cast<double>(solutions.size());
  return PfInit{v * inv, th * inv};
}

Eigen::VectorXcd scenario_injections(const net::Network& net,
                                     const LoadScenario& scenario) {
  const auto& pq = net.pq_indices();
  if (scenario.p_load.size() != static_cast<Eigen::Index>(pq.size()) ||
      scenario.q_load.size() != static_cast<Eigen::Index>(pq.size()))
    throw PfError("scenario must cover exactly the PQ bus set");
  Eigen::VectorXcd load = Eigen::VectorXcd::Zero(net.n_buses());
  for (std::size_t k = 0; k < pq.size(); ++k)
    load[pq[k]] = Complex(scenario.p_load[static_cast<Eigen::Index>(k)],
                          scenario.q_load[static_cast<Eigen::Index>(k)]);
  return load;
}

Eigen::VectorXcd complex_voltage(const Eigen::VectorXd& v_mag,
                                 const Eigen::VectorXd& theta) {
  Eigen::VectorXcd v(v_mag.size());
  for (Eigen::Index i = 0; i < v_mag.size(); ++i)
    v[i] = std::polar(v_mag[i], theta[i]);
  return v;
}

Eigen::VectorXcd injected_power(const Eigen::MatrixXcd& ybus,
                                const Eigen::VectorXcd& v) {
  return v.cwiseProduct((ybus * v).conjugate());
}

SbusDerivatives dsbus_dv(const Eigen::MatrixXcd& ybus, const Eigen::VectorXcd& v) {
  const Eigen::Index n = v.size();
  const Eigen::VectorXcd ibus = ybus * v;
  Eigen::VectorXcd vnorm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = std::abs(v[i]);
    vnorm[i] = mag > 0 ? v[i] / mag : Complex(1.0, 0.0);
  }

  SbusDerivatives d;
  // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
  Eigen::MatrixXcd inner = -ybus * v.asDiagonal();
  inner += Eigen::MatrixXcd(ibus.asDiagonal());
  d.dS_dVa = Complex(0, 1) * (v.asDiagonal() * inner.conjugate());
  // dS/dVm = diag(V) conj(Y diag(Vnorm)) + diag(conj(I)) diag(Vnorm)
  d.dS_dVm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate() +
             Eigen::MatrixXcd(ibus.conjugate().asDiagonal()) *
                 Eigen::MatrixXcd(vnorm.asDiagonal());
  return d;
}

PfSolution solve_pf(const net::Network& net, const LoadScenario& scenario,
                    const PfSetpoint& setpoint, const PfInit& init,
                    const PfOptions& opts) {
  check_setpoint(net, setpoint);
  const int n = net.n_buses();
  if (init.v_mag0.size() != n || init.theta0.size() != n)
    throw PfError("init must cover all buses");

  const Eigen::MatrixXcd ybus = build_ybus(net);
  const Eigen::VectorXcd load = scenario_injections(net, scenario);
  const int slack = net.slack_index();
  const auto& pq = net.pq_indices();
  const auto& gen_buses = net.gen_bus_indices();

  // Specified injections: -load at PQ buses, generation minus load elsewhere.
  Eigen::VectorXd p_spec = -load.real();
  for (std::size_t k = 0; k < net.nonslack_gen_indices().size(); ++k) {
    const auto& gen =
        net.generators()[static_cast<std::size_t>(net.nonslack_gen_indices()[k])];
    p_spec[net.index_of(gen.bus_id)] += setpoint.p_set[static_cast<Eigen::Index>(k)];
  }
  const Eigen::VectorXd q_spec = -load.imag();

  // Unknown ordering: angles at non-slack buses, magnitudes at PQ buses.
  std::vector<int> ns;
  ns.reserve(static_cast<std::size_t>(n) - 1);
  for (int i = 0; i < n; ++i)
    if (i != slack) ns.push_back(i);
  const Eigen::Index nth = static_cast<Eigen::Index>(ns.size());
  const Eigen::Index npq = static_cast<Eigen::Index>(pq.size());

  Eigen::VectorXd v_mag = init.v_mag0;
  Eigen::VectorXd theta = init.theta0;
  theta[slack] = 0.0;
  for (std::size_t k = 0; k < gen_buses.size(); ++k)
    v_mag[gen_buses[k]] = setpoint.v_set[static_cast<Eigen::Index>(k)];

  auto mismatch_vector = [&](const Eigen::VectorXcd& s_calc) {
    Eigen::VectorXd m(nth + npq);
    for (Eigen::Index k = 0; k < nth; ++k)
      m[k] = p_spec[ns[static_cast<std::size_t>(k)]] -
             s_calc[ns[static_cast<std::size_t>(k)]].real();
    for (Eigen::Index k = 0; k < npq; ++k)
      m[nth + k] = q_spec[pq[static_cast<std::size_t>(k)]] -
                   s_calc[pq[static_cast<std::size_t>(k)]].imag();
    return m;
  };

  PfSolution sol;
  sol.iterations = 0;
  Eigen::VectorXcd vc = complex_voltage(v_mag, theta);
  Eigen::VectorXd m = mismatch_vector(injected_power(ybus, vc));
  sol.mismatch = m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0;

  while (sol.mismatch > opts.tol && sol.iterations < opts.max_iter) {
    const SbusDerivatives d = dsbus_dv(ybus, vc);
    Eigen::MatrixXd jac(nth + npq, nth + npq);
    for (Eigen::Index r = 0; r < nth; ++r) {
      const int bi = ns[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < nth; ++c)
        jac(r, c) = d.dS_dVa(bi, ns[static_cast<std::size_t>(c)]).real();
      for (Eigen::Index c = 0; c < npq; ++c)
        jac(r, nth + c) = d.dS_dVm(bi, pq[static_cast<std::size_t>(c)]).real();
    }
    for (Eigen::Index r = 0; r < npq; ++r) {
      const int bi = pq[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < nth; ++c)
        jac(nth + r, c) = d.dS_dVa(bi, ns[static_cast<std::size_t>(c)]).imag();
      for (Eigen::Index c = 0; c < npq; ++c)
        jac(nth + r, nth + c) = d.dS_dVm(bi, pq[static_cast<std::size_t>(c)]).imag();
    }

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw PfError("singular Jacobian at iteration " +
                    std::to_string(sol.iterations + 1));
    const Eigen::VectorXd dx = lu.solve(m);

    for (Eigen::Index k = 0; k < nth; ++k) theta[ns[static_cast<std::size_t>(k)]] += dx[k];
    for (Eigen::Index k = 0; k < npq; ++k)
      v_mag[pq[static_cast<std::size_t>(k)]] += dx[nth + k];

    ++sol.iterations;
    vc = complex_voltage(v_mag, theta);
    m = mismatch_vector(injected_power(ybus, vc));
    sol.mismatch = m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0;
  }

  sol.converged = sol.mismatch <= opts.tol;
  sol.v_mag = v_mag;
  sol.theta = theta;

  // Dependent generation quantities.
  const Eigen::VectorXcd s_inj = injected_power(ybus, vc);
  sol.p_slack = s_inj[slack].real() + load[slack].real();
  sol.q_gen = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.generators().size()));
  for (int bus : gen_buses) {
    const double q_bus = s_inj[bus].imag() + load[bus].imag();
    const auto& gens = net.generators_at(bus);
    double total_range = 0.0;
    for (int g : gens)
      total_range += net.generators()[static_cast<std::size_t>(g)].q_max -
                     net.generators()[static_cast<std::size_t>(g)].q_min;
    for (int g : gens) {
      const auto& gen = net.generators()[static_cast<std::size_t>(g)];
      const double share =
          total_range > 0 ? (gen.q_max - gen.q_min) / total_range
                          : 1.0 / static_cast<double>(gens.size());
      sol.q_gen[g] = q_bus * share;
    }
  }
  return sol;
}

std::vector<BranchFlow> branch_flows(const net::Network& net,
                                     const Eigen::VectorXd& v_mag,
                                     const Eigen::VectorXd& theta) {
  const Eigen::VectorXcd vc = complex_voltage(v_mag, theta);
  std::vector<BranchFlow> flows;
  flows.reserve(net.branches().size());
  for (const auto& br : net.branches()) {
    const int i = net.index_of(br.from_bus);
    const int j = net.index_of(br.to_bus);
    const Complex y = 1.0 / Complex(br.r, br.x);
    const Complex half(0.0, br.b_sh / 2.0);
    const double t = br.tap;
    const Complex i_from = (y + half) / (t * t) * vc[i] - y / t * vc[j];
    const Complex i_to = (y + half) * vc[j] - y / t * vc[i];
    flows.push_back({vc[i] * std::conj(i_from), vc[j] * std::conj(i_to)});
  }
  return flows;
}

}  // namespace gridlearn::pf
