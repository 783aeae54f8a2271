#pragma once

// Newton-Raphson AC power flow in polar coordinates with the full analytic
// Jacobian and dense LU. Maps the pipeline's independent variables (voltage
// setpoints at generator buses, active setpoints at non-slack generators)
// to the dependent ones. Generator limits are deliberately not enforced
// here; violations surface as penalties downstream.

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gridlearn/loadscenario.hpp"
#include "gridlearn/netmodel.hpp"

namespace gridlearn::pf {

struct PfError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Independent variables: |V| per generator bus (gen_bus_indices order,
/// slack included) and active generation per non-slack generator
/// (nonslack_gen_indices order), per-unit. Out-of-limit values are accepted.
struct PfSetpoint {
  Eigen::VectorXd v_set;
  Eigen::VectorXd p_set;
};

/// Starting guesses per bus.
struct PfInit {
  Eigen::VectorXd v_mag0;
  Eigen::VectorXd theta0;
};

struct PfOptions {
  double tol = 1e-8;  // max per-unit mismatch
  int max_iter = 30;
};

struct PfSolution {
  Eigen::VectorXd v_mag;   // all buses
  Eigen::VectorXd theta;   // radians, slack exactly 0
  double p_slack = 0.0;    // per-unit active generation at the slack bus
  Eigen::VectorXd q_gen;   // per generator, per-unit
  bool converged = false;
  int iterations = 0;
  double mismatch = 0.0;   // final max residual, per-unit
};

/// Flat profile: |V| = 1, theta = 0.
PfInit flat_init(const net::Network& net);

/// Elementwise mean of the solutions' voltage profiles.
PfInit mean_init(const std::vector<PfSolution>& solutions);

PfSolution solve_pf(const net::Network& net, const LoadScenario& scenario,
                    const PfSetpoint& setpoint, const PfInit& init,
                    const PfOptions& opts = {});

struct BranchFlow {
  std::complex<double> s_from;
  std::complex<double> s_to;
};

/// Apparent power at both branch ends, shunt and tap included.
std::vector<BranchFlow> branch_flows(const net::Network& net,
                                     const Eigen::VectorXd& v_mag,
                                     const Eigen::VectorXd& theta);

/// Per-bus complex load vector (dense bus order) from a PQ-ordered scenario.
Eigen::VectorXcd scenario_injections(const net::Network& net,
                                     const LoadScenario& scenario);

Eigen::VectorXcd complex_voltage(const Eigen::VectorXd& v_mag,
                                 const Eigen::VectorXd& theta);

/// S = diag(V) conj(Y V).
Eigen::VectorXcd injected_power(const Eigen::MatrixXcd& ybus,
                                const Eigen::VectorXcd& v);

/// Partial derivatives of the complex injections w.r.t. angles and
/// magnitudes (shared with the OPF solver).
struct SbusDerivatives {
  Eigen::MatrixXcd dS_dVa;
  Eigen::MatrixXcd dS_dVm;
};
SbusDerivatives dsbus_dv(const Eigen::MatrixXcd& ybus, const Eigen::VectorXcd& v);

}  // namespace gridlearn::pf
