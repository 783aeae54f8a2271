#pragma once

// Ground-truth AC-OPF: minimize generation cost subject to the power-balance
// equations, generator/voltage boxes and branch apparent-power limits at both
// ends. Primal-dual interior-point method with a log barrier, polar voltage
// variables and dense linear algebra.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridlearn/loadscenario.hpp"
#include "gridlearn/netmodel.hpp"
#include "gridlearn/powerflow.hpp"

namespace gridlearn::opf {

enum class SolveStatus { OPTIMAL, INFEASIBLE, MAX_ITER };

std::string to_string(SolveStatus status);
SolveStatus solve_status_from(const std::string& s);

/// Interior-point dual state carried to enable true warm starts.
struct DualState {
  Eigen::VectorXd lambda;  // equality multipliers
  Eigen::VectorXd mu;      // inequality multipliers
  Eigen::VectorXd z;       // inequality slacks
};

struct DispatchSolution {
  Eigen::VectorXd p_gen;  // per generator, per-unit
  Eigen::VectorXd q_gen;
  Eigen::VectorXd v_mag;  // per bus
  Eigen::VectorXd theta;
  double objective = 0.0;  // currency per hour
  SolveStatus status = SolveStatus::INFEASIBLE;
  int iterations = 0;
  double feas_residual = 0.0;  // scaled primal feasibility at exit
  double kkt_residual = 0.0;   // scaled max of stationarity/complementarity
  std::optional<DualState> duals;
};

struct OpfOptions {
  double tol = 1e-6;
  int max_iter = 80;
  double sigma = 0.2;     // barrier reduction: gamma <- sigma * z'mu / niq
  double xi = 0.99995;    // fraction-to-boundary step cap
};

/// Warm start: either a previous solution or plain per-generator active
/// generation hints (per-unit).
struct WarmStart {
  std::optional<DispatchSolution> solution;
  std::optional<Eigen::VectorXd> p_gen_hint;
};

DispatchSolution solve_opf(const net::Network& net, const LoadScenario& scenario,
                           const WarmStart& warm = {}, const OpfOptions& opts = {});

/// Copy of the network with every branch limit set to `level` (per-unit).
net::Network relax_branch_limits(const net::Network& net, double level);

/// Worst violation per constraint class, per-unit. `feasible` covers the four
/// operating-limit classes; the balance residual is reported alongside.
struct ViolationReport {
  double dp_g = 0.0;
  double dq_g = 0.0;
  double dv = 0.0;
  double ds = 0.0;
  double balance_residual = 0.0;
  bool feasible = false;
};

ViolationReport check_feasibility(const net::Network& net,
                                  const LoadScenario& scenario,
                                  const Eigen::VectorXd& p_gen,
                                  const Eigen::VectorXd& q_gen,
                                  const Eigen::VectorXd& v_mag,
                                  const Eigen::VectorXd& theta, double tol = 1e-6);

ViolationReport check_feasibility(const net::Network& net,
                                  const LoadScenario& scenario,
                                  const DispatchSolution& solution,
                                  double tol = 1e-6);

namespace detail {

/// One evaluation of the nonlinear program at (x, lambda, mu); exposed so
/// tests can difference the derivatives.
struct ProblemEval {
  double f = 0.0;
  Eigen::VectorXd grad_f;
  Eigen::VectorXd g;
  Eigen::MatrixXd jac_g;
  Eigen::VectorXd h;
  Eigen::MatrixXd jac_h;
  Eigen::MatrixXd hess_l;  // f + lambda'g + mu'h
};

class OpfProblem {
 public:
  OpfProblem(const net::Network& net, const LoadScenario& scenario);

  Eigen::Index nx() const { return nx_; }
  Eigen::Index neq() const { return neq_; }
  Eigen::Index niq() const { return niq_; }

  Eigen::VectorXd flat_start() const;
  Eigen::VectorXd pack(const DispatchSolution& sol) const;
  void unpack(const Eigen::VectorXd& x, DispatchSolution& sol) const;

  double objective(const Eigen::VectorXd& x) const;
  ProblemEval eval(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                   const Eigen::VectorXd& mu, bool with_hessian = true) const;

 private:
  const net::Network& net_;
  Eigen::MatrixXcd ybus_;
  Eigen::VectorXcd load_;
  std::vector<int> nonslack_;            // bus indices, ascending
  std::vector<int> limited_;             // positions of branches with s_max > 0
  Eigen::Index nx_ = 0, neq_ = 0, niq_ = 0;
  Eigen::Index n_ = 0, ng_ = 0, nth_ = 0, nlim_ = 0;

  friend DispatchSolution gridlearn::opf::solve_opf(const net::Network&,
                                                    const LoadScenario&,
                                                    const WarmStart&,
                                                    const OpfOptions&);
};

}  // namespace detail

}  // namespace gridlearn::opf
