#pragma once

// Feedforward dispatch predictor: ReLU hidden layers, sigmoid outputs scaled
// into operating limits (so non-slack setpoints are feasible by
// construction), mean-squared prediction loss with analytic backprop, and a
// power-flow-based penalty loss differentiated by a two-point zero-order
// estimator.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridlearn/acopf.hpp"
#include "gridlearn/loadscenario.hpp"
#include "gridlearn/netmodel.hpp"
#include "gridlearn/powerflow.hpp"
#include "gridlearn/rng.hpp"
#include "gridlearn/scenarios.hpp"

namespace gridlearn::mlp {

/// Per-output operating limits; sigmoid outputs are mapped into [lo, hi].
struct OutputScaling {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct MlpModel {
  std::vector<int> dims;                  // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights;   // weights[l]: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;
  OutputScaling scaling;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
};

/// Weights and biases drawn from Unif(-sqrt(1/k), sqrt(1/k)) with k the
/// layer's own unit count. Deterministic under seed.
MlpModel init_model(const std::vector<int>& dims, const OutputScaling& scaling,
                    std::uint64_t seed);

/// Raw sigmoid outputs in (0, 1).
Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& input);

Eigen::VectorXd unscale(const Eigen::VectorXd& raw, const OutputScaling& scaling);
Eigen::VectorXd scale(const Eigen::VectorXd& physical, const OutputScaling& scaling);

struct Gradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  static Gradients zero(const MlpModel& model);
  void accumulate(const Gradients& other, double factor);
};

/// Mean-squared error over the output vector; gradients via backprop when
/// requested.
double prediction_loss(const MlpModel& model, const Eigen::VectorXd& input,
                       const Eigen::VectorXd& target01, Gradients* grads = nullptr);

/// Backpropagates a gradient w.r.t. the raw sigmoid outputs into weights.
Gradients backprop_output_gradient(const MlpModel& model, const Eigen::VectorXd& input,
                                   const Eigen::VectorXd& dloss_dout);

/// max(value - hi, 0) + max(lo - value, 0).
double penalty_term(double value, double lo, double hi);

/// Pipeline output layout: |V| setpoints for PV/slack buses followed by
/// active setpoints for non-slack generators.
OutputScaling setpoint_scaling(const net::Network& net);
int input_dim(const net::Network& net);
int output_dim(const net::Network& net);
pf::PfSetpoint outputs_to_setpoint(const net::Network& net,
                                   const Eigen::VectorXd& physical);

/// Class-averaged constraint violations of the power-flow-completed state:
/// branch flows over the branch count, PQ voltages over the PQ count,
/// generator-bus reactive power over the generator-bus count, plus slack
/// active and reactive terms. A non-converged power flow yields
/// `nonconverged_penalty`.
double total_penalty(const net::Network& net, const LoadScenario& scenario,
                     const pf::PfSetpoint& setpoint, const pf::PfInit& init,
                     double nonconverged_penalty = 10.0);

/// Two-point estimator: (dim/(2 delta)) * v * (L(y + v delta) - L(y - v delta))
/// with v uniform on the unit sphere.
Eigen::VectorXd zero_order_gradient(
    const std::function<double(const Eigen::VectorXd&)>& penalty_eval,
    const Eigen::VectorXd& y, double delta, rng::Engine& engine);

struct TrainConfig {
  std::vector<int> hidden{64, 32};
  int epochs = 200;
  double lr_start = 1e-4;
  double lr_end = 1e-9;
  int penalty_start_epoch = 101;  // 1-based; epochs >= this include the penalty
  double penalty_weight = 0.1;
  double zo_delta = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double nonconverged_penalty = 10.0;
  unsigned jobs = 0;
};

struct TrainHistory {
  std::vector<double> pred_loss;  // per epoch
  std::vector<double> pen_loss;
  std::vector<double> lr;
};

/// Log-spaced learning rate for a 1-based epoch.
double learning_rate(const TrainConfig& config, int epoch);

std::pair<MlpModel, TrainHistory> train(const scen::LabeledDataset& trainset,
                                        const net::Network& net,
                                        const TrainConfig& config);

/// Training target in (0,1): scaled [v at gen buses, p at non-slack gens].
Eigen::VectorXd solution_targets01(const net::Network& net,
                                   const opf::DispatchSolution& solution,
                                   const OutputScaling& scaling);
Eigen::VectorXd scenario_input(const LoadScenario& scenario);

struct Prediction {
  opf::DispatchSolution solution;
  double elapsed_ms = 0.0;
};

/// Forward, unscale, embedded power flow, full dispatch assembly. The
/// solution carries status OPTIMAL when the power flow converged and
/// INFEASIBLE otherwise.
Prediction predict_dispatch(const MlpModel& model, const net::Network& net,
                            const LoadScenario& scenario, const pf::PfInit& init);

/// Binary persistence: little-endian uint32 header length, JSON header
/// (dims, scaling, seed), then all weights and biases as little-endian
/// doubles in row-major layer order.
void save_model(const MlpModel& model, const std::string& path,
                std::uint64_t seed_provenance = 0);
MlpModel load_model(const std::string& path);

}  // namespace gridlearn::mlp
