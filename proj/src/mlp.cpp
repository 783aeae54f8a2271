#include "gridlearn/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "gridlearn/parallel.hpp"

namespace gridlearn::mlp {

using nlohmann::json;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Trace {
  std::vector<Eigen::VectorXd> activations;  // activations[0] = input
  std::vector<Eigen::VectorXd> pre;          // pre-activation per layer
};

Eigen::VectorXd forward_trace(const MlpModel& model, const Eigen::VectorXd& input,
                              Trace* trace) {
  if (input.size() != model.input_dim())
    throw std::invalid_argument("input dimension mismatch");
  Eigen::VectorXd a = input;
  if (trace) trace->activations.push_back(a);
  const std::size_t layers = model.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::VectorXd z = model.weights[l] * a + model.biases[l];
    if (trace) trace->pre.push_back(z);
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);  // ReLU hidden layers
    } else {
      a = z.unaryExpr([](double v) { return sigmoid(v); });
    }
    if (trace) trace->activations.push_back(a);
  }
  return a;
}

}  // namespace

MlpModel init_model(const std::vector<int>& dims, const OutputScaling& scaling,
                    std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("model needs at least two dims");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("model dims must be positive");
  if (scaling.lo.size() != dims.back() || scaling.hi.size() != dims.back())
    throw std::invalid_argument("scaling must cover the output layer");
  for (Eigen::Index i = 0; i < scaling.lo.size(); ++i)
    if (!(scaling.lo[i] < scaling.hi[i]))
      throw std::invalid_argument("scaling needs lo < hi per output");

  rng::Engine eng(seed);
  MlpModel model;
  model.dims = dims;
  model.scaling = scaling;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int rows = dims[l + 1], cols = dims[l];
    const double bound = std::sqrt(1.0 / rows);  // the layer's own unit count
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng::uniform(eng, -bound, bound);
    Eigen::VectorXd b(rows);
    for (int r = 0; r < rows; ++r) b[r] = rng::uniform(eng, -bound, bound);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  return model;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& input) {
  return forward_trace(model, input, nullptr);
}

Eigen::VectorXd unscale(const Eigen::VectorXd& raw, const OutputScaling& scaling) {
  return scaling.lo.array() + raw.array() * (scaling.hi - scaling.lo).array();
}

Eigen::VectorXd scale(const Eigen::VectorXd& physical, const OutputScaling& scaling) {
  return (physical - scaling.lo).array() / (scaling.hi - scaling.lo).array();
}

Gradients Gradients::zero(const MlpModel& model) {
  Gradients g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.w.emplace_back(Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                           model.weights[l].cols()));
    g.b.emplace_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }
  return g;
}

void Gradients::accumulate(const Gradients& other, double factor) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] += factor * other.w[l];
    b[l] += factor * other.b[l];
  }
}

namespace {

// Shared backward pass from an output-side delta (dL/d pre-activation of the
// output layer).
Gradients backward(const MlpModel& model, const Trace& trace,
                   Eigen::VectorXd delta) {
  Gradients grads = Gradients::zero(model);
  const auto layers = static_cast<std::ptrdiff_t>(model.weights.size());
  for (std::ptrdiff_t l = layers - 1; l >= 0; --l) {
    grads.w[static_cast<std::size_t>(l)] =
        delta * trace.activations[static_cast<std::size_t>(l)].transpose();
    grads.b[static_cast<std::size_t>(l)] = delta;
    if (l > 0) {
      Eigen::VectorXd upstream =
          model.weights[static_cast<std::size_t>(l)].transpose() * delta;
      const Eigen::VectorXd& z = trace.pre[static_cast<std::size_t>(l - 1)];
      delta = (z.array() > 0.0).select(upstream, 0.0);  // ReLU mask
    }
  }
  return grads;
}

}  // namespace

double prediction_loss(const MlpModel& model, const Eigen::VectorXd& input,
                       const Eigen::VectorXd& target01, Gradients* grads) {
  if (target01.size() != model.output_dim())
    throw std::invalid_argument("target dimension mismatch");
  Trace trace;
  const Eigen::VectorXd out = forward_trace(model, input, &trace);
  const Eigen::VectorXd err = out - target01;
  const double m = static_cast<double>(model.output_dim());
  const double loss = err.squaredNorm() / m;
  if (grads) {
    // dL/dout = 2 err / m; through the sigmoid: * out (1 - out)
    const Eigen::VectorXd delta =
        (2.0 / m) * err.array() * out.array() * (1.0 - out.array());
    *grads = backward(model, trace, delta);
  }
  return loss;
}

Gradients backprop_output_gradient(const MlpModel& model, const Eigen::VectorXd& input,
                                   const Eigen::VectorXd& dloss_dout) {
  Trace trace;
  const Eigen::VectorXd out = forward_trace(model, input, &trace);
  const Eigen::VectorXd delta =
      dloss_dout.array() * out.array() * (1.0 - out.array());
  return backward(model, trace, delta);
}

double penalty_term(double value, double lo, double hi) {
  return std::max(value - hi, 0.0) + std::max(lo - value, 0.0);
}

OutputScaling setpoint_scaling(const net::Network& net) {
  const auto& gen_buses = net.gen_bus_indices();
  const auto& nonslack = net.nonslack_gen_indices();
  OutputScaling scaling;
  scaling.lo.resize(static_cast<Eigen::Index>(gen_buses.size() + nonslack.size()));
  scaling.hi.resize(scaling.lo.size());
  Eigen::Index i = 0;
  for (int bus : gen_buses) {
    scaling.lo[i] = net.buses()[static_cast<std::size_t>(bus)].v_min;
    scaling.hi[i] = net.buses()[static_cast<std::size_t>(bus)].v_max;
    ++i;
  }
  for (int g : nonslack) {
    scaling.lo[i] = net.generators()[static_cast<std::size_t>(g)].p_min;
    scaling.hi[i] = net.generators()[static_cast<std::size_t>(g)].p_max;
    ++i;
  }
  return scaling;
}

int input_dim(const net::Network& net) {
  return 2 * static_cast<int>(net.pq_indices().size());
}

int output_dim(const net::Network& net) {
  return static_cast<int>(net.gen_bus_indices().size() +
                          net.nonslack_gen_indices().size());
}

pf::PfSetpoint outputs_to_setpoint(const net::Network& net,
                                   const Eigen::VectorXd& physical) {
  const auto n_v = static_cast<Eigen::Index>(net.gen_bus_indices().size());
  const auto n_p = static_cast<Eigen::Index>(net.nonslack_gen_indices().size());
  if (physical.size() != n_v + n_p)
    throw std::invalid_argument("setpoint vector size mismatch");
  pf::PfSetpoint sp;
  sp.v_set = physical.head(n_v);
  sp.p_set = physical.tail(n_p);
  return sp;
}

double total_penalty(const net::Network& net, const LoadScenario& scenario,
                     const pf::PfSetpoint& setpoint, const pf::PfInit& init,
                     double nonconverged_penalty) {
  pf::PfSolution sol;
  try {
    sol = pf::solve_pf(net, scenario, setpoint, init);
  } catch (const pf::PfError&) {
    return nonconverged_penalty;
  }
  if (!sol.converged) return nonconverged_penalty;

  double pen = 0.0;

  const auto flows = pf::branch_flows(net, sol.v_mag, sol.theta);
  double branch_sum = 0.0;
  for (std::size_t k = 0; k < flows.size(); ++k) {
    const auto& br = net.branches()[k];
    if (br.s_max <= 0) continue;
    const double s = std::max(std::abs(flows[k].s_from), std::abs(flows[k].s_to));
    branch_sum += penalty_term(s, 0.0, br.s_max);
  }
  pen += branch_sum / static_cast<double>(net.branches().size());

  double v_sum = 0.0;
  for (int b : net.pq_indices()) {
    const auto& bus = net.buses()[static_cast<std::size_t>(b)];
    v_sum += penalty_term(sol.v_mag[b], bus.v_min, bus.v_max);
  }
  pen += v_sum / static_cast<double>(net.pq_indices().size());

  // reactive output per generator bus against the bus's aggregate box
  double q_sum = 0.0;
  for (int bus : net.gen_bus_indices()) {
    double q_bus = 0.0, lo = 0.0, hi = 0.0;
    for (int g : net.generators_at(bus)) {
      q_bus += sol.q_gen[g];
      lo += net.generators()[static_cast<std::size_t>(g)].q_min;
      hi += net.generators()[static_cast<std::size_t>(g)].q_max;
    }
    q_sum += penalty_term(q_bus, lo, hi);
  }
  pen += q_sum / static_cast<double>(net.gen_bus_indices().size());

  // slack active and reactive terms, unaveraged
  const int slack = net.slack_index();
  double p_lo = 0.0, p_hi = 0.0, q_lo = 0.0, q_hi = 0.0, q_slack = 0.0;
  for (int g : net.generators_at(slack)) {
    p_lo += net.generators()[static_cast<std::size_t>(g)].p_min;
    p_hi += net.generators()[static_cast<std::size_t>(g)].p_max;
    q_lo += net.generators()[static_cast<std::size_t>(g)].q_min;
    q_hi += net.generators()[static_cast<std::size_t>(g)].q_max;
    q_slack += sol.q_gen[g];
  }
  pen += penalty_term(sol.p_slack, p_lo, p_hi);
  pen += penalty_term(q_slack, q_lo, q_hi);
  return pen;
}

Eigen::VectorXd zero_order_gradient(
    const std::function<double(const Eigen::VectorXd&)>& penalty_eval,
    const Eigen::VectorXd& y, double delta, rng::Engine& engine) {
  if (!(delta > 0)) throw std::invalid_argument("delta must be positive");
  const Eigen::Index dim = y.size();
  const Eigen::VectorXd v = rng::unit_sphere(engine, dim);
  const double plus = penalty_eval(y + delta * v);
  const double minus = penalty_eval(y - delta * v);
  return (static_cast<double>(dim) / (2.0 * delta)) * (plus - minus) * v;
}

double learning_rate(const TrainConfig& config, int epoch) {
  if (config.epochs <= 1) return config.lr_start;
  const double t = static_cast<double>(epoch - 1) /
                   static_cast<double>(config.epochs - 1);
  return std::pow(10.0, std::log10(config.lr_start) +
                            t * (std::log10(config.lr_end) -
                                 std::log10(config.lr_start)));
}

Eigen::VectorXd scenario_input(const LoadScenario& scenario) {
  Eigen::VectorXd x(scenario.p_load.size() + scenario.q_load.size());
  x << scenario.p_load, scenario.q_load;
  return x;
}

Eigen::VectorXd solution_targets01(const net::Network& net,
                                   const opf::DispatchSolution& solution,
                                   const OutputScaling& scaling) {
  Eigen::VectorXd physical(scaling.lo.size());
  Eigen::Index i = 0;
  for (int bus : net.gen_bus_indices()) physical[i++] = solution.v_mag[bus];
  for (int g : net.nonslack_gen_indices()) physical[i++] = solution.p_gen[g];
  return scale(physical, scaling);
}

std::pair<MlpModel, TrainHistory> train(const scen::LabeledDataset& trainset,
                                        const net::Network& net,
                                        const TrainConfig& config) {
  const std::size_t n = trainset.size();
  if (n == 0) throw std::invalid_argument("empty training dataset");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(config.lr_end <= config.lr_start) || !(config.lr_end > 0))
    throw std::invalid_argument("need 0 < lr_end <= lr_start");
  if (!(config.zo_delta > 0)) throw std::invalid_argument("zo_delta must be positive");

  std::vector<int> dims{input_dim(net)};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(output_dim(net));
  const OutputScaling scaling = setpoint_scaling(net);
  MlpModel model = init_model(dims, scaling, rng::derive_seed(config.seed, "init"));

  std::vector<Eigen::VectorXd> inputs(n), targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    inputs[i] = scenario_input(trainset.scenarios[i]);
    targets[i] = solution_targets01(net, trainset.solutions[i], scaling);
  }
  const pf::PfInit init = pf::flat_init(net);

  rng::Engine shuffle_eng(rng::derive_seed(config.seed, "shuffle"));
  rng::Engine zo_eng(rng::derive_seed(config.seed, "zero-order"));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(config.batch_size, 1)), n);

  TrainHistory history;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    const bool with_penalty = epoch >= config.penalty_start_epoch;

    // Fisher-Yates with the dedicated engine; identical order per seed.
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_eng() % i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_pred = 0.0, epoch_pen = 0.0;
    std::size_t pen_count = 0;

    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      const std::size_t bsz = end - start;

      Gradients total = Gradients::zero(model);
      double batch_pred = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        Gradients g;
        batch_pred += prediction_loss(model, inputs[order[k]], targets[order[k]], &g);
        total.accumulate(g, 1.0 / static_cast<double>(bsz));
      }
      epoch_pred += batch_pred;

      if (with_penalty) {
        // Pre-draw directions in index order so evaluation can run in any
        // schedule without changing the result.
        std::vector<Eigen::VectorXd> outs(bsz), directions(bsz);
        for (std::size_t k = 0; k < bsz; ++k) {
          outs[k] = forward(model, inputs[order[start + k]]);
          directions[k] = rng::unit_sphere(zo_eng, model.output_dim());
        }
        std::vector<double> plus(bsz), minus(bsz);
        parallel_for(bsz, config.jobs, [&](std::size_t k) {
          const auto& sc = trainset.scenarios[order[start + k]];
          auto eval = [&](const Eigen::VectorXd& y01) {
            return total_penalty(net, sc,
                                 outputs_to_setpoint(net, unscale(y01, scaling)),
                                 init, config.nonconverged_penalty);
          };
          const double d = config.zo_delta;
          plus[k] = eval(outs[k] + d * directions[k]);
          minus[k] = eval(outs[k] - d * directions[k]);
        });
        const double m = static_cast<double>(model.output_dim());
        for (std::size_t k = 0; k < bsz; ++k) {
          const Eigen::VectorXd zo = (m / (2.0 * config.zo_delta)) *
                                     (plus[k] - minus[k]) * directions[k];
          const Gradients g =
              backprop_output_gradient(model, inputs[order[start + k]], zo);
          total.accumulate(g, config.penalty_weight / static_cast<double>(bsz));
          epoch_pen += 0.5 * (plus[k] + minus[k]);
        }
        pen_count += bsz;
      }

      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        model.weights[l] -= lr * total.w[l];
        model.biases[l] -= lr * total.b[l];
      }
    }

    history.pred_loss.push_back(epoch_pred / static_cast<double>(n));
    history.pen_loss.push_back(
        pen_count > 0 ? epoch_pen / static_cast<double>(pen_count) : 0.0);
    history.lr.push_back(lr);
  }
  return {std::move(model), std::move(history)};
}

Prediction predict_dispatch(const MlpModel& model, const net::Network& net,
                            const LoadScenario& scenario, const pf::PfInit& init) {
  const auto t0 = std::chrono::steady_clock::now();

  const Eigen::VectorXd raw = forward(model, scenario_input(scenario));
  const Eigen::VectorXd physical = unscale(raw, model.scaling);
  const pf::PfSetpoint setpoint = outputs_to_setpoint(net, physical);

  Prediction pred;
  pf::PfSolution sol;
  bool pf_ok = true;
  try {
    sol = pf::solve_pf(net, scenario, setpoint, init);
  } catch (const pf::PfError&) {
    pf_ok = false;
  }

  const auto t1 = std::chrono::steady_clock::now();
  pred.elapsed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  auto& out = pred.solution;
  const Eigen::Index ng = static_cast<Eigen::Index>(net.generators().size());
  out.p_gen = Eigen::VectorXd::Zero(ng);
  const auto& nonslack = net.nonslack_gen_indices();
  for (std::size_t k = 0; k < nonslack.size(); ++k)
    out.p_gen[nonslack[k]] = setpoint.p_set[static_cast<Eigen::Index>(k)];

  if (!pf_ok || !sol.converged) {
    out.status = opf::SolveStatus::INFEASIBLE;
    out.q_gen = Eigen::VectorXd::Zero(ng);
    out.v_mag = Eigen::VectorXd::Zero(net.n_buses());
    out.theta = Eigen::VectorXd::Zero(net.n_buses());
    return pred;
  }

  const int slack = net.slack_index();
  const auto& slack_gens = net.generators_at(slack);
  double range = 0.0;
  for (int g : slack_gens)
    range += net.generators()[static_cast<std::size_t>(g)].p_max -
             net.generators()[static_cast<std::size_t>(g)].p_min;
  for (int g : slack_gens) {
    const auto& gen = net.generators()[static_cast<std::size_t>(g)];
    const double share = range > 0 ? (gen.p_max - gen.p_min) / range
                                   : 1.0 / static_cast<double>(slack_gens.size());
    out.p_gen[g] = sol.p_slack * share;
  }
  out.q_gen = sol.q_gen;
  out.v_mag = sol.v_mag;
  out.theta = sol.theta;
  out.status = opf::SolveStatus::OPTIMAL;  // complete, PF-consistent assignment
  out.objective = 0.0;
  for (Eigen::Index g = 0; g < ng; ++g)
    out.objective += net.generators()[static_cast<std::size_t>(g)].cost.value(
        out.p_gen[g] * net.base_mva());
  return pred;
}

void save_model(const MlpModel& model, const std::string& path,
                std::uint64_t seed_provenance) {
  json header{{"format", "gridlearn-mlp-v1"},
              {"dims", model.dims},
              {"scaling_lo", std::vector<double>(model.scaling.lo.begin(),
                                                 model.scaling.lo.end())},
              {"scaling_hi", std::vector<double>(model.scaling.hi.begin(),
                                                 model.scaling.hi.end())},
              {"seed", seed_provenance}};
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  const auto len = static_cast<std::uint32_t>(head.size());
  char len_bytes[4];
  std::memcpy(len_bytes, &len, 4);
  out.write(len_bytes, 4);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  auto write_doubles = [&out](const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    // row-major emission regardless of Eigen's internal layout
    const auto& w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double v = w(r, c);
        write_doubles(&v, 1);
      }
    write_doubles(model.biases[l].data(),
                  static_cast<std::size_t>(model.biases[l].size()));
  }
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  char len_bytes[4];
  in.read(len_bytes, 4);
  std::uint32_t len = 0;
  std::memcpy(&len, len_bytes, 4);
  std::string head(len, '\0');
  in.read(head.data(), len);
  if (!in) throw std::runtime_error("truncated model header in '" + path + "'");
  const json header = json::parse(head);
  if (header.value("format", "") != "gridlearn-mlp-v1")
    throw std::runtime_error("'" + path + "' is not a model file");

  MlpModel model;
  model.dims = header.at("dims").get<std::vector<int>>();
  const auto lo = header.at("scaling_lo").get<std::vector<double>>();
  const auto hi = header.at("scaling_hi").get<std::vector<double>>();
  model.scaling.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(),
                                                       static_cast<Eigen::Index>(lo.size()));
  model.scaling.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(),
                                                       static_cast<Eigen::Index>(hi.size()));
  for (std::size_t l = 0; l + 1 < model.dims.size(); ++l) {
    const int rows = model.dims[l + 1], cols = model.dims[l];
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        w(r, c) = v;
      }
    Eigen::VectorXd b(rows);
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rows)));
    if (!in) throw std::runtime_error("truncated model weights in '" + path + "'");
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  return model;
}

}  // namespace gridlearn::mlp
