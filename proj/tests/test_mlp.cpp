#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "gridlearn/mlp.hpp"

using namespace gridlearn;
using mlp::MlpModel;
using mlp::OutputScaling;

namespace {

std::string fixture(const std::string& name) {
  return std::string(GRIDLEARN_FIXTURE_DIR) + "/" + name;
}

OutputScaling unit_scaling(int dim) {
  OutputScaling s;
  s.lo = Eigen::VectorXd::Zero(dim);
  s.hi = Eigen::VectorXd::Ones(dim);
  return s;
}

LoadScenario nine_bus_nominal() {
  LoadScenario s;
  s.p_load = Eigen::VectorXd(6);
  s.q_load = Eigen::VectorXd(6);
  s.p_load << 0.0, 0.9, 0.0, 1.0, 0.0, 1.25;
  s.q_load << 0.0, 0.3, 0.0, 0.35, 0.0, 0.5;
  return s;
}

}  // namespace

TEST_CASE("weight initialization respects the per-layer uniform bound") {
  const MlpModel model = mlp::init_model({4, 8, 2}, unit_scaling(2), 42);
  const double bound0 = std::sqrt(1.0 / 8.0);
  const double bound1 = std::sqrt(1.0 / 2.0);
  CHECK(model.weights[0].cwiseAbs().maxCoeff() <= bound0);
  CHECK(model.biases[0].cwiseAbs().maxCoeff() <= bound0);
  CHECK(model.weights[1].cwiseAbs().maxCoeff() <= bound1);
  // identical under the same seed
  const MlpModel again = mlp::init_model({4, 8, 2}, unit_scaling(2), 42);
  CHECK(model.weights[0] == again.weights[0]);
  CHECK(model.biases[1] == again.biases[1]);
  const MlpModel other = mlp::init_model({4, 8, 2}, unit_scaling(2), 43);
  CHECK(model.weights[0] != other.weights[0]);
}

TEST_CASE("initialization is centered: large-sample mean near zero") {
  // 100800 entries in one layer; SE of the mean of Unif(-a,a) is a/sqrt(3n).
  const MlpModel model = mlp::init_model({300, 336}, unit_scaling(336), 7);
  const double a = std::sqrt(1.0 / 336.0);
  const double n = 300.0 * 336.0;
  const double se = a / std::sqrt(3.0 * n);
  CHECK(std::abs(model.weights[0].mean()) < 3.0 * se);
}

TEST_CASE("forward of an all-zero model is sigmoid(0) = 0.5 everywhere") {
  MlpModel model = mlp::init_model({3, 4, 2}, unit_scaling(2), 1);
  for (auto& w : model.weights) w.setZero();
  for (auto& b : model.biases) b.setZero();
  const Eigen::VectorXd out = mlp::forward(model, Eigen::Vector3d{0.3, -0.7, 2.0});
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 0.5);
}

TEST_CASE("single-layer identity model maps zero input to 0.5") {
  MlpModel model = mlp::init_model({1, 1}, unit_scaling(1), 1);
  model.weights[0](0, 0) = 1.0;
  model.biases[0][0] = 0.0;
  CHECK(mlp::forward(model, Eigen::VectorXd::Zero(1))[0] == 0.5);
}

TEST_CASE("forward matches an independent matrix-arithmetic evaluation") {
  const MlpModel model = mlp::init_model({3, 5, 2}, unit_scaling(2), 99);
  std::mt19937_64 mt(5);
  Eigen::Vector3d x;
  for (int i = 0; i < 3; ++i) x[i] = 2.0 * ((mt() >> 11) * 0x1.0p-53) - 1.0;

  // hand-rolled: explicit loops, no shared code with the implementation
  double h[5];
  for (int r = 0; r < 5; ++r) {
    double z = model.biases[0][r];
    for (int c = 0; c < 3; ++c) z += model.weights[0](r, c) * x[c];
    h[r] = z > 0 ? z : 0.0;
  }
  double expected[2];
  for (int r = 0; r < 2; ++r) {
    double z = model.biases[1][r];
    for (int c = 0; c < 5; ++c) z += model.weights[1](r, c) * h[c];
    expected[r] = 1.0 / (1.0 + std::exp(-z));
  }

  const Eigen::VectorXd out = mlp::forward(model, x);
  CHECK(std::abs(out[0] - expected[0]) < 1e-12);
  CHECK(std::abs(out[1] - expected[1]) < 1e-12);
}

TEST_CASE("unscale maps (0,1) into the operating box and inverts exactly") {
  OutputScaling s;
  s.lo = Eigen::VectorXd::Constant(1, 0.9);
  s.hi = Eigen::VectorXd::Constant(1, 1.1);
  CHECK(mlp::unscale(Eigen::VectorXd::Constant(1, 0.5), s)[0] == doctest::Approx(1.0));
  CHECK(mlp::unscale(Eigen::VectorXd::Zero(1), s)[0] == doctest::Approx(0.9));

  std::mt19937_64 mt(8);
  OutputScaling rs;
  rs.lo = Eigen::VectorXd(4);
  rs.hi = Eigen::VectorXd(4);
  for (int i = 0; i < 4; ++i) {
    rs.lo[i] = -2.0 + 3.0 * ((mt() >> 11) * 0x1.0p-53);
    rs.hi[i] = rs.lo[i] + 0.5 + ((mt() >> 11) * 0x1.0p-53);
  }
  Eigen::VectorXd raw(4);
  for (int i = 0; i < 4; ++i) raw[i] = (mt() >> 11) * 0x1.0p-53;
  const Eigen::VectorXd round = mlp::scale(mlp::unscale(raw, rs), rs);
  CHECK((round - raw).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("prediction loss value and the two trivial cases") {
  // one-output model pinned to emit 0.6
  MlpModel model = mlp::init_model({1, 1}, unit_scaling(1), 3);
  model.weights[0](0, 0) = 0.0;
  model.biases[0][0] = std::log(0.6 / 0.4);
  const Eigen::VectorXd input = Eigen::VectorXd::Zero(1);

  mlp::Gradients grads;
  const double loss =
      mlp::prediction_loss(model, input, Eigen::VectorXd::Constant(1, 0.5), &grads);
  CHECK(loss == doctest::Approx(0.01));

  const Eigen::VectorXd out = mlp::forward(model, input);
  mlp::Gradients zero_grads;
  const double zero_loss = mlp::prediction_loss(model, input, out, &zero_grads);
  CHECK(zero_loss == doctest::Approx(0.0));
  CHECK(zero_grads.w[0].cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(zero_grads.b[0].cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("backprop matches central finite differences on twenty random models") {
  std::mt19937_64 mt(1234);
  auto u = [&](double lo, double hi) {
    return lo + (hi - lo) * ((mt() >> 11) * 0x1.0p-53);
  };
  int checked_models = 0;
  while (checked_models < 20) {
    const int din = 2 + int(mt() % 3);
    const int dh = 3 + int(mt() % 4);
    const int dout = 1 + int(mt() % 3);
    MlpModel model = mlp::init_model({din, dh, dout}, unit_scaling(dout), mt());

    Eigen::VectorXd input(din), target(dout);
    for (int i = 0; i < din; ++i) input[i] = u(-1.0, 1.0);
    for (int i = 0; i < dout; ++i) target[i] = u(0.1, 0.9);

    // keep clear of ReLU kinks so the difference quotient is meaningful
    const Eigen::VectorXd z = model.weights[0] * input + model.biases[0];
    if (z.cwiseAbs().minCoeff() < 1e-3) continue;
    ++checked_models;

    mlp::Gradients grads;
    mlp::prediction_loss(model, input, target, &grads);

    const double h = 1e-6;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r)
        for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) {
          MlpModel p = model, m = model;
          p.weights[l](r, c) += h;
          m.weights[l](r, c) -= h;
          const double fd = (mlp::prediction_loss(p, input, target) -
                             mlp::prediction_loss(m, input, target)) /
                            (2 * h);
          const double an = grads.w[l](r, c);
          CHECK(std::abs(an - fd) <= 1e-5 * std::max({std::abs(an), std::abs(fd), 1e-4}));
        }
      for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) {
        MlpModel p = model, m = model;
        p.biases[l][r] += h;
        m.biases[l][r] -= h;
        const double fd = (mlp::prediction_loss(p, input, target) -
                           mlp::prediction_loss(m, input, target)) /
                          (2 * h);
        const double an = grads.b[l][r];
        CHECK(std::abs(an - fd) <= 1e-5 * std::max({std::abs(an), std::abs(fd), 1e-4}));
      }
    }
  }
}

TEST_CASE("penalty term measures distance outside the box") {
  CHECK(mlp::penalty_term(1.2, 0.9, 1.0) == doctest::Approx(0.2));
  CHECK(mlp::penalty_term(0.95, 0.9, 1.0) == 0.0);
  CHECK(mlp::penalty_term(0.8, 0.9, 1.0) == doctest::Approx(0.1));
  std::mt19937_64 mt(2);
  for (int i = 0; i < 200; ++i) {
    const double lo = -1.0 + 2.0 * ((mt() >> 11) * 0x1.0p-53);
    const double hi = lo + (mt() >> 11) * 0x1.0p-53;
    const double v = -2.0 + 4.0 * ((mt() >> 11) * 0x1.0p-53);
    const double p = mlp::penalty_term(v, lo, hi);
    CHECK(p >= 0.0);
    CHECK((p == 0.0) == (v >= lo && v <= hi));
  }
}

TEST_CASE("total penalty is zero at the ground-truth optimum") {
  const net::Network net = net::load_case_file(fixture("case9.json"));
  const LoadScenario s = nine_bus_nominal();
  const auto opt = opf::solve_opf(net, s);
  REQUIRE(opt.status == opf::SolveStatus::OPTIMAL);

  Eigen::VectorXd physical(mlp::output_dim(net));
  Eigen::Index i = 0;
  for (int bus : net.gen_bus_indices()) physical[i++] = opt.v_mag[bus];
  for (int g : net.nonslack_gen_indices()) physical[i++] = opt.p_gen[g];

  const double pen = mlp::total_penalty(net, s, mlp::outputs_to_setpoint(net, physical),
                                        pf::flat_init(net));
  CHECK(pen < 1e-6);
}

TEST_CASE("slack excess shows up unaveraged in the total penalty") {
  // lossless two-bus with the slack box ending 0.05 below the load
  const net::Network net = net::load_case(R"({
    "base_mva": 100.0,
    "buses": [
      {"id": 1, "kind": "SLACK", "v_min": 0.9, "v_max": 1.1, "base_kv": 138.0},
      {"id": 2, "kind": "PQ",    "v_min": 0.9, "v_max": 1.1, "base_kv": 138.0}
    ],
    "generators": [
      {"bus": 1, "p_min": 0.0, "p_max": 45.0, "q_min": -80.0, "q_max": 80.0,
       "fuel": "HYDRO", "cost": [0.0, 6.724778, 0.0]}
    ],
    "branches": [
      {"from": 1, "to": 2, "r": 0.0, "x": 0.1, "b_sh": 0.0, "s_max": 0.0, "tap": 1.0}
    ]
  })");
  LoadScenario s;
  s.p_load = Eigen::VectorXd::Constant(1, 0.5);
  s.q_load = Eigen::VectorXd::Zero(1);
  pf::PfSetpoint sp;
  sp.v_set = Eigen::VectorXd::Ones(1);
  sp.p_set = Eigen::VectorXd(0);
  const double pen = mlp::total_penalty(net, s, sp, pf::flat_init(net));
  CHECK(pen == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("a doubled branch violation doubles its penalty contribution") {
  const net::Network base = net::load_case_file(fixture("case9.json"));
  const LoadScenario s = nine_bus_nominal();
  pf::PfSetpoint sp;
  sp.v_set = Eigen::Vector3d{1.0, 1.0, 1.0};
  sp.p_set = Eigen::Vector2d{1.63, 0.85};

  // measure the nominal flow on branch 0, then set limits below it
  const auto sol = pf::solve_pf(base, s, sp, pf::flat_init(base));
  REQUIRE(sol.converged);
  const auto flows = pf::branch_flows(base, sol.v_mag, sol.theta);
  const double f0 = std::max(std::abs(flows[0].s_from), std::abs(flows[0].s_to));

  auto with_limit = [&](double limit) {
    auto branches = base.branches();
    branches[0].s_max = limit;
    const net::Network n(base.buses(), base.generators(), std::move(branches),
                         base.base_mva());
    return mlp::total_penalty(n, s, sp, pf::flat_init(n));
  };
  const double pen_clean = with_limit(f0 + 1.0);
  const double pen_one = with_limit(f0 - 0.1);
  const double pen_two = with_limit(f0 - 0.2);
  CHECK(pen_one - pen_clean == doctest::Approx(0.1 / 9.0).epsilon(1e-6));
  CHECK(pen_two - pen_clean == doctest::Approx(0.2 / 9.0).epsilon(1e-6));
}

TEST_CASE("zero-order estimate is exact for a one-dimensional quadratic") {
  rng::Engine eng(5);
  auto quad = [](const Eigen::VectorXd& y) { return y[0] * y[0]; };
  const Eigen::VectorXd g = mlp::zero_order_gradient(
      quad, Eigen::VectorXd::Constant(1, 1.0), 0.25, eng);
  // v is +/-1 in one dimension; the symmetric difference of a quadratic is exact
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-12));

  rng::Engine eng2(6);
  auto constant = [](const Eigen::VectorXd&) { return 3.7; };
  const Eigen::VectorXd zero = mlp::zero_order_gradient(
      constant, Eigen::VectorXd::Constant(1, 0.3), 1e-3, eng2);
  CHECK(zero[0] == 0.0);
}

TEST_CASE("zero-order estimates average to the analytic quadratic gradient") {
  // L(y) = y'Ay + b'y in five dimensions; grad = (A + A')y + b
  Eigen::MatrixXd a(5, 5);
  a << 2.0, 0.3, 0.1, 0.0, 0.2,
       0.3, 1.5, 0.2, 0.1, 0.0,
       0.1, 0.2, 1.8, 0.3, 0.1,
       0.0, 0.1, 0.3, 2.2, 0.2,
       0.2, 0.0, 0.1, 0.2, 1.6;
  Eigen::VectorXd b(5);
  b << 1.0, -2.0, 0.5, 1.5, -1.0;
  Eigen::VectorXd y(5);
  y << 0.8, -0.4, 1.2, 0.3, -0.9;
  auto quad = [&](const Eigen::VectorXd& v) {
    return double(v.transpose() * a * v) + b.dot(v);
  };
  const Eigen::VectorXd analytic = (a + a.transpose()) * y + b;

  rng::Engine eng(31415);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  const int n = 10000;
  for (int k = 0; k < n; ++k)
    mean += mlp::zero_order_gradient(quad, y, 1e-3, eng);
  mean /= double(n);
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(mean[i] - analytic[i]) <= 0.05 * std::abs(analytic[i]));
}

TEST_CASE("learning rate is log-spaced between the endpoints") {
  mlp::TrainConfig config;
  config.epochs = 200;
  config.lr_start = 1e-4;
  config.lr_end = 1e-9;
  CHECK(mlp::learning_rate(config, 1) == doctest::Approx(1e-4));
  CHECK(mlp::learning_rate(config, 200) == doctest::Approx(1e-9));
  CHECK(mlp::learning_rate(config, 100) ==
        doctest::Approx(std::pow(10.0, -4.0 - 5.0 * 99.0 / 199.0)));
}

namespace {

// Hand-made labeled data on the merit-order case: targets are a smooth
// function of the loads, everything strictly inside the operating boxes.
scen::LabeledDataset toy_dataset(const net::Network& net, int n) {
  scen::LabeledDataset data;
  std::mt19937_64 mt(77);
  for (int i = 0; i < n; ++i) {
    LoadScenario s;
    s.p_load = Eigen::VectorXd::Constant(1, 0.3 + 0.4 * ((mt() >> 11) * 0x1.0p-53));
    s.q_load = Eigen::VectorXd::Constant(1, 0.05 + 0.1 * ((mt() >> 11) * 0x1.0p-53));
    s.tag = "t" + std::to_string(i);

    opf::DispatchSolution sol;
    sol.v_mag = Eigen::VectorXd::Constant(3, 1.0);
    sol.v_mag[0] = 0.95 + 0.1 * s.p_load[0];   // linear in the load
    sol.v_mag[1] = 1.05 - 0.1 * s.p_load[0];
    sol.theta = Eigen::VectorXd::Zero(3);
    sol.p_gen = Eigen::VectorXd::Zero(2);
    sol.p_gen[1] = 0.05 + 0.5 * s.p_load[0];   // within [0, 0.4]
    sol.q_gen = Eigen::VectorXd::Zero(2);
    sol.status = opf::SolveStatus::OPTIMAL;
    data.scenarios.push_back(std::move(s));
    data.solutions.push_back(std::move(sol));
  }
  return data;
}

}  // namespace

TEST_CASE("pure-MSE full-batch training decreases the loss monotonically") {
  const net::Network net = net::load_case_file(fixture("case3merit.json"));
  const auto data = toy_dataset(net, 64);

  mlp::TrainConfig config;
  config.hidden = {16};
  config.epochs = 60;
  config.lr_start = 0.5;
  config.lr_end = 0.05;
  config.penalty_start_epoch = 1000;  // never
  config.batch_size = 64;             // full batch
  config.seed = 4;

  const auto [model, history] = mlp::train(data, net, config);
  REQUIRE(history.pred_loss.size() == 60);
  for (std::size_t e = 1; e < history.pred_loss.size(); ++e)
    CHECK(history.pred_loss[e] <= history.pred_loss[e - 1] + 1e-12);
  CHECK(history.pred_loss.back() < history.pred_loss.front());
  CHECK(history.pen_loss.back() == 0.0);
}

TEST_CASE("a single sample is memorized to near-zero loss") {
  const net::Network net = net::load_case_file(fixture("case3merit.json"));
  const auto data = toy_dataset(net, 1);

  mlp::TrainConfig config;
  config.hidden = {8};
  config.epochs = 2000;
  config.lr_start = 1.0;
  config.lr_end = 0.01;
  config.penalty_start_epoch = 10000;
  config.batch_size = 1;
  config.seed = 9;

  const auto [model, history] = mlp::train(data, net, config);
  CHECK(history.pred_loss.back() < 1e-6);
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
  const net::Network net = net::load_case_file(fixture("case3merit.json"));
  const auto data = toy_dataset(net, 32);

  mlp::TrainConfig config;
  config.hidden = {8};
  config.epochs = 12;
  config.lr_start = 0.2;
  config.lr_end = 0.05;
  config.penalty_start_epoch = 9;  // exercise the penalty path too
  config.penalty_weight = 0.1;
  config.batch_size = 16;
  config.seed = 31;
  config.jobs = 1;

  const auto [model_a, hist_a] = mlp::train(data, net, config);
  const auto [model_b, hist_b] = mlp::train(data, net, config);
  CHECK(hist_a.pred_loss == hist_b.pred_loss);
  CHECK(hist_a.pen_loss == hist_b.pen_loss);
  for (std::size_t l = 0; l < model_a.weights.size(); ++l)
    CHECK(model_a.weights[l] == model_b.weights[l]);

  // concurrent penalty evaluation must not change the outcome
  mlp::TrainConfig config4 = config;
  config4.jobs = 4;
  const auto [model_c, hist_c] = mlp::train(data, net, config4);
  CHECK(hist_a.pen_loss == hist_c.pen_loss);
  for (std::size_t l = 0; l < model_a.weights.size(); ++l)
    CHECK(model_a.weights[l] == model_c.weights[l]);
}

TEST_CASE("unscaled outputs always respect the setpoint limits") {
  const net::Network net = net::load_case_file(fixture("case9.json"));
  const auto scaling = mlp::setpoint_scaling(net);
  const MlpModel model = mlp::init_model({mlp::input_dim(net), 24, mlp::output_dim(net)},
                                         scaling, 1001);
  std::mt19937_64 mt(55);
  for (int trial = 0; trial < 10000; ++trial) {
    Eigen::VectorXd input(model.input_dim());
    for (Eigen::Index i = 0; i < input.size(); ++i)
      input[i] = -2.0 + 6.0 * ((mt() >> 11) * 0x1.0p-53);
    const Eigen::VectorXd physical = mlp::unscale(mlp::forward(model, input),
                                                  model.scaling);
    for (Eigen::Index i = 0; i < physical.size(); ++i) {
      CHECK(physical[i] >= scaling.lo[i]);
      CHECK(physical[i] <= scaling.hi[i]);
    }
  }
}

TEST_CASE("a memorizing model reproduces its label's dispatch cost") {
  const net::Network net = net::load_case_file(fixture("case9.json"));
  const LoadScenario s = nine_bus_nominal();
  const auto labeled = scen::label({s}, net, scen::WarmPolicy::FLAT, 1);
  REQUIRE(labeled.size() == 1);

  mlp::TrainConfig config;
  config.hidden = {32};
  config.epochs = 4000;
  config.lr_start = 2.0;
  config.lr_end = 0.05;
  config.penalty_start_epoch = 100000;
  config.batch_size = 1;
  config.seed = 2;

  const auto [model, history] = mlp::train(labeled, net, config);
  const auto pred = mlp::predict_dispatch(model, net, s, pf::flat_init(net));
  REQUIRE(pred.solution.status == opf::SolveStatus::OPTIMAL);
  CHECK(pred.elapsed_ms > 0.0);
  const double truth = labeled.solutions[0].objective;
  CHECK(std::abs(pred.solution.objective - truth) / truth < 1e-3);
}

TEST_CASE("model files round-trip bit-exactly") {
  const net::Network net = net::load_case_file(fixture("case9.json"));
  const auto scaling = mlp::setpoint_scaling(net);
  const MlpModel model = mlp::init_model({12, 16, 8, 5}, scaling, 77);
  const std::string path = std::string(GRIDLEARN_FIXTURE_DIR) + "/tmp_model.bin";
  mlp::save_model(model, path, 77);
  const MlpModel back = mlp::load_model(path);
  CHECK(back.dims == model.dims);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    CHECK(back.weights[l] == model.weights[l]);
    CHECK(back.biases[l] == model.biases[l]);
  }
  CHECK(back.scaling.lo == model.scaling.lo);
  CHECK(back.scaling.hi == model.scaling.hi);
  std::remove(path.c_str());
}
