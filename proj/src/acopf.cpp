#include "gridlearn/acopf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace gridlearn::opf {

using Complex = std::complex<double>;

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::OPTIMAL: return "OPTIMAL";
    case SolveStatus::INFEASIBLE: return "INFEASIBLE";
    case SolveStatus::MAX_ITER: return "MAX_ITER";
  }
  return "INFEASIBLE";
}

SolveStatus solve_status_from(const std::string& s) {
  if (s == "OPTIMAL") return SolveStatus::OPTIMAL;
  if (s == "MAX_ITER") return SolveStatus::MAX_ITER;
  return SolveStatus::INFEASIBLE;
}

net::Network relax_branch_limits(const net::Network& net, double level) {
  auto branches = net.branches();
  for (auto& br : branches) br.s_max = level;
  return net::Network(net.buses(), net.generators(), std::move(branches),
                      net.base_mva());
}

namespace detail {

namespace {

// Hessian blocks of lam' * S(V) in polar coordinates; complex, ordered
// (angle, magnitude). The caller takes real/imag parts per multiplier class.
struct BusHessian {
  Eigen::MatrixXcd aa, av, va, vv;
};

BusHessian d2sbus_dv2(const Eigen::MatrixXcd& ybus, const Eigen::VectorXcd& v,
                      const Eigen::VectorXcd& lam) {
  const Eigen::Index n = v.size();
  const Eigen::VectorXcd ibus = ybus * v;

  const Eigen::MatrixXcd diag_v = v.asDiagonal();
  const Eigen::MatrixXcd diag_lam = lam.asDiagonal();
  const Eigen::MatrixXcd a = (lam.cwiseProduct(v)).asDiagonal();
  const Eigen::MatrixXcd b = ybus * diag_v;
  const Eigen::MatrixXcd c = a * b.conjugate();
  const Eigen::MatrixXcd d = ybus.adjoint() * diag_v;
  const Eigen::MatrixXcd e =
      diag_v.conjugate() * (d * diag_lam - Eigen::MatrixXcd((d * lam).asDiagonal()));
  const Eigen::MatrixXcd f =
      c - a * Eigen::MatrixXcd(ibus.conjugate().asDiagonal());
  Eigen::VectorXd inv_vm(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_vm[i] = 1.0 / std::abs(v[i]);
  const Eigen::MatrixXcd gm = inv_vm.cast<Complex>().asDiagonal();

  BusHessian out;
  out.aa = e + f;
  out.va = Complex(0, 1) * gm * (e - f);
  out.av = out.va.transpose();
  out.vv = gm * (c + c.transpose()) * gm;
  return out;
}

// Hessian blocks of w' * Sbr(V) for branch-end powers Sbr = diag(C V) conj(Ybr V).
BusHessian d2sbr_dv2(const std::vector<int>& end_bus, const Eigen::MatrixXcd& ybr,
                     const Eigen::VectorXcd& v, const Eigen::VectorXcd& w) {
  const Eigen::Index n = v.size();
  const Eigen::Index nbr = static_cast<Eigen::Index>(end_bus.size());

  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);  // Ybr^H diag(w) C
  for (Eigen::Index k = 0; k < nbr; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      if (ybr(k, i) != Complex(0, 0))
        a(i, end_bus[static_cast<std::size_t>(k)]) += std::conj(ybr(k, i)) * w[k];

  const Eigen::MatrixXcd diag_v = v.asDiagonal();
  const Eigen::MatrixXcd b = diag_v.conjugate() * a * diag_v;
  const Eigen::MatrixXcd dm = ((a * v).cwiseProduct(v.conjugate())).asDiagonal();
  const Eigen::MatrixXcd em =
      ((a.transpose() * v.conjugate()).cwiseProduct(v)).asDiagonal();
  const Eigen::MatrixXcd f = b + b.transpose();
  Eigen::VectorXd inv_vm(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_vm[i] = 1.0 / std::abs(v[i]);
  const Eigen::MatrixXcd gm = inv_vm.cast<Complex>().asDiagonal();

  BusHessian out;
  out.aa = f - dm - em;
  out.va = Complex(0, 1) * gm * (b - b.transpose() - dm + em);
  out.av = out.va.transpose();
  out.vv = gm * f * gm;
  return out;
}

// First derivatives of branch-end complex power w.r.t. all angles/magnitudes.
struct BranchDerivatives {
  Eigen::VectorXcd sbr;      // complex power at the constrained end
  Eigen::MatrixXcd ds_dva;   // nbr x n
  Eigen::MatrixXcd ds_dvm;
};

BranchDerivatives dsbr_dv(const std::vector<int>& end_bus, const Eigen::MatrixXcd& ybr,
                          const Eigen::VectorXcd& v) {
  const Eigen::Index n = v.size();
  const Eigen::Index nbr = static_cast<Eigen::Index>(end_bus.size());
  const Eigen::VectorXcd ibr = ybr * v;

  Eigen::VectorXcd vnorm(n);
  for (Eigen::Index i = 0; i < n; ++i) vnorm[i] = v[i] / std::abs(v[i]);

  BranchDerivatives out;
  out.sbr.resize(nbr);
  out.ds_dva = Eigen::MatrixXcd::Zero(nbr, n);
  out.ds_dvm = Eigen::MatrixXcd::Zero(nbr, n);
  for (Eigen::Index k = 0; k < nbr; ++k) {
    const int eb = end_bus[static_cast<std::size_t>(k)];
    const Complex vb = v[eb];
    out.sbr[k] = vb * std::conj(ibr[k]);
    for (Eigen::Index c = 0; c < n; ++c) {
      const Complex y = ybr(k, c);
      Complex dva(0, 0), dvm(0, 0);
      if (y != Complex(0, 0)) {
        dva += -vb * std::conj(y * v[c]);
        dvm += vb * std::conj(y * vnorm[c]);
      }
      if (c == eb) {
        dva += std::conj(ibr[k]) * vb;
        dvm += std::conj(ibr[k]) * vnorm[c];
      }
      out.ds_dva(k, c) = Complex(0, 1) * dva;
      out.ds_dvm(k, c) = dvm;
    }
  }
  return out;
}

}  // namespace

OpfProblem::OpfProblem(const net::Network& net, const LoadScenario& scenario)
    : net_(net),
      ybus_(net::build_ybus(net)),
      load_(pf::scenario_injections(net, scenario)) {
  const int slack = net.slack_index();
  for (int i = 0; i < net.n_buses(); ++i)
    if (i != slack) nonslack_.push_back(i);
  for (std::size_t k = 0; k < net.branches().size(); ++k)
    if (net.branches()[k].s_max > 0.0) limited_.push_back(static_cast<int>(k));

  n_ = net.n_buses();
  ng_ = static_cast<Eigen::Index>(net.generators().size());
  nth_ = static_cast<Eigen::Index>(nonslack_.size());
  nlim_ = static_cast<Eigen::Index>(limited_.size());
  nx_ = nth_ + n_ + 2 * ng_;
  neq_ = 2 * n_;
  niq_ = 2 * n_ + 4 * ng_ + 2 * nlim_;
}

Eigen::VectorXd OpfProblem::flat_start() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nx_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    const auto& bus = net_.buses()[static_cast<std::size_t>(i)];
    x[nth_ + i] = std::clamp(1.0, bus.v_min, bus.v_max);
  }
  for (Eigen::Index g = 0; g < ng_; ++g) {
    const auto& gen = net_.generators()[static_cast<std::size_t>(g)];
    x[nth_ + n_ + g] = 0.5 * (gen.p_min + gen.p_max);
    x[nth_ + n_ + ng_ + g] = 0.5 * (gen.q_min + gen.q_max);
  }
  return x;
}

Eigen::VectorXd OpfProblem::pack(const DispatchSolution& sol) const {
  Eigen::VectorXd x(nx_);
  for (Eigen::Index k = 0; k < nth_; ++k)
    x[k] = sol.theta[nonslack_[static_cast<std::size_t>(k)]];
  x.segment(nth_, n_) = sol.v_mag;
  x.segment(nth_ + n_, ng_) = sol.p_gen;
  x.segment(nth_ + n_ + ng_, ng_) = sol.q_gen;
  return x;
}

void OpfProblem::unpack(const Eigen::VectorXd& x, DispatchSolution& sol) const {
  sol.theta = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index k = 0; k < nth_; ++k)
    sol.theta[nonslack_[static_cast<std::size_t>(k)]] = x[k];
  sol.v_mag = x.segment(nth_, n_);
  sol.p_gen = x.segment(nth_ + n_, ng_);
  sol.q_gen = x.segment(nth_ + n_ + ng_, ng_);
}

double OpfProblem::objective(const Eigen::VectorXd& x) const {
  const double base = net_.base_mva();
  double f = 0.0;
  for (Eigen::Index g = 0; g < ng_; ++g)
    f += net_.generators()[static_cast<std::size_t>(g)].cost.value(
        x[nth_ + n_ + g] * base);
  return f;
}

ProblemEval OpfProblem::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                             const Eigen::VectorXd& mu, bool with_hessian) const {
  ProblemEval out;
  const double base = net_.base_mva();
  const Eigen::Index o_vm = nth_, o_pg = nth_ + n_, o_qg = nth_ + n_ + ng_;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index k = 0; k < nth_; ++k)
    theta[nonslack_[static_cast<std::size_t>(k)]] = x[k];
  const Eigen::VectorXd v_mag = x.segment(o_vm, n_);
  const Eigen::VectorXd pg = x.segment(o_pg, ng_);
  const Eigen::VectorXd qg = x.segment(o_qg, ng_);

  // objective and its derivatives
  out.f = 0.0;
  out.grad_f = Eigen::VectorXd::Zero(nx_);
  Eigen::VectorXd hess_f_pg = Eigen::VectorXd::Zero(ng_);
  for (Eigen::Index g = 0; g < ng_; ++g) {
    const auto& cost = net_.generators()[static_cast<std::size_t>(g)].cost;
    out.f += cost.value(pg[g] * base);
    out.grad_f[o_pg + g] = cost.gradient(pg[g] * base) * base;
    hess_f_pg[g] = 2.0 * cost.c2 * base * base;
  }

  // power balance: S(V) + Sd - Cg * (pg + j qg) = 0
  const Eigen::VectorXcd vc = pf::complex_voltage(v_mag, theta);
  const Eigen::VectorXcd s_inj = pf::injected_power(ybus_, vc);
  Eigen::VectorXd p_gen_bus = Eigen::VectorXd::Zero(n_);
  Eigen::VectorXd q_gen_bus = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index g = 0; g < ng_; ++g) {
    const int bus = net_.index_of(net_.generators()[static_cast<std::size_t>(g)].bus_id);
    p_gen_bus[bus] += pg[g];
    q_gen_bus[bus] += qg[g];
  }
  out.g.resize(neq_);
  out.g.head(n_) = s_inj.real() + load_.real() - p_gen_bus;
  out.g.tail(n_) = s_inj.imag() + load_.imag() - q_gen_bus;

  const pf::SbusDerivatives dS = pf::dsbus_dv(ybus_, vc);
  out.jac_g = Eigen::MatrixXd::Zero(neq_, nx_);
  for (Eigen::Index b = 0; b < n_; ++b) {
    for (Eigen::Index k = 0; k < nth_; ++k) {
      const int col_bus = nonslack_[static_cast<std::size_t>(k)];
      out.jac_g(b, k) = dS.dS_dVa(b, col_bus).real();
      out.jac_g(n_ + b, k) = dS.dS_dVa(b, col_bus).imag();
    }
    for (Eigen::Index c = 0; c < n_; ++c) {
      out.jac_g(b, o_vm + c) = dS.dS_dVm(b, c).real();
      out.jac_g(n_ + b, o_vm + c) = dS.dS_dVm(b, c).imag();
    }
  }
  for (Eigen::Index g = 0; g < ng_; ++g) {
    const int bus = net_.index_of(net_.generators()[static_cast<std::size_t>(g)].bus_id);
    out.jac_g(bus, o_pg + g) = -1.0;
    out.jac_g(n_ + bus, o_qg + g) = -1.0;
  }

  // inequalities: voltage boxes, generator boxes, squared branch flows
  out.h.resize(niq_);
  out.jac_h = Eigen::MatrixXd::Zero(niq_, nx_);
  Eigen::Index row = 0;
  for (Eigen::Index b = 0; b < n_; ++b, ++row) {
    out.h[row] = v_mag[b] - net_.buses()[static_cast<std::size_t>(b)].v_max;
    out.jac_h(row, o_vm + b) = 1.0;
  }
  for (Eigen::Index b = 0; b < n_; ++b, ++row) {
    out.h[row] = net_.buses()[static_cast<std::size_t>(b)].v_min - v_mag[b];
    out.jac_h(row, o_vm + b) = -1.0;
  }
  for (Eigen::Index g = 0; g < ng_; ++g, ++row) {
    out.h[row] = pg[g] - net_.generators()[static_cast<std::size_t>(g)].p_max;
    out.jac_h(row, o_pg + g) = 1.0;
  }
  for (Eigen::Index g = 0; g < ng_; ++g, ++row) {
    out.h[row] = net_.generators()[static_cast<std::size_t>(g)].p_min - pg[g];
    out.jac_h(row, o_pg + g) = -1.0;
  }
  for (Eigen::Index g = 0; g < ng_; ++g, ++row) {
    out.h[row] = qg[g] - net_.generators()[static_cast<std::size_t>(g)].q_max;
    out.jac_h(row, o_qg + g) = 1.0;
  }
  for (Eigen::Index g = 0; g < ng_; ++g, ++row) {
    out.h[row] = net_.generators()[static_cast<std::size_t>(g)].q_min - qg[g];
    out.jac_h(row, o_qg + g) = -1.0;
  }

  // limited-branch admittance rows and end buses
  std::vector<int> fbus(static_cast<std::size_t>(nlim_)),
      tbus(static_cast<std::size_t>(nlim_));
  Eigen::MatrixXcd yf = Eigen::MatrixXcd::Zero(nlim_, n_);
  Eigen::MatrixXcd yt = Eigen::MatrixXcd::Zero(nlim_, n_);
  Eigen::VectorXd smax2(nlim_);
  for (Eigen::Index k = 0; k < nlim_; ++k) {
    const auto& br =
        net_.branches()[static_cast<std::size_t>(limited_[static_cast<std::size_t>(k)])];
    const int i = net_.index_of(br.from_bus);
    const int j = net_.index_of(br.to_bus);
    fbus[static_cast<std::size_t>(k)] = i;
    tbus[static_cast<std::size_t>(k)] = j;
    const Complex y = 1.0 / Complex(br.r, br.x);
    const Complex half(0.0, br.b_sh / 2.0);
    yf(k, i) = (y + half) / (br.tap * br.tap);
    yf(k, j) = -y / br.tap;
    yt(k, j) = y + half;
    yt(k, i) = -y / br.tap;
    smax2[k] = br.s_max * br.s_max;
  }

  BranchDerivatives df, dt;
  const Eigen::Index flow_from_row = row;
  if (nlim_ > 0) {
    df = dsbr_dv(fbus, yf, vc);
    dt = dsbr_dv(tbus, yt, vc);
    for (const auto* d : {&df, &dt}) {
      for (Eigen::Index k = 0; k < nlim_; ++k, ++row) {
        out.h[row] = std::norm(d->sbr[k]) - smax2[k];
        for (Eigen::Index c = 0; c < nth_; ++c) {
          const int col_bus = nonslack_[static_cast<std::size_t>(c)];
          out.jac_h(row, c) =
              2.0 * (std::conj(d->sbr[k]) * d->ds_dva(k, col_bus)).real();
        }
        for (Eigen::Index c = 0; c < n_; ++c)
          out.jac_h(row, o_vm + c) =
              2.0 * (std::conj(d->sbr[k]) * d->ds_dvm(k, c)).real();
      }
    }
  }

  if (!with_hessian) return out;

  // Hessian of f + lambda'g + mu'h over (theta, vm); pg enters only through f.
  const Eigen::VectorXd lam_p = lambda.head(n_);
  const Eigen::VectorXd lam_q = lambda.tail(n_);
  const BusHessian hp = d2sbus_dv2(ybus_, vc, lam_p.cast<Complex>());
  const BusHessian hq = d2sbus_dv2(ybus_, vc, lam_q.cast<Complex>());

  Eigen::MatrixXd h_aa = hp.aa.real() + hq.aa.imag();
  Eigen::MatrixXd h_av = hp.av.real() + hq.av.imag();
  Eigen::MatrixXd h_va = hp.va.real() + hq.va.imag();
  Eigen::MatrixXd h_vv = hp.vv.real() + hq.vv.imag();

  if (nlim_ > 0) {
    const Eigen::VectorXd mu_f = mu.segment(flow_from_row, nlim_);
    const Eigen::VectorXd mu_t = mu.segment(flow_from_row + nlim_, nlim_);
    const BranchDerivatives* ends[2] = {&df, &dt};
    const std::vector<int>* end_bus[2] = {&fbus, &tbus};
    const Eigen::MatrixXcd* ybr[2] = {&yf, &yt};
    const Eigen::VectorXd* mus[2] = {&mu_f, &mu_t};
    for (int side = 0; side < 2; ++side) {
      const auto& d = *ends[side];
      const Eigen::VectorXd& m = *mus[side];
      const Eigen::VectorXcd w = d.sbr.conjugate().cwiseProduct(m.cast<Complex>());
      const BusHessian hs = d2sbr_dv2(*end_bus[side], *ybr[side], vc, w);
      const Eigen::MatrixXcd md = m.cast<Complex>().asDiagonal();
      h_aa += 2.0 * (hs.aa + d.ds_dva.transpose() * md * d.ds_dva.conjugate()).real();
      h_av += 2.0 * (hs.av + d.ds_dva.transpose() * md * d.ds_dvm.conjugate()).real();
      h_va += 2.0 * (hs.va + d.ds_dvm.transpose() * md * d.ds_dva.conjugate()).real();
      h_vv += 2.0 * (hs.vv + d.ds_dvm.transpose() * md * d.ds_dvm.conjugate()).real();
    }
  }

  out.hess_l = Eigen::MatrixXd::Zero(nx_, nx_);
  for (Eigen::Index r = 0; r < nth_; ++r) {
    const int rb = nonslack_[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < nth_; ++c)
      out.hess_l(r, c) = h_aa(rb, nonslack_[static_cast<std::size_t>(c)]);
    for (Eigen::Index c = 0; c < n_; ++c) out.hess_l(r, o_vm + c) = h_av(rb, c);
  }
  for (Eigen::Index r = 0; r < n_; ++r) {
    for (Eigen::Index c = 0; c < nth_; ++c)
      out.hess_l(o_vm + r, c) = h_va(r, nonslack_[static_cast<std::size_t>(c)]);
    for (Eigen::Index c = 0; c < n_; ++c) out.hess_l(o_vm + r, o_vm + c) = h_vv(r, c);
  }
  for (Eigen::Index g = 0; g < ng_; ++g)
    out.hess_l(o_pg + g, o_pg + g) = hess_f_pg[g];
  return out;
}

}  // namespace detail

DispatchSolution solve_opf(const net::Network& net, const LoadScenario& scenario,
                           const WarmStart& warm, const OpfOptions& opts) {
  const detail::OpfProblem problem(net, scenario);
  const Eigen::Index nx = problem.nx(), neq = problem.neq(), niq = problem.niq();

  DispatchSolution sol;

  Eigen::VectorXd x = problem.flat_start();
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(neq);
  std::optional<Eigen::VectorXd> warm_mu, warm_z;
  if (warm.solution && warm.solution->v_mag.size() == net.n_buses() &&
      warm.solution->p_gen.size() ==
          static_cast<Eigen::Index>(net.generators().size())) {
    x = problem.pack(*warm.solution);
    if (warm.solution->duals && warm.solution->duals->lambda.size() == neq &&
        warm.solution->duals->mu.size() == niq) {
      lambda = warm.solution->duals->lambda;
      warm_mu = warm.solution->duals->mu;
      warm_z = warm.solution->duals->z;
    }
  } else if (warm.p_gen_hint &&
             warm.p_gen_hint->size() ==
                 static_cast<Eigen::Index>(net.generators().size())) {
    for (Eigen::Index g = 0; g < warm.p_gen_hint->size(); ++g) {
      const auto& gen = net.generators()[static_cast<std::size_t>(g)];
      x[problem.nx() - 2 * warm.p_gen_hint->size() + g] =
          std::clamp((*warm.p_gen_hint)[g], gen.p_min, gen.p_max);
    }
  }

  detail::ProblemEval ev = problem.eval(x, lambda, Eigen::VectorXd::Zero(niq), false);

  // Slack and multiplier initialization.
  const double z0 = 1.0;
  Eigen::VectorXd z(niq), mu(niq);
  for (Eigen::Index i = 0; i < niq; ++i)
    z[i] = (warm_z && (*warm_z)[i] > 0) ? (*warm_z)[i]
                                        : std::max(z0, -ev.h[i]);
  double gamma = 1.0;
  for (Eigen::Index i = 0; i < niq; ++i)
    mu[i] = (warm_mu && (*warm_mu)[i] > 0) ? (*warm_mu)[i]
                                           : std::max(z0, gamma / z[i]);
  if (warm_mu) gamma = opts.sigma * z.dot(mu) / static_cast<double>(niq);

  double f_prev = std::numeric_limits<double>::infinity();
  int stalled = 0;
  bool failed = false;

  for (sol.iterations = 0; sol.iterations <= opts.max_iter; ++sol.iterations) {
    ev = problem.eval(x, lambda, mu, true);
    if (!ev.g.allFinite() || !ev.h.allFinite() || !std::isfinite(ev.f)) {
      failed = true;
      break;
    }

    const Eigen::VectorXd lx =
        ev.grad_f + ev.jac_g.transpose() * lambda + ev.jac_h.transpose() * mu;

    const double xz_norm = std::max(x.cwiseAbs().maxCoeff(),
                                    niq > 0 ? z.cwiseAbs().maxCoeff() : 0.0);
    const double feascond =
        std::max(ev.g.cwiseAbs().maxCoeff(), niq > 0 ? ev.h.maxCoeff() : 0.0) /
        (1.0 + xz_norm);
    const double gradcond =
        lx.cwiseAbs().maxCoeff() /
        (1.0 + std::max(lambda.cwiseAbs().maxCoeff(),
                        niq > 0 ? mu.cwiseAbs().maxCoeff() : 0.0));
    const double compcond =
        (niq > 0 ? z.dot(mu) : 0.0) / (1.0 + x.cwiseAbs().maxCoeff());
    const double costcond =
        std::isfinite(f_prev) ? std::abs(ev.f - f_prev) / (1.0 + std::abs(f_prev))
                              : 0.0;

    sol.feas_residual = feascond;
    sol.kkt_residual = std::max(gradcond, compcond);

    if (feascond < opts.tol && gradcond < opts.tol && compcond < opts.tol &&
        costcond < opts.tol) {
      sol.status = SolveStatus::OPTIMAL;
      break;
    }
    if (sol.iterations == opts.max_iter) break;
    f_prev = ev.f;

    // Reduced KKT system.
    const Eigen::ArrayXd mu_over_z = mu.array() / z.array();
    Eigen::MatrixXd m_mat =
        ev.hess_l + ev.jac_h.transpose() * mu_over_z.matrix().asDiagonal() * ev.jac_h;
    const Eigen::VectorXd n_vec =
        lx + ev.jac_h.transpose() *
                 ((gamma + (mu.array() * ev.h.array()).array()) / z.array())
                     .matrix();

    Eigen::VectorXd step;
    double reg = 0.0;
    for (;;) {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nx + neq, nx + neq);
      kkt.topLeftCorner(nx, nx) = m_mat;
      if (reg > 0) kkt.topLeftCorner(nx, nx).diagonal().array() += reg;
      kkt.topRightCorner(nx, neq) = ev.jac_g.transpose();
      kkt.bottomLeftCorner(neq, nx) = ev.jac_g;
      Eigen::VectorXd rhs(nx + neq);
      rhs.head(nx) = -n_vec;
      rhs.tail(neq) = -ev.g;
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
      step = lu.solve(rhs);
      const double resid = (kkt * step - rhs).cwiseAbs().maxCoeff();
      if (step.allFinite() && resid < 1e-6 * (1.0 + rhs.cwiseAbs().maxCoeff()))
        break;
      reg = reg == 0.0 ? 1e-10 : reg * 100.0;
      if (reg > 1e-2) {
        failed = true;
        break;
      }
    }
    if (failed) break;

    const Eigen::VectorXd dx = step.head(nx);
    const Eigen::VectorXd dlambda = step.tail(neq);
    const Eigen::VectorXd dz = -ev.h - z - ev.jac_h * dx;
    const Eigen::VectorXd dmu =
        (-mu.array() + (gamma - mu.array() * dz.array()) / z.array()).matrix();

    double alpha_p = 1.0, alpha_d = 1.0;
    for (Eigen::Index i = 0; i < niq; ++i) {
      if (dz[i] < 0) alpha_p = std::min(alpha_p, -opts.xi * z[i] / dz[i]);
      if (dmu[i] < 0) alpha_d = std::min(alpha_d, -opts.xi * mu[i] / dmu[i]);
    }
    // keep magnitudes physical through the transient
    const Eigen::Index o_vm = static_cast<Eigen::Index>(net.n_buses()) - 1;
    for (Eigen::Index b = 0; b < net.n_buses(); ++b)
      while (alpha_p > 1e-12 && x[o_vm + b] + alpha_p * dx[o_vm + b] < 0.05)
        alpha_p *= 0.5;

    if (alpha_p < 1e-12 && alpha_d < 1e-12) {
      if (++stalled >= 2) {
        failed = true;
        break;
      }
    } else {
      stalled = 0;
    }

    x += alpha_p * dx;
    z += alpha_p * dz;
    lambda += alpha_d * dlambda;
    mu += alpha_d * dmu;
    gamma = opts.sigma * z.dot(mu) / static_cast<double>(niq);
  }

  problem.unpack(x, sol);
  sol.objective = problem.objective(x);
  sol.duals = DualState{lambda, mu, z};
  if (failed) {
    sol.status = SolveStatus::INFEASIBLE;
  } else if (sol.status != SolveStatus::OPTIMAL) {
    sol.status = SolveStatus::MAX_ITER;
  }
  return sol;
}

ViolationReport check_feasibility(const net::Network& net,
                                  const LoadScenario& scenario,
                                  const Eigen::VectorXd& p_gen,
                                  const Eigen::VectorXd& q_gen,
                                  const Eigen::VectorXd& v_mag,
                                  const Eigen::VectorXd& theta, double tol) {
  ViolationReport report;
  const auto& gens = net.generators();
  for (Eigen::Index g = 0; g < p_gen.size(); ++g) {
    const auto& gen = gens[static_cast<std::size_t>(g)];
    report.dp_g = std::max({report.dp_g, p_gen[g] - gen.p_max, gen.p_min - p_gen[g]});
    report.dq_g = std::max({report.dq_g, q_gen[g] - gen.q_max, gen.q_min - q_gen[g]});
  }
  for (int b = 0; b < net.n_buses(); ++b) {
    const auto& bus = net.buses()[static_cast<std::size_t>(b)];
    report.dv = std::max({report.dv, v_mag[b] - bus.v_max, bus.v_min - v_mag[b]});
  }
  const auto flows = pf::branch_flows(net, v_mag, theta);
  for (std::size_t k = 0; k < flows.size(); ++k) {
    const auto& br = net.branches()[k];
    if (br.s_max <= 0) continue;
    const double s = std::max(std::abs(flows[k].s_from), std::abs(flows[k].s_to));
    report.ds = std::max(report.ds, s - br.s_max);
  }

  const Eigen::VectorXcd s_inj =
      pf::injected_power(net::build_ybus(net), pf::complex_voltage(v_mag, theta));
  const Eigen::VectorXcd load = pf::scenario_injections(net, scenario);
  Eigen::VectorXcd gen_bus = Eigen::VectorXcd::Zero(net.n_buses());
  for (Eigen::Index g = 0; g < p_gen.size(); ++g)
    gen_bus[net.index_of(gens[static_cast<std::size_t>(g)].bus_id)] +=
        Complex(p_gen[g], q_gen[g]);
  const Eigen::VectorXcd residual = s_inj + load - gen_bus;
  for (int b = 0; b < net.n_buses(); ++b)
    report.balance_residual =
        std::max({report.balance_residual, std::abs(residual[b].real()),
                  std::abs(residual[b].imag())});

  report.dp_g = std::max(report.dp_g, 0.0);
  report.dq_g = std::max(report.dq_g, 0.0);
  report.dv = std::max(report.dv, 0.0);
  report.ds = std::max(report.ds, 0.0);
  report.feasible = report.dp_g <= tol && report.dq_g <= tol && report.dv <= tol &&
                    report.ds <= tol;
  return report;
}

ViolationReport check_feasibility(const net::Network& net,
                                  const LoadScenario& scenario,
                                  const DispatchSolution& solution, double tol) {
  return check_feasibility(net, scenario, solution.p_gen, solution.q_gen,
                           solution.v_mag, solution.theta, tol);
}

}  // namespace gridlearn::opf
