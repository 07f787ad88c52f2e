// Geometric operators of a second-order system at a tangent state:
// connection coefficients Gamma^i_j = -1/2 df^i/dv^j, Jacobi endomorphism
// Phi^i_j = -df^i/dq^j - Gamma^k_j Gamma^i_k - Gamma(Gamma^i_j), covariant
// derivative (nabla Phi)^i_j = Gamma(Phi^i_j) + Gamma^i_k Phi^k_j
// - Gamma^k_j Phi^i_k, and spray diagnostics.  Gamma(g) is the directional
// derivative along the flow: v^k dg/dq^k + f^k dg/dv^k.
//
// Convention used everywhere: matrix row = upper index i, column = lower
// index j.
#ifndef SODE_GEOMETRY_HPP
#define SODE_GEOMETRY_HPP

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "sode/system.hpp"

namespace sode {

struct OperatorPanel {
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd phi;
  Eigen::MatrixXd nabla_phi;
  Eigen::MatrixXd commutator;
};

class OperatorEvaluator {
 public:
  explicit OperatorEvaluator(const SodeSystem& sys) : sys_(&sys) {
    const int n = sys.dimension();
    gamma_e_.resize(n * n);
    phi_e_.resize(n * n);
    nphi_e_.resize(n * n);
    gdir_gamma_e_.resize(n * n);

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        gamma_e_[idx(i, j)] =
            Expr::mul(Expr::number(-0.5), sys.dfdv_expr(i, j));

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Expr acc = Expr::neg(sys.dfdq_expr(i, j));
        for (int k = 0; k < n; ++k)
          acc = Expr::sub(acc,
                          Expr::mul(gamma_e_[idx(k, j)], gamma_e_[idx(i, k)]));
        gdir_gamma_e_[idx(i, j)] = flow_derivative(gamma_e_[idx(i, j)]);
        phi_e_[idx(i, j)] = Expr::sub(acc, gdir_gamma_e_[idx(i, j)]);
      }

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Expr acc = flow_derivative(phi_e_[idx(i, j)]);
        for (int k = 0; k < n; ++k) {
          acc = Expr::add(acc,
                          Expr::mul(gamma_e_[idx(i, k)], phi_e_[idx(k, j)]));
          acc = Expr::sub(acc,
                          Expr::mul(gamma_e_[idx(k, j)], phi_e_[idx(i, k)]));
        }
        nphi_e_[idx(i, j)] = acc;
      }

    prog_ = std::make_shared<ProgramSet>(sys.slot_names());
    for (auto& e : gamma_e_) prog_->add(e);
    for (auto& e : phi_e_) prog_->add(e);
    for (auto& e : nphi_e_) prog_->add(e);
    for (auto& e : gdir_gamma_e_) prog_->add(e);
  }

  const SodeSystem& system() const { return *sys_; }

  OperatorPanel panel(const TangentState& s) const {
    const int n = sys_->dimension();
    thread_local std::vector<double> slots, scratch, vals;
    sys_->fill_slots(s.q, s.v, slots);
    vals.resize(static_cast<std::size_t>(4 * n * n));
    prog_->eval(slots, scratch, vals);
    OperatorPanel p;
    p.gamma.resize(n, n);
    p.phi.resize(n, n);
    p.nabla_phi.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        p.gamma(i, j) = vals[static_cast<std::size_t>(idx(i, j))];
        p.phi(i, j) = vals[static_cast<std::size_t>(n * n + idx(i, j))];
        p.nabla_phi(i, j) = vals[static_cast<std::size_t>(2 * n * n + idx(i, j))];
      }
    p.commutator = p.nabla_phi * p.phi - p.phi * p.nabla_phi;
    return p;
  }

  // Gamma(Gamma^i_j), the flow derivative of the connection coefficients.
  Eigen::MatrixXd gamma_dir_gamma(const TangentState& s) const {
    const int n = sys_->dimension();
    thread_local std::vector<double> slots, scratch, vals;
    sys_->fill_slots(s.q, s.v, slots);
    vals.resize(static_cast<std::size_t>(4 * n * n));
    prog_->eval(slots, scratch, vals);
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        M(i, j) = vals[static_cast<std::size_t>(3 * n * n + idx(i, j))];
    return M;
  }

  Eigen::MatrixXd connection(const TangentState& s) const { return panel(s).gamma; }
  Eigen::MatrixXd phi(const TangentState& s) const { return panel(s).phi; }
  Eigen::MatrixXd nabla_phi(const TangentState& s) const { return panel(s).nabla_phi; }
  Eigen::MatrixXd commutator(const TangentState& s) const { return panel(s).commutator; }

  const Expr& gamma_expr(int i, int j) const { return gamma_e_[idx(i, j)]; }
  const Expr& phi_expr(int i, int j) const { return phi_e_[idx(i, j)]; }
  const Expr& nabla_phi_expr(int i, int j) const { return nphi_e_[idx(i, j)]; }

  // Directional derivative along the flow of an expression in (q, v).
  Expr flow_derivative(const Expr& g) const {
    const auto& qs = sys_->coordinates();
    const auto& vs = sys_->velocity_names();
    Expr acc = Expr::number(0.0);
    for (int k = 0; k < sys_->dimension(); ++k) {
      acc = Expr::add(acc, Expr::mul(Expr::variable(vs[static_cast<std::size_t>(k)]),
                                     g.diff(qs[static_cast<std::size_t>(k)])));
      acc = Expr::add(acc, Expr::mul(sys_->forces()[static_cast<std::size_t>(k)],
                                     g.diff(vs[static_cast<std::size_t>(k)])));
    }
    return acc;
  }

 private:
  int idx(int i, int j) const { return i * sys_->dimension() + j; }

  const SodeSystem* sys_;
  std::vector<Expr> gamma_e_, phi_e_, nphi_e_, gdir_gamma_e_;
  std::shared_ptr<ProgramSet> prog_;
};

inline Eigen::MatrixXd connection(const SodeSystem& sys, const TangentState& s) {
  Eigen::MatrixXd dfdq, dfdv;
  sys.force_jacobians(s.q, s.v, dfdq, dfdv);
  return -0.5 * dfdv;
}

inline Eigen::MatrixXd jacobi_endomorphism(const SodeSystem& sys,
                                           const TangentState& s) {
  return OperatorEvaluator(sys).phi(s);
}

inline Eigen::MatrixXd nabla_phi(const SodeSystem& sys, const TangentState& s) {
  return OperatorEvaluator(sys).nabla_phi(s);
}

inline Eigen::MatrixXd commutator_nabla_phi_phi(const SodeSystem& sys,
                                                const TangentState& s) {
  return OperatorEvaluator(sys).commutator(s);
}

struct SprayReport {
  bool is_spray = false;
  double max_nabla_T = 0.0;
  double max_phi_T = 0.0;
};

// (nabla T)^i = f^i + Gamma^i_j v^j; Phi(T) = Phi * v.  A system is a spray
// iff both vanish at every state.
inline SprayReport spray_check(const SodeSystem& sys,
                               const std::vector<TangentState>& states,
                               double threshold = 1e-9) {
  if (states.empty()) throw std::invalid_argument("spray_check needs states");
  OperatorEvaluator ops(sys);
  SprayReport r;
  for (const auto& s : states) {
    OperatorPanel p = ops.panel(s);
    Eigen::VectorXd f = sys.force(s);
    Eigen::VectorXd nT = f + p.gamma * s.v;
    Eigen::VectorXd phiT = p.phi * s.v;
    r.max_nabla_T = std::max(r.max_nabla_T, nT.lpNorm<Eigen::Infinity>());
    r.max_phi_T = std::max(r.max_phi_T, phiT.lpNorm<Eigen::Infinity>());
  }
  r.is_spray = r.max_nabla_T < threshold && r.max_phi_T < threshold;
  return r;
}

// Uniformly random tangent states in a centered box, for sampled checks.
inline std::vector<TangentState> random_states(int n, int count,
                                               unsigned seed,
                                               double half_width = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-half_width, half_width);
  std::vector<TangentState> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Eigen::VectorXd q(n), v(n);
    for (int i = 0; i < n; ++i) q[i] = dist(rng);
    for (int i = 0; i < n; ++i) v[i] = dist(rng);
    out.emplace_back(std::move(q), std::move(v));
  }
  return out;
}

}  // namespace sode

#endif  // SODE_GEOMETRY_HPP
