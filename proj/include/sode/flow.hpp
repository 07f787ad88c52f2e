// Numerical flow machinery: base integral curves, parallel transport
// V' + Gamma V = 0, the matrix Jacobi equation in variational form
// Y'' = (df/dq) Y + (df/dv) Y', and the exponential map with its
// finite-difference Jacobian.
//
// Everything is templated over the system type; any type exposing
// dimension(), force(q,v,out) and force_jacobians(q,v,dfdq,dfdv) works
// (SodeSystem and the numerically lifted group systems both do).
#ifndef SODE_FLOW_HPP
#define SODE_FLOW_HPP

#include <Eigen/Dense>
#include <concepts>

#include "sode/integrate.hpp"
#include "sode/system.hpp"

namespace sode {

template <class S>
concept SecondOrderSystem = requires(const S& s, const Eigen::VectorXd& q,
                                     Eigen::VectorXd& out, Eigen::MatrixXd& m) {
  { s.dimension() } -> std::convertible_to<int>;
  s.force(q, q, out);
  s.force_jacobians(q, q, m, m);
};

struct Trajectory {
  int n = 0;
  DenseTrajectory dense;  // state layout (q, v)

  double t_end() const { return dense.t_end(); }
  bool truncated() const { return dense.truncated; }

  TangentState state_at(double t) const {
    Eigen::VectorXd y = dense.eval(t);
    return TangentState(y.head(n), y.tail(n));
  }
  TangentState initial_state() const {
    const auto& y = dense.nodes.front().y;
    return TangentState(y.head(n), y.tail(n));
  }
};

template <SecondOrderSystem S>
Trajectory integrate_curve(const S& sys, const TangentState& s0, double t_end,
                           IntegrationOptions opts = {}) {
  const int n = sys.dimension();
  if (s0.dimension() != n) throw std::invalid_argument("state dimension mismatch");
  Eigen::VectorXd y0(2 * n);
  y0 << s0.q, s0.v;
  Eigen::VectorXd f(n);
  auto rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    sys.force(y.head(n), y.tail(n), f);
    dy.head(n) = y.tail(n);
    dy.tail(n) = f;
  };
  Trajectory traj;
  traj.n = n;
  traj.dense = integrate_adaptive(rhs, y0, 0.0, t_end, opts);
  return traj;
}

template <SecondOrderSystem S>
Trajectory integrate_curve(const S& sys, const TangentState& s0, double t_end,
                           double tol) {
  IntegrationOptions opts;
  opts.rtol = tol;
  opts.atol = tol * 1e-2;
  return integrate_curve(sys, s0, t_end, opts);
}

// ---------------------------------------------------------------------------
// Parallel transport along a trajectory: re-integrates the base curve
// augmented with V, so transport accuracy is not limited by interpolation.
// ---------------------------------------------------------------------------
struct TransportSolution {
  int n = 0;
  DenseTrajectory dense;  // layout (q, v, V)

  Eigen::VectorXd V_at(double t) const { return dense.eval(t).tail(n); }
  double t_end() const { return dense.t_end(); }
};

template <SecondOrderSystem S>
TransportSolution parallel_transport(const S& sys, const Trajectory& traj,
                                     const Eigen::VectorXd& w0) {
  const int n = sys.dimension();
  TangentState s0 = traj.initial_state();
  Eigen::VectorXd y0(3 * n);
  y0 << s0.q, s0.v, w0;
  Eigen::VectorXd f(n);
  Eigen::MatrixXd dfdq(n, n), dfdv(n, n);
  auto rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    auto q = y.head(n);
    auto v = y.segment(n, n);
    sys.force(q, v, f);
    sys.force_jacobians(q, v, dfdq, dfdv);
    dy.head(n) = v;
    dy.segment(n, n) = f;
    // V' = -Gamma V with Gamma = -1/2 df/dv
    dy.tail(n) = 0.5 * dfdv * y.tail(n);
  };
  IntegrationOptions opts;
  opts.rtol = traj.dense.rtol;
  opts.atol = traj.dense.atol;
  opts.blowup_dims = 2 * n;
  TransportSolution sol;
  sol.n = n;
  sol.dense = integrate_adaptive(rhs, y0, 0.0, traj.t_end(), opts);
  return sol;
}

// ---------------------------------------------------------------------------
// Matrix Jacobi equation.
// ---------------------------------------------------------------------------
struct JacobiMatrixSolution {
  int n = 0;
  Eigen::MatrixXd Y0, Ydot0;
  DenseTrajectory dense;  // layout (q, v, vec Y, vec Ydot), row-major vec

  double t_end() const { return dense.t_end(); }
  bool truncated() const { return dense.truncated; }

  Eigen::MatrixXd Y_at(double t) const { return unpack(dense.eval(t), 0); }
  Eigen::MatrixXd Ydot_at(double t) const { return unpack(dense.eval(t), 1); }
  double det_at(double t) const { return Y_at(t).determinant(); }

  Eigen::MatrixXd unpack(const Eigen::VectorXd& y, int which) const {
    Eigen::MatrixXd M(n, n);
    const int base = 2 * n + which * n * n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = y[base + i * n + j];
    return M;
  }
};

// Integrates the base curve together with Y, Ydot (augmented state of size
// 2n + 2n^2).  The blow-up guard applies to the base state only; Jacobi
// matrices are allowed to grow.
template <SecondOrderSystem S>
JacobiMatrixSolution integrate_jacobi_matrix(const S& sys,
                                             const TangentState& s0,
                                             double t_end,
                                             const Eigen::MatrixXd& Y0,
                                             const Eigen::MatrixXd& Ydot0,
                                             IntegrationOptions opts = {}) {
  const int n = sys.dimension();
  Eigen::VectorXd y0(2 * n + 2 * n * n);
  y0.head(n) = s0.q;
  y0.segment(n, n) = s0.v;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      y0[2 * n + i * n + j] = Y0(i, j);
      y0[2 * n + n * n + i * n + j] = Ydot0(i, j);
    }
  Eigen::VectorXd f(n);
  Eigen::MatrixXd dfdq(n, n), dfdv(n, n), Y(n, n), Yd(n, n), Ydd(n, n);
  auto rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    auto q = y.head(n);
    auto v = y.segment(n, n);
    sys.force(q, v, f);
    sys.force_jacobians(q, v, dfdq, dfdv);
    dy.head(n) = v;
    dy.segment(n, n) = f;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Y(i, j) = y[2 * n + i * n + j];
        Yd(i, j) = y[2 * n + n * n + i * n + j];
      }
    Ydd = dfdq * Y + dfdv * Yd;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        dy[2 * n + i * n + j] = Yd(i, j);
        dy[2 * n + n * n + i * n + j] = Ydd(i, j);
      }
  };
  opts.blowup_dims = 2 * n;
  JacobiMatrixSolution sol;
  sol.n = n;
  sol.Y0 = Y0;
  sol.Ydot0 = Ydot0;
  sol.dense = integrate_adaptive(rhs, y0, 0.0, t_end, opts);
  return sol;
}

template <SecondOrderSystem S>
JacobiMatrixSolution integrate_jacobi_matrix(const S& sys,
                                             const Trajectory& traj,
                                             const Eigen::MatrixXd& Y0,
                                             const Eigen::MatrixXd& Ydot0) {
  IntegrationOptions opts;
  opts.rtol = traj.dense.rtol;
  opts.atol = traj.dense.atol;
  return integrate_jacobi_matrix(sys, traj.initial_state(), traj.t_end(), Y0,
                                 Ydot0, opts);
}

// ---------------------------------------------------------------------------
// Exponential map.
// ---------------------------------------------------------------------------
template <SecondOrderSystem S>
Eigen::VectorXd exponential_map(const S& sys, const Eigen::VectorXd& m0,
                                const Eigen::VectorXd& v, double t1,
                                IntegrationOptions opts = {}) {
  if (t1 == 0.0) return m0;
  Trajectory traj = integrate_curve(sys, TangentState(m0, v), t1, opts);
  if (traj.dense.blew_up)
    throw BlowupError("flow blew up before t1 (escape time " +
                          std::to_string(traj.dense.blowup_time) + ")",
                      traj.dense.blowup_time);
  if (traj.truncated())
    throw std::runtime_error("flow truncated: " + traj.dense.diagnostic);
  return traj.state_at(t1).q;
}

// Central finite differences of the exponential map over velocity
// perturbations; column k = (exp(v + h e_k) - exp(v - h e_k)) / 2h.
template <SecondOrderSystem S>
Eigen::MatrixXd exp_jacobian_fd(const S& sys, const Eigen::VectorXd& m0,
                                const Eigen::VectorXd& v, double t1, double h,
                                IntegrationOptions opts = {}) {
  if (h < 1e-8 || h > 1e-2)
    throw std::invalid_argument("finite-difference step outside [1e-8, 1e-2]");
  const int n = sys.dimension();
  Eigen::MatrixXd J(n, n);
  Eigen::VectorXd vp = v, vm = v;
  for (int k = 0; k < n; ++k) {
    vp[k] = v[k] + h;
    vm[k] = v[k] - h;
    J.col(k) = (exponential_map(sys, m0, vp, t1, opts) -
                exponential_map(sys, m0, vm, t1, opts)) /
               (2.0 * h);
    vp[k] = v[k];
    vm[k] = v[k];
  }
  return J;
}

inline double default_fd_step(const Eigen::VectorXd& v) {
  return 1e-5 * std::max(1.0, v.norm());
}

}  // namespace sode

#endif  // SODE_FLOW_HPP
