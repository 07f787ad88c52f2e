// Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince coefficients) with
// cubic Hermite dense output.  The right-hand side is any callable
// rhs(t, y, dy); step control is standard PI-free proportional control on
// the embedded error estimate.
#ifndef SODE_INTEGRATE_HPP
#define SODE_INTEGRATE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sode {

struct IntegrationOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 = automatic
  double max_step = std::numeric_limits<double>::infinity();
  double blowup_norm = 1e12;
  long max_steps = 5'000'000;
  // Optional: only the first `blowup_dims` components count toward the
  // blow-up norm (lets augmented variational states grow without aborting).
  int blowup_dims = -1;
};

class BlowupError : public std::runtime_error {
 public:
  BlowupError(const std::string& msg, double t)
      : std::runtime_error(msg), escape_time_(t) {}
  double escape_time() const { return escape_time_; }

 private:
  double escape_time_;
};

// Accepted step endpoints with derivatives; cubic Hermite between nodes.
class DenseTrajectory {
 public:
  struct Node {
    double t;
    Eigen::VectorXd y;
    Eigen::VectorXd dy;
  };

  std::vector<Node> nodes;
  bool truncated = false;
  bool blew_up = false;
  double blowup_time = 0.0;
  std::string diagnostic;
  double rtol = 0.0, atol = 0.0;

  double t_begin() const { return nodes.front().t; }
  double t_end() const { return nodes.back().t; }
  int state_size() const { return static_cast<int>(nodes.front().y.size()); }

  void eval(double t, Eigen::VectorXd& out) const {
    const Node& a = nodes[interval(t)];
    const Node& b = nodes[interval(t) + 1];
    hermite(a, b, t, out, nullptr);
  }

  Eigen::VectorXd eval(double t) const {
    Eigen::VectorXd out;
    eval(t, out);
    return out;
  }

  void eval_with_derivative(double t, Eigen::VectorXd& y,
                            Eigen::VectorXd& dy) const {
    std::size_t i = interval(t);
    hermite(nodes[i], nodes[i + 1], t, y, &dy);
  }

 private:
  std::size_t interval(double t) const {
    if (nodes.size() < 2) return 0;
    auto it = std::upper_bound(
        nodes.begin(), nodes.end(), t,
        [](double tv, const Node& n) { return tv < n.t; });
    std::size_t i = static_cast<std::size_t>(it - nodes.begin());
    if (i == 0) return 0;
    if (i >= nodes.size()) return nodes.size() - 2;
    return i - 1;
  }

  static void hermite(const Node& a, const Node& b, double t,
                      Eigen::VectorXd& y, Eigen::VectorXd* dy) {
    double h = b.t - a.t;
    if (h == 0.0) {
      y = a.y;
      if (dy) *dy = a.dy;
      return;
    }
    double s = (t - a.t) / h;
    double s2 = s * s, s3 = s2 * s;
    double h00 = 2 * s3 - 3 * s2 + 1;
    double h10 = s3 - 2 * s2 + s;
    double h01 = -2 * s3 + 3 * s2;
    double h11 = s3 - s2;
    y = h00 * a.y + (h10 * h) * a.dy + h01 * b.y + (h11 * h) * b.dy;
    if (dy) {
      double d00 = (6 * s2 - 6 * s) / h;
      double d10 = 3 * s2 - 4 * s + 1;
      double d01 = (-6 * s2 + 6 * s) / h;
      double d11 = 3 * s2 - 2 * s;
      *dy = d00 * a.y + d10 * a.dy + d01 * b.y + d11 * b.dy;
    }
  }
};

template <class RHS>
DenseTrajectory integrate_adaptive(RHS&& rhs, const Eigen::VectorXd& y0,
                                   double t0, double t1,
                                   const IntegrationOptions& opts = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // difference between 5th and embedded 4th order weights
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (!(t1 > t0)) throw std::invalid_argument("t1 must exceed t0");

  DenseTrajectory traj;
  traj.rtol = opts.rtol;
  traj.atol = opts.atol;

  const Eigen::Index dim = y0.size();
  const int bdim = opts.blowup_dims > 0
                       ? std::min<int>(opts.blowup_dims, static_cast<int>(dim))
                       : static_cast<int>(dim);

  Eigen::VectorXd y = y0, k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim),
                  k7(dim), ytmp(dim), ynew(dim), err(dim);
  double t = t0;
  rhs(t, y, k1);
  traj.nodes.push_back({t, y, k1});

  double span = t1 - t0;
  double h = opts.initial_step > 0 ? opts.initial_step : span / 100.0;
  h = std::min(h, opts.max_step);
  const double hmin = 1e-14 * span;

  long steps = 0;
  for (; t < t1;) {
    if (++steps > opts.max_steps) {
      traj.truncated = true;
      traj.diagnostic = "step limit reached at t=" + std::to_string(t);
      return traj;
    }
    if (h < hmin) {
      traj.truncated = true;
      traj.diagnostic = "step size underflow at t=" + std::to_string(t);
      return traj;
    }
    if (t + h > t1) h = t1 - t;

    ytmp = y + h * (a21 * k1);
    rhs(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double errnorm = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      double sc = opts.atol +
                  opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      double r = err[i] / sc;
      errnorm += r * r;
    }
    errnorm = std::sqrt(errnorm / static_cast<double>(dim));

    if (errnorm <= 1.0 || h <= hmin * 2.0) {
      t += h;
      y.swap(ynew);
      k1.swap(k7);  // FSAL
      traj.nodes.push_back({t, y, k1});
      if (y.head(bdim).norm() > opts.blowup_norm) {
        traj.truncated = true;
        traj.blew_up = true;
        traj.blowup_time = t;
        traj.diagnostic = "solution norm exceeded blow-up threshold at t=" +
                          std::to_string(t);
        return traj;
      }
    }
    double fac = errnorm > 0.0
                     ? 0.9 * std::pow(errnorm, -0.2)
                     : 5.0;
    fac = std::clamp(fac, 0.2, 5.0);
    h = std::min(h * fac, opts.max_step);
  }
  return traj;
}

}  // namespace sode

#endif  // SODE_INTEGRATE_HPP
