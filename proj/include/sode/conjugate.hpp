// Conjugate point location.  Primary detector: zeros of d(t) = det Y(t)
// where Y solves the matrix Jacobi equation with Y(0) = 0, Y'(0) = I.
// Sign changes are bisected; even-multiplicity zeros (no sign change) are
// caught as deep dips of |d| confirmed by a rank drop of Y.  The constant
// positive-eigenvalue predictor (times k pi / sqrt(lambda)) and the
// exponential-map Jacobian provide cross-checks.
#ifndef SODE_CONJUGATE_HPP
#define SODE_CONJUGATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "sode/flow.hpp"
#include "sode/spectral.hpp"

namespace sode {

struct ConjugateEvent {
  double time = 0.0;
  int multiplicity = 0;
  std::string method;          // "shooting" | "predictor" | "expmap"
  double det_slope_or_gap = 0.0;
  double residual = 0.0;       // |d(t*)| / max |d| over the scan
};

struct ConjugateOptions {
  IntegrationOptions integration;
  double time_tol_factor = 1e-10;  // bisection tolerance = factor * t_max
  double dip_threshold = 1e-9;     // |d| dip depth relative to max |d|
  double rank_threshold = 1e-7;    // singular values below thr * s_max drop rank
  double rank_floor = 1e-12;
};

struct ConjugateReport {
  std::vector<ConjugateEvent> events;
  double t_min = 0.0, t_max = 0.0;
  double time_tolerance = 0.0;
  double dip_threshold = 0.0;
  double rank_threshold = 0.0;
  bool truncated = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline int rank_drop(const Eigen::MatrixXd& Y, double rel_thr, double floor_) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y);
  double smax = svd.singularValues().maxCoeff();
  double thr = std::max(rel_thr * smax, floor_);
  int drop = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] < thr) ++drop;
  return drop;
}

}  // namespace detail

template <SecondOrderSystem S>
ConjugateReport find_conjugate_points(const S& sys, const TangentState& s0,
                                      double t_max,
                                      const ConjugateOptions& opts = {}) {
  const int n = sys.dimension();
  JacobiMatrixSolution jac = integrate_jacobi_matrix(
      sys, s0, t_max, Eigen::MatrixXd::Zero(n, n),
      Eigen::MatrixXd::Identity(n, n), opts.integration);

  ConjugateReport rep;
  rep.t_min = 0.0;
  rep.t_max = jac.t_end();
  rep.time_tolerance = opts.time_tol_factor * t_max;
  rep.dip_threshold = opts.dip_threshold;
  rep.rank_threshold = opts.rank_threshold;
  rep.truncated = jac.truncated();
  if (rep.truncated)
    rep.warnings.push_back("integration truncated: " + jac.dense.diagnostic);

  // scan grid: accepted nodes plus interval midpoints
  std::vector<double> ts;
  for (std::size_t k = 0; k + 1 < jac.dense.nodes.size(); ++k) {
    ts.push_back(jac.dense.nodes[k].t);
    ts.push_back(0.5 * (jac.dense.nodes[k].t + jac.dense.nodes[k + 1].t));
  }
  ts.push_back(jac.dense.nodes.back().t);
  std::vector<double> d(ts.size());
  double dmax = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    d[k] = jac.det_at(ts[k]);
    dmax = std::max(dmax, std::abs(d[k]));
  }
  if (dmax == 0.0) return rep;

  const double ttol = rep.time_tolerance;
  std::vector<std::size_t> sign_change_idx;

  // sign changes (skip the structural zero at t = 0)
  for (std::size_t k = 1; k + 1 < ts.size(); ++k) {
    if (d[k] == 0.0) continue;
    if (d[k] * d[k + 1] < 0.0) {
      double lo = ts[k], hi = ts[k + 1], dlo = d[k];
      while (hi - lo > ttol) {
        double mid = 0.5 * (lo + hi);
        double dm = jac.det_at(mid);
        if (dm == 0.0) {
          lo = hi = mid;
          break;
        }
        if (dlo * dm < 0.0) {
          hi = mid;
        } else {
          lo = mid;
          dlo = dm;
        }
      }
      double tstar = 0.5 * (lo + hi);
      ConjugateEvent ev;
      ev.time = tstar;
      ev.method = "shooting";
      ev.multiplicity = std::max(
          1, detail::rank_drop(jac.Y_at(tstar), opts.rank_threshold,
                               opts.rank_floor));
      double eps = std::max(ttol, 1e-9 * t_max);
      ev.det_slope_or_gap =
          (jac.det_at(tstar + eps) - jac.det_at(tstar - eps)) / (2.0 * eps);
      ev.residual = std::abs(jac.det_at(tstar)) / dmax;
      rep.events.push_back(ev);
      sign_change_idx.push_back(k);
    }
  }

  // dips of |d| without sign change (even multiplicity): every interior
  // local minimum of |d| is refined by golden section, and only the refined
  // minimum is held against the dip threshold -- a quadratic zero can sit
  // many orders of magnitude above the threshold on the raw grid.
  for (std::size_t k = 1; k + 1 < ts.size(); ++k) {
    double a = std::abs(d[k]);
    if (a >= std::abs(d[k - 1]) || a >= std::abs(d[k + 1])) continue;
    bool near_existing = false;
    for (const auto& ev : rep.events)
      if (std::abs(ev.time - ts[k]) <= 2.0 * (ts[k + 1] - ts[k - 1]))
        near_existing = true;
    if (near_existing) continue;
    // golden-section refinement of |d| on the bracketing interval
    double lo = ts[k - 1], hi = ts[k + 1];
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = std::abs(jac.det_at(x1)), f2 = std::abs(jac.det_at(x2));
    while (hi - lo > ttol) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = std::abs(jac.det_at(x1));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = std::abs(jac.det_at(x2));
      }
    }
    double tstar = 0.5 * (lo + hi);
    if (std::abs(jac.det_at(tstar)) > opts.dip_threshold * dmax) continue;
    int drop = detail::rank_drop(jac.Y_at(tstar), opts.rank_threshold,
                                 opts.rank_floor);
    if (drop < 1) continue;  // shallow dip, no rank confirmation
    ConjugateEvent ev;
    ev.time = tstar;
    ev.method = "shooting";
    ev.multiplicity = drop;
    ev.det_slope_or_gap = std::abs(jac.det_at(tstar)) / dmax;  // dip depth
    ev.residual = std::abs(jac.det_at(tstar)) / dmax;
    rep.events.push_back(ev);
  }

  std::sort(rep.events.begin(), rep.events.end(),
            [](const ConjugateEvent& a, const ConjugateEvent& b) {
              return a.time < b.time;
            });
  for (std::size_t k = 0; k + 1 < rep.events.size(); ++k)
    if (rep.events[k + 1].time - rep.events[k].time < 1e3 * ttol)
      rep.warnings.push_back("events at t=" + std::to_string(rep.events[k].time) +
                             " and t=" + std::to_string(rep.events[k + 1].time) +
                             " are closer than 1000x the time tolerance");
  return rep;
}

inline std::vector<double> predictor_times(double lambda0, double t_max) {
  if (!(lambda0 > 0.0))
    throw std::invalid_argument("predictor requires positive eigenvalue");
  std::vector<double> out;
  const double period = M_PI / std::sqrt(lambda0);
  for (int k = 1; k * period <= t_max; ++k) out.push_back(k * period);
  return out;
}

struct PredictorVerification {
  int branch = -1;
  std::complex<double> lambda0;
  bool applicable = false;       // real, strictly positive, constant branch
  std::string note;
  double constancy_deviation = 0.0;
  double eigen_residual = 0.0;   // sup_t |Phi V - lambda0 V| / |V| (transported V)
  std::vector<double> predicted_times;
  std::vector<double> shooting_times;
  std::vector<double> gaps;      // per predicted time, distance to nearest shooting event
};

inline PredictorVerification verify_predictor(const SodeSystem& sys,
                                              const TangentState& s0,
                                              int branch, double t_max,
                                              const ConjugateOptions& opts = {}) {
  PredictorVerification out;
  out.branch = branch;

  Trajectory traj = integrate_curve(sys, s0, t_max, opts.integration);
  SpectrumTrace trace = track_spectrum(sys, traj);
  if (branch < 0 || branch >= trace.branches())
    throw std::invalid_argument("branch index out of range");
  out.lambda0 = trace.initial_value(branch);
  out.constancy_deviation = trace.constancy_deviation[static_cast<std::size_t>(branch)];

  if (std::abs(out.lambda0.imag()) > 1e-10 * std::max(1.0, std::abs(out.lambda0))) {
    out.note = "branch is complex; predictor not applicable";
    return out;
  }
  if (out.lambda0.real() <= 0.0) {
    out.note = "branch is non-positive; predictor not applicable";
    return out;
  }
  out.applicable = true;

  // transport the initial eigenvector and measure how far it leaves the
  // eigenpair relation along the curve
  {
    Eigen::VectorXcd x0c = trace.vectors.front().col(branch);
    // rotate to the representative with the largest real part, then take it
    Eigen::Index imax;
    x0c.cwiseAbs().maxCoeff(&imax);
    x0c /= x0c[imax];
    Eigen::VectorXd x0 = x0c.real();
    x0.normalize();
    TransportSolution tsol = parallel_transport(sys, traj, x0);
    OperatorEvaluator ops(sys);
    const int n = sys.dimension();
    for (const auto& node : tsol.dense.nodes) {
      TangentState st(node.y.head(n), node.y.segment(n, n));
      Eigen::VectorXd V = node.y.tail(n);
      double vn = V.norm();
      if (vn == 0.0) continue;
      double res = (ops.phi(st) * V - out.lambda0.real() * V).norm() / vn;
      out.eigen_residual = std::max(out.eigen_residual, res);
    }
  }

  out.predicted_times = predictor_times(out.lambda0.real(), t_max);
  ConjugateReport rep = find_conjugate_points(sys, s0, t_max, opts);
  for (const auto& ev : rep.events) out.shooting_times.push_back(ev.time);
  for (double tp : out.predicted_times) {
    double best = std::numeric_limits<double>::infinity();
    for (double tsft : out.shooting_times) best = std::min(best, std::abs(tp - tsft));
    out.gaps.push_back(best);
  }
  return out;
}

}  // namespace sode

#endif  // SODE_CONJUGATE_HPP
