// Eigenstructure of the Jacobi endomorphism: pointwise decompositions,
// branch tracking along trajectories (nearest-assignment matching), and the
// compatibility diagnostics for eigendistributions under [nabla Phi, Phi].
#ifndef SODE_SPECTRAL_HPP
#define SODE_SPECTRAL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <numeric>
#include <vector>

#include "sode/flow.hpp"
#include "sode/geometry.hpp"

namespace sode {

struct Spectrum {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;  // columns matched to values
  bool diagonalizable_warning = false;
};

inline Spectrum spectrum_of(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  Spectrum s;
  s.values = es.eigenvalues();
  s.vectors = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s.vectors);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  s.diagonalizable_warning = smin <= 0.0 || smax / smin > 1e8;
  return s;
}

inline Spectrum spectrum_at(const SodeSystem& sys, const TangentState& s) {
  return spectrum_of(OperatorEvaluator(sys).phi(s));
}

namespace detail {

// Minimum-total-distance assignment of new eigenvalues to previous branch
// values.  Brute force over permutations for small n, greedy fallback.
inline std::vector<int> match_branches(const Eigen::VectorXcd& prev,
                                       const Eigen::VectorXcd& next) {
  const int n = static_cast<int>(prev.size());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  if (n <= 6) {
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    std::sort(perm.begin(), perm.end());
    do {
      double c = 0.0;
      for (int i = 0; i < n; ++i)
        c += std::abs(prev[i] - next[perm[static_cast<std::size_t>(i)]]);
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    int arg = -1;
    double bestd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      double d = std::abs(prev[i] - next[j]);
      if (d < bestd) {
        bestd = d;
        arg = j;
      }
    }
    used[static_cast<std::size_t>(arg)] = true;
    perm[static_cast<std::size_t>(i)] = arg;
  }
  return perm;
}

}  // namespace detail

struct SpectrumTrace {
  std::vector<double> times;
  // values(node, branch); branches ordered by continuation from t = 0
  Eigen::MatrixXcd values;
  std::vector<Eigen::MatrixXcd> vectors;  // per node, columns = branches
  std::vector<double> constancy_deviation;  // per branch, sup |l(t) - l(0)|
  std::vector<double> gamma_estimate;       // per branch, sup |dl/dt| (finite diff)
  std::vector<int> multiplicity;            // branches within 1e-6*radius merged
  bool crossing_flag = false;

  int branches() const { return static_cast<int>(values.cols()); }
  std::complex<double> initial_value(int branch) const { return values(0, branch); }
};

inline SpectrumTrace track_spectrum(const SodeSystem& sys,
                                    const Trajectory& traj) {
  OperatorEvaluator ops(sys);
  const int n = sys.dimension();
  SpectrumTrace tr;
  const auto& nodes = traj.dense.nodes;
  tr.values.resize(static_cast<Eigen::Index>(nodes.size()), n);
  tr.vectors.reserve(nodes.size());
  Eigen::VectorXcd prev;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    double t = nodes[k].t;
    tr.times.push_back(t);
    TangentState s(nodes[k].y.head(n), nodes[k].y.tail(n));
    Spectrum sp = spectrum_of(ops.phi(s));
    Eigen::VectorXcd vals = sp.values;
    Eigen::MatrixXcd vecs = sp.vectors;
    if (k > 0) {
      auto perm = detail::match_branches(prev, vals);
      Eigen::VectorXcd v2(n);
      Eigen::MatrixXcd m2(n, n);
      for (int i = 0; i < n; ++i) {
        v2[i] = vals[perm[static_cast<std::size_t>(i)]];
        m2.col(i) = vecs.col(perm[static_cast<std::size_t>(i)]);
      }
      vals = v2;
      vecs = m2;
      // continuity guard: jump larger than half the local branch gap
      double gap = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          gap = std::min(gap, std::abs(prev[i] - prev[j]));
      if (std::isfinite(gap) && gap > 0.0)
        for (int i = 0; i < n; ++i)
          if (std::abs(vals[i] - prev[i]) > gap / 2.0) tr.crossing_flag = true;
    }
    tr.values.row(static_cast<Eigen::Index>(k)) = vals.transpose();
    tr.vectors.push_back(vecs);
    prev = vals;
  }

  tr.constancy_deviation.assign(static_cast<std::size_t>(n), 0.0);
  tr.gamma_estimate.assign(static_cast<std::size_t>(n), 0.0);
  for (int b = 0; b < n; ++b) {
    std::complex<double> l0 = tr.values(0, b);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      double dev = std::abs(tr.values(static_cast<Eigen::Index>(k), b) - l0);
      tr.constancy_deviation[static_cast<std::size_t>(b)] =
          std::max(tr.constancy_deviation[static_cast<std::size_t>(b)], dev);
      if (k > 0) {
        double dt = tr.times[k] - tr.times[k - 1];
        if (dt > 0) {
          double rate = std::abs(tr.values(static_cast<Eigen::Index>(k), b) -
                                 tr.values(static_cast<Eigen::Index>(k - 1), b)) /
                        dt;
          tr.gamma_estimate[static_cast<std::size_t>(b)] =
              std::max(tr.gamma_estimate[static_cast<std::size_t>(b)], rate);
        }
      }
    }
  }

  tr.multiplicity.assign(static_cast<std::size_t>(n), 1);
  double radius = tr.values.row(0).cwiseAbs().maxCoeff();
  double merge_tol = 1e-6 * std::max(radius, 1e-300);
  for (int b = 0; b < n; ++b) {
    int m = 0;
    for (int c = 0; c < n; ++c)
      if (std::abs(tr.values(0, b) - tr.values(0, c)) <= merge_tol) ++m;
    tr.multiplicity[static_cast<std::size_t>(b)] = m;
  }
  return tr;
}

struct EigendistributionReport {
  std::complex<double> lambda;
  double commutator_residual = 0.0;   // |[nabla Phi, Phi] X| relative
  double projection_residual = 0.0;   // (nabla Phi) X leaving the eigenspace
  double gamma_lambda_estimate = 0.0; // |d lambda / dt| along the flow
  bool commutes = false;
  bool invariant_subspace = false;
  bool locally_symmetric = false;
};

inline EigendistributionReport eigendistribution_checks(const SodeSystem& sys,
                                                        const TangentState& s,
                                                        int branch,
                                                        double threshold = 1e-7) {
  OperatorEvaluator ops(sys);
  OperatorPanel p = ops.panel(s);
  Spectrum sp = spectrum_of(p.phi);
  const int n = sys.dimension();
  if (branch < 0 || branch >= n) throw std::invalid_argument("branch out of range");

  EigendistributionReport r;
  r.lambda = sp.values[branch];
  Eigen::VectorXcd X = sp.vectors.col(branch);
  double phin = p.phi.norm(), nphin = p.nabla_phi.norm();
  double floor_ = 1e-300;

  Eigen::MatrixXcd comm = p.commutator.cast<std::complex<double>>();
  r.commutator_residual =
      (comm * X).norm() / std::max(phin * nphin * X.norm(), floor_);
  if (phin * nphin == 0.0) r.commutator_residual = (comm * X).norm();

  Eigen::VectorXcd W = p.nabla_phi.cast<std::complex<double>>() * X;
  // eigenspace of lambda: all branches within 1e-6 * spectral radius
  double radius = sp.values.cwiseAbs().maxCoeff();
  double merge_tol = 1e-6 * std::max(radius, 1e-300);
  std::vector<int> cols;
  for (int c = 0; c < n; ++c)
    if (std::abs(sp.values[c] - r.lambda) <= merge_tol) cols.push_back(c);
  Eigen::MatrixXcd B(n, static_cast<int>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    B.col(static_cast<Eigen::Index>(c)) = sp.vectors.col(cols[c]);
  Eigen::VectorXcd proj = B * B.colPivHouseholderQr().solve(W);
  r.projection_residual =
      (W - proj).norm() / std::max(nphin * X.norm(), floor_);

  // finite difference of the matched eigenvalue along the flow
  {
    double h = 1e-5;
    auto advance = [&](double dt) {
      // one classical RK4 step of the base second-order system
      auto deriv = [&](const TangentState& st) {
        Eigen::VectorXd f = sys.force(st);
        return std::pair<Eigen::VectorXd, Eigen::VectorXd>(st.v, f);
      };
      auto [k1q, k1v] = deriv(s);
      TangentState s2(s.q + 0.5 * dt * k1q, s.v + 0.5 * dt * k1v);
      auto [k2q, k2v] = deriv(s2);
      TangentState s3(s.q + 0.5 * dt * k2q, s.v + 0.5 * dt * k2v);
      auto [k3q, k3v] = deriv(s3);
      TangentState s4(s.q + dt * k3q, s.v + dt * k3v);
      auto [k4q, k4v] = deriv(s4);
      return TangentState(
          s.q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
          s.v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v));
    };
    auto matched = [&](const TangentState& st) {
      Spectrum sp2 = spectrum_of(ops.phi(st));
      int arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n; ++c) {
        double d = std::abs(sp2.values[c] - r.lambda);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      return sp2.values[arg];
    };
    r.gamma_lambda_estimate =
        std::abs(matched(advance(h)) - matched(advance(-h))) / (2.0 * h);
  }

  r.commutes = r.commutator_residual < threshold;
  r.invariant_subspace = r.projection_residual < threshold;
  r.locally_symmetric = nphin <= 1e-7 * std::max(1.0, phin);
  return r;
}

}  // namespace sode

#endif  // SODE_SPECTRAL_HPP
