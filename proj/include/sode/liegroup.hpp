// Invariant second-order systems on a Lie group in quasi-velocity form:
// structure constants, reduced force fields gamma(w), the frame-level
// operator matrices phi, lambda, psi = nabla phi, relative equilibria of
// the reduced field, conjugate-time prediction along them, and the lift
// back to a coordinate system on the group.
//
// Frame matrices use row = upper index, like the coordinate module:
//   phi^l_j = 1/2 g^i d2g^l/dw^i dw^j + 1/2 g^i C^l_ij
//           - 1/4 (dg^i/dw^j)(dg^l/dw^i) - 3/4 C^k_ij w^i dg^l/dw^k
//           + 1/4 w^i C^l_ik dg^k/dw^j - 1/4 w^m w^n C^k_mj C^l_nk
//   lambda^k_i = -1/2 (dg^k/dw^i - w^j C^k_ji)
//   psi = g(phi) + lambda phi - phi lambda   (g(.) = directional derivative
//                                             along the reduced field)
#ifndef SODE_LIEGROUP_HPP
#define SODE_LIEGROUP_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "sode/conjugate.hpp"
#include "sode/geometry.hpp"
#include "sode/system.hpp"

namespace sode {

class LieAlgebraData {
 public:
  // entries: (i, j, k, value) meaning C^k_ij, 0-based, given for i < j;
  // antisymmetry is completed automatically.
  LieAlgebraData(int n, const std::vector<std::tuple<int, int, int, double>>& entries,
                 std::vector<std::string> labels = {})
      : n_(n), labels_(std::move(labels)) {
    if (n <= 0) throw std::invalid_argument("algebra dimension must be positive");
    c_.assign(static_cast<std::size_t>(n * n * n), 0.0);
    for (const auto& [i, j, k, v] : entries) {
      if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n)
        throw std::invalid_argument("structure constant index out of range");
      if (i >= j)
        throw std::invalid_argument("structure constants must be given with i < j");
      at(k, i, j) = v;
      at(k, j, i) = -v;
    }
    validate();
  }

  int dimension() const { return n_; }
  // C^k_ij
  double c(int k, int i, int j) const {
    return c_[static_cast<std::size_t>((k * n_ + i) * n_ + j)];
  }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  double& at(int k, int i, int j) {
    return c_[static_cast<std::size_t>((k * n_ + i) * n_ + j)];
  }
  void validate() const {
    for (int k = 0; k < n_; ++k)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          if (c(k, i, j) != -c(k, j, i))
            throw std::invalid_argument("structure constants not antisymmetric");
    for (int m = 0; m < n_; ++m)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          for (int k = 0; k < n_; ++k) {
            double s = 0.0;
            for (int l = 0; l < n_; ++l)
              s += c(m, i, l) * c(l, j, k) + c(m, j, l) * c(l, k, i) +
                   c(m, k, l) * c(l, i, j);
            if (std::abs(s) > 1e-12)
              throw std::invalid_argument("structure constants violate the Jacobi identity");
          }
  }

  int n_;
  std::vector<double> c_;
  std::vector<std::string> labels_;
};

class ReducedSystem {
 public:
  ReducedSystem(LieAlgebraData algebra, std::vector<Expr> gamma,
                std::map<std::string, double> parameters = {},
                std::vector<std::string> wnames = {})
      : alg_(std::move(algebra)), gamma_(std::move(gamma)), params_(std::move(parameters)),
        wnames_(std::move(wnames)) {
    const int n = alg_.dimension();
    if (static_cast<int>(gamma_.size()) != n)
      throw std::invalid_argument("expected one reduced force per algebra dimension");
    if (wnames_.empty())
      for (int i = 0; i < n; ++i) wnames_.push_back("w" + std::to_string(i + 1));
    slot_names_ = wnames_;
    for (const auto& [k, v] : params_) {
      slot_names_.push_back(k);
      param_values_.push_back(v);
    }
    {
      std::unordered_set<std::string> allowed(slot_names_.begin(), slot_names_.end());
      for (const auto& g : gamma_) {
        std::unordered_set<std::string> used;
        g.collect_variables(used);
        for (const auto& u : used)
          if (!allowed.count(u))
            throw std::invalid_argument(
                "reduced force references undeclared identifier '" + u + "'");
      }
    }
    build_operators();
  }

  static ReducedSystem from_strings(LieAlgebraData algebra,
                                    const std::vector<std::string>& gamma_sources,
                                    const std::map<std::string, double>& parameters = {}) {
    const int n = algebra.dimension();
    std::vector<std::string> wnames;
    for (int i = 0; i < n; ++i) wnames.push_back("w" + std::to_string(i + 1));
    std::vector<std::string> declared = wnames;
    for (const auto& [k, v] : parameters) declared.push_back(k);
    std::vector<Expr> gamma;
    for (const auto& src : gamma_sources) gamma.push_back(parse(src, declared));
    return ReducedSystem(std::move(algebra), std::move(gamma), parameters, wnames);
  }

  int dimension() const { return alg_.dimension(); }
  const LieAlgebraData& algebra() const { return alg_; }
  const std::vector<Expr>& gamma_exprs() const { return gamma_; }
  const std::vector<std::string>& wnames() const { return wnames_; }
  const std::map<std::string, double>& parameters() const { return params_; }

  Eigen::VectorXd gamma(const Eigen::VectorXd& w) const {
    return eval_block(w, out_gamma_, dimension());
  }
  Eigen::MatrixXd gamma_jacobian(const Eigen::VectorXd& w) const {
    return eval_matrix(w, out_dgamma_);
  }
  Eigen::MatrixXd frame_phi(const Eigen::VectorXd& w) const {
    return eval_matrix(w, out_phi_);
  }
  Eigen::MatrixXd frame_lambda(const Eigen::VectorXd& w) const {
    return eval_matrix(w, out_lambda_);
  }
  Eigen::MatrixXd frame_nabla_phi(const Eigen::VectorXd& w) const {
    return eval_matrix(w, out_psi_);
  }
  Eigen::MatrixXd frame_commutator(const Eigen::VectorXd& w) const {
    return frame_nabla_phi(w) * frame_phi(w) - frame_phi(w) * frame_nabla_phi(w);
  }

 private:
  void fill_slots(const Eigen::VectorXd& w, std::vector<double>& slots) const {
    const int n = dimension();
    slots.resize(slot_names_.size());
    for (int i = 0; i < n; ++i) slots[static_cast<std::size_t>(i)] = w[i];
    for (std::size_t k = 0; k < param_values_.size(); ++k)
      slots[static_cast<std::size_t>(n) + k] = param_values_[k];
  }
  Eigen::VectorXd eval_block(const Eigen::VectorXd& w, int base, int count) const {
    thread_local std::vector<double> slots, scratch, vals;
    fill_slots(w, slots);
    vals.resize(static_cast<std::size_t>(prog_->num_outputs()));
    prog_->eval(slots, scratch, vals);
    Eigen::VectorXd out(count);
    for (int i = 0; i < count; ++i) out[i] = vals[static_cast<std::size_t>(base + i)];
    return out;
  }
  Eigen::MatrixXd eval_matrix(const Eigen::VectorXd& w, int base) const {
    const int n = dimension();
    Eigen::VectorXd flat = eval_block(w, base, n * n);
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = flat[i * n + j];
    return M;
  }

  void build_operators() {
    const int n = dimension();
    auto C = [&](int k, int i, int j) { return alg_.c(k, i, j); };
    auto wvar = [&](int i) { return Expr::variable(wnames_[static_cast<std::size_t>(i)]); };
    auto num = [](double v) { return Expr::number(v); };

    std::vector<Expr> dg(static_cast<std::size_t>(n * n));
    std::vector<Expr> d2g(static_cast<std::size_t>(n * n * n));
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i) {
        dg[static_cast<std::size_t>(l * n + i)] =
            gamma_[static_cast<std::size_t>(l)].diff(wnames_[static_cast<std::size_t>(i)]);
        for (int j = 0; j < n; ++j)
          d2g[static_cast<std::size_t>((l * n + i) * n + j)] =
              dg[static_cast<std::size_t>(l * n + i)].diff(
                  wnames_[static_cast<std::size_t>(j)]);
      }
    auto DG = [&](int l, int i) -> const Expr& {
      return dg[static_cast<std::size_t>(l * n + i)];
    };
    auto D2G = [&](int l, int i, int j) -> const Expr& {
      return d2g[static_cast<std::size_t>((l * n + i) * n + j)];
    };

    std::vector<Expr> phi(static_cast<std::size_t>(n * n));
    std::vector<Expr> lam(static_cast<std::size_t>(n * n));
    for (int l = 0; l < n; ++l)
      for (int j = 0; j < n; ++j) {
        Expr acc = num(0.0);
        for (int i = 0; i < n; ++i) {
          acc = Expr::add(acc, Expr::mul(num(0.5),
                                         Expr::mul(gamma_[static_cast<std::size_t>(i)],
                                                   D2G(l, i, j))));
          acc = Expr::add(acc, Expr::mul(num(0.5 * C(l, i, j)),
                                         gamma_[static_cast<std::size_t>(i)]));
          acc = Expr::sub(acc, Expr::mul(num(0.25),
                                         Expr::mul(DG(i, j), DG(l, i))));
          for (int k = 0; k < n; ++k) {
            acc = Expr::sub(acc, Expr::mul(num(0.75 * C(k, i, j)),
                                           Expr::mul(wvar(i), DG(l, k))));
            acc = Expr::add(acc, Expr::mul(num(0.25 * C(l, i, k)),
                                           Expr::mul(wvar(i), DG(k, j))));
          }
        }
        for (int m = 0; m < n; ++m)
          for (int nu = 0; nu < n; ++nu)
            for (int k = 0; k < n; ++k) {
              double coeff = -0.25 * C(k, m, j) * C(l, nu, k);
              if (coeff != 0.0)
                acc = Expr::add(acc, Expr::mul(num(coeff),
                                               Expr::mul(wvar(m), wvar(nu))));
            }
        phi[static_cast<std::size_t>(l * n + j)] = acc;
      }

    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) {
        Expr acc = Expr::mul(num(-0.5), DG(k, i));
        for (int j = 0; j < n; ++j)
          if (C(k, j, i) != 0.0)
            acc = Expr::add(acc, Expr::mul(num(0.5 * C(k, j, i)), wvar(j)));
        lam[static_cast<std::size_t>(k * n + i)] = acc;
      }

    std::vector<Expr> psi(static_cast<std::size_t>(n * n));
    auto PHI = [&](int a, int b) -> const Expr& {
      return phi[static_cast<std::size_t>(a * n + b)];
    };
    auto LAM = [&](int a, int b) -> const Expr& {
      return lam[static_cast<std::size_t>(a * n + b)];
    };
    for (int l = 0; l < n; ++l)
      for (int j = 0; j < n; ++j) {
        Expr acc = num(0.0);
        for (int i = 0; i < n; ++i)
          acc = Expr::add(acc,
                          Expr::mul(gamma_[static_cast<std::size_t>(i)],
                                    PHI(l, j).diff(wnames_[static_cast<std::size_t>(i)])));
        for (int k = 0; k < n; ++k) {
          acc = Expr::add(acc, Expr::mul(LAM(l, k), PHI(k, j)));
          acc = Expr::sub(acc, Expr::mul(PHI(l, k), LAM(k, j)));
        }
        psi[static_cast<std::size_t>(l * n + j)] = acc;
      }

    prog_ = std::make_shared<ProgramSet>(slot_names_);
    out_gamma_ = prog_->add(gamma_[0]);
    for (int i = 1; i < n; ++i) prog_->add(gamma_[static_cast<std::size_t>(i)]);
    out_dgamma_ = prog_->add(dg[0]);
    for (std::size_t i = 1; i < dg.size(); ++i) prog_->add(dg[i]);
    out_phi_ = prog_->add(phi[0]);
    for (std::size_t i = 1; i < phi.size(); ++i) prog_->add(phi[i]);
    out_lambda_ = prog_->add(lam[0]);
    for (std::size_t i = 1; i < lam.size(); ++i) prog_->add(lam[i]);
    out_psi_ = prog_->add(psi[0]);
    for (std::size_t i = 1; i < psi.size(); ++i) prog_->add(psi[i]);
  }

  LieAlgebraData alg_;
  std::vector<Expr> gamma_;
  std::map<std::string, double> params_;
  std::vector<std::string> wnames_, slot_names_;
  std::vector<double> param_values_;
  std::shared_ptr<ProgramSet> prog_;
  int out_gamma_ = 0, out_dgamma_ = 0, out_phi_ = 0, out_lambda_ = 0, out_psi_ = 0;
};

inline Eigen::MatrixXd frame_phi(const ReducedSystem& red, const Eigen::VectorXd& w) {
  return red.frame_phi(w);
}
inline Eigen::MatrixXd frame_lambda(const ReducedSystem& red, const Eigen::VectorXd& w) {
  return red.frame_lambda(w);
}
inline Eigen::MatrixXd frame_nabla_phi(const ReducedSystem& red, const Eigen::VectorXd& w) {
  return red.frame_nabla_phi(w);
}

// ---------------------------------------------------------------------------
// Relative equilibria: roots of gamma(w) = 0.  Equilibria typically come in
// families (singular Jacobian along the family), so the Newton step uses a
// pseudo-inverse and the kernel directions are reported as family tangents.
// ---------------------------------------------------------------------------
struct RelativeEquilibrium {
  Eigen::VectorXd w0;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
  Eigen::MatrixXd family_tangents;  // columns: near-kernel directions of dgamma
  std::string note;
};

inline std::vector<RelativeEquilibrium> find_relative_equilibria(
    const ReducedSystem& red, const std::vector<Eigen::VectorXd>& seeds,
    int max_iterations = 60) {
  if (seeds.empty()) throw std::invalid_argument("need at least one seed");
  const int n = red.dimension();
  std::vector<RelativeEquilibrium> out;
  for (const auto& seed : seeds) {
    RelativeEquilibrium re;
    re.w0 = seed;
    Eigen::VectorXd g = red.gamma(re.w0);
    for (int it = 0; it < max_iterations; ++it) {
      re.iterations = it;
      double tol = 1e-10 * (1.0 + re.w0.norm());
      if (g.norm() < tol) {
        re.converged = true;
        break;
      }
      Eigen::MatrixXd J = red.gamma_jacobian(re.w0);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
      double smax = svd.singularValues().maxCoeff();
      double cutoff = std::max(1e-10 * smax, 1e-14);
      Eigen::VectorXd inv_sv = svd.singularValues();
      for (int i = 0; i < n; ++i)
        inv_sv[i] = inv_sv[i] > cutoff ? 1.0 / inv_sv[i] : 0.0;
      Eigen::VectorXd step =
          -(svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose() * g);
      if (step.norm() == 0.0) {
        re.note = "singular Jacobian with no descent direction";
        break;
      }
      double alpha = 1.0;
      Eigen::VectorXd g_new;
      for (int bt = 0; bt < 30; ++bt) {
        g_new = red.gamma(re.w0 + alpha * step);
        if (g_new.norm() < g.norm()) break;
        alpha *= 0.5;
      }
      if (g_new.norm() >= g.norm()) {
        re.note = "damped Newton stalled";
        break;
      }
      re.w0 += alpha * step;
      g = g_new;
    }
    re.residual = g.norm();
    re.converged = re.residual < 1e-10 * (1.0 + re.w0.norm());
    {
      Eigen::MatrixXd J = red.gamma_jacobian(re.w0);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
      double smax = svd.singularValues().maxCoeff();
      double cutoff = std::max(1e-8 * smax, 1e-12);
      int kernel = 0;
      for (int i = 0; i < n; ++i)
        if (svd.singularValues()[i] < cutoff) ++kernel;
      re.family_tangents = svd.matrixV().rightCols(kernel);
    }
    if (!re.converged) {
      out.push_back(re);
      continue;
    }
    bool dup = false;
    for (const auto& prev : out)
      if (prev.converged && (prev.w0 - re.w0).norm() < 1e-8) dup = true;
    if (!dup) out.push_back(re);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conjugate times along a relative equilibrium: k pi / sqrt(lambda) for each
// strictly positive real eigenvalue of the frame phi at w0.  Valid under
// [nabla Phi, Phi] = 0; the residual at w0 is attached, never silently
// assumed.
// ---------------------------------------------------------------------------
struct ReleqConjugateReport {
  std::vector<ConjugateEvent> events;
  Eigen::VectorXcd phi_eigenvalues;
  double commutator_residual = 0.0;  // relative to |phi| |psi|
  bool hypothesis_ok = false;
  std::string note;
};

inline ReleqConjugateReport releq_conjugate_times(const ReducedSystem& red,
                                                  const RelativeEquilibrium& w0,
                                                  double t_max) {
  if (!w0.converged)
    throw std::invalid_argument("relative equilibrium did not converge");
  ReleqConjugateReport rep;
  Eigen::MatrixXd phi = red.frame_phi(w0.w0);
  Eigen::MatrixXd psi = red.frame_nabla_phi(w0.w0);
  Eigen::MatrixXd comm = psi * phi - phi * psi;
  double scale = phi.norm() * psi.norm();
  rep.commutator_residual = scale > 0.0 ? comm.norm() / scale : comm.norm();
  rep.hypothesis_ok = rep.commutator_residual < 1e-8;
  if (!rep.hypothesis_ok)
    rep.note = "[nabla Phi, Phi] != 0 at the equilibrium; predictor hypothesis unmet";

  Eigen::EigenSolver<Eigen::MatrixXd> es(phi);
  rep.phi_eigenvalues = es.eigenvalues();
  double radius = rep.phi_eigenvalues.cwiseAbs().maxCoeff();
  double merge_tol = 1e-6 * std::max(radius, 1e-300);

  std::vector<std::pair<double, int>> positive;  // (lambda, multiplicity)
  std::vector<bool> used(static_cast<std::size_t>(red.dimension()), false);
  for (int i = 0; i < red.dimension(); ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    std::complex<double> l = rep.phi_eigenvalues[i];
    if (std::abs(l.imag()) > merge_tol || l.real() <= merge_tol) continue;
    int mult = 0;
    for (int j = 0; j < red.dimension(); ++j)
      if (!used[static_cast<std::size_t>(j)] &&
          std::abs(rep.phi_eigenvalues[j] - l) <= merge_tol) {
        used[static_cast<std::size_t>(j)] = true;
        ++mult;
      }
    positive.emplace_back(l.real(), mult);
  }
  if (positive.empty() && rep.note.empty())
    rep.note = "no strictly positive eigenvalue; no predicted conjugate times";

  for (const auto& [lambda, mult] : positive)
    for (double t : predictor_times(lambda, t_max)) {
      ConjugateEvent ev;
      ev.time = t;
      ev.multiplicity = mult;
      ev.method = "predictor";
      rep.events.push_back(ev);
    }
  std::sort(rep.events.begin(), rep.events.end(),
            [](const ConjugateEvent& a, const ConjugateEvent& b) {
              return a.time < b.time;
            });
  // merge coincident times from distinct eigenvalues
  for (std::size_t i = 0; i + 1 < rep.events.size();) {
    if (rep.events[i + 1].time - rep.events[i].time <
        1e-9 * std::max(1.0, rep.events[i].time)) {
      rep.events[i].multiplicity += rep.events[i + 1].multiplicity;
      rep.events.erase(rep.events.begin() + static_cast<long>(i) + 1);
    } else {
      ++i;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lift to the group: given a left-invariant frame E(q) (columns act on the
// quasi-velocities, velocity = E(q) w) and the reduced field gamma, produce
// a coordinate-level system
//   f(q, qdot) = E gamma(w) + (sum_k dE/dq^k qdot^k) w,   w = E^{-1} qdot.
// Frame inversion is numeric (LU per evaluation point); first derivatives of
// f are exact via the chain rule, so the lifted system supports curve,
// transport and Jacobi integration like an expression-backed one.
// ---------------------------------------------------------------------------
class LiftedSystem {
 public:
  LiftedSystem(LieAlgebraData algebra, std::vector<std::string> coordinates,
               std::vector<Expr> frame, ReducedSystem reduced)
      : alg_(std::move(algebra)),
        coords_(std::move(coordinates)),
        red_(std::move(reduced)) {
    n_ = alg_.dimension();
    if (static_cast<int>(coords_.size()) != n_)
      throw std::invalid_argument("expected one coordinate per algebra dimension");
    if (static_cast<int>(frame.size()) != n_ * n_)
      throw std::invalid_argument("frame needs n*n expressions (row-major)");

    slot_names_ = coords_;
    for (const auto& [k, v] : red_.parameters()) {
      slot_names_.push_back(k);
      param_values_.push_back(v);
    }

    prog_ = std::make_shared<ProgramSet>(slot_names_);
    for (const auto& e : frame) prog_->add(e);              // E, n^2
    for (int k = 0; k < n_; ++k)                            // dE/dq^k, n^3
      for (const auto& e : frame)
        prog_->add(e.diff(coords_[static_cast<std::size_t>(k)]));
    for (int k = 0; k < n_; ++k)                            // d2E/dq^j dq^k, n^4
      for (int j = 0; j < n_; ++j)
        for (const auto& e : frame)
          prog_->add(e.diff(coords_[static_cast<std::size_t>(k)])
                         .diff(coords_[static_cast<std::size_t>(j)]));
  }

  int dimension() const { return n_; }
  const std::vector<std::string>& coordinates() const { return coords_; }
  const ReducedSystem& reduced() const { return red_; }

  Eigen::MatrixXd frame_at(const Eigen::VectorXd& q) const {
    Workspace ws;
    eval_frame(q, ws);
    return ws.E;
  }

  // velocity corresponding to quasi-velocities w at configuration q
  Eigen::VectorXd lift_velocity(const Eigen::VectorXd& q,
                                const Eigen::VectorXd& w) const {
    return frame_at(q) * w;
  }
  TangentState lift_state(const Eigen::VectorXd& q,
                          const Eigen::VectorXd& w) const {
    return TangentState(q, lift_velocity(q, w));
  }
  Eigen::VectorXd quasi_velocities(const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& v) const {
    Workspace ws;
    eval_frame(q, ws);
    return solve(ws, v);
  }

  void force(const Eigen::VectorXd& q, const Eigen::VectorXd& v,
             Eigen::VectorXd& out) const {
    thread_local Workspace ws;
    eval_frame(q, ws);
    Eigen::VectorXd w = solve(ws, v);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n_, n_);
    for (int k = 0; k < n_; ++k) B += ws.dE[static_cast<std::size_t>(k)] * v[k];
    out = ws.E * red_.gamma(w) + B * w;
  }

  void force_jacobians(const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                       Eigen::MatrixXd& dfdq, Eigen::MatrixXd& dfdv) const {
    thread_local Workspace ws;
    eval_frame(q, ws);
    Eigen::VectorXd w = solve(ws, v);
    Eigen::VectorXd g = red_.gamma(w);
    Eigen::MatrixXd Gw = red_.gamma_jacobian(w);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n_, n_);
    for (int k = 0; k < n_; ++k) B += ws.dE[static_cast<std::size_t>(k)] * v[k];
    Eigen::MatrixXd EGwB = ws.E * Gw;  // E dgamma/dw
    Eigen::MatrixXd M = EGwB + B;      // applied to dw terms

    dfdv.resize(n_, n_);
    dfdq.resize(n_, n_);
    // columns of A = E^{-1} via the LU solve
    Eigen::MatrixXd A = ws.lu.solve(Eigen::MatrixXd::Identity(n_, n_));
    for (int j = 0; j < n_; ++j) {
      dfdv.col(j) = M * A.col(j) + ws.dE[static_cast<std::size_t>(j)] * w;
      // d(E^{-1} v)/dq^j = -A dE_j w
      Eigen::VectorXd dw = -(A * (ws.dE[static_cast<std::size_t>(j)] * w));
      Eigen::VectorXd d2term = Eigen::VectorXd::Zero(n_);
      for (int k = 0; k < n_; ++k)
        d2term += ws.d2E[static_cast<std::size_t>(j * n_ + k)] * v[k] * w;
      dfdq.col(j) = ws.dE[static_cast<std::size_t>(j)] * g + M * dw + d2term;
    }
  }

 private:
  struct Workspace {
    Eigen::MatrixXd E;
    std::vector<Eigen::MatrixXd> dE;   // per coordinate
    std::vector<Eigen::MatrixXd> d2E;  // per (j, k), index j*n+k
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    std::vector<double> slots, scratch, vals;
  };

  void eval_frame(const Eigen::VectorXd& q, Workspace& ws) const {
    ws.slots.resize(slot_names_.size());
    for (int i = 0; i < n_; ++i) ws.slots[static_cast<std::size_t>(i)] = q[i];
    for (std::size_t k = 0; k < param_values_.size(); ++k)
      ws.slots[static_cast<std::size_t>(n_) + k] = param_values_[k];
    ws.vals.resize(static_cast<std::size_t>(prog_->num_outputs()));
    prog_->eval(ws.slots, ws.scratch, ws.vals);

    auto read = [&](int base) {
      Eigen::MatrixXd M(n_, n_);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          M(i, j) = ws.vals[static_cast<std::size_t>(base + i * n_ + j)];
      return M;
    };
    ws.E = read(0);
    ws.dE.resize(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k)
      ws.dE[static_cast<std::size_t>(k)] = read(n_ * n_ * (1 + k));
    ws.d2E.resize(static_cast<std::size_t>(n_ * n_));
    // stored order: for k { for j { d2E/dq^k dq^j } }, read as (j, k)
    for (int k = 0; k < n_; ++k)
      for (int j = 0; j < n_; ++j)
        ws.d2E[static_cast<std::size_t>(j * n_ + k)] =
            read(n_ * n_ * (1 + n_) + n_ * n_ * (k * n_ + j));
    ws.lu.compute(ws.E);
    double det = ws.lu.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-12 * std::pow(ws.E.norm(), n_))
      throw std::runtime_error("singular frame matrix at evaluation point");
  }

  Eigen::VectorXd solve(const Workspace& ws, const Eigen::VectorXd& v) const {
    return ws.lu.solve(v);
  }

  LieAlgebraData alg_;
  std::vector<std::string> coords_;
  ReducedSystem red_;
  int n_ = 0;
  std::vector<std::string> slot_names_;
  std::vector<double> param_values_;
  std::shared_ptr<ProgramSet> prog_;
};

inline LiftedSystem lift_to_group(const LieAlgebraData& algebra,
                                  const std::vector<std::string>& coordinates,
                                  const std::vector<Expr>& frame,
                                  const ReducedSystem& reduced) {
  return LiftedSystem(algebra, coordinates, frame, reduced);
}

}  // namespace sode

#endif  // SODE_LIEGROUP_HPP
