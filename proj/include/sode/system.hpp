// A second-order system q''^i = f^i(q, q') with named coordinates and
// parameters.  Forces are expression trees; first derivatives of the forces
// are compiled to tapes at construction so the right-hand sides used by the
// integrators are allocation-free.
#ifndef SODE_SYSTEM_HPP
#define SODE_SYSTEM_HPP

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sode/expr.hpp"

namespace sode {

struct TangentState {
  Eigen::VectorXd q;
  Eigen::VectorXd v;

  TangentState() = default;
  TangentState(Eigen::VectorXd q_, Eigen::VectorXd v_)
      : q(std::move(q_)), v(std::move(v_)) {}
  int dimension() const { return static_cast<int>(q.size()); }
};

class SodeSystem {
 public:
  SodeSystem(std::vector<std::string> coordinates, std::vector<Expr> forces,
             std::map<std::string, double> parameters = {})
      : coords_(std::move(coordinates)),
        forces_(std::move(forces)),
        params_(std::move(parameters)) {
    n_ = static_cast<int>(coords_.size());
    if (n_ <= 0) throw std::invalid_argument("system needs at least one coordinate");
    if (static_cast<int>(forces_.size()) != n_)
      throw std::invalid_argument("expected one force per coordinate");
    {
      std::unordered_set<std::string> seen;
      for (const auto& c : coords_) {
        if (!seen.insert(c).second)
          throw std::invalid_argument("duplicate coordinate name '" + c + "'");
        vnames_.push_back("v" + c);
      }
      for (const auto& c : vnames_) {
        if (seen.count(c))
          throw std::invalid_argument("coordinate name collides with velocity name '" + c + "'");
      }
    }
    slot_names_ = coords_;
    slot_names_.insert(slot_names_.end(), vnames_.begin(), vnames_.end());
    for (const auto& [k, val] : params_) {
      slot_names_.push_back(k);
      param_values_.push_back(val);
    }
    check_declared();

    force_prog_ = std::make_shared<ProgramSet>(slot_names_);
    for (const auto& f : forces_) force_prog_->add(f);

    jac_prog_ = std::make_shared<ProgramSet>(slot_names_);
    dfdq_.resize(n_ * n_);
    dfdv_.resize(n_ * n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        dfdq_[i * n_ + j] = forces_[i].diff(coords_[j]);
        dfdv_[i * n_ + j] = forces_[i].diff(vnames_[j]);
        jac_prog_->add(dfdq_[i * n_ + j]);
      }
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) jac_prog_->add(dfdv_[i * n_ + j]);
  }

  static SodeSystem from_strings(const std::vector<std::string>& coordinates,
                                 const std::vector<std::string>& force_sources,
                                 const std::map<std::string, double>& parameters = {}) {
    std::vector<std::string> declared = coordinates;
    for (const auto& c : coordinates) declared.push_back("v" + c);
    for (const auto& [k, v] : parameters) declared.push_back(k);
    std::vector<Expr> forces;
    forces.reserve(force_sources.size());
    for (const auto& src : force_sources) forces.push_back(parse(src, declared));
    return SodeSystem(coordinates, std::move(forces), parameters);
  }

  int dimension() const { return n_; }
  const std::vector<std::string>& coordinates() const { return coords_; }
  const std::vector<std::string>& velocity_names() const { return vnames_; }
  const std::vector<std::string>& slot_names() const { return slot_names_; }
  const std::vector<Expr>& forces() const { return forces_; }
  const std::map<std::string, double>& parameters() const { return params_; }
  const Expr& dfdq_expr(int i, int j) const { return dfdq_[i * n_ + j]; }
  const Expr& dfdv_expr(int i, int j) const { return dfdv_[i * n_ + j]; }

  // Fill slot vector [q, v, params] for tape evaluation.
  void fill_slots(const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                  std::vector<double>& slots) const {
    slots.resize(slot_names_.size());
    for (int i = 0; i < n_; ++i) slots[static_cast<std::size_t>(i)] = q[i];
    for (int i = 0; i < n_; ++i) slots[static_cast<std::size_t>(n_ + i)] = v[i];
    for (std::size_t k = 0; k < param_values_.size(); ++k)
      slots[static_cast<std::size_t>(2 * n_) + k] = param_values_[k];
  }

  void force(const Eigen::VectorXd& q, const Eigen::VectorXd& v,
             Eigen::VectorXd& out) const {
    thread_local std::vector<double> slots, scratch, vals;
    fill_slots(q, v, slots);
    vals.resize(static_cast<std::size_t>(n_));
    force_prog_->eval(slots, scratch, vals);
    out.resize(n_);
    for (int i = 0; i < n_; ++i) out[i] = vals[static_cast<std::size_t>(i)];
  }

  Eigen::VectorXd force(const TangentState& s) const {
    Eigen::VectorXd out;
    force(s.q, s.v, out);
    return out;
  }

  void force_jacobians(const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                       Eigen::MatrixXd& dfdq, Eigen::MatrixXd& dfdv) const {
    thread_local std::vector<double> slots, scratch, vals;
    fill_slots(q, v, slots);
    vals.resize(static_cast<std::size_t>(2 * n_ * n_));
    jac_prog_->eval(slots, scratch, vals);
    dfdq.resize(n_, n_);
    dfdv.resize(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        dfdq(i, j) = vals[static_cast<std::size_t>(i * n_ + j)];
        dfdv(i, j) = vals[static_cast<std::size_t>(n_ * n_ + i * n_ + j)];
      }
  }

  // Binding map for one state, for convenience evaluation of expressions.
  std::map<std::string, double> binding(const TangentState& s) const {
    std::map<std::string, double> b = params_;
    for (int i = 0; i < n_; ++i) {
      b[coords_[static_cast<std::size_t>(i)]] = s.q[i];
      b[vnames_[static_cast<std::size_t>(i)]] = s.v[i];
    }
    return b;
  }

 private:
  void check_declared() const {
    std::unordered_set<std::string> allowed(slot_names_.begin(), slot_names_.end());
    for (const auto& f : forces_) {
      std::unordered_set<std::string> used;
      f.collect_variables(used);
      for (const auto& u : used)
        if (!allowed.count(u))
          throw std::invalid_argument("force references undeclared identifier '" + u + "'");
    }
  }

  int n_ = 0;
  std::vector<std::string> coords_, vnames_, slot_names_;
  std::vector<Expr> forces_, dfdq_, dfdv_;
  std::map<std::string, double> params_;
  std::vector<double> param_values_;
  std::shared_ptr<ProgramSet> force_prog_, jac_prog_;
};

}  // namespace sode

#endif  // SODE_SYSTEM_HPP
