// JSON and CSV interchange: system and algebra definition schemas, report
// builders, and a deterministic JSON writer (sorted keys, floats with 17
// significant digits) so identical runs produce byte-identical output.
#ifndef SODE_JSON_IO_HPP
#define SODE_JSON_IO_HPP

#include <json.hpp>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "sode/conjugate.hpp"
#include "sode/gallery.hpp"
#include "sode/geometry.hpp"
#include "sode/liegroup.hpp"
#include "sode/spectral.hpp"
#include "sode/system.hpp"

namespace sode {

using nlohmann::json;

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic writer.
// ---------------------------------------------------------------------------
namespace detail {

inline void write_json(const json& j, std::ostream& os, int indent, int depth) {
  auto pad = [&](int d) {
    os << '\n';
    for (int i = 0; i < indent * d; ++i) os << ' ';
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted
        if (!first) os << ',';
        first = false;
        pad(depth + 1);
        os << '"' << it.key() << "\": ";
        write_json(it.value(), os, indent, depth + 1);
      }
      pad(depth);
      os << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << ',';
        first = false;
        pad(depth + 1);
        write_json(v, os, indent, depth + 1);
      }
      pad(depth);
      os << ']';
      return;
    }
    case json::value_t::number_float: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
      os << buf;
      return;
    }
    default:
      os << j.dump();
      return;
  }
}

}  // namespace detail

inline void dump_json(const json& j, std::ostream& os, int indent = 2) {
  detail::write_json(j, os, indent, 0);
  os << '\n';
}

// ---------------------------------------------------------------------------
// Schemas.
// ---------------------------------------------------------------------------

// {"dimension": n, "coordinates": [...], "forces": [...], "parameters": {...}}
inline SodeSystem load_system(const json& j) {
  if (!j.is_object()) throw SchemaError("system definition must be a JSON object");
  if (!j.contains("dimension") || !j["dimension"].is_number_integer())
    throw SchemaError("missing integer field 'dimension'");
  int n = j["dimension"].get<int>();
  if (!j.contains("coordinates") || !j["coordinates"].is_array())
    throw SchemaError("missing array field 'coordinates'");
  if (!j.contains("forces") || !j["forces"].is_array())
    throw SchemaError("missing array field 'forces'");
  std::vector<std::string> coords, forces;
  for (const auto& c : j["coordinates"]) {
    if (!c.is_string()) throw SchemaError("coordinates must be strings");
    coords.push_back(c.get<std::string>());
  }
  for (const auto& f : j["forces"]) {
    if (!f.is_string()) throw SchemaError("forces must be strings");
    forces.push_back(f.get<std::string>());
  }
  if (static_cast<int>(coords.size()) != n)
    throw SchemaError("dimension does not match the number of coordinates");
  if (static_cast<int>(forces.size()) != n)
    throw SchemaError("dimension does not match the number of forces");
  std::map<std::string, double> params;
  if (j.contains("parameters")) {
    if (!j["parameters"].is_object())
      throw SchemaError("'parameters' must be an object");
    for (auto it = j["parameters"].begin(); it != j["parameters"].end(); ++it) {
      if (!it.value().is_number())
        throw SchemaError("parameter '" + it.key() + "' must be a number");
      params[it.key()] = it.value().get<double>();
    }
  }
  return SodeSystem::from_strings(coords, forces, params);
}

// {"dimension": n, "structure_constants": [[i,j,k,value],...] (i<j, 1-based),
//  "gamma": ["expr in w1..wn", ...], "parameters": {...}}
inline ReducedSystem load_algebra(const json& j) {
  if (!j.is_object()) throw SchemaError("algebra definition must be a JSON object");
  if (!j.contains("dimension") || !j["dimension"].is_number_integer())
    throw SchemaError("missing integer field 'dimension'");
  int n = j["dimension"].get<int>();
  std::vector<std::tuple<int, int, int, double>> entries;
  if (j.contains("structure_constants")) {
    if (!j["structure_constants"].is_array())
      throw SchemaError("'structure_constants' must be an array");
    for (const auto& row : j["structure_constants"]) {
      if (!row.is_array() || row.size() != 4)
        throw SchemaError("structure constant entries must be [i, j, k, value]");
      entries.emplace_back(row[0].get<int>() - 1, row[1].get<int>() - 1,
                           row[2].get<int>() - 1, row[3].get<double>());
    }
  }
  if (!j.contains("gamma") || !j["gamma"].is_array() ||
      static_cast<int>(j["gamma"].size()) != n)
    throw SchemaError("missing 'gamma' array with one expression per dimension");
  std::vector<std::string> gamma;
  for (const auto& g : j["gamma"]) gamma.push_back(g.get<std::string>());
  std::map<std::string, double> params;
  if (j.contains("parameters"))
    for (auto it = j["parameters"].begin(); it != j["parameters"].end(); ++it)
      params[it.key()] = it.value().get<double>();
  LieAlgebraData alg(n, entries);
  return ReducedSystem::from_strings(std::move(alg), gamma, params);
}

// ---------------------------------------------------------------------------
// Report builders.
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline json complex_vector_to_json(const Eigen::VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out.push_back(json{{"re", v[i].real()}, {"im", v[i].imag()}});
  return out;
}

inline json panel_report(const SodeSystem& sys, const TangentState& s,
                         unsigned seed = 20240817) {
  OperatorEvaluator ops(sys);
  OperatorPanel p = ops.panel(s);
  Spectrum sp = spectrum_of(p.phi);
  SprayReport sr = spray_check(sys, random_states(sys.dimension(), 50, seed));
  json out;
  out["gamma"] = matrix_to_json(p.gamma);
  out["phi"] = matrix_to_json(p.phi);
  out["nabla_phi"] = matrix_to_json(p.nabla_phi);
  out["commutator"] = matrix_to_json(p.commutator);
  out["spectrum"] = complex_vector_to_json(sp.values);
  out["diagonalizable_warning"] = sp.diagonalizable_warning;
  out["spray"] = json{{"is_spray", sr.is_spray},
                      {"max_nabla_T", sr.max_nabla_T},
                      {"max_phi_T", sr.max_phi_T}};
  return out;
}

inline json conjugate_report_to_json(const ConjugateReport& rep) {
  json events = json::array();
  for (const auto& ev : rep.events)
    events.push_back(json{{"t", ev.time},
                          {"multiplicity", ev.multiplicity},
                          {"method", ev.method},
                          {"det_slope_or_gap", ev.det_slope_or_gap},
                          {"residual", ev.residual}});
  json out;
  out["events"] = events;
  out["interval"] = json{{"t_min", rep.t_min}, {"t_max", rep.t_max}};
  out["tolerances"] = json{{"time", rep.time_tolerance},
                           {"dip", rep.dip_threshold},
                           {"rank", rep.rank_threshold}};
  out["truncated"] = rep.truncated;
  out["warnings"] = rep.warnings;
  return out;
}

inline json releq_report_to_json(const std::vector<RelativeEquilibrium>& roots,
                                 const std::vector<ReleqConjugateReport>& reports) {
  json out;
  json eq = json::array();
  for (std::size_t i = 0; i < roots.size(); ++i) {
    json r;
    json w = json::array();
    for (Eigen::Index k = 0; k < roots[i].w0.size(); ++k)
      w.push_back(roots[i].w0[k]);
    r["w0"] = w;
    r["residual"] = roots[i].residual;
    r["converged"] = roots[i].converged;
    r["iterations"] = roots[i].iterations;
    r["family_dimension"] = static_cast<int>(roots[i].family_tangents.cols());
    if (!roots[i].note.empty()) r["note"] = roots[i].note;
    if (i < reports.size()) {
      json events = json::array();
      for (const auto& ev : reports[i].events)
        events.push_back(json{{"t", ev.time},
                              {"multiplicity", ev.multiplicity},
                              {"method", ev.method}});
      r["conjugate_times"] = events;
      r["commutator_residual"] = reports[i].commutator_residual;
      r["hypothesis_ok"] = reports[i].hypothesis_ok;
      if (!reports[i].note.empty()) r["predictor_note"] = reports[i].note;
    }
    eq.push_back(r);
  }
  out["equilibria"] = eq;
  return out;
}

inline json verify_report_to_json(const VerifyReport& rep) {
  json checks = json::array();
  json provenance;
  for (const auto& c : rep.checks) {
    checks.push_back(json{{"name", c.name},
                          {"error", c.error},
                          {"tolerance", c.tolerance},
                          {"pass", c.pass}});
    provenance[c.name] = c.provenance;
  }
  json out;
  out["entry"] = rep.entry;
  out["checks"] = checks;
  out["provenance"] = provenance;
  out["all_pass"] = rep.all_pass;
  return out;
}

// ---------------------------------------------------------------------------
// CSV writers.
// ---------------------------------------------------------------------------

namespace detail {
inline void csv_number(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace detail

// header: t,q1..qn,v1..vn
inline void write_trajectory_csv(const Trajectory& traj,
                                 const std::vector<std::string>& coords,
                                 std::ostream& os) {
  os << "t";
  for (const auto& c : coords) os << ",q_" << c;
  for (const auto& c : coords) os << ",v_" << c;
  os << "\n";
  for (const auto& node : traj.dense.nodes) {
    detail::csv_number(os, node.t);
    for (Eigen::Index i = 0; i < node.y.size(); ++i) {
      os << ",";
      detail::csv_number(os, node.y[i]);
    }
    os << "\n";
  }
}

// header: t,Y_11..Y_nn,det
inline void write_jacobi_csv(const JacobiMatrixSolution& jac, std::ostream& os) {
  const int n = jac.n;
  os << "t";
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) os << ",Y_" << i << j;
  os << ",det\n";
  for (const auto& node : jac.dense.nodes) {
    detail::csv_number(os, node.t);
    Eigen::MatrixXd Y = jac.unpack(node.y, 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        os << ",";
        detail::csv_number(os, Y(i, j));
      }
    os << ",";
    detail::csv_number(os, Y.determinant());
    os << "\n";
  }
}

// header: t,det,sigma_min
inline void write_det_trace_csv(const JacobiMatrixSolution& jac, std::ostream& os) {
  os << "t,det,sigma_min\n";
  for (const auto& node : jac.dense.nodes) {
    Eigen::MatrixXd Y = jac.unpack(node.y, 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y);
    detail::csv_number(os, node.t);
    os << ",";
    detail::csv_number(os, Y.determinant());
    os << ",";
    detail::csv_number(os, svd.singularValues().minCoeff());
    os << "\n";
  }
}

// header: t,re(l1),im(l1),...
inline void write_spectrum_csv(const SpectrumTrace& trace, std::ostream& os) {
  os << "t";
  for (int b = 1; b <= trace.branches(); ++b)
    os << ",re_l" << b << ",im_l" << b;
  os << "\n";
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    detail::csv_number(os, trace.times[k]);
    for (int b = 0; b < trace.branches(); ++b) {
      os << ",";
      detail::csv_number(os, trace.values(static_cast<Eigen::Index>(k), b).real());
      os << ",";
      detail::csv_number(os, trace.values(static_cast<Eigen::Index>(k), b).imag());
    }
    os << "\n";
  }
}

}  // namespace sode

#endif  // SODE_JSON_IO_HPP
