// Command-line front end: load a system (JSON definition or gallery name),
// run analyses, emit machine-readable reports.
//
// Exit codes: 0 success (and, for gallery verify, all checks green),
// 1 failed verification checks, 2 parse/definition errors, 3 numeric errors.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "sode/conjugate.hpp"
#include "sode/flow.hpp"
#include "sode/gallery.hpp"
#include "sode/geometry.hpp"
#include "sode/json_io.hpp"
#include "sode/liegroup.hpp"
#include "sode/spectral.hpp"

namespace {

struct Options {
  std::string system_file;
  std::string gallery_name;
  std::string algebra_file;
  std::string state;
  std::string seeds;
  std::string format = "json";
  std::string out_path;
  std::string verify_name;
  double t_max = 10.0;
  double tol = 1e-10;
  double zero_tol = 1e-9;
  double lambda0 = 0.0;
  bool have_lambda0 = false;
  int branch = 0;
  unsigned seed = 20240817;
  int jobs = 1;
};

sode::SodeSystem load_system(const Options& opt) {
  if (!opt.gallery_name.empty()) {
    sode::GalleryEntry e = sode::gallery_get(opt.gallery_name);
    if (!e.system)
      throw sode::SchemaError("gallery entry '" + opt.gallery_name +
                              "' has no coordinate-level system");
    return *e.system;
  }
  if (opt.system_file.empty())
    throw sode::SchemaError("need --system FILE or --gallery NAME");
  std::ifstream in(opt.system_file);
  if (!in) throw sode::SchemaError("cannot open '" + opt.system_file + "'");
  nlohmann::json j = nlohmann::json::parse(in);
  return sode::load_system(j);
}

Eigen::VectorXd parse_numbers(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      vals.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw sode::SchemaError("cannot parse number '" + item + "'");
    }
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = vals[i];
  return out;
}

sode::TangentState parse_state(const Options& opt, int n) {
  if (opt.state.empty()) throw sode::SchemaError("need --state \"q1,..,v1,..\"");
  Eigen::VectorXd all = parse_numbers(opt.state);
  if (all.size() != 2 * n)
    throw sode::SchemaError("state needs " + std::to_string(2 * n) + " numbers");
  return sode::TangentState(all.head(n), all.tail(n));
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(opt.out_path);
  if (!out) throw std::runtime_error("cannot write '" + opt.out_path + "'");
  out << text;
}

std::string to_text(const nlohmann::json& j) {
  std::ostringstream os;
  sode::dump_json(j, os);
  return os.str();
}

sode::IntegrationOptions integ_opts(const Options& opt) {
  sode::IntegrationOptions io;
  io.rtol = opt.tol;
  io.atol = opt.tol * 1e-2;
  return io;
}

int cmd_analyze(const Options& opt) {
  sode::SodeSystem sys = load_system(opt);
  sode::TangentState s = parse_state(opt, sys.dimension());
  emit(opt, to_text(sode::panel_report(sys, s, opt.seed)));
  return 0;
}

int cmd_curve(const Options& opt) {
  sode::SodeSystem sys = load_system(opt);
  sode::TangentState s = parse_state(opt, sys.dimension());
  sode::Trajectory traj = sode::integrate_curve(sys, s, opt.t_max, integ_opts(opt));
  if (opt.format == "csv") {
    std::ostringstream os;
    sode::write_trajectory_csv(traj, sys.coordinates(), os);
    emit(opt, os.str());
  } else {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : traj.dense.nodes) {
      nlohmann::json row;
      row["t"] = node.t;
      nlohmann::json y = nlohmann::json::array();
      for (Eigen::Index i = 0; i < node.y.size(); ++i) y.push_back(node.y[i]);
      row["state"] = y;
      nodes.push_back(row);
    }
    nlohmann::json out;
    out["nodes"] = nodes;
    out["truncated"] = traj.truncated();
    emit(opt, to_text(out));
  }
  return 0;
}

int cmd_conjugate(const Options& opt) {
  sode::SodeSystem sys = load_system(opt);
  sode::TangentState s = parse_state(opt, sys.dimension());
  sode::ConjugateOptions copts;
  copts.integration = integ_opts(opt);
  copts.dip_threshold = opt.zero_tol;
  if (opt.format == "csv") {
    const int n = sys.dimension();
    sode::JacobiMatrixSolution jac = sode::integrate_jacobi_matrix(
        sys, s, opt.t_max, Eigen::MatrixXd::Zero(n, n),
        Eigen::MatrixXd::Identity(n, n), copts.integration);
    std::ostringstream os;
    sode::write_det_trace_csv(jac, os);
    emit(opt, os.str());
    return 0;
  }
  sode::ConjugateReport rep = sode::find_conjugate_points(sys, s, opt.t_max, copts);
  emit(opt, to_text(sode::conjugate_report_to_json(rep)));
  return 0;
}

int cmd_predict(const Options& opt) {
  if (opt.have_lambda0) {
    std::vector<double> times = sode::predictor_times(opt.lambda0, opt.t_max);
    nlohmann::json out;
    out["lambda0"] = opt.lambda0;
    out["times"] = times;
    emit(opt, to_text(out));
    return 0;
  }
  sode::SodeSystem sys = load_system(opt);
  sode::TangentState s = parse_state(opt, sys.dimension());
  sode::ConjugateOptions copts;
  copts.integration = integ_opts(opt);
  sode::PredictorVerification ver =
      sode::verify_predictor(sys, s, opt.branch, opt.t_max, copts);
  nlohmann::json out;
  out["branch"] = ver.branch;
  out["lambda0"] = nlohmann::json{{"re", ver.lambda0.real()},
                                  {"im", ver.lambda0.imag()}};
  out["applicable"] = ver.applicable;
  if (!ver.note.empty()) out["note"] = ver.note;
  out["constancy_deviation"] = ver.constancy_deviation;
  out["eigen_residual"] = ver.eigen_residual;
  out["predicted_times"] = ver.predicted_times;
  out["shooting_times"] = ver.shooting_times;
  out["gaps"] = ver.gaps;
  emit(opt, to_text(out));
  return 0;
}

int cmd_spectrum(const Options& opt) {
  sode::SodeSystem sys = load_system(opt);
  sode::TangentState s = parse_state(opt, sys.dimension());
  sode::Trajectory traj = sode::integrate_curve(sys, s, opt.t_max, integ_opts(opt));
  sode::SpectrumTrace trace = sode::track_spectrum(sys, traj);
  if (opt.format == "csv") {
    std::ostringstream os;
    sode::write_spectrum_csv(trace, os);
    emit(opt, os.str());
    return 0;
  }
  nlohmann::json out;
  out["times"] = trace.times;
  nlohmann::json branches = nlohmann::json::array();
  for (int b = 0; b < trace.branches(); ++b) {
    nlohmann::json br;
    br["initial"] = nlohmann::json{{"re", trace.initial_value(b).real()},
                                   {"im", trace.initial_value(b).imag()}};
    br["constancy_deviation"] = trace.constancy_deviation[static_cast<std::size_t>(b)];
    br["gamma_estimate"] = trace.gamma_estimate[static_cast<std::size_t>(b)];
    br["multiplicity"] = trace.multiplicity[static_cast<std::size_t>(b)];
    branches.push_back(br);
  }
  out["branches"] = branches;
  out["crossing_flag"] = trace.crossing_flag;
  emit(opt, to_text(out));
  return 0;
}

int cmd_releq(const Options& opt) {
  if (opt.algebra_file.empty())
    throw sode::SchemaError("releq needs --algebra FILE");
  std::ifstream in(opt.algebra_file);
  if (!in) throw sode::SchemaError("cannot open '" + opt.algebra_file + "'");
  nlohmann::json j = nlohmann::json::parse(in);
  sode::ReducedSystem red = sode::load_algebra(j);
  if (opt.seeds.empty()) throw sode::SchemaError("releq needs --seeds \"w1,..;w1,..\"");
  std::vector<Eigen::VectorXd> seeds;
  std::stringstream ss(opt.seeds);
  std::string group;
  while (std::getline(ss, group, ';')) {
    Eigen::VectorXd w = parse_numbers(group);
    if (w.size() != red.dimension())
      throw sode::SchemaError("each seed needs " +
                              std::to_string(red.dimension()) + " numbers");
    seeds.push_back(w);
  }
  auto roots = sode::find_relative_equilibria(red, seeds);
  std::vector<sode::ReleqConjugateReport> reports;
  for (const auto& r : roots) {
    if (r.converged)
      reports.push_back(sode::releq_conjugate_times(red, r, opt.t_max));
    else
      reports.emplace_back();
  }
  emit(opt, to_text(sode::releq_report_to_json(roots, reports)));
  return 0;
}

int cmd_gallery_list(const Options& opt) {
  nlohmann::json out;
  out["entries"] = sode::gallery_list();
  emit(opt, to_text(out));
  return 0;
}

int cmd_gallery_verify(const Options& opt) {
  sode::GalleryTolerances tols;
  tols.zero_tol = opt.zero_tol;
  tols.seed = opt.seed;
  std::vector<std::string> names =
      opt.verify_name.empty() ? sode::gallery_list()
                              : std::vector<std::string>{opt.verify_name};
  std::vector<sode::VerifyReport> reports(names.size());
  {
    std::mutex m;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(m);
          if (next >= names.size()) return;
          i = next++;
        }
        reports[i] = sode::gallery_verify(names[i], tols);
      }
    };
    int nthreads = std::max(1, std::min<int>(opt.jobs, static_cast<int>(names.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  bool all = true;
  nlohmann::json out = nlohmann::json::array();
  for (const auto& rep : reports) {
    out.push_back(sode::verify_report_to_json(rep));
    all = all && rep.all_pass;
  }
  emit(opt, to_text(out));
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"second-order ODE geometry: operators, Jacobi fields, conjugate points"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool needs_system) {
    if (needs_system) {
      sub->add_option("--system", opt.system_file, "system definition JSON file");
      sub->add_option("--gallery", opt.gallery_name, "built-in gallery system");
      sub->add_option("--state", opt.state, "initial state q1,..,qn,v1,..,vn");
    }
    sub->add_option("--t-max", opt.t_max, "time horizon");
    sub->add_option("--tol", opt.tol, "integration tolerance")
        ->check(CLI::Range(1e-14, 1e-3));
    sub->add_option("--zero-tol", opt.zero_tol, "structural-zero threshold");
    sub->add_option("--format", opt.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--out", opt.out_path, "output path (default stdout)");
    sub->add_option("--seed", opt.seed, "random seed for sampled checks");
    sub->add_option("--jobs", opt.jobs, "parallel worker bound");
  };

  auto* analyze = app.add_subcommand("analyze", "operator panel at a state");
  add_common(analyze, true);
  auto* curve = app.add_subcommand("curve", "integrate a base integral curve");
  add_common(curve, true);
  auto* conj = app.add_subcommand("conjugate", "locate conjugate points");
  add_common(conj, true);
  auto* predict = app.add_subcommand("predict", "constant-eigenvalue predictor");
  add_common(predict, true);
  predict->add_option("--lambda0", opt.lambda0, "eigenvalue for bare prediction")
      ->each([&](const std::string&) { opt.have_lambda0 = true; });
  predict->add_option("--branch", opt.branch, "tracked branch index to verify");
  auto* spectrum = app.add_subcommand("spectrum", "track the spectrum of Phi");
  add_common(spectrum, true);
  auto* releq = app.add_subcommand("releq", "relative equilibria of a reduced field");
  add_common(releq, false);
  releq->add_option("--algebra", opt.algebra_file, "algebra definition JSON file");
  releq->add_option("--seeds", opt.seeds, "Newton seeds, ';'-separated");
  auto* gallery = app.add_subcommand("gallery", "built-in example systems");
  auto* glist = gallery->add_subcommand("list", "list entries");
  add_common(glist, false);
  auto* gverify = gallery->add_subcommand("verify", "verify expected values");
  add_common(gverify, false);
  gverify->add_option("name", opt.verify_name, "entry to verify (default: all)");
  gallery->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return cmd_analyze(opt);
    if (*curve) return cmd_curve(opt);
    if (*conj) return cmd_conjugate(opt);
    if (*predict) return cmd_predict(opt);
    if (*spectrum) return cmd_spectrum(opt);
    if (*releq) return cmd_releq(opt);
    if (*glist) return cmd_gallery_list(opt);
    if (*gverify) return cmd_gallery_verify(opt);
  } catch (const sode::ParseError& ex) {
    std::cerr << "parse error: " << ex.what() << " (offset " << ex.offset()
              << ")\n";
    return 2;
  } catch (const sode::SchemaError& ex) {
    std::cerr << "definition error: " << ex.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& ex) {
    std::cerr << "JSON error: " << ex.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "invalid argument: " << ex.what() << "\n";
    return 2;
  } catch (const sode::EvalError& ex) {
    std::cerr << "numeric domain error: " << ex.what() << "\n";
    return 3;
  } catch (const sode::BlowupError& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return 3;
  }
  return 0;
}
