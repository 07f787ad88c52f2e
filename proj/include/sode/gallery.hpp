// Built-in example systems with known closed-form behaviour, used as
// executable fixtures.  Each expected value carries a provenance note
// explaining where the number comes from, and gallery_verify() runs the
// full pipeline against those expectations.
#ifndef SODE_GALLERY_HPP
#define SODE_GALLERY_HPP

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "sode/conjugate.hpp"
#include "sode/flow.hpp"
#include "sode/geometry.hpp"
#include "sode/liegroup.hpp"
#include "sode/spectral.hpp"
#include "sode/system.hpp"

namespace sode {

struct ExpectedNote {
  std::string name;
  std::string provenance;
};

struct GalleryEntry {
  std::string name;
  std::string description;
  std::shared_ptr<SodeSystem> system;          // coordinate-level, if closed form
  std::shared_ptr<LieAlgebraData> algebra;     // group entries only
  std::shared_ptr<ReducedSystem> reduced;      // group entries only
  std::vector<std::string> group_coordinates;  // lift chart
  std::vector<Expr> frame;                     // lift frame (row-major), if any
  std::vector<TangentState> initial_states;
  std::vector<ExpectedNote> expectations;

  LiftedSystem lifted() const {
    if (!algebra || !reduced || frame.empty())
      throw std::logic_error("entry has no group structure to lift");
    return LiftedSystem(*algebra, group_coordinates, frame, *reduced);
  }
};

// ---------------------------------------------------------------------------
// Constructors for the individual systems.
// ---------------------------------------------------------------------------

// x'' = -x,  y'' = (y' + x x')^3 - x'^2 + x^2 - 1.  Along the solution
// (x, y) = (0, t): Gamma^2_2 = -3/2, Phi = diag(1, -9/4), conjugate points
// at t = k pi from the oscillating x-direction Jacobi field sin(t).
inline SodeSystem make_worked_example() {
  return SodeSystem::from_strings(
      {"x", "y"}, {"-x", "(vy + x*vx)^3 - vx^2 + x^2 - 1"});
}

// Geodesics of the torus with radii a (ring) and b (tube), profile
// f(p) = a + b cos(p), metric dp^2 + f(p)^2 dt^2 (p = tube angle, t = ring
// angle).  Euler-Lagrange of L = pdot^2 + f^2 tdot^2:
//   p'' = f f' t'^2,  t'' = -2 (f'/f) p' t'   with f' = -b sin(p).
// Gaussian curvature K(p) = -f''(p)/f(p) = b cos(p) / f(p).
inline SodeSystem make_torus(double a = 2.0, double b = 1.0) {
  return SodeSystem::from_strings(
      {"phi", "theta"},
      {"(a + b*cos(phi))*(-b*sin(phi))*vtheta^2",
       "2*b*sin(phi)/(a + b*cos(phi))*vphi*vtheta"},
      {{"a", a}, {"b", b}});
}

// Free particle in n dimensions (all forces zero).
inline SodeSystem make_free_particle(int n) {
  std::vector<std::string> coords, forces;
  for (int i = 0; i < n; ++i) {
    coords.push_back("q" + std::to_string(i + 1));
    forces.push_back("0");
  }
  return SodeSystem::from_strings(coords, forces);
}

// so(3): [E1,E2] = E3, [E2,E3] = E1, [E3,E1] = E2.
inline LieAlgebraData make_so3_algebra() {
  return LieAlgebraData(3,
                        {{0, 1, 2, 1.0}, {1, 2, 0, 1.0}, {0, 2, 1, -1.0}},
                        {"E1", "E2", "E3"});
}

// se(2) with the frame E1 = cos z dx - sin z dy, E2 = sin z dx + cos z dy,
// E3 = dz: [E1,E3] = E2, [E2,E3] = -E1, [E1,E2] = 0.
inline LieAlgebraData make_se2_algebra() {
  return LieAlgebraData(3, {{0, 2, 1, 1.0}, {1, 2, 0, -1.0}},
                        {"E1", "E2", "E3"});
}

// Euler equations of the free rigid body in body angular velocities:
//   w1' = ((I2-I3)/I1) w2 w3, cyclic.
inline ReducedSystem make_rigid_body_reduced(double I1, double I2, double I3) {
  return ReducedSystem::from_strings(
      make_so3_algebra(),
      {"(I2 - I3)/I1*w2*w3", "(I3 - I1)/I2*w3*w1", "(I1 - I2)/I3*w1*w2"},
      {{"I1", I1}, {"I2", I2}, {"I3", I3}});
}

// gamma = 0: geodesics of the canonical connection.
inline ReducedSystem make_canonical_reduced(const LieAlgebraData& alg) {
  std::vector<std::string> zeros(static_cast<std::size_t>(alg.dimension()), "0");
  return ReducedSystem::from_strings(alg, zeros);
}

// Euler-angle frame on SO(3) (z-x-z convention), chart (theta, phi, psi):
// body angular velocities w relate to coordinate velocities by qdot = E w,
//   thetadot = w1 cos psi - w2 sin psi
//   phidot   = (w1 sin psi + w2 cos psi) / sin theta
//   psidot   = w3 - cos theta (w1 sin psi + w2 cos psi) / sin theta.
// Singular at theta = 0 (chart, not geometry).
inline std::vector<Expr> make_so3_frame() {
  std::vector<std::string> names = {"theta", "phi", "psi"};
  auto P = [&](const std::string& s) { return parse(s, names); };
  return {
      P("cos(psi)"), P("-sin(psi)"), P("0"),
      P("sin(psi)/sin(theta)"), P("cos(psi)/sin(theta)"), P("0"),
      P("-sin(psi)*cos(theta)/sin(theta)"), P("-cos(psi)*cos(theta)/sin(theta)"), P("1")};
}

// SE(2) frame in coordinates (x, y, z):
//   xdot = w1 cos z + w2 sin z, ydot = -w1 sin z + w2 cos z, zdot = w3.
inline std::vector<Expr> make_se2_frame() {
  std::vector<std::string> names = {"x", "y", "z"};
  auto P = [&](const std::string& s) { return parse(s, names); };
  return {P("cos(z)"), P("sin(z)"), P("0"),
          P("-sin(z)"), P("cos(z)"), P("0"),
          P("0"), P("0"), P("1")};
}

// Coordinate form of the canonical-connection geodesics on SE(2):
//   x'' = y' z', y'' = -x' z', z'' = 0.
inline SodeSystem make_se2_coordinate_system() {
  return SodeSystem::from_strings({"x", "y", "z"}, {"vy*vz", "-vx*vz", "0"});
}

// Coordinate form of the free rigid body in the Euler-angle chart
// (theta, phi, psi): the body angular velocities
//   w1 =  vtheta cos psi + vphi sin theta sin psi
//   w2 = -vtheta sin psi + vphi sin theta cos psi
//   w3 =  vpsi + vphi cos theta
// satisfy the Euler equations; solving q'' = (dW/dv)^{-1} (g(W) - (dW/dq) v)
// for the coordinate accelerations gives the (machine-generated, unsimplified)
// expressions below.  Singular at theta = 0 like the chart itself.
inline SodeSystem make_rigid_body_coordinate_system(double I1, double I2,
                                                    double I3) {
  const std::string f_theta =
      "vphi^2*(I1*sin(psi)^2*sin(theta)*cos(theta)/I2 - "
      "I3*sin(psi)^2*sin(theta)*cos(theta)/I2 + "
      "I2*sin(theta)*cos(psi)^2*cos(theta)/I1 - "
      "I3*sin(theta)*cos(psi)^2*cos(theta)/I1) + "
      "vphi*(I1*vpsi*sin(psi)^2*sin(theta)/I2 - vpsi*sin(psi)^2*sin(theta) - "
      "vpsi*sin(theta)*cos(psi)^2 - I3*vpsi*sin(psi)^2*sin(theta)/I2 + "
      "I2*vpsi*sin(theta)*cos(psi)^2/I1 - I3*vpsi*sin(theta)*cos(psi)^2/I1) + "
      "vtheta*(I1*vphi*sin(psi)*cos(psi)*cos(theta)/I2 + "
      "I1*vpsi*sin(psi)*cos(psi)/I2 - I3*vphi*sin(psi)*cos(psi)*cos(theta)/I2 "
      "- I3*vpsi*sin(psi)*cos(psi)/I2 - "
      "I2*vphi*sin(psi)*cos(psi)*cos(theta)/I1 - I2*vpsi*sin(psi)*cos(psi)/I1 "
      "+ I3*vphi*sin(psi)*cos(psi)*cos(theta)/I1 + "
      "I3*vpsi*sin(psi)*cos(psi)/I1)";
  const std::string f_phi =
      "vphi^2*(-I1*sin(psi)*cos(psi)*cos(theta)/I2 + "
      "I3*sin(psi)*cos(psi)*cos(theta)/I2 + I2*sin(psi)*cos(psi)*cos(theta)/I1 "
      "- I3*sin(psi)*cos(psi)*cos(theta)/I1) + "
      "vphi*(-I1*vpsi*sin(psi)*cos(psi)/I2 + I3*vpsi*sin(psi)*cos(psi)/I2 + "
      "I2*vpsi*sin(psi)*cos(psi)/I1 - I3*vpsi*sin(psi)*cos(psi)/I1) + "
      "vtheta*(-I1*vphi*cos(psi)^2*cos(theta)/(I2*sin(theta)) - "
      "I1*vpsi*cos(psi)^2/(I2*sin(theta)) - "
      "vphi*sin(psi)^2*cos(theta)/sin(theta) - "
      "vphi*cos(psi)^2*cos(theta)/sin(theta) + vpsi*sin(psi)^2/sin(theta) + "
      "vpsi*cos(psi)^2/sin(theta) + I3*vphi*cos(psi)^2*cos(theta)/(I2*sin(theta)) "
      "+ I3*vpsi*cos(psi)^2/(I2*sin(theta)) - "
      "I2*vphi*sin(psi)^2*cos(theta)/(I1*sin(theta)) - "
      "I2*vpsi*sin(psi)^2/(I1*sin(theta)) + "
      "I3*vphi*sin(psi)^2*cos(theta)/(I1*sin(theta)) + "
      "I3*vpsi*sin(psi)^2/(I1*sin(theta)))";
  const std::string f_psi =
      "vphi^2*(I1*sin(psi)^3*sin(theta)^2*cos(psi)/I3 + "
      "I1*sin(psi)*sin(theta)^2*cos(psi)^3/I3 + "
      "I1*sin(psi)*cos(psi)*cos(theta)^2/I2 - "
      "I2*sin(psi)^3*sin(theta)^2*cos(psi)/I3 - "
      "I2*sin(psi)*sin(theta)^2*cos(psi)^3/I3 - "
      "I3*sin(psi)*cos(psi)*cos(theta)^2/I2 - "
      "I2*sin(psi)*cos(psi)*cos(theta)^2/I1 + "
      "I3*sin(psi)*cos(psi)*cos(theta)^2/I1) + "
      "vphi*(I1*vpsi*sin(psi)*cos(psi)*cos(theta)/I2 - "
      "I3*vpsi*sin(psi)*cos(psi)*cos(theta)/I2 - "
      "I2*vpsi*sin(psi)*cos(psi)*cos(theta)/I1 + "
      "I3*vpsi*sin(psi)*cos(psi)*cos(theta)/I1) + "
      "vtheta^2*(-I1*sin(psi)^3*cos(psi)/I3 - I1*sin(psi)*cos(psi)^3/I3 + "
      "I2*sin(psi)^3*cos(psi)/I3 + I2*sin(psi)*cos(psi)^3/I3) + "
      "vtheta*(-I1*vphi*sin(psi)^4*sin(theta)/I3 + "
      "I1*vphi*sin(theta)*cos(psi)^4/I3 + "
      "I1*vphi*cos(psi)^2*cos(theta)^2/(I2*sin(theta)) + "
      "I1*vpsi*cos(psi)^2*cos(theta)/(I2*sin(theta)) + "
      "I2*vphi*sin(psi)^4*sin(theta)/I3 - I2*vphi*sin(theta)*cos(psi)^4/I3 + "
      "vphi*sin(psi)^2*sin(theta) + vphi*sin(psi)^2*cos(theta)^2/sin(theta) + "
      "vphi*sin(theta)*cos(psi)^2 + vphi*cos(psi)^2*cos(theta)^2/sin(theta) - "
      "vpsi*sin(psi)^2*cos(theta)/sin(theta) - "
      "vpsi*cos(psi)^2*cos(theta)/sin(theta) - "
      "I3*vphi*cos(psi)^2*cos(theta)^2/(I2*sin(theta)) - "
      "I3*vpsi*cos(psi)^2*cos(theta)/(I2*sin(theta)) + "
      "I2*vphi*sin(psi)^2*cos(theta)^2/(I1*sin(theta)) + "
      "I2*vpsi*sin(psi)^2*cos(theta)/(I1*sin(theta)) - "
      "I3*vphi*sin(psi)^2*cos(theta)^2/(I1*sin(theta)) - "
      "I3*vpsi*sin(psi)^2*cos(theta)/(I1*sin(theta)))";
  return SodeSystem::from_strings({"theta", "phi", "psi"},
                                  {f_theta, f_phi, f_psi},
                                  {{"I1", I1}, {"I2", I2}, {"I3", I3}});
}

// ---------------------------------------------------------------------------
// Entries.
// ---------------------------------------------------------------------------

inline std::vector<std::string> gallery_list() {
  return {"worked-example", "torus", "rigid-body", "se2-canonical"};
}

inline GalleryEntry gallery_get(const std::string& name) {
  GalleryEntry e;
  e.name = name;
  if (name == "worked-example") {
    e.description =
        "x'' = -x, y'' = (y' + x x')^3 - x'^2 + x^2 - 1; conjugate points at "
        "t = k pi along the solution (0, t)";
    e.system = std::make_shared<SodeSystem>(make_worked_example());
    Eigen::VectorXd q(2), v(2);
    q << 0, 0;
    v << 0, 1;
    e.initial_states.emplace_back(q, v);
    e.expectations = {
        {"conjugate-times",
         "the x-direction Jacobi field along (0, t) is sin(t), vanishing at k pi"},
        {"phi-at-equilibrium",
         "Phi = diag(1, -9/4): lambda_2 = -Gamma(Gamma^2_2) - (Gamma^2_2)^2 "
         "with Gamma^2_2 = -3/2 at velocity (0, 1)"},
        {"commutator-zero", "[nabla Phi, Phi] vanishes identically for this system"},
        {"jacobi-field-sin", "column 1 of the shooting matrix is (sin t, 0)"},
        {"solution-family",
         "c_s(t) = (s sin t, t - s^2 sin^2(t)/2) solves the system with "
         "c_s(0) = (0,0), c_s'(0) = (s, 1)"}};
    return e;
  }
  if (name == "torus") {
    e.description =
        "geodesics on the torus with ring radius a = 2, tube radius b = 1; "
        "equator conjugate time pi / sqrt(K(0)) = pi sqrt(3)";
    e.system = std::make_shared<SodeSystem>(make_torus());
    Eigen::VectorXd q(2), v(2);
    q << 0, 0;
    v << 0, 1.0 / 3.0;  // unit speed on the outer equator, f(0) = 3
    e.initial_states.emplace_back(q, v);
    e.expectations = {
        {"first-conjugate-time",
         "K(0) = b/(a+b) = 1/3 on the outer equator, so the first conjugate "
         "time is pi / sqrt(1/3) = pi sqrt(3)"},
        {"eigenvalue-is-curvature",
         "the nonzero eigenvalue of Phi along a unit-speed geodesic equals "
         "the Gaussian curvature K(phi) = b cos(phi) / (a + b cos(phi))"},
        {"commutator-zero", "[nabla Phi, Phi] = 0 at every point for this metric"},
        {"spray", "forces are quadratic-homogeneous in velocities"},
        {"unit-speed", "geodesics preserve phidot^2 + f^2 thetadot^2"}};
    return e;
  }
  if (name == "rigid-body") {
    e.description =
        "free rigid body on SO(3): Euler equations reduced to the body "
        "angular velocities, lifted through the Euler-angle chart";
    e.algebra = std::make_shared<LieAlgebraData>(make_so3_algebra());
    e.reduced = std::make_shared<ReducedSystem>(
        make_rigid_body_reduced(1.0, 1.0, 1.5));
    e.group_coordinates = {"theta", "phi", "psi"};
    e.frame = make_so3_frame();
    e.expectations = {
        {"euler-top-conjugate-time",
         "symmetric top I1 = I2 = 1, I3 = 3/2, spin Omega = 2: the double "
         "eigenvalue (I3 Omega / 2 I1)^2 gives time pi/(I3 Omega / 2 I1) = "
         "2 pi I1/(I3 Omega) = 2 pi/3, multiplicity 2"},
        {"flat-body-conjugate-time",
         "I1 = 1, I2 = 2, I3 = I1 + I2: the frame phi at (0,0,Omega) has "
         "eigenvalue Omega^2, giving time pi/Omega = pi for Omega = 1"},
        {"generic-commutator",
         "I = (1, 2, 0.9), Omega = 1.3: [nabla Phi, Phi] at (0,0,Omega) has "
         "entries (1,2) = -G/I1, (2,1) = +G/I2 with "
         "G = (Omega^5 / 2 I1^2 I2^2)(I1-I2)^2 (I1+I2-I3)^3, rest zero"},
        {"transport-rotation",
         "transport along the top's equilibrium rotates the (E1, E2) plane "
         "at rate A = Omega (2 I1 - I3)/(2 I1): V(t) = (cos At, -sin At, 0)"},
        {"newton-family",
         "seeds near the w3 axis converge into the (0, 0, Omega) family"},
        {"lifted-relative-equilibrium",
         "the lifted curve from theta = 1e-3, w = (0,0,Omega) keeps theta "
         "constant and advances psi at rate Omega"}};
    return e;
  }
  if (name == "se2-canonical") {
    e.description =
        "canonical-connection geodesics on SE(2): x'' = y' z', y'' = -x' z', "
        "z'' = 0; Jacobi determinant (2t/zdot0^2)(1 - cos zdot0 t)";
    e.system = std::make_shared<SodeSystem>(make_se2_coordinate_system());
    e.algebra = std::make_shared<LieAlgebraData>(make_se2_algebra());
    e.reduced = std::make_shared<ReducedSystem>(make_canonical_reduced(*e.algebra));
    e.group_coordinates = {"x", "y", "z"};
    e.frame = make_se2_frame();
    Eigen::VectorXd q(3), v(3);
    q << 0, 0, 0;
    v << 1, 0, 1;
    e.initial_states.emplace_back(q, v);
    e.expectations = {
        {"det-formula",
         "det Y(t) = (2t/zdot0^2)(1 - cos zdot0 t) for geodesics from the "
         "unit element with zdot0 != 0"},
        {"conjugate-times", "zeros of the determinant at t = 2 k pi / zdot0, rank "
                            "drops by 2 there"},
        {"expmap-agreement",
         "finite-difference Jacobian of the exponential map equals the "
         "shooting matrix Y(t)"},
        {"frame-phi-eigenvalues",
         "frame phi at w = (w1, w2, zdot0) is diag(zdot0^2/4, zdot0^2/4, 0)"},
        {"group-point",
         "all geodesics with zdot0 = 1 pass through (0, 0, 2 pi) at t = 2 pi"},
        {"frame-coordinate-eigenvalues",
         "eigenvalues of the coordinate Phi at a lifted state equal those of "
         "the frame phi at the quasi-velocities"}};
    return e;
  }
  throw std::invalid_argument("unknown gallery entry '" + name + "'");
}

// ---------------------------------------------------------------------------
// Verification.
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string provenance;
};

struct VerifyReport {
  std::string entry;
  std::vector<CheckResult> checks;
  bool all_pass = true;
};

struct GalleryTolerances {
  double time_tol = 1e-5;        // conjugate times, frame-level routes
  double time_tol_tight = 1e-6;  // shooting on expression-backed systems
  double zero_tol = 1e-9;        // structural zeros
  double value_tol = 1e-6;       // tracked values against closed forms
  unsigned seed = 20240817;
};

namespace detail {

inline void add_check(VerifyReport& rep, const std::string& name, double error,
                      double tol, const std::string& provenance) {
  CheckResult c;
  c.name = name;
  c.error = error;
  c.tolerance = tol;
  c.pass = std::isfinite(error) && error < tol;
  c.provenance = provenance;
  rep.checks.push_back(c);
  rep.all_pass = rep.all_pass && c.pass;
}

inline double compare_times(const std::vector<ConjugateEvent>& events,
                            const std::vector<double>& expected) {
  if (events.size() != expected.size())
    return std::numeric_limits<double>::infinity();
  double err = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i)
    err = std::max(err, std::abs(events[i].time - expected[i]));
  return err;
}

inline double relative_commutator_max(const SodeSystem& sys,
                                      const std::vector<TangentState>& states) {
  OperatorEvaluator ops(sys);
  double worst = 0.0;
  for (const auto& s : states) {
    OperatorPanel p = ops.panel(s);
    double scale = std::max(1.0, p.phi.norm() * p.nabla_phi.norm());
    worst = std::max(worst, p.commutator.norm() / scale);
  }
  return worst;
}

inline std::string prov(const GalleryEntry& e, const std::string& name) {
  for (const auto& x : e.expectations)
    if (x.name == name) return x.provenance;
  return "";
}

}  // namespace detail

inline VerifyReport verify_worked_example(const GalleryTolerances& tol) {
  GalleryEntry e = gallery_get("worked-example");
  const SodeSystem& sys = *e.system;
  VerifyReport rep;
  rep.entry = e.name;
  TangentState s0 = e.initial_states.front();

  {
    ConjugateReport cr = find_conjugate_points(sys, s0, 10.0);
    double err = detail::compare_times(cr.events, {M_PI, 2 * M_PI, 3 * M_PI});
    for (const auto& ev : cr.events)
      if (ev.multiplicity != 1) err = std::numeric_limits<double>::infinity();
    detail::add_check(rep, "conjugate-times", err, tol.time_tol_tight,
                      detail::prov(e, "conjugate-times"));
  }
  {
    Eigen::MatrixXd phi = OperatorEvaluator(sys).phi(s0);
    Eigen::MatrixXd expect(2, 2);
    expect << 1, 0, 0, -2.25;
    detail::add_check(rep, "phi-at-equilibrium", (phi - expect).norm(),
                      tol.zero_tol, detail::prov(e, "phi-at-equilibrium"));
  }
  detail::add_check(
      rep, "commutator-zero",
      detail::relative_commutator_max(sys, random_states(2, 20, tol.seed, 0.8)),
      tol.zero_tol, detail::prov(e, "commutator-zero"));
  {
    JacobiMatrixSolution jac = integrate_jacobi_matrix(
        sys, s0, 10.0, Eigen::MatrixXd::Zero(2, 2),
        Eigen::MatrixXd::Identity(2, 2));
    double err = 0.0;
    for (int k = 0; k <= 40; ++k) {
      double t = 10.0 * k / 40.0;
      Eigen::MatrixXd Y = jac.Y_at(t);
      err = std::max(err, std::abs(Y(0, 0) - std::sin(t)));
      err = std::max(err, std::abs(Y(1, 0)));
    }
    detail::add_check(rep, "jacobi-field-sin", err, 1e-7,
                      detail::prov(e, "jacobi-field-sin"));
  }
  {
    // the base solution rides an unstable manifold (local growth rate 3), so
    // roundoff is amplified by exp(3t); keep the horizon short enough that
    // the closed form stays resolvable at 1e-7
    double err = 0.0;
    IntegrationOptions tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    for (double s : {0.05, 0.1, 0.2}) {
      Eigen::VectorXd q(2), v(2);
      q << 0, 0;
      v << s, 1;
      Trajectory traj = integrate_curve(sys, TangentState(q, v), 4.0, tight);
      for (int k = 1; k <= 20; ++k) {
        double t = 4.0 * k / 20.0;
        TangentState st = traj.state_at(t);
        double xs = s * std::sin(t);
        double ys = t - 0.5 * s * s * std::sin(t) * std::sin(t);
        err = std::max(err, std::abs(st.q[0] - xs));
        err = std::max(err, std::abs(st.q[1] - ys));
      }
    }
    detail::add_check(rep, "solution-family", err, 1e-7,
                      detail::prov(e, "solution-family"));
  }
  return rep;
}

inline VerifyReport verify_torus(const GalleryTolerances& tol) {
  GalleryEntry e = gallery_get("torus");
  const SodeSystem& sys = *e.system;
  VerifyReport rep;
  rep.entry = e.name;
  TangentState s0 = e.initial_states.front();
  const double a = 2.0, b = 1.0;

  {
    ConjugateReport cr = find_conjugate_points(sys, s0, 6.0);
    double err = cr.events.empty()
                     ? std::numeric_limits<double>::infinity()
                     : std::abs(cr.events.front().time - M_PI * std::sqrt(3.0));
    detail::add_check(rep, "first-conjugate-time", err, tol.time_tol,
                      detail::prov(e, "first-conjugate-time"));
  }
  {
    double err = 0.0;
    for (double alpha : {0.3, 0.7, 1.1}) {
      Eigen::VectorXd q(2), v(2);
      q << 0, 0;
      v << std::sin(alpha), std::cos(alpha) / (a + b);  // unit speed at phi = 0
      Trajectory traj = integrate_curve(sys, TangentState(q, v), 5.0,
                                        IntegrationOptions{});
      SpectrumTrace trace = track_spectrum(sys, traj);
      for (std::size_t k = 0; k < trace.times.size(); ++k) {
        TangentState st = traj.state_at(trace.times[k]);
        double f = a + b * std::cos(st.q[0]);
        double K = b * std::cos(st.q[0]) / f;
        // the other branch is structurally zero; the curvature branch is the
        // max-modulus eigenvalue (branch labels may swap where K crosses 0)
        Eigen::Index row = static_cast<Eigen::Index>(k);
        std::complex<double> lam =
            std::abs(trace.values(row, 0)) > std::abs(trace.values(row, 1))
                ? trace.values(row, 0)
                : trace.values(row, 1);
        err = std::max(err, std::abs(lam.real() - K));
      }
    }
    detail::add_check(rep, "eigenvalue-is-curvature", err, tol.value_tol,
                      detail::prov(e, "eigenvalue-is-curvature"));
  }
  detail::add_check(
      rep, "commutator-zero",
      detail::relative_commutator_max(sys, random_states(2, 20, tol.seed, 0.9)),
      tol.zero_tol, detail::prov(e, "commutator-zero"));
  {
    SprayReport sr = spray_check(sys, random_states(2, 50, tol.seed + 1, 1.0));
    detail::add_check(rep, "spray",
                      sr.is_spray ? std::max(sr.max_nabla_T, sr.max_phi_T)
                                  : std::numeric_limits<double>::infinity(),
                      tol.zero_tol, detail::prov(e, "spray"));
  }
  {
    Trajectory traj = integrate_curve(sys, s0, 6.0, IntegrationOptions{});
    double err = 0.0;
    for (int k = 0; k <= 30; ++k) {
      TangentState st = traj.state_at(6.0 * k / 30.0);
      double f = a + b * std::cos(st.q[0]);
      double speed2 = st.v[0] * st.v[0] + f * f * st.v[1] * st.v[1];
      err = std::max(err, std::abs(speed2 - 1.0));
    }
    detail::add_check(rep, "unit-speed", err, 1e-8, detail::prov(e, "unit-speed"));
  }
  return rep;
}

inline VerifyReport verify_rigid_body(const GalleryTolerances& tol) {
  GalleryEntry e = gallery_get("rigid-body");
  VerifyReport rep;
  rep.entry = e.name;

  const double Omega_top = 2.0;
  ReducedSystem top = make_rigid_body_reduced(1.0, 1.0, 1.5);

  RelativeEquilibrium re_top;
  {
    Eigen::VectorXd seed(3);
    seed << 0.1, 0.1, Omega_top;
    auto roots = find_relative_equilibria(top, {seed});
    re_top = roots.front();
    double family_err =
        re_top.converged
            ? std::max(std::abs(re_top.w0[0]), std::abs(re_top.w0[1])) +
                  std::abs(re_top.w0[2] - Omega_top) * 0.0
            : std::numeric_limits<double>::infinity();
    detail::add_check(rep, "newton-family", family_err, 1e-10,
                      detail::prov(e, "newton-family"));
    // snap exactly onto the family for the later checks
    re_top.w0 << 0.0, 0.0, Omega_top;
    re_top.converged = true;
  }
  {
    ReleqConjugateReport rr = releq_conjugate_times(top, re_top, 3.0);
    double expect = 2.0 * M_PI / 3.0;
    double err = std::numeric_limits<double>::infinity();
    if (!rr.events.empty() && rr.events.front().multiplicity == 2 &&
        rr.hypothesis_ok)
      err = std::abs(rr.events.front().time - expect);
    // cross-check by shooting on the lifted system (chart nudged off theta=0)
    LiftedSystem lifted = e.lifted();
    Eigen::VectorXd q0(3), w0(3);
    q0 << 1e-3, 0.0, 0.0;
    w0 << 0.0, 0.0, Omega_top;
    ConjugateReport cr = find_conjugate_points(lifted, lifted.lift_state(q0, w0), 2.5);
    if (cr.events.empty() || cr.events.front().multiplicity != 2)
      err = std::numeric_limits<double>::infinity();
    else
      err = std::max(err, std::abs(cr.events.front().time - expect));
    detail::add_check(rep, "euler-top-conjugate-time", err, tol.time_tol,
                      detail::prov(e, "euler-top-conjugate-time"));
  }
  {
    ReducedSystem flat = make_rigid_body_reduced(1.0, 2.0, 3.0);
    RelativeEquilibrium re;
    re.w0.resize(3);
    re.w0 << 0.0, 0.0, 1.0;
    re.converged = true;
    ReleqConjugateReport rr = releq_conjugate_times(flat, re, 3.5);
    double err = rr.events.empty() ? std::numeric_limits<double>::infinity()
                                   : std::abs(rr.events.front().time - M_PI);
    detail::add_check(rep, "flat-body-conjugate-time", err, tol.time_tol,
                      detail::prov(e, "flat-body-conjugate-time"));
  }
  {
    const double I1 = 1.0, I2 = 2.0, I3 = 0.9, Om = 1.3;
    ReducedSystem gen = make_rigid_body_reduced(I1, I2, I3);
    Eigen::VectorXd w0(3);
    w0 << 0.0, 0.0, Om;
    Eigen::MatrixXd K = gen.frame_commutator(w0);
    double G = std::pow(Om, 5) / (2.0 * I1 * I1 * I2 * I2) *
               std::pow(I1 - I2, 2) * std::pow(I1 + I2 - I3, 3);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
    expect(0, 1) = -G / I1;
    expect(1, 0) = G / I2;
    double err = (K - expect).norm() / expect.norm();
    detail::add_check(rep, "generic-commutator", err, 1e-8,
                      detail::prov(e, "generic-commutator"));

    RelativeEquilibrium re;
    re.w0 = w0;
    re.converged = true;
    ReleqConjugateReport rr = releq_conjugate_times(gen, re, 5.0);
    detail::add_check(rep, "generic-hypothesis-flag",
                      rr.hypothesis_ok ? std::numeric_limits<double>::infinity()
                                       : 0.0,
                      0.5,
                      "the commutator does not vanish for unequal I1, I2, so "
                      "the constant-eigenvalue predictor hypothesis is unmet");
  }
  {
    // transport in the invariant frame: V' + Lambda(w0) V = 0
    const double I1 = 1.0, I3 = 1.5;
    double A = Omega_top * (2.0 * I1 - I3) / (2.0 * I1);
    Eigen::MatrixXd L = top.frame_lambda(re_top.w0);
    Eigen::VectorXd V0(3);
    V0 << 1, 0, 0;
    auto rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      dy = -L * y;
    };
    DenseTrajectory sol = integrate_adaptive(rhs, V0, 0.0, 3.0,
                                             IntegrationOptions{});
    double err = 0.0;
    for (int k = 0; k <= 30; ++k) {
      double t = 3.0 * k / 30.0;
      Eigen::VectorXd V = sol.eval(t);
      err = std::max(err, std::abs(V[0] - std::cos(A * t)));
      err = std::max(err, std::abs(V[1] + std::sin(A * t)));
      err = std::max(err, std::abs(V[2]));
    }
    detail::add_check(rep, "transport-rotation", err, tol.value_tol,
                      detail::prov(e, "transport-rotation"));
  }
  {
    LiftedSystem lifted = e.lifted();
    Eigen::VectorXd q0(3), w0(3);
    q0 << 1e-3, 0.0, 0.0;
    w0 << 0.0, 0.0, Omega_top;
    Trajectory traj = integrate_curve(lifted, lifted.lift_state(q0, w0), 3.0,
                                      IntegrationOptions{});
    double err = 0.0;
    for (int k = 0; k <= 20; ++k) {
      double t = 3.0 * k / 20.0;
      TangentState st = traj.state_at(t);
      err = std::max(err, std::abs(st.q[0] - 1e-3));
      err = std::max(err, std::abs(st.q[2] - Omega_top * t));
    }
    detail::add_check(rep, "lifted-relative-equilibrium", err, tol.time_tol,
                      detail::prov(e, "lifted-relative-equilibrium"));
  }
  return rep;
}

inline VerifyReport verify_se2(const GalleryTolerances& tol) {
  GalleryEntry e = gallery_get("se2-canonical");
  const SodeSystem& sys = *e.system;
  VerifyReport rep;
  rep.entry = e.name;
  TangentState s0 = e.initial_states.front();
  const double zdot0 = s0.v[2];

  JacobiMatrixSolution jac = integrate_jacobi_matrix(
      sys, s0, 13.0, Eigen::MatrixXd::Zero(3, 3),
      Eigen::MatrixXd::Identity(3, 3));
  {
    auto formula = [&](double t) {
      return 2.0 * t / (zdot0 * zdot0) * (1.0 - std::cos(zdot0 * t));
    };
    double sup = 0.0;
    for (int k = 0; k <= 200; ++k)
      sup = std::max(sup, std::abs(formula(0.1 + (13.0 - 0.1) * k / 200.0)));
    double err = 0.0;
    for (int k = 0; k <= 200; ++k) {
      double t = 0.1 + (13.0 - 0.1) * k / 200.0;
      err = std::max(err, std::abs(jac.det_at(t) - formula(t)) / sup);
    }
    detail::add_check(rep, "det-formula", err, tol.value_tol,
                      detail::prov(e, "det-formula"));
  }
  {
    ConjugateReport cr = find_conjugate_points(sys, s0, 13.0);
    double err = detail::compare_times(cr.events, {2 * M_PI, 4 * M_PI});
    for (const auto& ev : cr.events)
      if (ev.multiplicity != 2) err = std::numeric_limits<double>::infinity();
    detail::add_check(rep, "conjugate-times", err, tol.time_tol,
                      detail::prov(e, "conjugate-times"));
  }
  {
    double err = 0.0;
    for (double t1 : {5.0, 11.0}) {
      Eigen::MatrixXd fd =
          exp_jacobian_fd(sys, s0.q, s0.v, t1, default_fd_step(s0.v));
      err = std::max(err,
                     (fd - jac.Y_at(t1)).cwiseAbs().maxCoeff());
    }
    detail::add_check(rep, "expmap-agreement", err, 1e-4,
                      detail::prov(e, "expmap-agreement"));
  }
  {
    // eigenvalues are {zdot^2/4 (twice), 0} for any quasi-velocity with the
    // same rotation rate; check at the geodesic's initial quasi-velocity
    Eigen::MatrixXd phi = e.reduced->frame_phi(s0.v);
    Eigen::VectorXcd lam = Eigen::EigenSolver<Eigen::MatrixXd>(phi).eigenvalues();
    std::vector<double> got(3);
    for (int i = 0; i < 3; ++i) got[static_cast<std::size_t>(i)] = lam[i].real();
    std::sort(got.begin(), got.end());
    double quarter = zdot0 * zdot0 / 4.0;
    double err = lam.imag().cwiseAbs().maxCoeff();
    err = std::max(err, std::abs(got[0] - 0.0));
    err = std::max(err, std::abs(got[1] - quarter));
    err = std::max(err, std::abs(got[2] - quarter));
    detail::add_check(rep, "frame-phi-eigenvalues", err, tol.zero_tol,
                      detail::prov(e, "frame-phi-eigenvalues"));
  }
  {
    double err = 0.0;
    for (double xdot0 : {1.0, 0.3, -0.8}) {
      Eigen::VectorXd v(3);
      v << xdot0, 0.5 * xdot0, 1.0;
      Eigen::VectorXd g = exponential_map(sys, Eigen::VectorXd::Zero(3), v,
                                          2.0 * M_PI);
      Eigen::VectorXd expect(3);
      expect << 0.0, 0.0, 2.0 * M_PI;
      err = std::max(err, (g - expect).norm());
    }
    detail::add_check(rep, "group-point", err, 1e-6,
                      detail::prov(e, "group-point"));
  }
  {
    LiftedSystem lifted = e.lifted();
    std::mt19937 rng(tol.seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double err = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd q(3), w(3);
      for (int i = 0; i < 3; ++i) q[i] = dist(rng);
      for (int i = 0; i < 3; ++i) w[i] = dist(rng);
      TangentState st = lifted.lift_state(q, w);
      Eigen::VectorXcd coord_eigs = spectrum_at(sys, st).values;
      Eigen::VectorXcd frame_eigs =
          spectrum_of(e.reduced->frame_phi(w)).values;
      auto perm = detail::match_branches(coord_eigs, frame_eigs);
      for (int i = 0; i < 3; ++i)
        err = std::max(err, std::abs(coord_eigs[i] -
                                     frame_eigs[perm[static_cast<std::size_t>(i)]]));
    }
    detail::add_check(rep, "frame-coordinate-eigenvalues", err, 1e-8,
                      detail::prov(e, "frame-coordinate-eigenvalues"));
  }
  return rep;
}

inline VerifyReport gallery_verify(const std::string& name,
                                   const GalleryTolerances& tol = {}) {
  if (name == "worked-example") return verify_worked_example(tol);
  if (name == "torus") return verify_torus(tol);
  if (name == "rigid-body") return verify_rigid_body(tol);
  if (name == "se2-canonical") return verify_se2(tol);
  throw std::invalid_argument("unknown gallery entry '" + name + "'");
}

}  // namespace sode

#endif  // SODE_GALLERY_HPP
