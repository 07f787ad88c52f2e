#include <catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "sode/gallery.hpp"
#include "sode/liegroup.hpp"

using namespace sode;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("structure constant validation") {
  SECTION("valid algebras construct") {
    CHECK_NOTHROW(make_so3_algebra());
    CHECK_NOTHROW(make_se2_algebra());
    CHECK_NOTHROW(LieAlgebraData(2, {}));  // abelian
  }
  SECTION("indices must satisfy i < j and stay in range") {
    CHECK_THROWS_AS(LieAlgebraData(3, {{1, 0, 2, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(LieAlgebraData(3, {{0, 3, 2, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(LieAlgebraData(0, {}), std::invalid_argument);
  }
  SECTION("Jacobi identity violations are rejected") {
    // [E1,E2] = E3, [E2,E3] = E1, [E1,E3] = E3 fails the identity
    CHECK_THROWS_AS(
        LieAlgebraData(3, {{0, 1, 2, 1.0}, {1, 2, 0, 1.0}, {0, 2, 2, 1.0}}),
        std::invalid_argument);
  }
  SECTION("antisymmetry is completed automatically") {
    LieAlgebraData alg = make_so3_algebra();
    CHECK(alg.c(2, 0, 1) == 1.0);
    CHECK(alg.c(2, 1, 0) == -1.0);
    CHECK(alg.c(0, 1, 2) == 1.0);
    CHECK(alg.c(1, 2, 0) == 1.0);
    CHECK(alg.c(1, 0, 2) == -1.0);
  }
}

TEST_CASE("reduced system input validation") {
  LieAlgebraData alg = make_so3_algebra();
  CHECK_THROWS_AS(ReducedSystem::from_strings(alg, {"w1", "w2"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ReducedSystem::from_strings(alg, {"w1", "w2", "bogus"}),
                  ParseError);
}

TEST_CASE("canonical connection on the planar group") {
  ReducedSystem red = make_canonical_reduced(make_se2_algebra());
  Eigen::VectorXd w = vec3(0.4, -0.7, 1.0);
  SECTION("frame phi: w3^2/4 on the translation plane, third column -w w3/4") {
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
    expect(0, 0) = expect(1, 1) = 0.25 * w[2] * w[2];
    expect(0, 2) = -0.25 * w[0] * w[2];
    expect(1, 2) = -0.25 * w[1] * w[2];
    CHECK((red.frame_phi(w) - expect).norm() < 1e-14);
    // at a relative equilibrium (0, 0, zd) the matrix is diagonal
    Eigen::MatrixXd at_eq = red.frame_phi(vec3(0, 0, 1.0));
    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
    diag(0, 0) = diag(1, 1) = 0.25;
    CHECK((at_eq - diag).norm() < 1e-14);
  }
  SECTION("frame lambda rotates the translation plane at rate zd/2") {
    Eigen::MatrixXd L = red.frame_lambda(w);
    CHECK_THAT(L(0, 1), WithinAbs(0.5 * w[2], 1e-14));
    CHECK_THAT(L(1, 0), WithinAbs(-0.5 * w[2], 1e-14));
    CHECK_THAT(L(0, 0), WithinAbs(0.0, 1e-14));
    CHECK_THAT(L(2, 2), WithinAbs(0.0, 1e-14));
    CHECK_THAT(L(0, 2), WithinAbs(-0.5 * w[1], 1e-14));
    CHECK_THAT(L(1, 2), WithinAbs(0.5 * w[0], 1e-14));
    CHECK(L.row(2).norm() == 0.0);
    // off the axis the third column carries the drift; at (0, 0, zd) it is 0
    CHECK(red.frame_lambda(vec3(0, 0, 1.0)).col(2).norm() == 0.0);
  }
  SECTION("nabla phi vanishes (locally symmetric)") {
    CHECK(red.frame_nabla_phi(w).norm() < 1e-14);
    CHECK(red.frame_commutator(w).norm() < 1e-14);
  }
}

TEST_CASE("abelian algebra with zero gamma is flat") {
  LieAlgebraData alg(3, {});
  ReducedSystem red = make_canonical_reduced(alg);
  Eigen::VectorXd w = vec3(1.0, -2.0, 0.5);
  CHECK(red.frame_phi(w).norm() == 0.0);
  CHECK(red.frame_lambda(w).norm() == 0.0);
  CHECK(red.frame_nabla_phi(w).norm() == 0.0);
}

TEST_CASE("reduced field evaluation and jacobian") {
  ReducedSystem rb = make_rigid_body_reduced(1.0, 2.0, 3.0);
  Eigen::VectorXd w = vec3(0.3, -0.5, 0.8);
  Eigen::VectorXd g = rb.gamma(w);
  CHECK_THAT(g[0], WithinAbs((2.0 - 3.0) / 1.0 * (-0.5) * 0.8, 1e-15));
  CHECK_THAT(g[1], WithinAbs((3.0 - 1.0) / 2.0 * 0.8 * 0.3, 1e-15));
  CHECK_THAT(g[2], WithinAbs((1.0 - 2.0) / 3.0 * 0.3 * (-0.5), 1e-15));
  // jacobian against finite differences
  Eigen::MatrixXd J = rb.gamma_jacobian(w);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    Eigen::VectorXd col = (rb.gamma(wp) - rb.gamma(wm)) / (2 * h);
    CHECK((J.col(j) - col).norm() < 1e-8);
  }
}

TEST_CASE("frame nabla phi agrees with a finite-difference reconstruction") {
  ReducedSystem rb = make_rigid_body_reduced(1.0, 2.0, 0.9);
  std::mt19937 rng(61);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd w = vec3(dist(rng), dist(rng), dist(rng));
    Eigen::VectorXd g = rb.gamma(w);
    // directional derivative of phi along gamma
    Eigen::MatrixXd dphi =
        (rb.frame_phi(w + h * g) - rb.frame_phi(w - h * g)) / (2 * h);
    Eigen::MatrixXd L = rb.frame_lambda(w);
    Eigen::MatrixXd phi = rb.frame_phi(w);
    Eigen::MatrixXd expect = dphi + L * phi - phi * L;
    CHECK((rb.frame_nabla_phi(w) - expect).norm() <
          1e-5 * std::max(1.0, expect.norm()));
  }
}

TEST_CASE("Newton iteration finds the relative-equilibrium family") {
  ReducedSystem top = make_rigid_body_reduced(1.0, 1.0, 1.5);
  SECTION("seeds near the spin axis converge onto it") {
    auto roots = find_relative_equilibria(
        top, {vec3(0.1, 0.1, 2.0), vec3(-0.05, 0.2, 1.0)});
    REQUIRE(roots.size() == 2);
    for (const auto& re : roots) {
      CHECK(re.converged);
      CHECK(re.residual < 1e-10 * (1 + re.w0.norm()));
      CHECK(std::abs(re.w0[0]) < 1e-9);
      CHECK(std::abs(re.w0[1]) < 1e-9);
      CHECK(re.w0[2] > 0.5);
    }
  }
  SECTION("family tangents span the kernel directions") {
    auto roots = find_relative_equilibria(top, {vec3(0.01, 0.0, 2.0)});
    REQUIRE(roots.size() == 1);
    // for the symmetric top gamma_3 = 0 identically, so the w3 axis is a
    // 1-parameter family; near it the Jacobian kernel contains e3
    REQUIRE(roots[0].family_tangents.cols() >= 1);
    Eigen::VectorXd e3 = vec3(0, 0, 1);
    Eigen::VectorXd proj =
        roots[0].family_tangents *
        (roots[0].family_tangents.transpose() * e3);
    CHECK((proj - e3).norm() < 1e-6);
  }
  SECTION("duplicate roots are merged") {
    auto roots = find_relative_equilibria(
        top, {vec3(0.01, 0.0, 2.0), vec3(0.0, 0.01, 2.0)});
    CHECK(roots.size() == 1);
  }
  SECTION("empty seed list is rejected") {
    CHECK_THROWS_AS(find_relative_equilibria(top, {}), std::invalid_argument);
  }
}

TEST_CASE("conjugate times along relative equilibria") {
  SECTION("symmetric top: 2 pi / 3 with multiplicity 2") {
    ReducedSystem top = make_rigid_body_reduced(1.0, 1.0, 1.5);
    RelativeEquilibrium re;
    re.w0 = vec3(0, 0, 2.0);
    re.converged = true;
    ReleqConjugateReport rr = releq_conjugate_times(top, re, 3.0);
    CHECK(rr.hypothesis_ok);
    REQUIRE(rr.events.size() == 1);
    CHECK_THAT(rr.events[0].time, WithinAbs(2 * M_PI / 3.0, 1e-12));
    CHECK(rr.events[0].multiplicity == 2);
    CHECK(rr.events[0].method == "predictor");
  }
  SECTION("flat body I3 = I1 + I2: time pi at Omega = 1") {
    ReducedSystem flat = make_rigid_body_reduced(1.0, 2.0, 3.0);
    RelativeEquilibrium re;
    re.w0 = vec3(0, 0, 1.0);
    re.converged = true;
    ReleqConjugateReport rr = releq_conjugate_times(flat, re, 3.5);
    CHECK(rr.hypothesis_ok);
    REQUIRE_FALSE(rr.events.empty());
    CHECK_THAT(rr.events[0].time, WithinAbs(M_PI, 1e-12));
  }
  SECTION("generic body: hypothesis flag raised, residual attached") {
    ReducedSystem gen = make_rigid_body_reduced(1.0, 2.0, 0.9);
    RelativeEquilibrium re;
    re.w0 = vec3(0, 0, 1.3);
    re.converged = true;
    ReleqConjugateReport rr = releq_conjugate_times(gen, re, 5.0);
    CHECK_FALSE(rr.hypothesis_ok);
    CHECK(rr.commutator_residual > 1e-8);
    CHECK_FALSE(rr.note.empty());
  }
  SECTION("unconverged equilibria are refused") {
    ReducedSystem top = make_rigid_body_reduced(1.0, 1.0, 1.5);
    RelativeEquilibrium re;
    re.w0 = vec3(0, 0, 2.0);
    re.converged = false;
    CHECK_THROWS_AS(releq_conjugate_times(top, re, 3.0), std::invalid_argument);
  }
}

TEST_CASE("generic-body commutator closed form at the spin axis") {
  const double I1 = 1.0, I2 = 2.0, I3 = 0.9, Om = 1.3;
  ReducedSystem gen = make_rigid_body_reduced(I1, I2, I3);
  Eigen::MatrixXd K = gen.frame_commutator(vec3(0, 0, Om));
  double G = std::pow(Om, 5) / (2 * I1 * I1 * I2 * I2) * std::pow(I1 - I2, 2) *
             std::pow(I1 + I2 - I3, 3);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
  expect(0, 1) = -G / I1;
  expect(1, 0) = G / I2;
  CHECK((K - expect).norm() < 1e-12 * expect.norm());
}

TEST_CASE("lift of the planar group reproduces the coordinate system") {
  GalleryEntry e = gallery_get("se2-canonical");
  LiftedSystem lifted = e.lifted();
  SodeSystem coord = make_se2_coordinate_system();
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  Eigen::VectorXd f1(3), f2(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q = vec3(dist(rng), dist(rng), dist(rng));
    Eigen::VectorXd v = vec3(dist(rng), dist(rng), dist(rng));
    lifted.force(q, v, f1);
    coord.force(q, v, f2);
    REQUIRE((f1 - f2).norm() < 1e-12 * std::max(1.0, f2.norm()));
    Eigen::MatrixXd dq1(3, 3), dv1(3, 3), dq2(3, 3), dv2(3, 3);
    lifted.force_jacobians(q, v, dq1, dv1);
    coord.force_jacobians(q, v, dq2, dv2);
    REQUIRE((dq1 - dq2).norm() < 1e-10 * std::max(1.0, dq2.norm()));
    REQUIRE((dv1 - dv2).norm() < 1e-10 * std::max(1.0, dv2.norm()));
  }
}

TEST_CASE("lift of an abelian identity frame is the free particle") {
  LieAlgebraData alg(2, {});
  ReducedSystem red = make_canonical_reduced(alg);
  std::vector<std::string> names = {"q1", "q2"};
  std::vector<Expr> frame = {parse("1", names), parse("0", names),
                             parse("0", names), parse("1", names)};
  LiftedSystem lifted(alg, names, frame, red);
  Eigen::VectorXd q(2), v(2), f(2);
  q << 0.3, -0.7;
  v << 1.2, 0.4;
  lifted.force(q, v, f);
  CHECK(f.norm() == 0.0);
  Eigen::MatrixXd dq(2, 2), dv(2, 2);
  lifted.force_jacobians(q, v, dq, dv);
  CHECK(dq.norm() == 0.0);
  CHECK(dv.norm() == 0.0);
}

TEST_CASE("lifted jacobians match finite differences on the rotation group") {
  GalleryEntry e = gallery_get("rigid-body");
  LiftedSystem lifted = e.lifted();
  std::mt19937 rng(83);
  std::uniform_real_distribution<double> dist(-0.6, 0.6);
  const double h = 1e-6;
  Eigen::VectorXd fp(3), fm(3);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd q = vec3(1.0 + dist(rng), dist(rng), dist(rng));
    Eigen::VectorXd v = vec3(dist(rng), dist(rng), dist(rng));
    Eigen::MatrixXd dq(3, 3), dv(3, 3);
    lifted.force_jacobians(q, v, dq, dv);
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd qp = q, qm = q, vp = v, vm = v;
      qp[j] += h;
      qm[j] -= h;
      lifted.force(qp, v, fp);
      lifted.force(qm, v, fm);
      REQUIRE((dq.col(j) - (fp - fm) / (2 * h)).norm() < 1e-6);
      vp[j] += h;
      vm[j] -= h;
      lifted.force(q, vp, fp);
      lifted.force(q, vm, fm);
      REQUIRE((dv.col(j) - (fp - fm) / (2 * h)).norm() < 1e-6);
    }
  }
}

TEST_CASE("expression-backed rigid-body forces match the lifted system") {
  const double I1 = 1.0, I2 = 2.0, I3 = 0.9;
  SodeSystem coord = make_rigid_body_coordinate_system(I1, I2, I3);
  GalleryEntry e = gallery_get("rigid-body");
  LiftedSystem lifted(*e.algebra, e.group_coordinates, e.frame,
                      make_rigid_body_reduced(I1, I2, I3));
  std::mt19937 rng(89);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Eigen::VectorXd f1(3), f2(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q = vec3(1.2 + dist(rng), dist(rng), dist(rng));
    Eigen::VectorXd v = vec3(dist(rng), dist(rng), dist(rng));
    coord.force(q, v, f1);
    lifted.force(q, v, f2);
    REQUIRE((f1 - f2).norm() < 1e-11 * std::max(1.0, f2.norm()));
  }
}

TEST_CASE("singular frame points are reported") {
  GalleryEntry e = gallery_get("rigid-body");
  LiftedSystem lifted = e.lifted();
  Eigen::VectorXd q = vec3(0.0, 0.2, 0.3);  // chart singularity theta = 0
  Eigen::VectorXd v = vec3(0.1, 0.1, 0.1), f(3);
  CHECK_THROWS_AS(lifted.force(q, v, f), std::runtime_error);
}

TEST_CASE("quasi-velocities round-trip through the frame") {
  GalleryEntry e = gallery_get("rigid-body");
  LiftedSystem lifted = e.lifted();
  Eigen::VectorXd q = vec3(0.9, 0.4, -0.3);
  Eigen::VectorXd w = vec3(0.3, -0.8, 1.1);
  Eigen::VectorXd v = lifted.lift_velocity(q, w);
  CHECK((lifted.quasi_velocities(q, v) - w).norm() < 1e-13);
}

TEST_CASE("lifted symmetric top follows the spin-axis relative equilibrium") {
  GalleryEntry e = gallery_get("rigid-body");
  LiftedSystem lifted = e.lifted();
  const double Om = 2.0;
  Eigen::VectorXd q0 = vec3(1e-3, 0.0, 0.0);
  TangentState s0 = lifted.lift_state(q0, vec3(0, 0, Om));
  Trajectory traj = integrate_curve(lifted, s0, 3.0, 1e-10);
  for (int k = 0; k <= 12; ++k) {
    double t = 3.0 * k / 12.0;
    TangentState s = traj.state_at(t);
    CHECK_THAT(s.q[0], WithinAbs(1e-3, 1e-9));     // theta constant
    CHECK_THAT(s.q[2], WithinAbs(Om * t, 1e-8));   // psi advances at Omega
  }
}

TEST_CASE("predicted equilibrium times agree with lifted shooting") {
  GalleryEntry e = gallery_get("rigid-body");
  ReducedSystem top = make_rigid_body_reduced(1.0, 1.0, 1.5);
  RelativeEquilibrium re;
  re.w0 = vec3(0, 0, 2.0);
  re.converged = true;
  ReleqConjugateReport rr = releq_conjugate_times(top, re, 2.5);
  LiftedSystem lifted = e.lifted();
  TangentState s0 = lifted.lift_state(vec3(1e-3, 0, 0), re.w0);
  ConjugateReport cr = find_conjugate_points(lifted, s0, 2.5);
  REQUIRE_FALSE(rr.events.empty());
  REQUIRE_FALSE(cr.events.empty());
  CHECK_THAT(cr.events[0].time, WithinAbs(rr.events[0].time, 1e-5));
  CHECK(cr.events[0].multiplicity == rr.events[0].multiplicity);
}
