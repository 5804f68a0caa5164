#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>

#include "risisac/conic/program.hpp"
#include "risisac/conic/solver.hpp"
#include "risisac/errors.hpp"
#include "risisac/rng.hpp"

using namespace risisac;
using namespace risisac::conic;

namespace {

SolverOptions checked() {
  SolverOptions opts;
  opts.debug_checks = true;
  return opts;
}

// min t  s.t.  ||x|| <= t,  a'x = b0.  Optimum x* = a b0 / ||a||^2.
ConicProgram least_norm_program(const Eigen::VectorXd& a, double b0) {
  const int n = static_cast<int>(a.size());
  ConicProgram prog;
  prog.num_vars = n + 1;
  prog.cost = Eigen::VectorXd::Zero(n + 1);
  prog.cost(0) = 1.0;
  auto& cone = prog.block(prog.add_block(ConeTag::soc, n + 1));
  for (int i = 0; i <= n; ++i) cone.add_coeff(i, i, -1.0);
  auto& eq = prog.block(prog.add_block(ConeTag::zero, 1));
  for (int i = 0; i < n; ++i) eq.add_coeff(0, 1 + i, a(i));
  eq.add_offset(0, b0);
  return prog;
}

int sym_var(int d, int i, int j) { return svec_index(d, i, j); }

// min tr(Omega)  s.t.  [[Omega, I], [I, S]] >= 0, so Omega* = S^{-1}.
ConicProgram inverse_lmi_program(const Eigen::MatrixXd& s) {
  const int d = static_cast<int>(s.rows());
  ConicProgram prog;
  prog.num_vars = svec_size(d);
  prog.cost = Eigen::VectorXd::Zero(prog.num_vars);
  for (int i = 0; i < d; ++i) prog.cost(sym_var(d, i, i)) = 1.0;
  auto& blk = prog.block(prog.add_block(ConeTag::psd, 2 * d));
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) blk.add_psd_coeff(i, j, sym_var(d, i, j), -1.0);
  for (int i = 0; i < d; ++i) blk.add_psd_offset(d + i, i, 1.0);
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) blk.add_psd_offset(d + i, d + j, s(i, j));
  return prog;
}

Eigen::MatrixXd spd_matrix(RandomStream& rng, int d) {
  Eigen::MatrixXd a(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) a(i, j) = rng.normal();
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_CASE("equality-constrained least norm hits the closed form") {
  RandomStream rng(3, "solver.leastnorm");
  Eigen::VectorXd a(8);
  for (int i = 0; i < 8; ++i) a(i) = rng.normal();
  const double b0 = 2.3;
  const SolveResult res = solve_conic(least_norm_program(a, b0), checked());
  REQUIRE(res.ok());
  const Eigen::VectorXd xstar = a * b0 / a.squaredNorm();
  CHECK((res.x.tail(8) - xstar).norm() < 1e-6);
  CHECK(res.objective == doctest::Approx(std::abs(b0) / a.norm()).epsilon(1e-7));
}

TEST_CASE("simplex linear program selects the cheapest vertex") {
  Eigen::VectorXd c(5);
  c << 3.0, 1.5, 2.0, 5.0, 4.0;
  ConicProgram prog;
  prog.num_vars = 5;
  prog.cost = c;
  auto& nn = prog.block(prog.add_block(ConeTag::nonneg, 5));
  for (int i = 0; i < 5; ++i) nn.add_coeff(i, i, -1.0);
  auto& eq = prog.block(prog.add_block(ConeTag::zero, 1));
  for (int i = 0; i < 5; ++i) eq.add_coeff(0, i, 1.0);
  eq.add_offset(0, 1.0);

  const SolveResult res = solve_conic(prog, checked());
  REQUIRE(res.ok());
  CHECK(res.objective == doctest::Approx(1.5).epsilon(1e-7));
  CHECK(res.x(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.x.sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("box linear program saturates both bounds") {
  ConicProgram prog;
  prog.num_vars = 2;
  prog.cost = Eigen::VectorXd(2);
  prog.cost << -1.0, -2.0;
  auto& lower = prog.block(prog.add_block(ConeTag::nonneg, 2));
  for (int i = 0; i < 2; ++i) lower.add_coeff(i, i, -1.0);
  auto& upper = prog.block(prog.add_block(ConeTag::nonneg, 2));
  for (int i = 0; i < 2; ++i) {
    upper.add_coeff(i, i, 1.0);
    upper.add_offset(i, 1.0);
  }
  const SolveResult res = solve_conic(prog, checked());
  REQUIRE(res.ok());
  CHECK(res.objective == doctest::Approx(-3.0).epsilon(1e-7));
  CHECK((res.x - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-6);
}

TEST_CASE("conflicting constraints are reported as infeasible") {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.cost = Eigen::VectorXd::Ones(1);
  prog.block(prog.add_block(ConeTag::nonneg, 1)).add_coeff(0, 0, -1.0);
  auto& pin = prog.block(prog.add_block(ConeTag::zero, 1));
  pin.add_coeff(0, 0, 1.0);
  pin.add_offset(0, -1.0);
  const SolveResult res = solve_conic(prog, SolverOptions{});
  CHECK(res.status == SolveStatus::infeasible);
}

TEST_CASE("descent ray is reported as unbounded") {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.cost = Eigen::VectorXd(1);
  prog.cost << -1.0;
  prog.block(prog.add_block(ConeTag::nonneg, 1)).add_coeff(0, 0, -1.0);
  const SolveResult res = solve_conic(prog, SolverOptions{});
  CHECK(res.status == SolveStatus::unbounded);
  CHECK(res.objective == -std::numeric_limits<double>::infinity());
}

TEST_CASE("second-order cone projection matches the closed form") {
  const int n = 4;
  auto solve_projection = [&](const Eigen::VectorXd& p) {
    ConicProgram prog;
    prog.num_vars = n + 1;  // [t, x]
    prog.cost = Eigen::VectorXd::Zero(n + 1);
    prog.cost(0) = 1.0;
    auto& epi = prog.block(prog.add_block(ConeTag::soc, n + 1));
    epi.add_coeff(0, 0, -1.0);
    for (int i = 0; i < n; ++i) {
      epi.add_coeff(1 + i, 1 + i, -1.0);
      epi.add_offset(1 + i, -p(i));
    }
    auto& cone = prog.block(prog.add_block(ConeTag::soc, n));
    for (int i = 0; i < n; ++i) cone.add_coeff(i, 1 + i, -1.0);
    const SolveResult res = solve_conic(prog, checked());
    REQUIRE(res.ok());
    return Eigen::VectorXd(res.x.tail(n));
  };
  auto projection = [&](const Eigen::VectorXd& p) {
    const double head = p(0), tail = p.tail(n - 1).norm();
    if (tail <= head) return p;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    if (tail <= -head) return q;
    const double w = 0.5 * (head + tail);
    q(0) = w;
    q.tail(n - 1) = (w / tail) * p.tail(n - 1);
    return q;
  };

  Eigen::VectorXd inside(n), polar(n), outside(n);
  inside << 2.0, 0.5, 0.3, -0.1;
  polar << -2.0, 0.5, 0.3, -0.1;
  outside << 0.3, 1.5, -1.0, 0.7;
  for (const auto& p : {inside, polar, outside})
    CHECK((solve_projection(p) - projection(p)).norm() < 2e-5);
}

TEST_CASE("rotated cone epigraph of the squared norm") {
  const Eigen::Vector3d w0(0.6, -0.8, 1.2);
  const double expect = 0.5 * w0.squaredNorm();

  SUBCASE("constants as offsets") {
    ConicProgram prog;
    prog.num_vars = 1;
    prog.cost = Eigen::VectorXd::Ones(1);
    auto& blk = prog.block(prog.add_block(ConeTag::rsoc, 5));
    blk.add_coeff(0, 0, -1.0);
    blk.add_offset(1, 1.0);
    for (int i = 0; i < 3; ++i) blk.add_offset(2 + i, w0(i));
    const SolveResult res = solve_conic(prog, checked());
    REQUIRE(res.ok());
    CHECK(res.objective == doctest::Approx(expect).epsilon(1e-7));
  }

  SUBCASE("constants pinned through the zero cone") {
    ConicProgram prog;
    prog.num_vars = 5;  // [u, v, w]
    prog.cost = Eigen::VectorXd::Zero(5);
    prog.cost(0) = 1.0;
    auto& blk = prog.block(prog.add_block(ConeTag::rsoc, 5));
    for (int i = 0; i < 5; ++i) blk.add_coeff(i, i, -1.0);
    auto& pin = prog.block(prog.add_block(ConeTag::zero, 4));
    pin.add_coeff(0, 1, 1.0);
    pin.add_offset(0, 1.0);
    for (int i = 0; i < 3; ++i) {
      pin.add_coeff(1 + i, 2 + i, 1.0);
      pin.add_offset(1 + i, w0(i));
    }
    const SolveResult res = solve_conic(prog, checked());
    REQUIRE(res.ok());
    CHECK(res.objective == doctest::Approx(expect).epsilon(1e-7));
    CHECK(res.x(1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((res.x.tail(3) - w0).norm() < 1e-6);
  }

  SUBCASE("hand-rotated second-order cone gives the same optimum") {
    const double r2 = 1.0 / std::sqrt(2.0);
    ConicProgram prog;
    prog.num_vars = 5;
    prog.cost = Eigen::VectorXd::Zero(5);
    prog.cost(0) = 1.0;
    auto& blk = prog.block(prog.add_block(ConeTag::soc, 5));
    blk.add_coeff(0, 0, -r2);
    blk.add_coeff(0, 1, -r2);
    blk.add_coeff(1, 0, -r2);
    blk.add_coeff(1, 1, r2);
    for (int i = 0; i < 3; ++i) blk.add_coeff(2 + i, 2 + i, -1.0);
    auto& pin = prog.block(prog.add_block(ConeTag::zero, 4));
    pin.add_coeff(0, 1, 1.0);
    pin.add_offset(0, 1.0);
    for (int i = 0; i < 3; ++i) {
      pin.add_coeff(1 + i, 2 + i, 1.0);
      pin.add_offset(1 + i, w0(i));
    }
    const SolveResult res = solve_conic(prog, checked());
    REQUIRE(res.ok());
    CHECK(res.objective == doctest::Approx(expect).epsilon(1e-7));
  }
}

TEST_CASE("semidefinite dominance recovers the dominated matrix") {
  RandomStream rng(11, "solver.psd");
  const int d = 3;
  Eigen::MatrixXd b(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) b(i, j) = rng.normal();
  b = Eigen::MatrixXd(0.5 * (b + b.transpose()));

  ConicProgram prog;
  prog.num_vars = svec_size(d);
  prog.cost = Eigen::VectorXd::Zero(prog.num_vars);
  for (int i = 0; i < d; ++i) prog.cost(sym_var(d, i, i)) = 1.0;
  auto& blk = prog.block(prog.add_block(ConeTag::psd, d));
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) {
      blk.add_psd_coeff(i, j, sym_var(d, i, j), -1.0);
      blk.add_psd_offset(i, j, -b(i, j));
    }
  const SolveResult res = solve_conic(prog, checked());
  REQUIRE(res.ok());
  CHECK(res.objective == doctest::Approx(b.trace()).epsilon(1e-6));
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i)
      CHECK(res.x(sym_var(d, i, j)) == doctest::Approx(b(i, j)).epsilon(2e-5));
}

TEST_CASE("schur-complement trace minimization returns the matrix inverse") {
  RandomStream rng(13, "solver.invlmi");
  const Eigen::MatrixXd s = spd_matrix(rng, 3);
  const Eigen::MatrixXd sinv = s.inverse();

  const SolveResult res = solve_conic(inverse_lmi_program(s), checked());
  REQUIRE(res.ok());
  CHECK(res.objective == doctest::Approx(sinv.trace()).epsilon(1e-6));
  for (int j = 0; j < 3; ++j)
    for (int i = j; i < 3; ++i)
      CHECK(res.x(sym_var(3, i, j)) == doctest::Approx(sinv(i, j)).epsilon(1e-4));

  SolverOptions raw;
  raw.equilibrate = false;
  const SolveResult res2 = solve_conic(inverse_lmi_program(s), raw);
  REQUIRE(res2.ok());
  CHECK(res2.objective == doctest::Approx(res.objective).epsilon(1e-7));
}

// min tr(T) over [[Omega, I], [I, T]] >= 0 with tr(Omega) <= c spends the
// whole trace budget evenly: Omega = (c/2) I, tr(T) = 4/c.
TEST_CASE("trace-budget inverse epigraph splits the budget evenly") {
  const double c = 2.0;
  ConicProgram prog;
  prog.num_vars = 6;  // omega (3 sym entries) then t
  prog.cost = Eigen::VectorXd::Zero(6);
  prog.cost(3 + sym_var(2, 0, 0)) = 1.0;
  prog.cost(3 + sym_var(2, 1, 1)) = 1.0;

  const int i_epi = prog.add_block(ConeTag::psd, 4);
  const int i_budget = prog.add_block(ConeTag::nonneg, 1);
  const int i_psd = prog.add_block(ConeTag::psd, 2);

  auto& epi = prog.block(i_epi);
  for (int j = 0; j < 2; ++j)
    for (int i = j; i < 2; ++i) {
      epi.add_psd_coeff(i, j, sym_var(2, i, j), -1.0);
      epi.add_psd_coeff(i + 2, j + 2, 3 + sym_var(2, i, j), -1.0);
    }
  epi.add_psd_offset(2, 0, 1.0);
  epi.add_psd_offset(3, 1, 1.0);

  auto& budget = prog.block(i_budget);
  budget.add_coeff(0, sym_var(2, 0, 0), 1.0);
  budget.add_coeff(0, sym_var(2, 1, 1), 1.0);
  budget.add_offset(0, c);

  auto& psd = prog.block(i_psd);
  for (int j = 0; j < 2; ++j)
    for (int i = j; i < 2; ++i) psd.add_psd_coeff(i, j, sym_var(2, i, j), -1.0);

  const SolveResult res = solve_conic(prog, checked());
  REQUIRE(res.ok());
  CHECK(res.objective == doctest::Approx(4.0 / c).epsilon(1e-6));
  CHECK(res.x(sym_var(2, 0, 0)) == doctest::Approx(c / 2.0).epsilon(1e-4));
  CHECK(res.x(sym_var(2, 1, 1)) == doctest::Approx(c / 2.0).epsilon(1e-4));
  CHECK(std::abs(res.x(sym_var(2, 1, 0))) < 1e-4);
}

TEST_CASE("complex schur LMI through the hermitian lift") {
  RandomStream rng(17, "solver.hermlmi");
  const int d = 3;
  Eigen::MatrixXcd a(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) a(i, j) = rng.complex_normal();
  const Eigen::MatrixXcd s =
      a * a.adjoint() + 0.5 * Eigen::MatrixXcd::Identity(d, d);
  const Eigen::MatrixXcd sinv = s.inverse();

  // Variables: diagonal of Omega, then (re, im) per strict lower entry.
  const int diag_vars = d;
  auto re_var = [&](int i, int j) { return diag_vars + 2 * (svec_index(d, i, j) - j - 1); };
  ConicProgram prog;
  prog.num_vars = d * d;
  prog.cost = Eigen::VectorXd::Zero(prog.num_vars);
  for (int i = 0; i < d; ++i) prog.cost(i) = 1.0;

  auto& blk = prog.block(prog.add_block(ConeTag::psd, 4 * d));
  for (int i = 0; i < d; ++i)
    add_hermitian_coeff(blk, 2 * d, i, i, {-1.0, 0.0}, i);
  for (int j = 0; j < d; ++j)
    for (int i = j + 1; i < d; ++i) {
      add_hermitian_coeff(blk, 2 * d, i, j, {-1.0, 0.0}, re_var(i, j));
      add_hermitian_coeff(blk, 2 * d, i, j, {0.0, -1.0}, re_var(i, j) + 1);
    }
  for (int i = 0; i < d; ++i) add_hermitian_offset(blk, 2 * d, d + i, i, 1.0);
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) add_hermitian_offset(blk, 2 * d, d + i, d + j, s(i, j));

  const SolveResult res = solve_conic(prog, checked());
  REQUIRE(res.ok());
  CHECK(res.objective == doctest::Approx(sinv.trace().real()).epsilon(1e-6));
  for (int i = 0; i < d; ++i)
    CHECK(res.x(i) == doctest::Approx(sinv(i, i).real()).epsilon(1e-4));
  for (int j = 0; j < d; ++j)
    for (int i = j + 1; i < d; ++i) {
      CHECK(res.x(re_var(i, j)) == doctest::Approx(sinv(i, j).real()).epsilon(1e-4));
      CHECK(res.x(re_var(i, j) + 1) == doctest::Approx(sinv(i, j).imag()).epsilon(1e-4));
    }
}

TEST_CASE("equilibration makes wildly scaled data solvable") {
  RandomStream rng(5, "solver.scaling");
  Eigen::VectorXd a(6);
  for (int i = 0; i < 6; ++i) a(i) = rng.normal() * 1e6;
  const double b0 = 2.3e-3;
  const SolveResult res = solve_conic(least_norm_program(a, b0), SolverOptions{});
  REQUIRE(res.ok());
  const Eigen::VectorXd xstar = a * b0 / a.squaredNorm();
  CHECK((res.x.tail(6) - xstar).norm() <= 1e-6 * std::max(1.0, xstar.norm()));
  CHECK(res.objective == doctest::Approx(std::abs(b0) / a.norm()).epsilon(1e-5));
}

TEST_CASE("one-dimensional second-order block degenerates to a bound") {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.cost = Eigen::VectorXd::Ones(1);
  auto& blk = prog.block(prog.add_block(ConeTag::soc, 1));
  blk.add_coeff(0, 0, -1.0);
  blk.add_offset(0, -3.0);
  const SolveResult res = solve_conic(prog, checked());
  REQUIRE(res.ok());
  CHECK(res.objective == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("iteration cap surfaces as a status") {
  RandomStream rng(19, "solver.cap");
  SolverOptions opts;
  opts.max_iters = 1;
  const SolveResult res = solve_conic(inverse_lmi_program(spd_matrix(rng, 3)), opts);
  CHECK(res.status == SolveStatus::max_iterations);
  CHECK(res.iterations == 1);
}

TEST_CASE("programs without inequality blocks are rejected") {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.cost = Eigen::VectorXd::Ones(1);
  auto& pin = prog.block(prog.add_block(ConeTag::zero, 1));
  pin.add_coeff(0, 0, 1.0);
  pin.add_offset(0, 1.0);
  CHECK_THROWS_AS(solve_conic(prog, SolverOptions{}), InvalidInput);
}
