#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <complex>
#include <sstream>

#include "risisac/conic/program.hpp"
#include "risisac/errors.hpp"
#include "risisac/rng.hpp"

using namespace risisac;
using namespace risisac::conic;

namespace {

Eigen::MatrixXd random_symmetric(RandomStream& rng, int d) {
  Eigen::MatrixXd m(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) m(i, j) = rng.normal();
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXcd random_hermitian(RandomStream& rng, int d) {
  Eigen::MatrixXcd m(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) m(i, j) = rng.complex_normal();
  return 0.5 * (m + m.adjoint());
}

// Slack of a one-variable block evaluated at x: smat(offset - x * coeff).
Eigen::MatrixXd slack_matrix(const ConstraintBlock& blk, double x) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(blk.rows());
  for (const auto& [row, val] : blk.offsets) rows(row) += val;
  for (const auto& t : blk.coeffs) rows(t.row()) -= x * t.value();
  return smat(rows, blk.dim);
}

}  // namespace

TEST_CASE("svec preserves the trace inner product and inverts") {
  RandomStream rng(7, "conic.svec");
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 5;
    const Eigen::MatrixXd a = random_symmetric(rng, d);
    const Eigen::MatrixXd b = random_symmetric(rng, d);
    CHECK(svec(a).dot(svec(b)) == doctest::Approx((a * b).trace()).epsilon(1e-12));
    CHECK((smat(svec(a), d) - a).norm() < 1e-14);
  }
}

TEST_CASE("svec index matches the packing order") {
  const int d = 4;
  for (int j = 0; j < d; ++j) {
    for (int i = j; i < d; ++i) {
      Eigen::VectorXd unit = Eigen::VectorXd::Zero(svec_size(d));
      unit(svec_index(d, i, j)) = 1.0;
      const Eigen::MatrixXd m = smat(unit, d);
      const double expect = i == j ? 1.0 : 1.0 / std::sqrt(2.0);
      CHECK(m(i, j) == doctest::Approx(expect));
      CHECK(m(j, i) == doctest::Approx(expect));
      CHECK(m.squaredNorm() == doctest::Approx(1.0));
    }
  }
  CHECK(svec_index(4, 1, 3) == svec_index(4, 3, 1));
}

TEST_CASE("psd entry helpers land on symmetric matrix entries") {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.cost = Eigen::VectorXd::Zero(1);
  auto& blk = prog.block(prog.add_block(ConeTag::psd, 3));
  blk.add_psd_coeff(2, 0, 0, 1.5);
  blk.add_psd_offset(1, 1, 2.0);
  blk.add_psd_offset(2, 1, -0.5);
  prog.validate();

  const double x = 0.7;
  const Eigen::MatrixXd s = slack_matrix(blk, x);
  CHECK(s(2, 0) == doctest::Approx(-1.5 * x));
  CHECK(s(0, 2) == doctest::Approx(-1.5 * x));
  CHECK(s(1, 1) == doctest::Approx(2.0));
  CHECK(s(2, 1) == doctest::Approx(-0.5));
  CHECK(s(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("hermitian lift reproduces the complex matrix blockwise") {
  RandomStream rng(21, "conic.lift");
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 2 + trial % 3;
    const Eigen::MatrixXcd h = random_hermitian(rng, d);

    ConicProgram prog;
    prog.num_vars = 1;
    prog.cost = Eigen::VectorXd::Zero(1);
    auto& blk = prog.block(prog.add_block(ConeTag::psd, 2 * d));
    for (int j = 0; j < d; ++j)
      for (int i = j; i < d; ++i) add_hermitian_offset(blk, d, i, j, h(i, j));
    const Eigen::MatrixXd lift = slack_matrix(blk, 0.0);

    CHECK((lift.topLeftCorner(d, d) - h.real()).norm() < 1e-12);
    CHECK((lift.bottomRightCorner(d, d) - h.real()).norm() < 1e-12);
    CHECK((lift.bottomLeftCorner(d, d) - h.imag()).norm() < 1e-12);
    CHECK((lift.topRightCorner(d, d) + h.imag()).norm() < 1e-12);

    // Same spectrum, doubled multiplicity, so definiteness carries over.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eh(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> el(lift);
    for (int i = 0; i < d; ++i) {
      CHECK(el.eigenvalues()(2 * i) == doctest::Approx(eh.eigenvalues()(i)).epsilon(1e-10));
      CHECK(el.eigenvalues()(2 * i + 1) == doctest::Approx(eh.eigenvalues()(i)).epsilon(1e-10));
    }
  }
}

TEST_CASE("hermitian lift doubles the real trace pairing") {
  RandomStream rng(22, "conic.lift.trace");
  const int d = 3;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXcd h1 = random_hermitian(rng, d);
    const Eigen::MatrixXcd h2 = random_hermitian(rng, d);
    ConicProgram prog;
    prog.num_vars = 1;
    prog.cost = Eigen::VectorXd::Zero(1);
    const int i1 = prog.add_block(ConeTag::psd, 2 * d);
    const int i2 = prog.add_block(ConeTag::psd, 2 * d);
    auto& b1 = prog.block(i1);
    auto& b2 = prog.block(i2);
    for (int j = 0; j < d; ++j)
      for (int i = j; i < d; ++i) {
        add_hermitian_offset(b1, d, i, j, h1(i, j));
        add_hermitian_offset(b2, d, i, j, h2(i, j));
      }
    const double dot = svec(slack_matrix(b1, 0.0)).dot(svec(slack_matrix(b2, 0.0)));
    CHECK(dot == doctest::Approx(2.0 * (h1 * h2).trace().real()).epsilon(1e-10));
  }
}

TEST_CASE("hermitian coefficient route matches the offset route") {
  ConicProgram prog;
  prog.num_vars = 1;
  prog.cost = Eigen::VectorXd::Zero(1);
  const std::complex<double> v{0.8, -1.3};
  const int d = 3;
  const int ic = prog.add_block(ConeTag::psd, 2 * d);
  const int io = prog.add_block(ConeTag::psd, 2 * d);
  auto& via_coeff = prog.block(ic);
  auto& via_offset = prog.block(io);
  add_hermitian_coeff(via_coeff, d, 2, 1, v, 0);
  add_hermitian_offset(via_offset, d, 2, 1, -2.5 * v);
  CHECK((slack_matrix(via_coeff, 2.5) - slack_matrix(via_offset, 0.0)).norm() < 1e-13);
}

TEST_CASE("validation flags structural mistakes") {
  auto base = [] {
    ConicProgram prog;
    prog.num_vars = 2;
    prog.cost = Eigen::VectorXd::Zero(2);
    return prog;
  };

  SUBCASE("cost size mismatch") {
    ConicProgram prog = base();
    prog.cost = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(prog.validate(), StructuralError);
  }
  SUBCASE("empty block") {
    ConicProgram prog = base();
    prog.add_block(ConeTag::nonneg, 0);
    CHECK_THROWS_AS(prog.validate(), StructuralError);
  }
  SUBCASE("rotated cone needs two head rows") {
    ConicProgram prog = base();
    prog.add_block(ConeTag::rsoc, 1);
    CHECK_THROWS_AS(prog.validate(), StructuralError);
  }
  SUBCASE("coefficient row out of range") {
    ConicProgram prog = base();
    prog.block(prog.add_block(ConeTag::nonneg, 2)).add_coeff(2, 0, 1.0);
    CHECK_THROWS_AS(prog.validate(), StructuralError);
  }
  SUBCASE("coefficient variable out of range") {
    ConicProgram prog = base();
    prog.block(prog.add_block(ConeTag::nonneg, 2)).add_coeff(0, 2, 1.0);
    CHECK_THROWS_AS(prog.validate(), StructuralError);
  }
  SUBCASE("offset row out of range") {
    ConicProgram prog = base();
    prog.block(prog.add_block(ConeTag::psd, 2)).add_offset(3, 1.0);
    CHECK_THROWS_AS(prog.validate(), StructuralError);
  }
  SUBCASE("well-formed program passes") {
    ConicProgram prog = base();
    auto& blk = prog.block(prog.add_block(ConeTag::psd, 2));
    blk.add_psd_coeff(1, 0, 1, -1.0);
    blk.add_psd_offset(1, 1, 4.0);
    CHECK_NOTHROW(prog.validate());
  }
}

TEST_CASE("text dump is stable") {
  ConicProgram prog;
  prog.num_vars = 2;
  prog.cost = Eigen::VectorXd::Zero(2);
  prog.cost(0) = 2.5;
  auto& blk = prog.block(prog.add_block(ConeTag::nonneg, 2));
  blk.add_coeff(0, 0, -1.0);
  blk.add_offset(1, 0.75);

  std::ostringstream out;
  prog.write_text(out);
  CHECK(out.str() ==
        "risisac-conic 1\n"
        "vars 2\n"
        "minimize 1\n"
        "0 2.5\n"
        "block nonneg 2\n"
        "triplets 1\n"
        "0 0 -1\n"
        "offsets 1\n"
        "1 0.75\n"
        "end\n");
}
