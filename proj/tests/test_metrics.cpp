#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "risisac/errors.hpp"
#include "risisac/metrics.hpp"
#include "risisac/rng.hpp"

using namespace risisac;

namespace {

SystemConfig tiny_config() {
  SystemConfig cfg;
  cfg.n_tx = 2;
  cfg.n_tz = 2;
  cfg.n_rf = 2;
  cfg.n_s = 2;
  cfg.k_users = 2;
  cfg.m_y = 2;
  cfg.m_z = 2;
  cfg.m_sy = 2;
  cfg.m_sz = 2;
  cfg.alpha = {3e-4, 1e-4};
  cfg.ris_user_distances = {3.0, 4.0};
  return cfg;
}

Eigen::MatrixXcd random_matrix(RandomStream& rng, int rows, int cols) {
  Eigen::MatrixXcd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.complex_normal();
  return m;
}

Eigen::VectorXcd random_phases(RandomStream& rng, int n) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.unit_phase();
  return v;
}

}  // namespace

TEST_CASE("rate") {
  CHECK(rate(0.0) == 0.0);
  CHECK(rate(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rate(3.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(rate(-0.1), InvalidInput);
}

TEST_CASE("sinr") {
  SystemConfig cfg = tiny_config();
  const ChannelSet ch = generate_channels(cfg);

  BeamformingSolution sol;
  sol.theta = Eigen::VectorXcd::Ones(cfg.m_reflect());
  sol.w = Eigen::MatrixXcd::Zero(cfg.n_t(), cfg.n_s);

  SUBCASE("zero beamformer gives zero SINR") {
    CHECK(sinr(cfg, ch, sol, 0) == 0.0);
    CHECK(sinr(cfg, ch, sol, 1) == 0.0);
  }

  SUBCASE("unit-SNR construction") {
    // Steer stream 0 so that the received amplitude is exactly sigma0 and
    // zero out the interfering stream.
    const Eigen::RowVectorXcd eff =
        ch.g[0].adjoint() * sol.theta.asDiagonal() * ch.h;
    Eigen::VectorXcd w0 = eff.adjoint();
    w0 *= std::sqrt(cfg.sigma0_sq) / (eff * w0).value().real();
    sol.w.col(0) = w0;
    CHECK(sinr(cfg, ch, sol, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rate(sinr(cfg, ch, sol, 0)) == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("interference includes sensing streams") {
    RandomStream rng(5, "test.sinr");
    sol.w = random_matrix(rng, cfg.n_t(), cfg.n_s);
    const Eigen::RowVectorXcd eff =
        ch.g[0].adjoint() * sol.theta.asDiagonal() * ch.h;
    const Eigen::RowVectorXcd rec = eff * sol.w;
    const double expected =
        std::norm(rec(0)) / (std::norm(rec(1)) + cfg.sigma0_sq);
    CHECK(sinr(cfg, ch, sol, 0) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("bad user index rejected") {
    CHECK_THROWS_AS(sinr(cfg, ch, sol, 2), InvalidInput);
  }
}

TEST_CASE("steering derivatives") {
  SystemConfig cfg = tiny_config();

  SUBCASE("matches central finite differences") {
    RandomStream rng(11, "test.fd");
    for (int trial = 0; trial < 12; ++trial) {
      const double eta = rng.uniform(0.2, M_PI - 0.2);
      const double phi = rng.uniform(-1.2, 1.2);
      const SteeringDerivatives sd = steering_derivatives(cfg, eta, phi);
      const double h = 1e-6;
      const Eigen::MatrixXcd fd_eta =
          (steering_derivatives(cfg, eta + h, phi).a_mat -
           steering_derivatives(cfg, eta - h, phi).a_mat) /
          (2.0 * h);
      const Eigen::MatrixXcd fd_phi =
          (steering_derivatives(cfg, eta, phi + h).a_mat -
           steering_derivatives(cfg, eta, phi - h).a_mat) /
          (2.0 * h);
      const double scale_e = std::max(1e-12, fd_eta.norm());
      const double scale_p = std::max(1e-12, fd_phi.norm());
      CHECK((sd.d_eta - fd_eta).norm() / scale_e < 1e-6);
      CHECK((sd.d_phi - fd_phi).norm() / scale_p < 1e-6);
    }
  }

  SUBCASE("phi = 0 kills the azimuth derivative") {
    const SteeringDerivatives sd = steering_derivatives(cfg, 0.8, 0.0);
    CHECK(sd.d_eta.norm() < 1e-15);
    CHECK(sd.d_phi.norm() > 0.0);
  }

  SUBCASE("single-column arrays have no horizontal ramp") {
    SystemConfig slim = tiny_config();
    slim.m_y = 1;
    slim.m_sy = 1;
    const SteeringDerivatives sd = steering_derivatives(slim, 0.8, 0.5);
    CHECK(sd.d_eta.norm() < 1e-15);
  }
}

TEST_CASE("fim routes agree and behave") {
  SystemConfig cfg = tiny_config();
  const ChannelSet ch = generate_channels(cfg);
  RandomStream rng(21, "test.fim");

  SUBCASE("vec-Gram route equals trace route at u = Theta H Rx H' Theta'") {
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXcd w = random_matrix(rng, cfg.n_t(), cfg.n_s);
      const Eigen::MatrixXcd rx = w * w.adjoint();
      const Eigen::VectorXcd theta = random_phases(rng, cfg.m_reflect());
      const Eigen::MatrixXcd zhw = theta.asDiagonal() * ch.h * w;
      const Eigen::MatrixXcd u = zhw * zhw.adjoint();

      const FimBlocks via_rx = fim(cfg, ch, theta, rx);
      const FimBlocks via_u = fim_from_u(cfg, u);
      const double scale = std::max(1.0, via_rx.full().norm());
      CHECK((via_rx.full() - via_u.full()).norm() / scale < 1e-10);
    }
  }

  SUBCASE("FIM is symmetric PSD") {
    const Eigen::MatrixXcd w = random_matrix(rng, cfg.n_t(), cfg.n_s);
    const FimBlocks blocks = fim(cfg, ch, random_phases(rng, cfg.m_reflect()),
                                 Eigen::MatrixXcd(w * w.adjoint()));
    const Eigen::Matrix4d j = blocks.full();
    CHECK((j - j.transpose()).norm() < 1e-10 * j.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(j);
    CHECK(eig.eigenvalues().minCoeff() > -1e-9 * j.norm());
    CHECK(blocks.j_aa(0, 0) == doctest::Approx(blocks.j_aa(1, 1)));
    CHECK(blocks.j_aa(0, 1) == 0.0);
  }

  SUBCASE("FIM is linear in the covariance scale") {
    const Eigen::MatrixXcd w = random_matrix(rng, cfg.n_t(), cfg.n_s);
    const Eigen::VectorXcd theta = random_phases(rng, cfg.m_reflect());
    const Eigen::MatrixXcd rx = w * w.adjoint();
    const FimBlocks j1 = fim(cfg, ch, theta, rx);
    const FimBlocks j2 = fim(cfg, ch, theta, Eigen::MatrixXcd(2.0 * rx));
    CHECK((j2.full() - 2.0 * j1.full()).norm() < 1e-9 * j2.full().norm());
  }

  SUBCASE("zero alpha zeroes the angle blocks") {
    SystemConfig dark = cfg;
    dark.alpha = {0.0, 0.0};
    const Eigen::MatrixXcd w = random_matrix(rng, cfg.n_t(), cfg.n_s);
    const FimBlocks blocks = fim(dark, ch, random_phases(rng, cfg.m_reflect()),
                                 Eigen::MatrixXcd(w * w.adjoint()));
    CHECK(blocks.j_pp.norm() == 0.0);
    CHECK(blocks.j_pa.norm() == 0.0);
    CHECK(blocks.j_aa.norm() > 0.0);
    CHECK_THROWS_AS(crb_trace(blocks), UnboundedCrbError);
  }

  SUBCASE("zero u gives zero FIM") {
    const FimBlocks blocks =
        fim_from_u(cfg, Eigen::MatrixXcd::Zero(cfg.m_reflect(), cfg.m_reflect()));
    CHECK(blocks.full().norm() == 0.0);
  }

  SUBCASE("non-Hermitian covariance is rejected") {
    Eigen::MatrixXcd bad = random_matrix(rng, cfg.n_t(), cfg.n_t());
    CHECK_THROWS_AS(fim(cfg, ch, Eigen::VectorXcd::Ones(cfg.m_reflect()), bad),
                    StructuralError);
    Eigen::MatrixXcd bad_u = random_matrix(rng, cfg.m_reflect(), cfg.m_reflect());
    CHECK_THROWS_AS(fim_from_u(cfg, bad_u), StructuralError);
  }
}

TEST_CASE("crb trace") {
  SUBCASE("diagonal case in closed form") {
    FimBlocks blocks;
    blocks.j_pp = Eigen::Vector2d(2.0, 4.0).asDiagonal();
    blocks.j_pa.setZero();
    blocks.j_aa = Eigen::Matrix2d::Identity();
    const CrbResult r = crb_trace(blocks);
    CHECK(r.trace == doctest::Approx(0.75).epsilon(1e-15));
  }

  SUBCASE("matches the angle block of the full 4x4 inverse") {
    RandomStream rng(31, "test.crb");
    for (int trial = 0; trial < 40; ++trial) {
      // Build a random well-conditioned FIM as a Gram matrix with the
      // alpha-block structure the physics produces.
      Eigen::MatrixXcd p = random_matrix(rng, 6, 3);
      Eigen::MatrixXcd pfull(6, 4);
      pfull.col(0) = p.col(0);
      pfull.col(1) = p.col(1);
      pfull.col(2) = p.col(2);
      pfull.col(3) = std::complex<double>(0, 1) * p.col(2);
      const Eigen::Matrix4d j =
          (pfull.adjoint() * pfull).real() + 0.05 * Eigen::Matrix4d::Identity();
      FimBlocks blocks;
      blocks.j_pp = j.topLeftCorner<2, 2>();
      blocks.j_pa = j.topRightCorner<2, 2>();
      blocks.j_aa = j.bottomRightCorner<2, 2>();

      const CrbResult r = crb_trace(blocks);
      const Eigen::Matrix4d jinv = j.inverse();
      CHECK(std::abs(r.trace - jinv.topLeftCorner<2, 2>().trace()) <
            1e-9 * std::max(1.0, std::abs(r.trace)));
    }
  }

  SUBCASE("inverse scales as 1/s") {
    FimBlocks blocks;
    blocks.j_pp << 3.0, 0.5, 0.5, 2.0;
    blocks.j_pa << 0.2, -0.1, 0.05, 0.3;
    blocks.j_aa = 2.0 * Eigen::Matrix2d::Identity();
    const double t1 = crb_trace(blocks).trace;
    blocks.j_pp *= 4.0;
    blocks.j_pa *= 4.0;
    blocks.j_aa *= 4.0;
    const double t4 = crb_trace(blocks).trace;
    CHECK(t4 == doctest::Approx(t1 / 4.0).epsilon(1e-12));
  }

  SUBCASE("singular information is reported as unbounded") {
    FimBlocks blocks;
    blocks.j_pp.setZero();
    blocks.j_pa.setZero();
    blocks.j_aa = Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS(crb_trace(blocks), UnboundedCrbError);
    blocks.j_pp = Eigen::Matrix2d::Identity();
    blocks.j_aa.setZero();
    CHECK_THROWS_AS(crb_trace(blocks), UnboundedCrbError);
  }
}
