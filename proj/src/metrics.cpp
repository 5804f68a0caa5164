#include "risisac/metrics.hpp"

#include <cmath>

#include "risisac/errors.hpp"

namespace risisac {

namespace {

void check_hermitian(const Eigen::MatrixXcd& m, const char* name) {
  if (m.rows() != m.cols())
    throw StructuralError(std::string(name) + " must be square");
  const double scale = std::max(1.0, m.norm());
  if ((m - m.adjoint()).norm() > 1e-8 * scale)
    throw StructuralError(std::string(name) + " must be Hermitian");
}

Eigen::VectorXd index_vector(int rows, int cols, bool horizontal) {
  Eigen::VectorXd idx(rows * cols);
  for (int iy = 0; iy < rows; ++iy)
    for (int iz = 0; iz < cols; ++iz)
      idx(iy * cols + iz) = horizontal ? iy : iz;
  return idx;
}

}  // namespace

double sinr(const SystemConfig& cfg, const ChannelSet& channels,
            const BeamformingSolution& sol, int k) {
  if (k < 0 || k >= cfg.k_users) throw InvalidInput("sinr: user index out of range");
  if (sol.w.rows() != cfg.n_t() || sol.w.cols() != cfg.n_s)
    throw StructuralError("sinr: w must be n_t x n_s");
  if (sol.theta.size() != cfg.m_reflect())
    throw StructuralError("sinr: theta must have m_reflect entries");

  const Eigen::RowVectorXcd eff =
      channels.g[k].adjoint() * sol.theta.asDiagonal() * channels.h;
  const Eigen::RowVectorXcd received = eff * sol.w;
  double interference = 0.0;
  for (int j = 0; j < cfg.n_s; ++j)
    if (j != k) interference += std::norm(received(j));
  return std::norm(received(k)) / (interference + cfg.sigma0_sq);
}

double rate(double gamma) {
  if (!(gamma >= 0.0)) throw InvalidInput("rate: SINR must be nonnegative");
  return std::log2(1.0 + gamma);
}

SteeringDerivatives steering_derivatives(const SystemConfig& cfg, double eta, double phi) {
  SteeringDerivatives out;
  const Eigen::VectorXcd a = steering_vector(cfg.sensor_geometry(), eta, phi);
  const Eigen::VectorXcd b = steering_vector(cfg.reflect_sense_geometry(), eta, phi);
  out.a_mat = a * b.transpose();

  const Eigen::VectorXd mu_sy = index_vector(cfg.m_sy, cfg.m_sz, true);
  const Eigen::VectorXd mu_sz = index_vector(cfg.m_sy, cfg.m_sz, false);
  const Eigen::VectorXd mu_y = index_vector(cfg.m_y, cfg.m_z, true);
  const Eigen::VectorXd mu_z = index_vector(cfg.m_y, cfg.m_z, false);

  const double k = 2.0 * M_PI / cfg.wavelength();
  const std::complex<double> jim(0.0, 1.0);

  // Horizontal (dy) phase ramp differentiated through sin(eta)sin(phi),
  // applied on both the sensing and reflecting sides of A = a b^T.
  const auto side_y = [&](const Eigen::MatrixXcd& m) {
    return Eigen::MatrixXcd(mu_sy.asDiagonal() * m + m * mu_y.asDiagonal());
  };
  const auto side_z = [&](const Eigen::MatrixXcd& m) {
    return Eigen::MatrixXcd(mu_sz.asDiagonal() * m + m * mu_z.asDiagonal());
  };

  out.d_eta = -jim * k * std::cos(eta) * std::sin(phi) * cfg.dy * side_y(out.a_mat);
  out.d_phi = -jim * k * std::sin(eta) * std::cos(phi) * cfg.dy * side_y(out.a_mat) +
              jim * k * std::sin(phi) * cfg.dz * side_z(out.a_mat);
  return out;
}

Eigen::Matrix4d FimBlocks::full() const {
  Eigen::Matrix4d j;
  j.topLeftCorner<2, 2>() = j_pp;
  j.topRightCorner<2, 2>() = j_pa;
  j.bottomLeftCorner<2, 2>() = j_pa.transpose();
  j.bottomRightCorner<2, 2>() = j_aa;
  return j;
}

FimBlocks fim(const SystemConfig& cfg, const ChannelSet& channels,
              const Eigen::VectorXcd& theta, const Eigen::MatrixXcd& rx_cov) {
  if (rx_cov.rows() != cfg.n_t() || rx_cov.cols() != cfg.n_t())
    throw StructuralError("fim: rx_cov must be n_t x n_t");
  check_hermitian(rx_cov, "fim: rx_cov");
  if (theta.size() != cfg.m_reflect())
    throw StructuralError("fim: theta must have m_reflect entries");

  // Square root of T * rx_cov; any factor with X X^H = T * Rx yields the
  // same Gram matrix below.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(rx_cov);
  const double floor = -1e-8 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < floor)
    throw StructuralError("fim: rx_cov must be positive semidefinite");
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXcd x = std::sqrt(static_cast<double>(cfg.t_snapshots)) *
                             eig.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
                             eig.eigenvectors().adjoint();

  const Eigen::MatrixXcd b = theta.asDiagonal() * channels.h * x;
  const SteeringDerivatives sd =
      steering_derivatives(cfg, cfg.target_eta, cfg.target_phi);
  const std::complex<double> alpha = cfg.resolved_alpha();

  const auto vec = [](const Eigen::MatrixXcd& m) {
    return Eigen::VectorXcd(m.reshaped());
  };
  Eigen::MatrixXcd p(sd.a_mat.rows() * b.cols(), 4);
  p.col(0) = alpha * vec(sd.d_eta * b);
  p.col(1) = alpha * vec(sd.d_phi * b);
  p.col(2) = vec(sd.a_mat * b);
  p.col(3) = std::complex<double>(0.0, 1.0) * p.col(2);

  const Eigen::Matrix4d j = (2.0 / cfg.sigmar_sq) * (p.adjoint() * p).real();
  FimBlocks out;
  out.j_pp = j.topLeftCorner<2, 2>();
  out.j_pa = j.topRightCorner<2, 2>();
  out.j_aa = j.bottomRightCorner<2, 2>();
  return out;
}

FimUCoefficients fim_u_coefficients(const SystemConfig& cfg) {
  const SteeringDerivatives sd =
      steering_derivatives(cfg, cfg.target_eta, cfg.target_phi);
  FimUCoefficients co;
  co.c_ee = sd.d_eta.adjoint() * sd.d_eta;
  co.c_pe = sd.d_eta.adjoint() * sd.d_phi;
  co.c_ep = sd.d_phi.adjoint() * sd.d_eta;
  co.c_pp = sd.d_phi.adjoint() * sd.d_phi;
  co.c_ae = sd.d_eta.adjoint() * sd.a_mat;
  co.c_ap = sd.d_phi.adjoint() * sd.a_mat;
  co.c_aa = sd.a_mat.adjoint() * sd.a_mat;
  co.alpha = cfg.resolved_alpha();
  const double t = static_cast<double>(cfg.t_snapshots);
  co.k_pa = 2.0 * t / cfg.sigmar_sq;
  co.k_pp = co.k_pa * std::norm(co.alpha);
  return co;
}

FimBlocks fim_from_u(const SystemConfig& cfg, const Eigen::MatrixXcd& u) {
  if (u.rows() != cfg.m_reflect() || u.cols() != cfg.m_reflect())
    throw StructuralError("fim_from_u: u must be m_reflect x m_reflect");
  check_hermitian(u, "fim_from_u: u");

  const FimUCoefficients co = fim_u_coefficients(cfg);
  const auto contract = [&](const Eigen::MatrixXcd& c) {
    return (u * c).trace();
  };

  FimBlocks out;
  out.j_pp(0, 0) = co.k_pp * contract(co.c_ee).real();
  out.j_pp(0, 1) = co.k_pp * contract(co.c_pe).real();
  out.j_pp(1, 0) = co.k_pp * contract(co.c_ep).real();
  out.j_pp(1, 1) = co.k_pp * contract(co.c_pp).real();

  const std::complex<double> t_eta = std::conj(co.alpha) * contract(co.c_ae);
  const std::complex<double> t_phi = std::conj(co.alpha) * contract(co.c_ap);
  out.j_pa(0, 0) = co.k_pa * t_eta.real();
  out.j_pa(0, 1) = -co.k_pa * t_eta.imag();
  out.j_pa(1, 0) = co.k_pa * t_phi.real();
  out.j_pa(1, 1) = -co.k_pa * t_phi.imag();

  out.j_aa = co.k_pa * contract(co.c_aa).real() * Eigen::Matrix2d::Identity();
  return out;
}

CrbResult crb_trace(const FimBlocks& blocks) {
  constexpr double kMaxCondition = 1e12;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig_aa(blocks.j_aa);
  const double aa_min = eig_aa.eigenvalues().minCoeff();
  const double aa_max = eig_aa.eigenvalues().maxCoeff();
  if (!(aa_min > 0.0) || aa_max / aa_min > kMaxCondition)
    throw UnboundedCrbError("crb_trace: alpha information block is singular");

  Eigen::Matrix2d schur =
      blocks.j_pp - blocks.j_pa * blocks.j_aa.inverse() * blocks.j_pa.transpose();
  schur = 0.5 * (schur + schur.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig_s(schur);
  const double s_min = eig_s.eigenvalues().minCoeff();
  const double s_max = eig_s.eigenvalues().maxCoeff();
  if (!(s_min > 0.0) || s_max / s_min > kMaxCondition)
    throw UnboundedCrbError("crb_trace: angle information is singular");

  CrbResult out;
  out.crb = schur.inverse();
  out.trace = out.crb.trace();
  return out;
}

}  // namespace risisac
