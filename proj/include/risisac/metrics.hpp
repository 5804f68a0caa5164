#pragma once

#include <Eigen/Dense>
#include <complex>

#include "risisac/scenario.hpp"

namespace risisac {

/// A complete beamforming design: analog combiner (unit-modulus entries),
/// baseband precoder, their product w (or its relaxation), and the RIS
/// phase vector theta (unit-modulus entries).
struct BeamformingSolution {
  Eigen::MatrixXcd f_rf;   // n_t x n_rf
  Eigen::MatrixXcd f_bb;   // n_rf x n_s
  Eigen::MatrixXcd w;      // n_t x n_s
  Eigen::VectorXcd theta;  // m_reflect
};

/// SINR of user k under solution `sol`: desired power over interference from
/// every other stream (communication and sensing) plus noise.
double sinr(const SystemConfig& cfg, const ChannelSet& channels,
            const BeamformingSolution& sol, int k);

/// log2(1 + gamma); rejects negative gamma.
double rate(double gamma);

/// Target response A = a b^T (sensing array x reflecting array) and its
/// analytical derivatives with respect to azimuth and elevation.
struct SteeringDerivatives {
  Eigen::MatrixXcd a_mat;   // m_sense x m_reflect
  Eigen::MatrixXcd d_eta;
  Eigen::MatrixXcd d_phi;
};

SteeringDerivatives steering_derivatives(const SystemConfig& cfg, double eta, double phi);

/// Fisher information of (eta, phi, Re alpha, Im alpha), stored as the
/// three distinct 2x2 blocks of the symmetric 4x4 matrix
/// [[j_pp, j_pa], [j_pa^T, j_aa]].
struct FimBlocks {
  Eigen::Matrix2d j_pp;
  Eigen::Matrix2d j_pa;
  Eigen::Matrix2d j_aa;

  Eigen::Matrix4d full() const;
};

/// FIM from the transmit covariance rx_cov = W W^H, evaluated by forming
/// the derivative response vectors explicitly and taking their Gram matrix.
/// rx_cov must be Hermitian PSD (n_t x n_t).
FimBlocks fim(const SystemConfig& cfg, const ChannelSet& channels,
              const Eigen::VectorXcd& theta, const Eigen::MatrixXcd& rx_cov);

/// FIM as a function of the reflected covariance U = Theta H Rx H^H Theta^H
/// (m_reflect x m_reflect, Hermitian PSD), evaluated with the trace
/// identities that make every block linear in U.
FimBlocks fim_from_u(const SystemConfig& cfg, const Eigen::MatrixXcd& u);

struct CrbResult {
  double trace = 0.0;
  Eigen::Matrix2d crb;  // angle-block covariance bound
};

/// trace of (j_pp - j_pa j_aa^{-1} j_pa^T)^{-1}. Throws UnboundedCrbError
/// when the Schur complement (or j_aa) is singular beyond condition 1e12.
CrbResult crb_trace(const FimBlocks& blocks);

/// Contraction matrices for expressing each FIM entry as a linear form
/// tr(U C) in the reflected covariance; shared by fim_from_u and the conic
/// subproblem assembly.
struct FimUCoefficients {
  Eigen::MatrixXcd c_ee, c_pe, c_ep, c_pp;  // angle-angle blocks
  Eigen::MatrixXcd c_ae, c_ap, c_aa;        // alpha cross and alpha-alpha
  double k_pp = 0.0;                        // 2|alpha|^2 T / sigma_r^2
  double k_pa = 0.0;                        // 2 T / sigma_r^2
  std::complex<double> alpha;
};

FimUCoefficients fim_u_coefficients(const SystemConfig& cfg);

}  // namespace risisac
