#pragma once

#include <Eigen/Dense>
#include <vector>

#include "risisac/conic/program.hpp"
#include "risisac/scenario.hpp"

namespace risisac::conic {

/// Variable block updated by the convex beamforming step: the relaxed
/// precoder w and its baseband factor f_bb, the information lower-bound
/// surrogate omega, the reflected signal z = Theta H w and its covariance
/// relaxation u = z z^H.
struct DigitalBlockIterate {
  Eigen::MatrixXcd w;      // n_t x n_s
  Eigen::MatrixXcd f_bb;   // n_rf x n_s
  Eigen::Matrix2d omega;   // symmetric, >= omega_floor() * I
  Eigen::MatrixXcd z;      // m_reflect x n_s
  Eigen::MatrixXcd u;      // m_reflect x m_reflect, Hermitian
  double objective_value = 0.0;
};

/// Floor enforced on the smallest eigenvalue of omega.
constexpr double omega_floor() { return 1e-8; }

/// Offsets of each variable group in the stacked real decision vector of
/// the assembled step program. Complex matrices occupy column-major (Re, Im)
/// pairs. The z and u columns are expressed in units of z_scale (set from
/// the linearization point) so the covariance LMI stays O(1); extraction
/// undoes the scaling.
struct SubproblemLayout {
  int n_t = 0, n_rf = 0, n_s = 0, m = 0, k_users = 0;
  int w0 = 0, fbb0 = 0, omega0 = 0, z0 = 0, u0 = 0, t0 = 0;
  int pen_w = -1, pen_z = -1;  // penalty epigraphs, absent when rho == 0
  int num_vars = 0;
  double z_scale = 1.0;

  int w_re(int i, int j) const { return w0 + 2 * (j * n_t + i); }
  int w_im(int i, int j) const { return w_re(i, j) + 1; }
  int fbb_re(int i, int j) const { return fbb0 + 2 * (j * n_rf + i); }
  int fbb_im(int i, int j) const { return fbb_re(i, j) + 1; }
  int omega_var(int i, int j) const { return omega0 + svec_index(2, i, j); }
  int z_re(int i, int j) const { return z0 + 2 * (j * m + i); }
  int z_im(int i, int j) const { return z_re(i, j) + 1; }
  int u_diag(int i) const { return u0 + i; }
  /// Off-diagonal entry (i > j) of the Hermitian u, real/imaginary part.
  int u_re(int i, int j) const { return u0 + m + 2 * (svec_index(m, i, j) - j - 1); }
  int u_im(int i, int j) const { return u_re(i, j) + 1; }
  int t_var(int i, int j) const { return t0 + svec_index(2, i, j); }
};

SubproblemLayout subproblem_layout(const SystemConfig& cfg, double rho);

/// RMS column norm of the linearization point's reflected signal; used as
/// the internal unit for the z and u variables.
double reflected_scale(const DigitalBlockIterate& prev);

/// Convexified beamforming step around `prev`: minimize the inverse-trace
/// epigraph of omega plus (rho/2) times the squared factorization and
/// reflection mismatches plus (rho*gap_weight/2) times the linearized
/// covariance gap tr(u) - 2 Re tr(z_prev z^H) + ||z_prev||^2, subject to the
/// information LMI in u, the power ball, the covariance relaxation LMI and
/// the per-user rate cones. f_rf and theta are held fixed. Keeping the gap
/// in the objective (rather than as the cap constraint it linearizes) leaves
/// the feasible set with an interior; the outer penalty schedule drives the
/// gap to zero. gap_weight rebalances the gap (measured in reflected-signal
/// units, typically far below precoder units through a lossy channel)
/// against the Frobenius penalties so one schedule controls all three.
///
/// The assembled cost row is divided by tr(omega_prev^{-1}) so the solver
/// sees an O(1) objective regardless of the physical bound scale.
///
/// Throws InvalidLinearizationPoint (naming the violated constraint family)
/// when prev is not feasible enough to linearize around; solver-level
/// infeasibility of the returned program is a distinct failure surfaced by
/// the caller.
ConicProgram assemble_subproblem(const SystemConfig& cfg, const ChannelSet& channels,
                                 const Eigen::MatrixXcd& f_rf,
                                 const Eigen::VectorXcd& theta,
                                 const DigitalBlockIterate& prev, double rho,
                                 double gap_weight = 1.0);

/// Reads a solved decision vector back into model matrices. objective_value
/// is left at zero; callers evaluate it with penalized_objective.
DigitalBlockIterate extract_iterate(const SubproblemLayout& lay,
                                    const Eigen::VectorXd& x);

/// Exact merit of an iterate: tr(omega^{-1}) + (rho/2)(||w - f_rf f_bb||_F^2
/// + ||z - Theta H w||_F^2) + (rho*gap_weight/2)(tr(u) - ||z||_F^2). The
/// step program minimizes an upper bound of this (the gap term linearized
/// at prev), so accepted steps decrease it. Returns +inf when omega is not
/// positive definite.
double penalized_objective(const ChannelSet& channels, const Eigen::MatrixXcd& f_rf,
                           const Eigen::VectorXcd& theta,
                           const DigitalBlockIterate& it, double rho,
                           double gap_weight = 1.0);

/// Rotates each user column of (w, f_bb, z) by a common phase so that
/// g_k^H z_k is real and nonnegative; a symmetry of the step program that
/// the rate cones require at the linearization point.
void align_user_phases(DigitalBlockIterate& it, const ChannelSet& channels);

struct SubproblemTrace {
  std::vector<double> objectives;  // merit after alignment, then per accepted step
  int solves = 0;
};

/// Runs the convex step to a fixed point: assemble around the current
/// iterate, solve, re-linearize, until the merit improves by less than
/// 1e-4 relative or 30 steps. Steps that fail to improve the exact merit
/// (solver noise) are rejected and terminate the loop, so the reported
/// objective sequence is nonincreasing.
DigitalBlockIterate optimize_digital_block(const SystemConfig& cfg,
                                           const ChannelSet& channels,
                                           const Eigen::MatrixXcd& f_rf,
                                           const Eigen::VectorXcd& theta,
                                           const DigitalBlockIterate& init, double rho,
                                           double gap_weight = 1.0,
                                           SubproblemTrace* trace = nullptr);

/// Maximizes the smallest rate-cone margin over fully digital precoders
/// inside the power ball and returns the maximizer. Throws
/// InfeasibleScenario when even the best margin is not strictly positive,
/// i.e. the configured rate threshold cannot be met. With no users, returns
/// the canonical full-power precoder (scaled identity columns).
Eigen::MatrixXcd restore_rate_feasible_w(const SystemConfig& cfg,
                                         const ChannelSet& channels,
                                         const Eigen::VectorXcd& theta);

/// Builds a feasible starting iterate from a rate-feasible precoder:
/// f_bb is the least-squares factor against f_rf, z and u follow from the
/// exact reflection, omega is the shrunk information Schur complement.
DigitalBlockIterate make_initial_iterate(const SystemConfig& cfg,
                                         const ChannelSet& channels,
                                         const Eigen::MatrixXcd& f_rf,
                                         const Eigen::VectorXcd& theta,
                                         const Eigen::MatrixXcd& w);

}  // namespace risisac::conic
