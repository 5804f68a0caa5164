#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "risisac/errors.hpp"
#include "risisac/scenario.hpp"

namespace risisac {

/// Quadratic form f(v) = v^H Xi v - 2 Re{delta^H v} + tau over C^D, with Xi
/// Hermitian PSD. Xi is kept in whichever structured form the builder
/// produced; the analog-beamformer objective stores only the small right
/// factor of its Kronecker structure (D = n_t * n_rf never materializes as
/// a D x D matrix), the phase-shift objective only a real diagonal.
struct QuadraticObjective {
  enum class XiForm { dense, diagonal, kron_right };

  XiForm form = XiForm::dense;
  Eigen::MatrixXcd xi;       // dense: D x D; kron_right: the right factor S
  Eigen::VectorXd xi_diag;   // diagonal form (real: diagonal of a PSD matrix)
  int kron_rows = 0;         // kron_right: v reshapes to kron_rows x S.rows()
  Eigen::VectorXcd delta;
  double tau = 0.0;

  Eigen::Index dim() const { return delta.size(); }
};

/// Xi * v without materializing Xi.
Eigen::VectorXcd xi_apply(const QuadraticObjective& obj, const Eigen::VectorXcd& v);

/// Largest eigenvalue of Xi (exact per structured form).
double xi_lambda_max(const QuadraticObjective& obj);

/// f(v) = v^H Xi v - 2 Re{delta^H v} + tau.
double quad_value(const QuadraticObjective& obj, const Eigen::VectorXcd& v);

/// Objective of the analog factorization residual: f(vec F_RF) =
/// ||w - F_RF f_bb||_F^2, in Kronecker-right form.
QuadraticObjective build_frf_objective(const Eigen::MatrixXcd& w,
                                       const Eigen::MatrixXcd& f_bb);

/// Objective of the reflection residual: f(theta) = ||z - diag(theta) h w||_F^2.
/// Xi is the diagonal of (h w)(h w)^H: the quadratic term is constant on the
/// manifold, so descent is driven by the linear term.
QuadraticObjective build_theta_objective(const ChannelSet& channels,
                                         const Eigen::MatrixXcd& w,
                                         const Eigen::MatrixXcd& z);

/// Euclidean gradient 2 Xi v - 2 delta.
Eigen::VectorXcd euclidean_gradient(const QuadraticObjective& obj,
                                    const Eigen::VectorXcd& v);

/// Projection of the Euclidean gradient onto the tangent space of the
/// product-of-circles manifold at v: grad = g - Re{g c* v} .* v elementwise.
Eigen::VectorXcd riemannian_gradient(const QuadraticObjective& obj,
                                     const Eigen::VectorXcd& v);

/// Elementwise v / |v|. Throws DegenerateRetraction when an entry's modulus
/// falls below 1e-14 (the phase is undefined there).
Eigen::VectorXcd retract(const Eigen::VectorXcd& v_bar);

struct ManifoldOptions {
  double eps = 1e-8;       // stop when |f_{t+1} - f_t| < eps
  int max_iters = 500;
  bool polak_ribiere = false;  // conjugate directions instead of steepest descent
};

struct ManifoldTrace {
  std::vector<double> values;  // f(v0), then f after each accepted step
  int iterations = 0;
};

/// Riemannian descent with Armijo backtracking (initial step
/// 1/(2 lambda_max(Xi) + 1), contraction 0.5, sufficient decrease 1e-4).
/// The returned point stays unit-modulus and its objective never exceeds
/// f(v0); the f-sequence is strictly nonincreasing.
Eigen::VectorXcd minimize_on_circles(const QuadraticObjective& obj,
                                     const Eigen::VectorXcd& v0,
                                     const ManifoldOptions& opts = {},
                                     ManifoldTrace* trace = nullptr);

}  // namespace risisac
