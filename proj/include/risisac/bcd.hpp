#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "risisac/manifold.hpp"
#include "risisac/metrics.hpp"
#include "risisac/scenario.hpp"

namespace risisac {

/// One row of an optimization trace. Row 0 of every penalty stage scores the
/// stage's starting point (the previous stage's variables under the new
/// rho); each following row closes one full block pass.
struct IterationRecord {
  int outer = 0;            // penalty stage
  int inner = 0;            // block pass within the stage, 0 = stage start
  double rho = 0.0;
  double objective = 0.0;   // penalized merit h
  double surrogate = 0.0;   // tr(omega^{-1})
  double crb = 0.0;         // exact bound of the current (w, theta); inf if singular
  double w_residual = 0.0;  // ||w - f_rf f_bb||_F
  double z_residual = 0.0;  // ||z - Theta H w||_F
  double min_rate = 0.0;    // worst user rate under the current w; inf with no users
  double elapsed_s = 0.0;   // wall time since the run started
};

enum class OptimizerStatus {
  converged,          // factorization, reflection and lift residuals all met
  penalty_exhausted,  // rho cap reached with residuals still open
  solver_failure,     // a conic step failed; records cover progress up to it
};

std::string to_string(OptimizerStatus status);

struct OptimizerTrace {
  std::vector<IterationRecord> records;
  OptimizerStatus status = OptimizerStatus::converged;
  std::string message;  // failure detail, empty otherwise
};

/// Penalty schedule and block-pass knobs. Defaults implement the published
/// schedule; the fixed_* fields freeze a block for baselines.
struct JointDesignOptions {
  double rho_fraction = 1e-2;  // rho0 = fraction * initial tr(omega^{-1})
  double rho_growth = 5.0;
  double rho_cap_ratio = 1e4;  // stop growing once rho >= cap * rho0
  double residual_tol = 1e-3;  // residual targets, relative to ||w||_F
  int max_passes = 15;         // block passes per penalty stage
  double stall_tol = 1e-4;     // relative merit change that ends a stage
  ManifoldOptions manifold;    // settings for both unit-modulus blocks

  // Size zero: optimize the block from a seeded random unit-modulus start.
  // Otherwise the block is held at the given value for the whole run
  // (identity for a full-digital run, a drawn vector for random phases).
  Eigen::MatrixXcd fixed_f_rf;
  Eigen::VectorXcd fixed_theta;
};

struct JointDesignResult {
  /// Reconstituted solution: w equals f_rf * f_bb exactly and sits inside
  /// the power ball.
  BeamformingSolution solution;
  double crb = 0.0;           // exact bound of `solution`
  std::vector<double> rates;  // post-hoc per-user rates of `solution`
  OptimizerTrace trace;
};

/// Joint hybrid-beamformer and phase-shift design: an outer penalty schedule
/// wrapped around block-coordinate descent (convex digital step, then
/// Riemannian descent on f_rf and on theta). The merit h is nonincreasing
/// across passes at fixed rho. Throws InfeasibleScenario when no precoder
/// meets the rate constraints at the starting phases; a solver failure
/// mid-run is reported through trace.status instead, with the last accepted
/// iterate reconstituted.
JointDesignResult optimize_joint_design(const SystemConfig& cfg,
                                        const ChannelSet& channels,
                                        const JointDesignOptions& opts = {});

/// The same optimizer with n_rf widened to n_t and f_rf pinned to identity.
/// The factorization penalty is then identically zero (the baseband factor
/// reproduces any w), so this is the unconstrained-digital reference.
JointDesignResult baseline_full_digital(const SystemConfig& cfg,
                                        const ChannelSet& channels);

/// Alternating least-squares / Riemannian factorization of a target
/// precoder over unit-modulus analog weights; `residuals` holds the fit
/// error after every alternation (nonincreasing). draw_index seeds the
/// analog start.
struct HybridFit {
  Eigen::MatrixXcd f_rf;  // n_t x n_rf, unit modulus
  Eigen::MatrixXcd f_bb;  // n_rf x n_s
  std::vector<double> residuals;
};

HybridFit fit_hybrid_factors(const SystemConfig& cfg,
                             const Eigen::MatrixXcd& w_target,
                             std::uint64_t draw_index = 0);

/// Hybrid approximation of the digital reference: solves full-digital,
/// factorizes its precoder with fit_hybrid_factors and rescales to the
/// power budget. Keeps the digital run's phase vector.
JointDesignResult baseline_ahbf(const SystemConfig& cfg,
                                const ChannelSet& channels);

/// Draws `trials` fixed phase vectors; for each, optimizes only the digital
/// block (at that phase) and hybridizes the result exactly as baseline_ahbf
/// does. Returns the draw with the lowest exact bound. Draws whose rate
/// restoration fails are skipped; throws InfeasibleScenario when every draw
/// fails.
JointDesignResult baseline_random_phase(const SystemConfig& cfg,
                                        const ChannelSet& channels, int trials);

}  // namespace risisac
