#pragma once

#include <Eigen/Dense>
#include <string>

#include "risisac/conic/program.hpp"

namespace risisac::conic {

enum class SolveStatus {
  optimal,
  infeasible,       // primal infeasibility certificate found
  unbounded,        // dual infeasibility certificate found
  max_iterations,
  numerical_problem
};

const char* to_string(SolveStatus status);

struct SolverOptions {
  int max_iters = 100;
  double feastol = 1e-7;
  double abstol = 1e-7;
  double reltol = 1e-6;
  double step_fraction = 0.99;
  int refine_steps = 2;
  bool equilibrate = true;
  int equilibrate_rounds = 8;
  /// Verify every Newton direction against the linearized equations
  /// (testing aid; costs one extra matrix multiply per solve).
  bool debug_checks = false;
};

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_problem;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double primal_residual = std::numeric_limits<double>::quiet_NaN();
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string message;

  bool ok() const { return status == SolveStatus::optimal; }
};

/// Primal-dual interior-point solve of the conic program via a homogeneous
/// self-dual embedding with Nesterov-Todd scaling. Rotated cones are lowered
/// to second-order cones internally; zero-cone blocks become equalities.
SolveResult solve_conic(const ConicProgram& prog, const SolverOptions& opts = {});
SolveResult solve_conic(const ConicProgram& prog, double tol);

}  // namespace risisac::conic
