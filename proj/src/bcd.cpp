#include "risisac/bcd.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "risisac/conic/subproblem.hpp"
#include "risisac/errors.hpp"
#include "risisac/rng.hpp"

namespace risisac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double inverse_trace(const Eigen::Matrix2d& om) {
  const double det = om(0, 0) * om(1, 1) - om(0, 1) * om(1, 0);
  const double tr = om(0, 0) + om(1, 1);
  if (!(det > 0.0) || !(tr > 0.0)) return kInf;
  return tr / det;
}

double exact_crb(const SystemConfig& cfg, const ChannelSet& channels,
                 const Eigen::VectorXcd& theta, const Eigen::MatrixXcd& w) {
  try {
    return crb_trace(fim(cfg, channels, theta, (w * w.adjoint()).eval())).trace;
  } catch (const UnboundedCrbError&) {
    return kInf;
  }
}

double worst_user_rate(const SystemConfig& cfg, const ChannelSet& channels,
                       const BeamformingSolution& sol) {
  double worst = kInf;
  for (int k = 0; k < cfg.k_users; ++k)
    worst = std::min(worst, rate(sinr(cfg, channels, sol, k)));
  return worst;
}

Eigen::MatrixXcd random_unit_matrix(int rows, int cols, RandomStream& rng) {
  Eigen::MatrixXcd mat(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) mat(i, j) = rng.unit_phase();
  return mat;
}

struct Residuals {
  double w = 0.0;    // ||w - f_rf f_bb||_F
  double z = 0.0;    // ||z - Theta H w||_F
  double gap = 0.0;  // tr(u) - ||z||_F^2, >= 0 up to solver noise
};

Residuals residuals_of(const ChannelSet& channels, const Eigen::MatrixXcd& f_rf,
                       const Eigen::VectorXcd& theta,
                       const conic::DigitalBlockIterate& it) {
  Residuals r;
  r.w = (it.w - f_rf * it.f_bb).norm();
  r.z = (it.z - theta.asDiagonal() * (channels.h * it.w)).norm();
  r.gap = it.u.real().trace() - it.z.squaredNorm();
  return r;
}

IterationRecord make_record(const SystemConfig& cfg, const ChannelSet& channels,
                            const Eigen::MatrixXcd& f_rf,
                            const Eigen::VectorXcd& theta,
                            const conic::DigitalBlockIterate& it, double rho,
                            double gap_weight, int outer, int inner,
                            Clock::time_point start) {
  IterationRecord rec;
  rec.outer = outer;
  rec.inner = inner;
  rec.rho = rho;
  rec.objective = conic::penalized_objective(channels, f_rf, theta, it, rho, gap_weight);
  rec.surrogate = inverse_trace(it.omega);
  rec.crb = exact_crb(cfg, channels, theta, it.w);
  const Residuals r = residuals_of(channels, f_rf, theta, it);
  rec.w_residual = r.w;
  rec.z_residual = r.z;
  rec.min_rate = worst_user_rate(cfg, channels, {f_rf, it.f_bb, it.w, theta});
  rec.elapsed_s = seconds_since(start);
  return rec;
}

void check_options(const JointDesignOptions& opts) {
  if (!(opts.rho_fraction > 0.0) || !(opts.rho_growth > 1.0) ||
      !(opts.rho_cap_ratio >= 1.0))
    throw InvalidInput("joint design: penalty schedule must have positive "
                       "rho_fraction, growth > 1 and cap ratio >= 1");
  if (opts.max_passes < 1 || !(opts.residual_tol > 0.0) || !(opts.stall_tol > 0.0))
    throw InvalidInput("joint design: need max_passes >= 1 and positive tolerances");
}

/// Reconstitutes the physically realizable solution from the final blocks
/// and scores it.
void finalize(const SystemConfig& cfg, const ChannelSet& channels,
              const Eigen::MatrixXcd& f_rf, const Eigen::VectorXcd& theta,
              const conic::DigitalBlockIterate& it, JointDesignResult& out) {
  Eigen::MatrixXcd f_bb = it.f_bb;
  Eigen::MatrixXcd w = f_rf * f_bb;
  const double nrm = w.norm();
  const double budget = std::sqrt(cfg.p0);
  if (nrm > budget) {
    const double shrink = budget / nrm;
    w *= shrink;
    f_bb *= shrink;
  }
  out.solution = {f_rf, f_bb, w, theta};
  out.crb = exact_crb(cfg, channels, theta, w);
  out.rates.resize(cfg.k_users);
  for (int k = 0; k < cfg.k_users; ++k)
    out.rates[k] = rate(sinr(cfg, channels, out.solution, k));
}

/// Shared tail of baseline_ahbf and baseline_random_phase: factorize a
/// digital design into hybrid blocks and rescale to the power budget.
JointDesignResult hybridize(const SystemConfig& cfg, const ChannelSet& channels,
                            JointDesignResult digital) {
  HybridFit fit = fit_hybrid_factors(cfg, digital.solution.w);
  Eigen::MatrixXcd w = fit.f_rf * fit.f_bb;
  const double nrm = w.norm();
  const double scale = nrm > 0.0 ? std::sqrt(cfg.p0) / nrm : 1.0;
  w *= scale;

  JointDesignResult out;
  out.solution = {std::move(fit.f_rf), fit.f_bb * scale, std::move(w),
                  digital.solution.theta};
  out.crb = exact_crb(cfg, channels, out.solution.theta, out.solution.w);
  out.rates.resize(cfg.k_users);
  for (int k = 0; k < cfg.k_users; ++k)
    out.rates[k] = rate(sinr(cfg, channels, out.solution, k));
  out.trace = std::move(digital.trace);
  return out;
}

}  // namespace

std::string to_string(OptimizerStatus status) {
  switch (status) {
    case OptimizerStatus::converged: return "converged";
    case OptimizerStatus::penalty_exhausted: return "penalty_exhausted";
    case OptimizerStatus::solver_failure: return "solver_failure";
  }
  return "unknown";
}

JointDesignResult optimize_joint_design(const SystemConfig& cfg,
                                        const ChannelSet& channels,
                                        const JointDesignOptions& opts) {
  cfg.validate();
  check_options(opts);
  const int n_t = cfg.n_t();
  const int m = cfg.m_reflect();
  const auto start = Clock::now();

  const bool tune_frf = opts.fixed_f_rf.size() == 0;
  const bool tune_theta = opts.fixed_theta.size() == 0;

  Eigen::MatrixXcd f_rf;
  if (tune_frf) {
    RandomStream rng(cfg.rng_seed, "bcd.frf-init");
    f_rf = random_unit_matrix(n_t, cfg.n_rf, rng);
  } else {
    if (opts.fixed_f_rf.rows() != n_t || opts.fixed_f_rf.cols() != cfg.n_rf)
      throw InvalidInput("joint design: fixed f_rf must be n_t x n_rf");
    f_rf = opts.fixed_f_rf;
  }

  Eigen::VectorXcd theta;
  if (tune_theta) {
    RandomStream rng(cfg.rng_seed, "bcd.theta-init");
    theta = random_unit_matrix(m, 1, rng);
  } else {
    if (opts.fixed_theta.size() != m)
      throw InvalidInput("joint design: fixed theta must have m_reflect entries");
    theta = opts.fixed_theta;
  }

  // Rate-feasible start at full power; the reflected scale of its exact
  // reflection sets the gap weight that puts the covariance-lift penalty in
  // precoder units for the whole run.
  Eigen::MatrixXcd w0 = conic::restore_rate_feasible_w(cfg, channels, theta);
  if (w0.norm() > 0.0) w0 *= std::sqrt(cfg.p0) / w0.norm();
  conic::DigitalBlockIterate it = conic::make_initial_iterate(cfg, channels, f_rf, theta, w0);
  const double zeta0 = conic::reflected_scale(it);
  const double gap_weight = 1.0 / (zeta0 * zeta0);

  const double rho0 = opts.rho_fraction * std::min(inverse_trace(it.omega), 1e290);
  double rho = rho0;

  JointDesignResult out;
  OptimizerTrace& trace = out.trace;
  for (int outer = 0;; ++outer) {
    trace.records.push_back(make_record(cfg, channels, f_rf, theta, it, rho,
                                        gap_weight, outer, 0, start));
    double h_prev = trace.records.back().objective;

    for (int pass = 1; pass <= opts.max_passes; ++pass) {
      try {
        it = conic::optimize_digital_block(cfg, channels, f_rf, theta, it, rho,
                                           gap_weight);
      } catch (const SolverFailure& err) {
        trace.status = OptimizerStatus::solver_failure;
        trace.message = err.what();
        finalize(cfg, channels, f_rf, theta, it, out);
        return out;
      }

      if (tune_frf) {
        const QuadraticObjective obj = build_frf_objective(it.w, it.f_bb);
        const Eigen::Map<const Eigen::VectorXcd> v0(f_rf.data(), f_rf.size());
        const Eigen::VectorXcd v = minimize_on_circles(obj, v0, opts.manifold);
        f_rf = Eigen::Map<const Eigen::MatrixXcd>(v.data(), n_t, cfg.n_rf);
      }
      if (tune_theta) {
        const QuadraticObjective obj = build_theta_objective(channels, it.w, it.z);
        theta = minimize_on_circles(obj, theta, opts.manifold);
      }

      trace.records.push_back(make_record(cfg, channels, f_rf, theta, it, rho,
                                          gap_weight, outer, pass, start));
      const double h = trace.records.back().objective;
      const bool stalled = std::abs(h_prev - h) <= opts.stall_tol * std::abs(h_prev);
      h_prev = h;
      if (stalled) break;
    }

    const Residuals r = residuals_of(channels, f_rf, theta, it);
    const double target = opts.residual_tol * it.w.norm();
    const double gap_target =
        std::pow(opts.residual_tol * it.z.norm(), 2) + 1e-30;
    if (r.w <= target && r.z <= target && r.gap <= gap_target) {
      trace.status = OptimizerStatus::converged;
      break;
    }
    if (rho >= opts.rho_cap_ratio * rho0) {
      trace.status = OptimizerStatus::penalty_exhausted;
      trace.message = "rho cap reached with residuals w=" + std::to_string(r.w) +
                      ", z=" + std::to_string(r.z) +
                      ", gap=" + std::to_string(r.gap) + " above tolerance";
      break;
    }
    rho *= opts.rho_growth;
  }

  finalize(cfg, channels, f_rf, theta, it, out);
  return out;
}

JointDesignResult baseline_full_digital(const SystemConfig& cfg,
                                        const ChannelSet& channels) {
  SystemConfig digital = cfg;
  digital.n_rf = digital.n_t();
  JointDesignOptions opts;
  opts.fixed_f_rf = Eigen::MatrixXcd::Identity(digital.n_t(), digital.n_t());
  return optimize_joint_design(digital, channels, opts);
}

HybridFit fit_hybrid_factors(const SystemConfig& cfg,
                             const Eigen::MatrixXcd& w_target,
                             std::uint64_t draw_index) {
  if (w_target.rows() != cfg.n_t())
    throw InvalidInput("hybrid fit: target must have n_t rows");
  constexpr int kMaxCycles = 100;
  constexpr double kStallTol = 1e-4;

  HybridFit fit;
  RandomStream rng(cfg.rng_seed, "bcd.hybrid-fit", draw_index);
  fit.f_rf = random_unit_matrix(cfg.n_t(), cfg.n_rf, rng);

  double prev = kInf;
  for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
    fit.f_bb = fit.f_rf.completeOrthogonalDecomposition().solve(w_target);
    const QuadraticObjective obj = build_frf_objective(w_target, fit.f_bb);
    const Eigen::Map<const Eigen::VectorXcd> v0(fit.f_rf.data(), fit.f_rf.size());
    const Eigen::VectorXcd v = minimize_on_circles(obj, v0);
    fit.f_rf = Eigen::Map<const Eigen::MatrixXcd>(v.data(), cfg.n_t(), cfg.n_rf);

    const double res = (w_target - fit.f_rf * fit.f_bb).norm();
    fit.residuals.push_back(res);
    if (std::abs(prev - res) <= kStallTol * std::max(prev, 1e-300)) break;
    prev = res;
  }
  // Refresh the baseband factor against the final analog stage.
  fit.f_bb = fit.f_rf.completeOrthogonalDecomposition().solve(w_target);
  return fit;
}

JointDesignResult baseline_ahbf(const SystemConfig& cfg, const ChannelSet& channels) {
  return hybridize(cfg, channels, baseline_full_digital(cfg, channels));
}

JointDesignResult baseline_random_phase(const SystemConfig& cfg,
                                        const ChannelSet& channels, int trials) {
  if (trials < 1) throw InvalidInput("random-phase baseline: need at least one trial");

  SystemConfig digital = cfg;
  digital.n_rf = digital.n_t();
  JointDesignOptions opts;
  opts.fixed_f_rf = Eigen::MatrixXcd::Identity(digital.n_t(), digital.n_t());

  JointDesignResult best;
  bool have = false;
  std::string last_failure;
  for (int trial = 0; trial < trials; ++trial) {
    RandomStream rng(cfg.rng_seed, "bcd.random-phase", trial);
    Eigen::VectorXcd theta(cfg.m_reflect());
    for (int i = 0; i < theta.size(); ++i) theta(i) = rng.unit_phase();
    opts.fixed_theta = theta;

    JointDesignResult trial_digital;
    try {
      trial_digital = optimize_joint_design(digital, channels, opts);
    } catch (const InfeasibleScenario& err) {
      last_failure = err.what();
      continue;
    }
    JointDesignResult cand = hybridize(cfg, channels, std::move(trial_digital));
    if (!have || cand.crb < best.crb) {
      best = std::move(cand);
      have = true;
    }
  }
  if (!have)
    throw InfeasibleScenario("every random phase draw failed rate restoration; last: " +
                             last_failure);
  return best;
}

}  // namespace risisac
