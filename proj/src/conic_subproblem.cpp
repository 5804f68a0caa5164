#include "risisac/conic/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "risisac/conic/solver.hpp"
#include "risisac/errors.hpp"
#include "risisac/metrics.hpp"

namespace risisac::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative slack below which a linearization point counts as infeasible.
constexpr double kFamilyTol = 1e-6;

using Cplx = std::complex<double>;

std::string format_margin(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Eigen::MatrixXcd reflection_map(const ChannelSet& channels, const Eigen::VectorXcd& theta) {
  return theta.asDiagonal() * channels.h;
}

double rate_threshold(const SystemConfig& cfg) {
  return std::sqrt(std::exp2(cfg.r_th) - 1.0);
}

void check_dimensions(const SystemConfig& cfg, const ChannelSet& channels,
                      const Eigen::MatrixXcd& f_rf, const Eigen::VectorXcd& theta,
                      const DigitalBlockIterate& prev) {
  if (channels.h.rows() != cfg.m_reflect() || channels.h.cols() != cfg.n_t())
    throw InvalidInput("subproblem: channel h must be m_reflect x n_t");
  if (static_cast<int>(channels.g.size()) < cfg.k_users)
    throw InvalidInput("subproblem: one user channel per user required");
  if (f_rf.rows() != cfg.n_t() || f_rf.cols() != cfg.n_rf)
    throw InvalidInput("subproblem: f_rf must be n_t x n_rf");
  if (theta.size() != cfg.m_reflect())
    throw InvalidInput("subproblem: theta must have m_reflect entries");
  if (prev.w.rows() != cfg.n_t() || prev.w.cols() != cfg.n_s)
    throw InvalidInput("subproblem: prev.w must be n_t x n_s");
  if (prev.f_bb.rows() != cfg.n_rf || prev.f_bb.cols() != cfg.n_s)
    throw InvalidInput("subproblem: prev.f_bb must be n_rf x n_s");
  if (prev.z.rows() != cfg.m_reflect() || prev.z.cols() != cfg.n_s)
    throw InvalidInput("subproblem: prev.z must be m_reflect x n_s");
  if (prev.u.rows() != cfg.m_reflect() || prev.u.cols() != cfg.m_reflect())
    throw InvalidInput("subproblem: prev.u must be m_reflect x m_reflect");
}

struct FamilyMargin {
  const char* family = "";
  double margin = kInf;  // relative; negative means violated
};

/// Smallest relative slack of `prev` over the constraint families that the
/// step program inherits from the linearization point.
FamilyMargin weakest_family(const SystemConfig& cfg, const ChannelSet& channels,
                            const DigitalBlockIterate& prev) {
  FamilyMargin worst;
  const auto consider = [&](const char* name, double margin) {
    if (margin < worst.margin) worst = {name, margin};
  };

  consider("power budget",
           (cfg.p0 - prev.w.squaredNorm()) / std::max(1.0, cfg.p0));

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> om(prev.omega);
  consider("surrogate floor",
           (om.eigenvalues().minCoeff() - omega_floor()) /
               std::max(1.0, om.eigenvalues().cwiseAbs().maxCoeff()));

  const int m = cfg.m_reflect();
  const int d = m + cfg.n_s;
  Eigen::MatrixXcd lmi = Eigen::MatrixXcd::Identity(d, d);
  lmi.topLeftCorner(m, m) = prev.u;
  lmi.topRightCorner(m, cfg.n_s) = prev.z;
  lmi.bottomLeftCorner(cfg.n_s, m) = prev.z.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ev(lmi, Eigen::EigenvaluesOnly);
  consider("covariance relaxation",
           ev.eigenvalues().minCoeff() / std::max(1.0, ev.eigenvalues().maxCoeff()));

  const double beta = rate_threshold(cfg);
  const double sigma0 = std::sqrt(cfg.sigma0_sq);
  for (int k = 0; k < cfg.k_users; ++k) {
    Eigen::VectorXcd q(cfg.n_s);
    for (int j = 0; j < cfg.n_s; ++j) q(j) = channels.g[k].dot(prev.z.col(j));
    double interference = cfg.sigma0_sq;
    for (int j = 0; j < cfg.n_s; ++j)
      if (j != k) interference += std::norm(q(j));
    const double need = beta * std::sqrt(interference);
    const double scale = std::abs(q(k)) + need + beta * sigma0 + 1e-300;
    consider("rate threshold", (std::abs(q(k)) - need) / scale);
  }
  return worst;
}

/// Writes the coefficients of scale * Re tr(U C) on PSD slack entry (r, c),
/// U being the Hermitian variable block of `lay` (in z_scale^2 units, which
/// the caller folds into `scale`).
void add_u_functional(ConstraintBlock& blk, const SubproblemLayout& lay, int r, int c,
                      const Eigen::MatrixXcd& cmat, double scale) {
  const Eigen::MatrixXcd ch = 0.5 * (cmat + cmat.adjoint());
  for (int i = 0; i < lay.m; ++i)
    blk.add_psd_coeff(r, c, lay.u_diag(i), -scale * ch(i, i).real());
  for (int j = 0; j < lay.m; ++j)
    for (int i = j + 1; i < lay.m; ++i) {
      const Cplx w = ch(j, i);  // C_{ji}, pairs with U_{ij}
      blk.add_psd_coeff(r, c, lay.u_re(i, j), -scale * 2.0 * w.real());
      blk.add_psd_coeff(r, c, lay.u_im(i, j), scale * 2.0 * w.imag());
    }
}

}  // namespace

SubproblemLayout subproblem_layout(const SystemConfig& cfg, double rho) {
  SubproblemLayout lay;
  lay.n_t = cfg.n_t();
  lay.n_rf = cfg.n_rf;
  lay.n_s = cfg.n_s;
  lay.m = cfg.m_reflect();
  lay.k_users = cfg.k_users;

  lay.w0 = 0;
  lay.fbb0 = lay.w0 + 2 * lay.n_t * lay.n_s;
  lay.omega0 = lay.fbb0 + 2 * lay.n_rf * lay.n_s;
  lay.z0 = lay.omega0 + 3;
  lay.u0 = lay.z0 + 2 * lay.m * lay.n_s;
  lay.t0 = lay.u0 + lay.m * lay.m;
  lay.num_vars = lay.t0 + 3;
  if (rho > 0.0) {
    lay.pen_w = lay.num_vars++;
    lay.pen_z = lay.num_vars++;
  }
  return lay;
}

double reflected_scale(const DigitalBlockIterate& prev) {
  const double cols = std::max<Eigen::Index>(1, prev.z.cols());
  return std::max(prev.z.norm() / std::sqrt(static_cast<double>(cols)), 1e-12);
}

ConicProgram assemble_subproblem(const SystemConfig& cfg, const ChannelSet& channels,
                                 const Eigen::MatrixXcd& f_rf,
                                 const Eigen::VectorXcd& theta,
                                 const DigitalBlockIterate& prev, double rho,
                                 double gap_weight) {
  check_dimensions(cfg, channels, f_rf, theta, prev);
  if (rho < 0.0) throw InvalidInput("subproblem: rho must be nonnegative");
  if (!(gap_weight > 0.0) || !std::isfinite(gap_weight))
    throw InvalidInput("subproblem: gap_weight must be positive and finite");

  const FamilyMargin worst = weakest_family(cfg, channels, prev);
  if (worst.margin < -kFamilyTol)
    throw InvalidLinearizationPoint(
        std::string("linearization point violates the ") + worst.family +
        " constraint (relative margin " + format_margin(worst.margin) + ")");

  SubproblemLayout lay = subproblem_layout(cfg, rho);
  lay.z_scale = reflected_scale(prev);
  const double zeta = lay.z_scale;
  const int n_t = lay.n_t, n_rf = lay.n_rf, n_s = lay.n_s, m = lay.m;

  ConicProgram prog;
  prog.num_vars = lay.num_vars;
  prog.cost = Eigen::VectorXd::Zero(lay.num_vars);
  prog.cost(lay.t_var(0, 0)) = 1.0;
  prog.cost(lay.t_var(1, 1)) = 1.0;
  if (rho > 0.0) {
    // gap_weight compensates the unit mismatch between the precoder-space
    // factorization residual and the two reflected-signal terms (the z
    // mismatch and the covariance gap); without it one rho schedule cannot
    // make all three bind when the cascaded channel is weak.
    const double rho_u = rho * gap_weight;
    prog.cost(lay.pen_w) = 0.5 * rho;
    prog.cost(lay.pen_z) = 0.5 * rho_u;
    // Linearized covariance-gap penalty (rho_u/2)(tr u - 2 Re tr(z0 z^H));
    // the constant (rho_u/2)||z0||^2 is dropped here and restored by the
    // merit evaluation. Written as a hard cap the row would pin z to z0 (the
    // LMI forces tr u >= ||z||^2 >= the linearized bound), so the cap lives
    // in the objective and tightens as the outer loop grows rho.
    const double z2 = zeta * zeta;
    const Eigen::MatrixXcd z0 = prev.z / zeta;
    for (int i = 0; i < m; ++i) prog.cost(lay.u_diag(i)) = 0.5 * rho_u * z2;
    for (int j = 0; j < n_s; ++j)
      for (int i = 0; i < m; ++i) {
        prog.cost(lay.z_re(i, j)) = -rho_u * z2 * z0(i, j).real();
        prog.cost(lay.z_im(i, j)) = -rho_u * z2 * z0(i, j).imag();
      }
  }

  // The surrogate value at the linearization point sets the objective's
  // natural scale; dividing it out keeps the solver's absolute gap
  // tolerances meaningful when bound values sit far from unity (physical
  // noise levels push tr(omega^{-1}) down to 1e-6 and below).
  const double surr0 =
      (prev.omega(0, 0) + prev.omega(1, 1)) /
      std::max(prev.omega(0, 0) * prev.omega(1, 1) -
                   prev.omega(0, 1) * prev.omega(1, 0),
               1e-300);
  prog.cost /= std::clamp(surr0, 1e-150, 1e150);

  const int i_epi = prog.add_block(ConeTag::psd, 4);
  const int i_floor = prog.add_block(ConeTag::psd, 2);
  const int i_fim = prog.add_block(ConeTag::psd, 4);
  const int i_pow = prog.add_block(ConeTag::soc, 1 + 2 * n_t * n_s);
  const int i_cov = prog.add_block(ConeTag::psd, 2 * (m + n_s));
  std::vector<int> i_rate(cfg.k_users), i_imag(cfg.k_users);
  for (int k = 0; k < cfg.k_users; ++k) {
    i_rate[k] = prog.add_block(ConeTag::soc, 2 * n_s);
    i_imag[k] = prog.add_block(ConeTag::zero, 1);
  }
  int i_pw = -1, i_pz = -1, i_pin = -1;
  if (rho > 0.0) {
    i_pw = prog.add_block(ConeTag::rsoc, 2 + 2 * n_t * n_s);
    i_pz = prog.add_block(ConeTag::rsoc, 2 + 2 * m * n_s);
  } else {
    // Without the penalty tie f_bb appears nowhere; pin it so the program
    // stays nondegenerate.
    i_pin = prog.add_block(ConeTag::zero, 2 * n_rf * n_s);
  }

  {  // epigraph [[omega, I], [I, t]] >= 0, objective tr(t)
    auto& blk = prog.block(i_epi);
    for (int j = 0; j < 2; ++j)
      for (int i = j; i < 2; ++i) {
        blk.add_psd_coeff(i, j, lay.omega_var(i, j), -1.0);
        blk.add_psd_coeff(i + 2, j + 2, lay.t_var(i, j), -1.0);
      }
    blk.add_psd_offset(2, 0, 1.0);
    blk.add_psd_offset(3, 1, 1.0);
  }

  {  // omega >= floor * I
    auto& blk = prog.block(i_floor);
    for (int j = 0; j < 2; ++j)
      for (int i = j; i < 2; ++i) blk.add_psd_coeff(i, j, lay.omega_var(i, j), -1.0);
    blk.add_psd_offset(0, 0, -omega_floor());
    blk.add_psd_offset(1, 1, -omega_floor());
  }

  {  // information LMI: [[J_pp(u) - omega, J_pa(u)], [J_pa(u)^T, J_aa(u)]] >= 0
    // with the alpha rows scaled by s = |alpha| to balance the blocks (a
    // symmetric congruence, so the feasible set is unchanged).
    auto& blk = prog.block(i_fim);
    const FimUCoefficients co = fim_u_coefficients(cfg);
    const double s = std::abs(co.alpha) > 0.0 ? std::abs(co.alpha) : 1.0;
    const double z2 = zeta * zeta;
    const Cplx ac = std::conj(co.alpha);
    const Cplx jrot(0.0, 1.0);

    add_u_functional(blk, lay, 0, 0, co.c_ee, co.k_pp * z2);
    add_u_functional(blk, lay, 1, 0, co.c_ep, co.k_pp * z2);
    add_u_functional(blk, lay, 1, 1, co.c_pp, co.k_pp * z2);
    blk.add_psd_coeff(0, 0, lay.omega_var(0, 0), 1.0);
    blk.add_psd_coeff(1, 0, lay.omega_var(1, 0), 1.0);
    blk.add_psd_coeff(1, 1, lay.omega_var(1, 1), 1.0);

    add_u_functional(blk, lay, 2, 0, ac * co.c_ae, s * co.k_pa * z2);
    add_u_functional(blk, lay, 2, 1, ac * co.c_ap, s * co.k_pa * z2);
    add_u_functional(blk, lay, 3, 0, jrot * ac * co.c_ae, s * co.k_pa * z2);
    add_u_functional(blk, lay, 3, 1, jrot * ac * co.c_ap, s * co.k_pa * z2);
    add_u_functional(blk, lay, 2, 2, co.c_aa, s * s * co.k_pa * z2);
    add_u_functional(blk, lay, 3, 3, co.c_aa, s * s * co.k_pa * z2);
  }

  {  // ||vec(w)|| <= sqrt(p0)
    auto& blk = prog.block(i_pow);
    blk.add_offset(0, std::sqrt(cfg.p0));
    for (int j = 0; j < n_s; ++j)
      for (int i = 0; i < n_t; ++i) {
        const int row = 1 + 2 * (j * n_t + i);
        blk.add_coeff(row, lay.w_re(i, j), -1.0);
        blk.add_coeff(row + 1, lay.w_im(i, j), -1.0);
      }
  }

  {  // [[u, z], [z^H, I]] >= 0 (complex, lifted); clean in z_scale units
    auto& blk = prog.block(i_cov);
    const int d = m + n_s;
    for (int i = 0; i < m; ++i)
      add_hermitian_coeff(blk, d, i, i, Cplx(-1.0, 0.0), lay.u_diag(i));
    for (int j = 0; j < m; ++j)
      for (int i = j + 1; i < m; ++i) {
        add_hermitian_coeff(blk, d, i, j, Cplx(-1.0, 0.0), lay.u_re(i, j));
        add_hermitian_coeff(blk, d, i, j, Cplx(0.0, -1.0), lay.u_im(i, j));
      }
    for (int j = 0; j < n_s; ++j) {
      for (int i = 0; i < m; ++i) {
        add_hermitian_coeff(blk, d, i, m + j, Cplx(-1.0, 0.0), lay.z_re(i, j));
        add_hermitian_coeff(blk, d, i, m + j, Cplx(0.0, -1.0), lay.z_im(i, j));
      }
      add_hermitian_offset(blk, d, m + j, m + j, 1.0);
    }
  }

  const double beta = rate_threshold(cfg);
  const double sigma0 = std::sqrt(cfg.sigma0_sq);
  for (int k = 0; k < cfg.k_users; ++k) {
    // Re{g_k^H z_k} >= beta * ||[g_k^H z_j (j != k), sigma0]||
    auto& blk = prog.block(i_rate[k]);
    const Eigen::VectorXcd& g = channels.g[k];
    for (int i = 0; i < m; ++i) {
      blk.add_coeff(0, lay.z_re(i, k), -g(i).real());
      blk.add_coeff(0, lay.z_im(i, k), -g(i).imag());
    }
    int row = 1;
    for (int j = 0; j < n_s; ++j) {
      if (j == k) continue;
      for (int i = 0; i < m; ++i) {
        blk.add_coeff(row, lay.z_re(i, j), -beta * g(i).real());
        blk.add_coeff(row, lay.z_im(i, j), -beta * g(i).imag());
        blk.add_coeff(row + 1, lay.z_re(i, j), beta * g(i).imag());
        blk.add_coeff(row + 1, lay.z_im(i, j), -beta * g(i).real());
      }
      row += 2;
    }
    blk.add_offset(row, beta * sigma0 / zeta);

    auto& pin = prog.block(i_imag[k]);
    for (int i = 0; i < m; ++i) {
      pin.add_coeff(0, lay.z_re(i, k), g(i).imag());
      pin.add_coeff(0, lay.z_im(i, k), -g(i).real());
    }
  }

  if (rho > 0.0) {
    {  // pen_w >= ||w - f_rf f_bb||_F^2
      auto& blk = prog.block(i_pw);
      blk.add_coeff(0, lay.pen_w, -1.0);
      blk.add_offset(1, 0.5);
      for (int j = 0; j < n_s; ++j)
        for (int i = 0; i < n_t; ++i) {
          const int row = 2 + 2 * (j * n_t + i);
          blk.add_coeff(row, lay.w_re(i, j), -1.0);
          blk.add_coeff(row + 1, lay.w_im(i, j), -1.0);
          for (int r = 0; r < n_rf; ++r) {
            const Cplx f = f_rf(i, r);
            blk.add_coeff(row, lay.fbb_re(r, j), f.real());
            blk.add_coeff(row, lay.fbb_im(r, j), -f.imag());
            blk.add_coeff(row + 1, lay.fbb_im(r, j), f.real());
            blk.add_coeff(row + 1, lay.fbb_re(r, j), f.imag());
          }
        }
    }
    {  // pen_z >= ||z - theta h w||_F^2, written in original units
      auto& blk = prog.block(i_pz);
      const Eigen::MatrixXcd bmap = reflection_map(channels, theta);
      blk.add_coeff(0, lay.pen_z, -1.0);
      blk.add_offset(1, 0.5);
      for (int j = 0; j < n_s; ++j)
        for (int i = 0; i < m; ++i) {
          const int row = 2 + 2 * (j * m + i);
          blk.add_coeff(row, lay.z_re(i, j), -zeta);
          blk.add_coeff(row + 1, lay.z_im(i, j), -zeta);
          for (int t = 0; t < n_t; ++t) {
            const Cplx b = bmap(i, t);
            blk.add_coeff(row, lay.w_re(t, j), b.real());
            blk.add_coeff(row, lay.w_im(t, j), -b.imag());
            blk.add_coeff(row + 1, lay.w_im(t, j), b.real());
            blk.add_coeff(row + 1, lay.w_re(t, j), b.imag());
          }
        }
    }
  } else {
    auto& blk = prog.block(i_pin);
    for (int j = 0; j < n_s; ++j)
      for (int i = 0; i < n_rf; ++i) {
        const int row = 2 * (j * n_rf + i);
        blk.add_coeff(row, lay.fbb_re(i, j), -1.0);
        blk.add_offset(row, -prev.f_bb(i, j).real());
        blk.add_coeff(row + 1, lay.fbb_im(i, j), -1.0);
        blk.add_offset(row + 1, -prev.f_bb(i, j).imag());
      }
  }

  prog.validate();
  return prog;
}

DigitalBlockIterate extract_iterate(const SubproblemLayout& lay, const Eigen::VectorXd& x) {
  if (x.size() != lay.num_vars)
    throw InvalidInput("extract_iterate: solution size does not match layout");

  DigitalBlockIterate it;
  it.w.resize(lay.n_t, lay.n_s);
  for (int j = 0; j < lay.n_s; ++j)
    for (int i = 0; i < lay.n_t; ++i)
      it.w(i, j) = Cplx(x(lay.w_re(i, j)), x(lay.w_im(i, j)));

  it.f_bb.resize(lay.n_rf, lay.n_s);
  for (int j = 0; j < lay.n_s; ++j)
    for (int i = 0; i < lay.n_rf; ++i)
      it.f_bb(i, j) = Cplx(x(lay.fbb_re(i, j)), x(lay.fbb_im(i, j)));

  it.omega(0, 0) = x(lay.omega_var(0, 0));
  it.omega(1, 0) = it.omega(0, 1) = x(lay.omega_var(1, 0));
  it.omega(1, 1) = x(lay.omega_var(1, 1));

  const double zeta = lay.z_scale;
  it.z.resize(lay.m, lay.n_s);
  for (int j = 0; j < lay.n_s; ++j)
    for (int i = 0; i < lay.m; ++i)
      it.z(i, j) = zeta * Cplx(x(lay.z_re(i, j)), x(lay.z_im(i, j)));

  it.u.resize(lay.m, lay.m);
  for (int i = 0; i < lay.m; ++i) it.u(i, i) = zeta * zeta * x(lay.u_diag(i));
  for (int j = 0; j < lay.m; ++j)
    for (int i = j + 1; i < lay.m; ++i) {
      const Cplx v = zeta * zeta * Cplx(x(lay.u_re(i, j)), x(lay.u_im(i, j)));
      it.u(i, j) = v;
      it.u(j, i) = std::conj(v);
    }
  return it;
}

double penalized_objective(const ChannelSet& channels, const Eigen::MatrixXcd& f_rf,
                           const Eigen::VectorXcd& theta,
                           const DigitalBlockIterate& it, double rho,
                           double gap_weight) {
  const double det = it.omega(0, 0) * it.omega(1, 1) - it.omega(0, 1) * it.omega(1, 0);
  const double tr = it.omega(0, 0) + it.omega(1, 1);
  if (!(det > 0.0) || !(tr > 0.0)) return kInf;
  double obj = tr / det;
  if (rho > 0.0) {
    obj += 0.5 * rho * (it.w - f_rf * it.f_bb).squaredNorm();
    obj += 0.5 * rho * (it.z - reflection_map(channels, theta) * it.w).squaredNorm();
    obj += 0.5 * rho * gap_weight * (it.u.real().trace() - it.z.squaredNorm());
  }
  return obj;
}

void align_user_phases(DigitalBlockIterate& it, const ChannelSet& channels) {
  const int users = std::min<int>(static_cast<int>(channels.g.size()),
                                  static_cast<int>(it.z.cols()));
  for (int k = 0; k < users; ++k) {
    const Cplx q = channels.g[k].dot(it.z.col(k));
    const double mag = std::abs(q);
    if (mag <= 0.0) continue;
    const Cplx ph = std::conj(q) / mag;
    it.z.col(k) *= ph;
    it.w.col(k) *= ph;
    if (k < it.f_bb.cols()) it.f_bb.col(k) *= ph;
  }
}

DigitalBlockIterate optimize_digital_block(const SystemConfig& cfg,
                                           const ChannelSet& channels,
                                           const Eigen::MatrixXcd& f_rf,
                                           const Eigen::VectorXcd& theta,
                                           const DigitalBlockIterate& init, double rho,
                                           double gap_weight, SubproblemTrace* trace) {
  constexpr int kMaxSteps = 30;
  // Relative merit stall. The linearized gap term acts as a proximal step on
  // z, so near a solution the merit creeps down at a few 1e-4 per solve
  // instead of contracting geometrically; the threshold sits above that
  // band to cut the tail.
  constexpr double kRelTol = 1e-3;

  DigitalBlockIterate cur = init;
  align_user_phases(cur, channels);
  cur.objective_value =
      penalized_objective(channels, f_rf, theta, cur, rho, gap_weight);
  if (trace) {
    trace->objectives.assign(1, cur.objective_value);
    trace->solves = 0;
  }

  for (int step = 0; step < kMaxSteps; ++step) {
    const ConicProgram prog =
        assemble_subproblem(cfg, channels, f_rf, theta, cur, rho, gap_weight);
    SubproblemLayout lay = subproblem_layout(cfg, rho);
    lay.z_scale = reflected_scale(cur);

    const SolveResult res = solve_conic(prog);
    if (trace) ++trace->solves;
    if (!res.ok()) {
      const FamilyMargin worst = weakest_family(cfg, channels, cur);
      throw SolverFailure(std::string("beamforming step solve failed (") +
                          to_string(res.status) + ": " + res.message +
                          "); tightest family at the linearization point: " +
                          worst.family + " (margin " + format_margin(worst.margin) +
                          ")");
    }

    DigitalBlockIterate next = extract_iterate(lay, res.x);
    align_user_phases(next, channels);
    next.objective_value =
        penalized_objective(channels, f_rf, theta, next, rho, gap_weight);

    const double prev_obj = cur.objective_value;
    // Reject non-improving steps (solver noise near a fixed point) so the
    // accepted sequence is honestly nonincreasing. Both guards are relative:
    // the merit's absolute scale tracks the bound value, which physical
    // scenarios push many orders below unity.
    if (next.objective_value > prev_obj + 1e-12 * std::abs(prev_obj)) break;
    cur = next;
    if (trace) trace->objectives.push_back(cur.objective_value);
    if (std::abs(prev_obj - cur.objective_value) <= kRelTol * std::abs(prev_obj))
      break;
  }
  return cur;
}

Eigen::MatrixXcd restore_rate_feasible_w(const SystemConfig& cfg,
                                         const ChannelSet& channels,
                                         const Eigen::VectorXcd& theta) {
  const int n_t = cfg.n_t(), n_s = cfg.n_s, users = cfg.k_users;
  if (channels.h.rows() != cfg.m_reflect() || channels.h.cols() != n_t)
    throw InvalidInput("restore: channel h must be m_reflect x n_t");
  if (theta.size() != cfg.m_reflect())
    throw InvalidInput("restore: theta must have m_reflect entries");

  if (users == 0) {
    Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(n_t, n_s);
    for (int j = 0; j < n_s; ++j) w(j % n_t, j) += std::sqrt(cfg.p0 / n_s);
    return w;
  }
  if (static_cast<int>(channels.g.size()) < users)
    throw InvalidInput("restore: one user channel per user required");

  const Eigen::MatrixXcd bmap = reflection_map(channels, theta);
  const double beta = rate_threshold(cfg);
  const double sigma0 = std::sqrt(cfg.sigma0_sq);

  // Variable 0 is the normalized margin; the precoder follows in (Re, Im)
  // pairs. Margins are measured in per-user units beta*sigma0 + ||e_k|| *
  // sqrt(p0) so users with different channel strengths are comparable.
  const auto w_re = [&](int i, int j) { return 1 + 2 * (j * n_t + i); };

  ConicProgram prog;
  prog.num_vars = 1 + 2 * n_t * n_s;
  prog.cost = Eigen::VectorXd::Zero(prog.num_vars);
  prog.cost(0) = -1.0;

  const int i_pow = prog.add_block(ConeTag::soc, 1 + 2 * n_t * n_s);
  std::vector<int> i_rate(users);
  for (int k = 0; k < users; ++k) i_rate[k] = prog.add_block(ConeTag::soc, 2 * n_s);

  {
    auto& blk = prog.block(i_pow);
    blk.add_offset(0, std::sqrt(cfg.p0));
    for (int v = 1; v < prog.num_vars; ++v) blk.add_coeff(v, v, -1.0);
  }

  for (int k = 0; k < users; ++k) {
    auto& blk = prog.block(i_rate[k]);
    const Eigen::RowVectorXcd e = channels.g[k].adjoint() * bmap;
    const double unit =
        std::max(beta * sigma0 + e.norm() * std::sqrt(cfg.p0), 1e-150);

    blk.add_coeff(0, 0, unit);  // slack row 0 = Re q_k - unit * margin
    for (int i = 0; i < n_t; ++i) {
      blk.add_coeff(0, w_re(i, k), -e(i).real());
      blk.add_coeff(0, w_re(i, k) + 1, e(i).imag());
    }
    int row = 1;
    for (int j = 0; j < n_s; ++j) {
      if (j == k) continue;
      for (int i = 0; i < n_t; ++i) {
        blk.add_coeff(row, w_re(i, j), -beta * e(i).real());
        blk.add_coeff(row, w_re(i, j) + 1, beta * e(i).imag());
        blk.add_coeff(row + 1, w_re(i, j), -beta * e(i).imag());
        blk.add_coeff(row + 1, w_re(i, j) + 1, -beta * e(i).real());
      }
      row += 2;
    }
    blk.add_offset(row, beta * sigma0);
  }

  prog.validate();
  const SolveResult res = solve_conic(prog);
  if (!res.ok())
    throw SolverFailure(std::string("rate restoration solve failed (") +
                        to_string(res.status) + "): " + res.message);

  const double margin = res.x(0);
  if (!(margin > kFamilyTol))
    throw InfeasibleScenario(
        "rate threshold " + std::to_string(cfg.r_th) +
        " is unreachable for this channel draw (best normalized margin " +
        format_margin(margin) + ")");

  Eigen::MatrixXcd w(n_t, n_s);
  for (int j = 0; j < n_s; ++j)
    for (int i = 0; i < n_t; ++i)
      w(i, j) = Cplx(res.x(w_re(i, j)), res.x(w_re(i, j) + 1));
  return w;
}

DigitalBlockIterate make_initial_iterate(const SystemConfig& cfg,
                                         const ChannelSet& channels,
                                         const Eigen::MatrixXcd& f_rf,
                                         const Eigen::VectorXcd& theta,
                                         const Eigen::MatrixXcd& w) {
  if (w.rows() != cfg.n_t() || w.cols() != cfg.n_s)
    throw InvalidInput("initial iterate: w must be n_t x n_s");

  DigitalBlockIterate it;
  it.w = w;
  it.f_bb = f_rf.colPivHouseholderQr().solve(w);
  it.z = reflection_map(channels, theta) * w;
  it.u = it.z * it.z.adjoint();

  const FimBlocks fb = fim_from_u(cfg, it.u);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> aa(fb.j_aa);
  Eigen::Matrix2d schur = Eigen::Matrix2d::Zero();
  if (aa.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, aa.eigenvalues().maxCoeff()))
    schur = fb.j_pp - fb.j_pa * fb.j_aa.inverse() * fb.j_pa.transpose();
  schur = 0.5 * (schur + schur.transpose()).eval();

  // Start omega strictly inside the information LMI (shrunk Schur
  // complement), clamped to the floor.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(schur);
  Eigen::Vector2d lam = es.eigenvalues();
  for (int i = 0; i < 2; ++i) lam(i) = std::max(0.9 * lam(i), omega_floor());
  it.omega = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  it.objective_value = 0.0;
  return it;
}

}  // namespace risisac::conic
