#include "risisac/conic/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "risisac/errors.hpp"

namespace risisac::conic {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::numerical_problem: return "numerical_problem";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using SpMatRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStaticReg = 1e-10;
constexpr double kPivotEps = 1e-13;
constexpr double kPivotBump = 1e-8;

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::pair<int, int>> build_ij(int d) {
  std::vector<std::pair<int, int>> ij(svec_size(d));
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) ij[svec_index(d, i, j)] = {i, j};
  return ij;
}

// Cone structure of the lowered problem: leading nonnegative rows, then
// second-order blocks (rotated cones already rotated down), then
// semidefinite blocks in svec coordinates.
struct Layout {
  int l = 0;
  std::vector<int> soc_dim, soc_off;
  std::vector<int> psd_order, psd_off;
  std::vector<std::vector<std::pair<int, int>>> psd_ij;
  int m = 0;
  int degree = 0;
};

struct Lowered {
  int n = 0, p = 0;
  SpMat A, G, At, Gt;
  VectorXd b, h, c;
  Layout lay;
  VectorXd dcol, drow_a, drow_g;
  double cost_scale = 1.0;
};

Lowered lower_and_scale(const ConicProgram& prog, const SolverOptions& opts) {
  prog.validate();
  const int n = prog.num_vars;

  std::vector<const ConstraintBlock*> eqs, nns, socs, psds;
  for (const auto& blk : prog.blocks) {
    switch (blk.tag) {
      case ConeTag::zero: eqs.push_back(&blk); break;
      case ConeTag::nonneg: nns.push_back(&blk); break;
      case ConeTag::soc: (blk.dim == 1 ? nns : socs).push_back(&blk); break;
      case ConeTag::rsoc: socs.push_back(&blk); break;
      case ConeTag::psd: psds.push_back(&blk); break;
    }
  }

  Lowered low;
  low.n = n;
  Layout& lay = low.lay;

  std::vector<Eigen::Triplet<double>> ta, tg;
  std::vector<double> bv, hv;
  std::vector<int> group;  // uniform row-scaling group per cone row
  int ngroups = 0;

  for (const auto* blk : eqs) {
    const int base = static_cast<int>(bv.size());
    for (const auto& t : blk->coeffs) ta.emplace_back(base + t.row(), t.col(), t.value());
    bv.resize(bv.size() + static_cast<std::size_t>(blk->dim), 0.0);
    for (const auto& [row, val] : blk->offsets) bv[base + row] += val;
  }
  low.p = static_cast<int>(bv.size());

  // A rotated cone (2uv >= |w|^2) maps onto a plain second-order cone by the
  // orthogonal change of rows (u, v) -> ((u+v)/sqrt2, (u-v)/sqrt2).
  auto append_rows = [&](const ConstraintBlock& blk, bool per_row_group) {
    const int base = static_cast<int>(hv.size());
    const bool rot = blk.tag == ConeTag::rsoc;
    const double r2 = 1.0 / std::sqrt(2.0);
    hv.resize(hv.size() + static_cast<std::size_t>(blk.rows()), 0.0);
    for (const auto& t : blk.coeffs) {
      if (rot && t.row() <= 1) {
        const double v = t.value() * r2;
        tg.emplace_back(base, t.col(), v);
        tg.emplace_back(base + 1, t.col(), t.row() == 0 ? v : -v);
      } else {
        tg.emplace_back(base + t.row(), t.col(), t.value());
      }
    }
    for (const auto& [row, val] : blk.offsets) {
      if (rot && row <= 1) {
        hv[base] += val * r2;
        hv[base + 1] += (row == 0 ? val : -val) * r2;
      } else {
        hv[base + row] += val;
      }
    }
    for (int i = 0; i < blk.rows(); ++i) group.push_back(per_row_group ? ngroups++ : ngroups);
    if (!per_row_group) ++ngroups;
    return base;
  };

  for (const auto* blk : nns) append_rows(*blk, true);
  lay.l = static_cast<int>(hv.size());
  for (const auto* blk : socs) {
    lay.soc_off.push_back(append_rows(*blk, false));
    lay.soc_dim.push_back(blk->dim);
  }
  for (const auto* blk : psds) {
    lay.psd_off.push_back(append_rows(*blk, false));
    lay.psd_order.push_back(blk->dim);
    lay.psd_ij.push_back(build_ij(blk->dim));
  }
  lay.m = static_cast<int>(hv.size());
  if (lay.m == 0) throw InvalidInput("conic solve requires at least one inequality block");
  lay.degree = lay.l + static_cast<int>(lay.soc_dim.size());
  for (int d : lay.psd_order) lay.degree += d;

  // Ruiz equilibration; rows belonging to one second-order or semidefinite
  // block share a scale so membership is preserved.
  low.dcol = VectorXd::Ones(n);
  low.drow_a = VectorXd::Ones(low.p);
  low.drow_g = VectorXd::Ones(lay.m);
  if (opts.equilibrate) {
    VectorXd ra(low.p), rg(ngroups), cn(n);
    for (int round = 0; round < opts.equilibrate_rounds; ++round) {
      ra.setZero();
      rg.setZero();
      cn.setZero();
      for (const auto& t : ta) {
        const double v = std::abs(t.value()) * low.drow_a(t.row()) * low.dcol(t.col());
        ra(t.row()) = std::max(ra(t.row()), v);
        cn(t.col()) = std::max(cn(t.col()), v);
      }
      for (const auto& t : tg) {
        const double v = std::abs(t.value()) * low.drow_g(t.row()) * low.dcol(t.col());
        rg(group[t.row()]) = std::max(rg(group[t.row()]), v);
        cn(t.col()) = std::max(cn(t.col()), v);
      }
      for (int i = 0; i < low.p; ++i)
        if (ra(i) > 0) low.drow_a(i) /= std::sqrt(ra(i));
      for (int i = 0; i < lay.m; ++i)
        if (rg(group[i]) > 0) low.drow_g(i) /= std::sqrt(rg(group[i]));
      for (int j = 0; j < n; ++j)
        if (cn(j) > 0) low.dcol(j) /= std::sqrt(cn(j));
    }
  }

  std::vector<Eigen::Triplet<double>> tas, tgs;
  tas.reserve(ta.size());
  tgs.reserve(tg.size());
  for (const auto& t : ta)
    tas.emplace_back(t.row(), t.col(), t.value() * low.drow_a(t.row()) * low.dcol(t.col()));
  for (const auto& t : tg)
    tgs.emplace_back(t.row(), t.col(), t.value() * low.drow_g(t.row()) * low.dcol(t.col()));
  low.A.resize(low.p, n);
  low.A.setFromTriplets(tas.begin(), tas.end());
  low.G.resize(lay.m, n);
  low.G.setFromTriplets(tgs.begin(), tgs.end());
  low.A.makeCompressed();
  low.G.makeCompressed();
  low.At = low.A.transpose();
  low.Gt = low.G.transpose();
  low.b = Eigen::Map<const VectorXd>(bv.data(), low.p).cwiseProduct(low.drow_a);
  low.h = Eigen::Map<const VectorXd>(hv.data(), lay.m).cwiseProduct(low.drow_g);
  low.c = prog.cost.cwiseProduct(low.dcol);
  low.cost_scale = std::max(1.0, low.c.lpNorm<Eigen::Infinity>());
  low.c /= low.cost_scale;
  return low;
}

Eigen::LLT<MatrixXd> robust_llt(MatrixXd m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    const double eps = 1e-14 * (1.0 + std::abs(m.trace()));
    m.diagonal().array() += eps;
    llt.compute(m);
    if (llt.info() != Eigen::Success) throw NumericalFailure("cone block lost positive definiteness");
  }
  return llt;
}

// LDL' factorization of a symmetric quasidefinite matrix (first npos pivots
// expected positive, the rest negative). The lower triangle of m is replaced
// by the unit-lower factor; tiny pivots are bumped with the expected sign and
// the error is left to iterative refinement.
void ldl_factor(MatrixXd& m, VectorXd& d, int npos) {
  const int nn = static_cast<int>(m.rows());
  d.resize(nn);
  const int nb = 64;
  for (int k0 = 0; k0 < nn; k0 += nb) {
    const int kb = std::min(nb, nn - k0);
    for (int j = k0; j < k0 + kb; ++j) {
      const int w = j - k0;
      if (w > 0) {
        VectorXd t = d.segment(k0, w).cwiseProduct(m.row(j).segment(k0, w).transpose());
        m.col(j).segment(j, nn - j).noalias() -= m.block(j, k0, nn - j, w) * t;
      }
      // The system is quasi-definite, so the first npos pivots must come out
      // positive and the rest negative; force any that roundoff pushed across
      // zero and let refinement absorb the perturbation.
      double dj = m(j, j);
      if (j < npos) {
        if (dj < kPivotEps) dj = kPivotBump;
      } else {
        if (dj > -kPivotEps) dj = -kPivotBump;
      }
      d(j) = dj;
      if (j + 1 < nn) m.col(j).segment(j + 1, nn - j - 1) /= dj;
    }
    const int rest = nn - (k0 + kb);
    if (rest > 0) {
      // Split the D-weighted rank-kb update by pivot sign so both pieces are
      // plain symmetric rank-k updates on the lower triangle.
      const auto l21 = m.block(k0 + kb, k0, rest, kb);
      MatrixXd upos(rest, kb), uneg(rest, kb);
      int np = 0, nm = 0;
      for (int jj = 0; jj < kb; ++jj) {
        const double dj = d(k0 + jj);
        if (dj >= 0)
          upos.col(np++) = l21.col(jj) * std::sqrt(dj);
        else
          uneg.col(nm++) = l21.col(jj) * std::sqrt(-dj);
      }
      auto trail = m.block(k0 + kb, k0 + kb, rest, rest).selfadjointView<Eigen::Lower>();
      if (np > 0) trail.rankUpdate(upos.leftCols(np), -1.0);
      if (nm > 0) trail.rankUpdate(uneg.leftCols(nm), 1.0);
    }
  }
}

void ldl_solve(const MatrixXd& m, const VectorXd& d, VectorXd& x) {
  m.triangularView<Eigen::UnitLower>().solveInPlace(x);
  x.array() /= d.array();
  m.triangularView<Eigen::UnitLower>().transpose().solveInPlace(x);
}

struct Direction {
  VectorXd dx, dy, dz, ds;
  double dtau = 0.0, dkappa = 0.0;
};

class Ipm {
 public:
  Ipm(const Lowered& low, const SolverOptions& opts)
      : low_(low), opt_(opts), lay_(low.lay), n_(low.n), p_(low.p), m_(low.lay.m) {
    a_dense_ = MatrixXd(low_.A);
    build_cone_structures();
    hmat_.resize(n_, n_);
    kfac_.resize(n_ + p_, n_ + p_);
    e_cone_ = VectorXd::Zero(m_);
    e_cone_.head(lay_.l).setOnes();
    for (std::size_t k = 0; k < lay_.soc_dim.size(); ++k) e_cone_(lay_.soc_off[k]) = 1.0;
    for (std::size_t k = 0; k < lay_.psd_order.size(); ++k) {
      const int d = lay_.psd_order[k];
      for (int i = 0; i < d; ++i) e_cone_(lay_.psd_off[k] + svec_index(d, i, i)) = 1.0;
    }
  }

  SolveResult run();

 private:
  struct SocScale {
    double beta = 1.0;
    VectorXd v;
  };
  struct PsdScale {
    MatrixXd r, rti, sigma, gram;
    VectorXd sig;
  };
  struct PsdEntry {
    int r, c;
    double v;
  };
  struct PsdData {
    std::vector<int> cols;
    std::vector<std::vector<PsdEntry>> ent;       // expanded matrix entries
    std::vector<std::vector<std::pair<int, double>>> sv;  // raw svec entries
    bool dense = false;
    MatrixXd cd;
  };

  void build_cone_structures();
  void compute_scaling(const VectorXd& s, const VectorXd& z);
  void build_h();
  void factor_kkt();
  void kkt_solve(VectorXd& v) const;
  void solve3(const VectorXd& bx, const VectorXd& by, const VectorXd& bz, VectorXd& dx,
              VectorXd& dy, VectorXd& dz) const;
  void newton_direction(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, double rtau,
                        const VectorXd& rhs5, double rhs6, double eta, double tau, double kappa,
                        const VectorXd& vx, const VectorXd& vy, const VectorXd& vz,
                        Direction& dir) const;
  void check_direction(const Direction& dir, const VectorXd& rx, const VectorXd& ry,
                       const VectorXd& rz, double rtau, const VectorXd& rhs5, double rhs6,
                       double eta, double tau, double kappa) const;

  static VectorXd apply_soc_w(const SocScale& sc, const VectorXd& u);
  static VectorXd apply_soc_winv(const SocScale& sc, const VectorXd& u);
  void apply_w(VectorXd& u) const;
  void apply_wt(VectorXd& u) const;
  void apply_wtinv(VectorXd& u) const;
  void apply_wtw_inv(VectorXd& u) const;
  void apply_wtw(VectorXd& u) const;
  VectorXd circ(const VectorXd& a, const VectorXd& b) const;
  VectorXd circ_solve(const VectorXd& w) const;
  double max_step(const VectorXd& u, const VectorXd& du) const;
  double cone_shift(const VectorXd& u) const;

  const Lowered& low_;
  const SolverOptions& opt_;
  const Layout& lay_;
  int n_, p_, m_;

  MatrixXd a_dense_;
  SpMatRow g_nn_;
  std::vector<SpMat> soc_gt_, soc_gtg_;
  std::vector<std::vector<int>> soc_support_;
  std::vector<PsdData> psd_;

  VectorXd w_nn_;
  std::vector<SocScale> soc_sc_;
  std::vector<PsdScale> psd_sc_;
  VectorXd lambda_;
  // Self-checks verify the scaling and Newton algebra while the iterate is
  // well conditioned; near complementarity the roundoff floor rises past any
  // fixed tolerance, so they switch off once mu has shrunk far enough.
  bool debug_active_ = false;

  MatrixXd hmat_, kfac_;
  VectorXd kd_, kscale_;
  VectorXd e_cone_;
};

void Ipm::build_cone_structures() {
  if (lay_.l > 0) g_nn_ = SpMatRow(low_.G.topRows(lay_.l));
  const std::size_t nsoc = lay_.soc_dim.size();
  soc_gt_.resize(nsoc);
  soc_gtg_.resize(nsoc);
  soc_support_.resize(nsoc);
  for (std::size_t k = 0; k < nsoc; ++k) {
    SpMat blk = low_.G.middleRows(lay_.soc_off[k], lay_.soc_dim[k]);
    soc_gt_[k] = blk.transpose();
    soc_gtg_[k] = SpMat(soc_gt_[k] * blk);
    soc_gtg_[k].makeCompressed();
    std::vector<char> mark(n_, 0);
    for (int c = 0; c < soc_gt_[k].outerSize(); ++c)
      for (SpMat::InnerIterator it(soc_gt_[k], c); it; ++it) mark[it.row()] = 1;
    for (int i = 0; i < n_; ++i)
      if (mark[i]) soc_support_[k].push_back(i);
  }

  const std::size_t npsd = lay_.psd_order.size();
  psd_.resize(npsd);
  if (npsd == 0) return;
  std::vector<int> row_block(m_, -1), row_local(m_, 0);
  for (std::size_t k = 0; k < npsd; ++k) {
    const int off = lay_.psd_off[k], rows = svec_size(lay_.psd_order[k]);
    for (int i = 0; i < rows; ++i) {
      row_block[off + i] = static_cast<int>(k);
      row_local[off + i] = i;
    }
  }
  std::vector<std::vector<int>> colpos(npsd, std::vector<int>(n_, -1));
  const double r2 = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < n_; ++j) {
    for (SpMat::InnerIterator it(low_.G, j); it; ++it) {
      const int k = row_block[it.row()];
      if (k < 0) continue;
      auto& pd = psd_[k];
      int idx = colpos[k][j];
      if (idx < 0) {
        idx = static_cast<int>(pd.cols.size());
        colpos[k][j] = idx;
        pd.cols.push_back(j);
        pd.ent.emplace_back();
        pd.sv.emplace_back();
      }
      const auto [ri, rj] = lay_.psd_ij[k][row_local[it.row()]];
      const double v = it.value();
      pd.sv[idx].emplace_back(row_local[it.row()], v);
      if (ri == rj) {
        pd.ent[idx].push_back({ri, rj, v});
      } else {
        pd.ent[idx].push_back({ri, rj, v * r2});
        pd.ent[idx].push_back({rj, ri, v * r2});
      }
    }
  }
  // Small dense blocks with many active columns go through an explicit
  // symmetric-Kronecker product; large sparse blocks use the entry lists.
  for (std::size_t k = 0; k < npsd; ++k) {
    auto& pd = psd_[k];
    const int rows = svec_size(lay_.psd_order[k]);
    pd.dense = rows <= 64 && static_cast<int>(pd.cols.size()) >= 32;
    if (pd.dense) {
      pd.cd = MatrixXd::Zero(rows, static_cast<int>(pd.cols.size()));
      for (std::size_t c = 0; c < pd.cols.size(); ++c)
        for (const auto& [r, v] : pd.sv[c]) pd.cd(r, static_cast<int>(c)) += v;
    }
  }
}

VectorXd Ipm::apply_soc_w(const SocScale& sc, const VectorXd& u) {
  const auto d = u.size();
  const double vu = sc.v.dot(u);
  VectorXd r = 2.0 * vu * sc.v;
  r(0) -= u(0);
  r.tail(d - 1) += u.tail(d - 1);
  return sc.beta * r;
}

VectorXd Ipm::apply_soc_winv(const SocScale& sc, const VectorXd& u) {
  const auto d = u.size();
  const double jvu = sc.v(0) * u(0) - sc.v.tail(d - 1).dot(u.tail(d - 1));
  VectorXd r(d);
  r(0) = 2.0 * jvu * sc.v(0) - u(0);
  r.tail(d - 1) = u.tail(d - 1) - 2.0 * jvu * sc.v.tail(d - 1);
  return r / sc.beta;
}

void Ipm::compute_scaling(const VectorXd& s, const VectorXd& z) {
  lambda_.resize(m_);
  if (lay_.l > 0) {
    const auto sh = s.head(lay_.l).array(), zh = z.head(lay_.l).array();
    if ((sh <= 0.0).any() || (zh <= 0.0).any())
      throw NumericalFailure("nonnegative block left the cone");
    w_nn_ = (sh / zh).sqrt().matrix();
    lambda_.head(lay_.l) = (sh * zh).sqrt().matrix();
  }
  soc_sc_.clear();
  psd_sc_.clear();
  for (std::size_t k = 0; k < lay_.soc_dim.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    const VectorXd sb = s.segment(off, d), zb = z.segment(off, d);
    const double sres = sb(0) * sb(0) - sb.tail(d - 1).squaredNorm();
    const double zres = zb(0) * zb(0) - zb.tail(d - 1).squaredNorm();
    if (sb(0) <= 0 || zb(0) <= 0 || sres <= 0 || zres <= 0)
      throw NumericalFailure("second-order block left the cone");
    const double as = std::sqrt(sres), az = std::sqrt(zres);
    const VectorXd sbar = sb / as, zbar = zb / az;
    const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
    SocScale sc;
    sc.beta = std::sqrt(as / az);
    sc.v = sbar;
    sc.v(0) += zbar(0);
    sc.v.tail(d - 1) -= zbar.tail(d - 1);
    sc.v /= 2.0 * gamma;
    // Shift to the reflector form (v + e)/sqrt(2(v0 + 1)); the raw
    // Nesterov-Todd point does not satisfy W z = W^{-T} s, its reflector does.
    sc.v(0) += 1.0;
    sc.v /= std::sqrt(2.0 * sc.v(0));
    lambda_.segment(off, d) = apply_soc_w(sc, zb);
    soc_sc_.push_back(std::move(sc));
  }
  for (std::size_t k = 0; k < lay_.psd_order.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd ls = robust_llt(smat(s.segment(off, svec_size(d)), d)).matrixL();
    const MatrixXd lz = robust_llt(smat(z.segment(off, svec_size(d)), d)).matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(lz.transpose() * ls,
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
    PsdScale sc;
    sc.sig = svd.singularValues();
    if (sc.sig(d - 1) <= 0) throw NumericalFailure("semidefinite scaling is singular");
    const VectorXd isq = sc.sig.cwiseSqrt().cwiseInverse();
    sc.r = ls * svd.matrixV() * isq.asDiagonal();
    sc.rti = lz * svd.matrixU() * isq.asDiagonal();
    sc.sigma = sc.rti * sc.rti.transpose();
    sc.gram = sc.r * sc.r.transpose();
    VectorXd lam = VectorXd::Zero(svec_size(d));
    for (int i = 0; i < d; ++i) lam(svec_index(d, i, i)) = sc.sig(i);
    lambda_.segment(off, svec_size(d)) = lam;
    psd_sc_.push_back(std::move(sc));
  }
  if (debug_active_) {
    VectorXd t1 = z, t2 = s;
    apply_w(t1);
    apply_wtinv(t2);
    const double scale = 1.0 + lambda_.norm();
    const double v1 = (t1 - lambda_).norm(), v2 = (t2 - lambda_).norm();
    if (v1 > 1e-5 * scale || v2 > 1e-5 * scale)
      throw StructuralError("scaled-point identity violated: " + std::to_string(v1 / scale) +
                            " / " + std::to_string(v2 / scale));
  }
}

void Ipm::apply_w(VectorXd& u) const {
  if (lay_.l > 0) u.head(lay_.l).array() *= w_nn_.array();
  for (std::size_t k = 0; k < soc_sc_.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    u.segment(off, d) = apply_soc_w(soc_sc_[k], u.segment(off, d));
  }
  for (std::size_t k = 0; k < psd_sc_.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd um = smat(u.segment(off, svec_size(d)), d);
    u.segment(off, svec_size(d)) =
        svec(MatrixXd(psd_sc_[k].r.transpose() * um * psd_sc_[k].r));
  }
}

void Ipm::apply_wt(VectorXd& u) const {
  if (lay_.l > 0) u.head(lay_.l).array() *= w_nn_.array();
  for (std::size_t k = 0; k < soc_sc_.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    u.segment(off, d) = apply_soc_w(soc_sc_[k], u.segment(off, d));
  }
  for (std::size_t k = 0; k < psd_sc_.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd um = smat(u.segment(off, svec_size(d)), d);
    u.segment(off, svec_size(d)) =
        svec(MatrixXd(psd_sc_[k].r * um * psd_sc_[k].r.transpose()));
  }
}

void Ipm::apply_wtinv(VectorXd& u) const {
  if (lay_.l > 0) u.head(lay_.l).array() /= w_nn_.array();
  for (std::size_t k = 0; k < soc_sc_.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    u.segment(off, d) = apply_soc_winv(soc_sc_[k], u.segment(off, d));
  }
  for (std::size_t k = 0; k < psd_sc_.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd um = smat(u.segment(off, svec_size(d)), d);
    u.segment(off, svec_size(d)) =
        svec(MatrixXd(psd_sc_[k].rti.transpose() * um * psd_sc_[k].rti));
  }
}

void Ipm::apply_wtw_inv(VectorXd& u) const {
  if (lay_.l > 0) u.head(lay_.l).array() /= w_nn_.array().square();
  for (std::size_t k = 0; k < soc_sc_.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    u.segment(off, d) =
        apply_soc_winv(soc_sc_[k], apply_soc_winv(soc_sc_[k], u.segment(off, d)));
  }
  for (std::size_t k = 0; k < psd_sc_.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd um = smat(u.segment(off, svec_size(d)), d);
    u.segment(off, svec_size(d)) =
        svec(MatrixXd(psd_sc_[k].sigma * um * psd_sc_[k].sigma));
  }
}

void Ipm::apply_wtw(VectorXd& u) const {
  if (lay_.l > 0) u.head(lay_.l).array() *= w_nn_.array().square();
  for (std::size_t k = 0; k < soc_sc_.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    u.segment(off, d) = apply_soc_w(soc_sc_[k], apply_soc_w(soc_sc_[k], u.segment(off, d)));
  }
  for (std::size_t k = 0; k < psd_sc_.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd um = smat(u.segment(off, svec_size(d)), d);
    u.segment(off, svec_size(d)) = svec(MatrixXd(psd_sc_[k].gram * um * psd_sc_[k].gram));
  }
}

VectorXd Ipm::circ(const VectorXd& a, const VectorXd& b) const {
  VectorXd r(m_);
  if (lay_.l > 0) r.head(lay_.l) = a.head(lay_.l).cwiseProduct(b.head(lay_.l));
  for (std::size_t k = 0; k < lay_.soc_dim.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    r(off) = a.segment(off, d).dot(b.segment(off, d));
    r.segment(off + 1, d - 1) =
        a(off) * b.segment(off + 1, d - 1) + b(off) * a.segment(off + 1, d - 1);
  }
  for (std::size_t k = 0; k < lay_.psd_order.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd am = smat(a.segment(off, svec_size(d)), d);
    const MatrixXd bm = smat(b.segment(off, svec_size(d)), d);
    r.segment(off, svec_size(d)) = svec(MatrixXd(0.5 * (am * bm + bm * am)));
  }
  return r;
}

VectorXd Ipm::circ_solve(const VectorXd& w) const {
  VectorXd r(m_);
  if (lay_.l > 0) r.head(lay_.l) = w.head(lay_.l).cwiseQuotient(lambda_.head(lay_.l));
  for (std::size_t k = 0; k < lay_.soc_dim.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    const double l0 = lambda_(off);
    const auto l1 = lambda_.segment(off + 1, d - 1);
    const double dd = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * w(off) - l1.dot(w.segment(off + 1, d - 1))) / dd;
    r(off) = x0;
    r.segment(off + 1, d - 1) = (w.segment(off + 1, d - 1) - x0 * l1) / l0;
  }
  for (std::size_t k = 0; k < lay_.psd_order.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const VectorXd& sig = psd_sc_[k].sig;
    for (int idx = 0; idx < svec_size(d); ++idx) {
      const auto [i, j] = lay_.psd_ij[k][idx];
      r(off + idx) = 2.0 * w(off + idx) / (sig(i) + sig(j));
    }
  }
  return r;
}

double Ipm::max_step(const VectorXd& u, const VectorXd& du) const {
  double bound = kInf;
  for (int i = 0; i < lay_.l; ++i)
    if (du(i) < 0) bound = std::min(bound, -u(i) / du(i));
  for (std::size_t k = 0; k < lay_.soc_dim.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    const double u0 = u(off), d0 = du(off);
    const auto u1 = u.segment(off + 1, d - 1), d1 = du.segment(off + 1, d - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double b2 = u0 * d0 - u1.dot(d1);
    const double c = u0 * u0 - u1.squaredNorm();
    double root = kInf;
    const double disc = b2 * b2 - a * c;
    if (std::abs(a) < 1e-300) {
      if (b2 < 0) root = -c / (2.0 * b2);
    } else if (disc >= 0) {
      const double sq = std::sqrt(disc);
      const double q = -(b2 + (b2 >= 0 ? sq : -sq));
      const double t1 = q / a;
      const double t2 = q != 0.0 ? c / q : kInf;
      if (t1 > 0) root = std::min(root, t1);
      if (t2 > 0) root = std::min(root, t2);
    }
    if (d0 < 0) root = std::min(root, -u0 / d0);
    bound = std::min(bound, root);
  }
  for (std::size_t k = 0; k < lay_.psd_order.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    const MatrixXd sm = smat(u.segment(off, svec_size(d)), d);
    const MatrixXd dm = smat(du.segment(off, svec_size(d)), d);
    const MatrixXd lm = robust_llt(sm).matrixL();
    MatrixXd t = lm.triangularView<Eigen::Lower>().solve(dm);
    t = lm.triangularView<Eigen::Lower>().solve(MatrixXd(t.transpose()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(t, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    if (lmin < 0) bound = std::min(bound, -1.0 / lmin);
  }
  return std::max(bound, 0.0);
}

double Ipm::cone_shift(const VectorXd& u) const {
  double t = -kInf;
  for (int i = 0; i < lay_.l; ++i) t = std::max(t, -u(i));
  for (std::size_t k = 0; k < lay_.soc_dim.size(); ++k) {
    const int off = lay_.soc_off[k], d = lay_.soc_dim[k];
    t = std::max(t, u.segment(off + 1, d - 1).norm() - u(off));
  }
  for (std::size_t k = 0; k < lay_.psd_order.size(); ++k) {
    const int off = lay_.psd_off[k], d = lay_.psd_order[k];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(smat(u.segment(off, svec_size(d)), d),
                                               Eigen::EigenvaluesOnly);
    t = std::max(t, -es.eigenvalues()(0));
  }
  return t;
}

void Ipm::build_h() {
  hmat_.setZero();
  std::vector<int> idx;
  std::vector<double> val;
  for (int r = 0; r < lay_.l; ++r) {
    const double cw = 1.0 / (w_nn_(r) * w_nn_(r));
    idx.clear();
    val.clear();
    for (SpMatRow::InnerIterator it(g_nn_, r); it; ++it) {
      idx.push_back(static_cast<int>(it.col()));
      val.push_back(it.value());
    }
    for (std::size_t a = 0; a < idx.size(); ++a) {
      const double va = cw * val[a];
      for (std::size_t b = 0; b < idx.size(); ++b) hmat_(idx[a], idx[b]) += va * val[b];
    }
  }
  // (W'W)^{-1} of a second-order block expands to
  // (1/beta^2) (G'G + 4(v'v) uu' - 2uw' - 2wu') with u = G'Jv, w = G'v.
  for (std::size_t k = 0; k < soc_sc_.size(); ++k) {
    const auto& sc = soc_sc_[k];
    const int d = lay_.soc_dim[k];
    const double ib2 = 1.0 / (sc.beta * sc.beta);
    for (int cc = 0; cc < soc_gtg_[k].outerSize(); ++cc)
      for (SpMat::InnerIterator it(soc_gtg_[k], cc); it; ++it)
        hmat_(it.row(), it.col()) += ib2 * it.value();
    VectorXd jv = sc.v;
    jv.tail(d - 1) = -jv.tail(d - 1);
    const VectorXd uu = soc_gt_[k] * jv;
    const VectorXd ww = soc_gt_[k] * sc.v;
    const double c1 = ib2 * 4.0 * sc.v.squaredNorm();
    const double c2 = 2.0 * ib2;
    for (int ia : soc_support_[k]) {
      const double ua = uu(ia), wa = ww(ia);
      for (int ib : soc_support_[k])
        hmat_(ia, ib) += c1 * ua * uu(ib) - c2 * (ua * ww(ib) + wa * uu(ib));
    }
  }
  // Semidefinite block entries are tr(Xa sigma Xb sigma).
  for (std::size_t k = 0; k < psd_sc_.size(); ++k) {
    const auto& pd = psd_[k];
    const MatrixXd& sg = psd_sc_[k].sigma;
    const int nc = static_cast<int>(pd.cols.size());
    if (nc == 0) continue;
    if (pd.dense) {
      const int d = lay_.psd_order[k], sd = svec_size(d);
      MatrixXd k2(sd, sd);
      MatrixXd basis = MatrixXd::Zero(d, d);
      for (int r = 0; r < sd; ++r) {
        const auto [i, j] = lay_.psd_ij[k][r];
        const double v = i == j ? 1.0 : 1.0 / std::sqrt(2.0);
        basis(i, j) = v;
        basis(j, i) = v;
        k2.col(r) = svec(MatrixXd(sg * basis * sg));
        basis(i, j) = 0.0;
        basis(j, i) = 0.0;
      }
      const MatrixXd hblk = pd.cd.transpose() * (k2 * pd.cd);
      for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) hmat_(pd.cols[a], pd.cols[b]) += hblk(a, b);
    } else {
      for (int a = 0; a < nc; ++a)
        for (int b = a; b < nc; ++b) {
          double acc = 0.0;
          for (const auto& ea : pd.ent[a])
            for (const auto& eb : pd.ent[b]) acc += ea.v * eb.v * sg(ea.c, eb.r) * sg(eb.c, ea.r);
          hmat_(pd.cols[a], pd.cols[b]) += acc;
          if (a != b) hmat_(pd.cols[b], pd.cols[a]) += acc;
        }
    }
  }
}

void Ipm::factor_kkt() {
  build_h();
  if (debug_active_) {
    // Cross-check the assembled Schur block against the transform route.
    MatrixXd href(n_, n_);
    for (int j = 0; j < n_; ++j) {
      VectorXd gu = low_.G * VectorXd::Unit(n_, j);
      apply_wtw_inv(gu);
      href.col(j) = low_.Gt * gu;
    }
    const double rel = (href - hmat_).norm() / std::max(1.0, href.norm());
    if (rel > 1e-7) throw StructuralError("schur block mismatch: " + std::to_string(rel));
  }
  const int nn = n_ + p_;
  kfac_.topLeftCorner(n_, n_) = hmat_;
  if (p_ > 0) {
    kfac_.topRightCorner(n_, p_) = a_dense_.transpose();
    kfac_.bottomLeftCorner(p_, n_) = a_dense_;
    kfac_.bottomRightCorner(p_, p_).setZero();
  }
  // Bring the system to unit scale before factoring. Near complementarity
  // the cone block spans many orders of magnitude and fixed-order
  // elimination needs comparably sized pivots to stay accurate; scaling also
  // makes the regularization and pivot thresholds meaningful.
  kscale_.setOnes(nn);
  for (int round = 0; round < 3; ++round) {
    bool changed = false;
    for (int i = 0; i < nn; ++i) {
      const double mx = kfac_.row(i).cwiseAbs().maxCoeff();
      if (mx <= 0) continue;
      const double r = 1.0 / std::sqrt(mx);
      if (std::abs(r - 1.0) < 1e-4) continue;
      kfac_.row(i) *= r;
      kfac_.col(i) *= r;
      kscale_(i) *= r;
      changed = true;
    }
    if (!changed) break;
  }
  for (int i = 0; i < n_; ++i) kfac_(i, i) += kStaticReg;
  for (int i = n_; i < nn; ++i) kfac_(i, i) -= kStaticReg;
  ldl_factor(kfac_, kd_, n_);
}

// Solves with the equilibrated factorization in original coordinates.
void Ipm::kkt_solve(VectorXd& v) const {
  v.array() *= kscale_.array();
  ldl_solve(kfac_, kd_, v);
  v.array() *= kscale_.array();
}

void Ipm::solve3(const VectorXd& bx, const VectorXd& by, const VectorXd& bz, VectorXd& dx,
                 VectorXd& dy, VectorXd& dz) const {
  VectorXd t = bz;
  apply_wtw_inv(t);
  VectorXd rhs(n_ + p_);
  rhs.head(n_) = bx + low_.Gt * t;
  if (p_ > 0) rhs.tail(p_) = by;
  VectorXd sol = rhs;
  kkt_solve(sol);
  dx = sol.head(n_);
  dy = sol.tail(p_);
  dz = low_.G * dx - bz;
  apply_wtw_inv(dz);
  // Refine against the unreduced three-block system, so errors introduced by
  // the reduction and the dz recovery are corrected along with those of the
  // factorization itself.
  for (int round = 0; round < opt_.refine_steps; ++round) {
    VectorXd r1 = bx - low_.Gt * dz;
    if (p_ > 0) r1.noalias() -= a_dense_.transpose() * dy;
    VectorXd r3 = dz;
    apply_wtw(r3);
    r3 = bz - low_.G * dx + r3;
    VectorXd t3 = r3;
    apply_wtw_inv(t3);
    VectorXd res(n_ + p_);
    res.head(n_) = r1 + low_.Gt * t3;
    if (p_ > 0) res.tail(p_) = by - a_dense_ * dx;
    kkt_solve(res);
    dx += res.head(n_);
    dy += res.tail(p_);
    VectorXd ddz = low_.G * res.head(n_) - r3;
    apply_wtw_inv(ddz);
    dz += ddz;
  }
}

void Ipm::newton_direction(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz,
                           double rtau, const VectorXd& rhs5, double rhs6, double eta,
                           double tau, double kappa, const VectorXd& vx, const VectorXd& vy,
                           const VectorXd& vz, Direction& dir) const {
  const VectorXd qt = circ_solve(rhs5);
  VectorXd wq = qt;
  apply_wt(wq);
  VectorXd ux, uy, uz;
  solve3(VectorXd(-eta * rx), VectorXd(-eta * ry), VectorXd(-eta * rz - wq), ux, uy, uz);
  const double num =
      -eta * rtau - rhs6 / tau - (low_.c.dot(ux) + low_.b.dot(uy) + low_.h.dot(uz));
  const double den = low_.c.dot(vx) + low_.b.dot(vy) + low_.h.dot(vz) - kappa / tau;
  dir.dtau = num / den;
  dir.dx = ux + dir.dtau * vx;
  dir.dy = uy + dir.dtau * vy;
  dir.dz = uz + dir.dtau * vz;
  VectorXd t = dir.dz;
  apply_w(t);
  t = qt - t;
  apply_wt(t);
  dir.ds = std::move(t);
  dir.dkappa = (rhs6 - kappa * dir.dtau) / tau;
}

void Ipm::check_direction(const Direction& dir, const VectorXd& rx, const VectorXd& ry,
                          const VectorXd& rz, double rtau, const VectorXd& rhs5, double rhs6,
                          double eta, double tau, double kappa) const {
  const double scale = 1.0 + rx.norm() + rz.norm() + rhs5.norm() + dir.dx.norm() +
                       dir.dz.norm() + dir.ds.norm() + std::abs(dir.dtau) +
                       std::abs(dir.dkappa);
  const double tol = 1e-4 * scale;
  const auto fail = [&](const char* what, double norm) {
    throw StructuralError(std::string("newton residual check failed (") + what +
                          "): " + std::to_string(norm / scale));
  };
  VectorXd e1 = low_.Gt * dir.dz + low_.c * dir.dtau + eta * rx;
  if (p_ > 0) e1 += low_.At * dir.dy;
  if (e1.norm() > tol) fail("dual row", e1.norm());
  const VectorXd e2 = low_.A * dir.dx - low_.b * dir.dtau + eta * ry;
  if (e2.norm() > tol) fail("equality row", e2.norm());
  const VectorXd e3 = low_.G * dir.dx + dir.ds - low_.h * dir.dtau + eta * rz;
  if (e3.norm() > tol) fail("cone row", e3.norm());
  const double e4 = low_.c.dot(dir.dx) + low_.b.dot(dir.dy) + low_.h.dot(dir.dz) + dir.dkappa +
                    eta * rtau;
  if (std::abs(e4) > tol) fail("gap row", std::abs(e4));
  VectorXd ws = dir.ds, wz = dir.dz;
  apply_wtinv(ws);
  apply_w(wz);
  const VectorXd e5 = circ(lambda_, VectorXd(ws + wz)) - rhs5;
  if (e5.norm() > tol) fail("centering row", e5.norm());
  const double e6 = tau * dir.dkappa + kappa * dir.dtau - rhs6;
  if (std::abs(e6) > tol) fail("tau row", std::abs(e6));
}

SolveResult Ipm::run() {
  const VectorXd& b = low_.b;
  const VectorXd& h = low_.h;
  const VectorXd& c = low_.c;
  const double bn = std::max(1.0, b.norm());
  const double hn = std::max(1.0, h.norm());
  const double cn = std::max(1.0, c.norm());
  const double nu1 = lay_.degree + 1;

  VectorXd x(n_), y(p_), s(m_), z(m_);
  double tau = 1.0, kappa = 1.0;

  SolveResult res;
  double pres = kInf, dres = kInf, szgap = kInf;
  int iters = 0;

  // Snapshot of the best iterate seen, so a late-stage numerical stall can
  // still hand back the point the solver actually earned.
  VectorXd xb;
  double taub = 1.0, best_merit = kInf, bpres = kInf, bdres = kInf, bgap = kInf;

  double mu0 = 0.0;

  try {
    debug_active_ = opt_.debug_checks;
    compute_scaling(e_cone_, e_cone_);
    factor_kkt();
    VectorXd t1, t2, t3;
    solve3(VectorXd::Zero(n_), b, h, x, t1, t2);
    s = -t2;
    const double ts = cone_shift(s);
    if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e_cone_;
    solve3(VectorXd(-c), VectorXd::Zero(p_), VectorXd::Zero(m_), t3, y, z);
    const double tz = cone_shift(z);
    if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e_cone_;

    for (int it = 0;; ++it) {
      iters = it;
      VectorXd rx = low_.Gt * z + c * tau;
      if (p_ > 0) rx += low_.At * y;
      const VectorXd ry = low_.A * x - b * tau;
      const VectorXd rz = low_.G * x + s - h * tau;
      const double cx = c.dot(x), byv = b.dot(y), hz = h.dot(z);
      const double rtau = kappa + cx + byv + hz;
      const double gap = s.dot(z);
      const double mu = (gap + tau * kappa) / nu1;
      if (it == 0) mu0 = mu;
      debug_active_ = opt_.debug_checks && mu > 1e-5 * mu0;

      const double pcost = cx / tau;
      pres = std::max(ry.norm() / bn, rz.norm() / hn) / tau;
      dres = rx.norm() / cn / tau;
      szgap = gap / (tau * tau);
      const double relgap = szgap / std::max(1.0, std::abs(pcost));

      const double merit = std::max({pres, dres, std::min(szgap, relgap)});
      if (merit < best_merit) {
        best_merit = merit;
        xb = x;
        taub = tau;
        bpres = pres;
        bdres = dres;
        bgap = szgap;
      }

      if (pres <= opt_.feastol && dres <= opt_.feastol &&
          (szgap <= opt_.abstol || relgap <= opt_.reltol)) {
        res.status = SolveStatus::optimal;
        res.message = "optimal";
        break;
      }
      const double bhz = byv + hz;
      if (bhz < 0) {
        const VectorXd cert = rx - c * tau;
        if (cert.norm() / cn <= opt_.feastol * (-bhz)) {
          res.status = SolveStatus::infeasible;
          res.message = "primal infeasible";
          break;
        }
      }
      if (cx < 0) {
        const double unb = std::max((low_.A * x).norm() / bn, (low_.G * x + s).norm() / hn);
        if (unb <= opt_.feastol * (-cx)) {
          res.status = SolveStatus::unbounded;
          res.message = "objective unbounded below";
          x /= -cx;
          break;
        }
      }
      if (it >= opt_.max_iters) {
        res.status = SolveStatus::max_iterations;
        res.message = "maximum iterations reached";
        break;
      }

      compute_scaling(s, z);
      factor_kkt();
      VectorXd vx, vy, vz;
      solve3(VectorXd(-c), b, h, vx, vy, vz);

      const VectorXd lam2 = circ(lambda_, lambda_);
      Direction aff;
      newton_direction(rx, ry, rz, rtau, VectorXd(-lam2), -tau * kappa, 1.0, tau, kappa, vx,
                       vy, vz, aff);
      if (debug_active_)
        check_direction(aff, rx, ry, rz, rtau, VectorXd(-lam2), -tau * kappa, 1.0, tau, kappa);

      double amax = std::min(max_step(s, aff.ds), max_step(z, aff.dz));
      if (aff.dtau < 0) amax = std::min(amax, -tau / aff.dtau);
      if (aff.dkappa < 0) amax = std::min(amax, -kappa / aff.dkappa);
      const double a_aff = std::min(1.0, amax);
      const double mu_aff =
          ((s + a_aff * aff.ds).dot(z + a_aff * aff.dz) +
           (tau + a_aff * aff.dtau) * (kappa + a_aff * aff.dkappa)) /
          nu1;
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

      VectorXd ws = aff.ds, wz = aff.dz;
      apply_wtinv(ws);
      apply_w(wz);
      const VectorXd rhs5 = -lam2 - circ(ws, wz) + sigma * mu * e_cone_;
      const double rhs6 = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
      Direction dir;
      newton_direction(rx, ry, rz, rtau, rhs5, rhs6, 1.0 - sigma, tau, kappa, vx, vy, vz, dir);
      if (debug_active_)
        check_direction(dir, rx, ry, rz, rtau, rhs5, rhs6, 1.0 - sigma, tau, kappa);

      double smax = std::min(max_step(s, dir.ds), max_step(z, dir.dz));
      if (dir.dtau < 0) smax = std::min(smax, -tau / dir.dtau);
      if (dir.dkappa < 0) smax = std::min(smax, -kappa / dir.dkappa);
      const double alpha = std::min(1.0, opt_.step_fraction * smax);
      if (!std::isfinite(alpha) || alpha <= 1e-13) {
        res.status = SolveStatus::numerical_problem;
        res.message = "step length collapsed";
        break;
      }
      x += alpha * dir.dx;
      y += alpha * dir.dy;
      s += alpha * dir.ds;
      z += alpha * dir.dz;
      tau += alpha * dir.dtau;
      kappa += alpha * dir.dkappa;
      if (!(tau > 0) || !(kappa > 0) || !x.allFinite()) {
        res.status = SolveStatus::numerical_problem;
        res.message = "iterate left the interior";
        break;
      }
    }
  } catch (const NumericalFailure& e) {
    res.status = SolveStatus::numerical_problem;
    res.message = e.what();
  }

  if ((res.status == SolveStatus::numerical_problem ||
       res.status == SolveStatus::max_iterations) &&
      xb.size() > 0) {
    x = xb;
    tau = taub;
    pres = bpres;
    dres = bdres;
    szgap = bgap;
    const double relgap = szgap / std::max(1.0, std::abs(c.dot(x) / tau));
    if (pres <= opt_.feastol && dres <= opt_.feastol &&
        (szgap <= opt_.abstol || relgap <= opt_.reltol)) {
      res.status = SolveStatus::optimal;
      res.message = "optimal (best iterate after numerical stall)";
    }
  }

  res.iterations = iters;
  res.primal_residual = pres;
  res.dual_residual = dres;
  res.gap = low_.cost_scale * szgap;
  if (res.status == SolveStatus::unbounded) {
    res.x = low_.dcol.cwiseProduct(x);
    res.objective = -kInf;
  } else if (res.status == SolveStatus::infeasible) {
    res.x = VectorXd();
  } else {
    const VectorXd xhat = x / tau;
    res.x = low_.dcol.cwiseProduct(xhat);
    res.objective = low_.cost_scale * c.dot(xhat);
  }
  return res;
}

}  // namespace

SolveResult solve_conic(const ConicProgram& prog, const SolverOptions& opts) {
  const Lowered low = lower_and_scale(prog, opts);
  Ipm ipm(low, opts);
  return ipm.run();
}

SolveResult solve_conic(const ConicProgram& prog, double tol) {
  SolverOptions opts;
  opts.feastol = opts.abstol = opts.reltol = tol;
  return solve_conic(prog, opts);
}

}  // namespace risisac::conic
