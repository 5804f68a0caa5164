#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <iosfwd>
#include <vector>

namespace risisac::conic {

enum class ConeTag { zero, nonneg, soc, rsoc, psd };

/// One cone block of a conic program, stored as sparse triplets over the
/// real decision vector plus a constant offset. Semantics: the block slack
///   s = offset - C * x
/// must lie in the tagged cone.
///
/// Row coordinates:
///  - zero/nonneg/soc/rsoc: plain vector rows, `dim` of them. For soc the
///    first row is the cone head (s0 >= ||s1||); for rsoc the first two rows
///    are the pair (u, v) with 2uv >= ||w||^2, u,v >= 0.
///  - psd: `dim` is the matrix order d and rows index the lower triangle of
///    a real symmetric d x d matrix in svec order (column-major lower
///    triangle, off-diagonal entries scaled by sqrt(2), so the Euclidean
///    inner product of two svecs equals the trace inner product).
///
/// Entries are added in matrix coordinates through add_psd_coeff /
/// add_psd_offset, which handle the svec packing.
struct ConstraintBlock {
  ConeTag tag = ConeTag::zero;
  int dim = 0;

  std::vector<Eigen::Triplet<double>> coeffs;
  std::vector<std::pair<int, double>> offsets;

  int rows() const { return tag == ConeTag::psd ? dim * (dim + 1) / 2 : dim; }

  void add_coeff(int row, int var, double value);
  void add_offset(int row, double value);
  /// Coefficient of variable `var` on symmetric matrix entry (i, j); both
  /// (i, j) and (j, i) are implied. Sign convention matches add_coeff: the
  /// slack matrix is smat(offset) - sum_x x_var * smat(coeff).
  void add_psd_coeff(int i, int j, int var, double value);
  void add_psd_offset(int i, int j, double value);
};

/// min c'x subject to the constraint blocks. Decision variables are real;
/// complex model quantities are stacked as interleaved (Re, Im) pairs by the
/// assembly layer.
struct ConicProgram {
  int num_vars = 0;
  Eigen::VectorXd cost;  // size num_vars
  std::vector<ConstraintBlock> blocks;

  int add_block(ConeTag tag, int dim);
  ConstraintBlock& block(int idx) { return blocks[idx]; }

  int total_rows() const;
  /// Throws StructuralError on dimension/range violations.
  void validate() const;

  /// Writes the documented sparse text format (header, cost nonzeros, then
  /// per block: tag, dim, triplets, offsets) for cross-validation against
  /// external solvers.
  void write_text(std::ostream& out) const;
};

/// svec index of lower-triangle entry (i >= j) in an order-d matrix.
int svec_index(int d, int i, int j);
int svec_size(int d);
Eigen::MatrixXd smat(const Eigen::VectorXd& v, int d);
Eigen::VectorXd svec(const Eigen::MatrixXd& m);

/// Row span of a Hermitian complex matrix lifted to the real symmetric form
/// [[Re, -Im], [Im, Re]]: a complex order-d matrix becomes a real order-2d
/// PSD block. Helper for assembling complex LMIs; `value` is the complex
/// coefficient of matrix entry (i, j) (and conj at (j, i)).
void add_hermitian_coeff(ConstraintBlock& block, int d, int i, int j,
                         std::complex<double> value, int var);
void add_hermitian_offset(ConstraintBlock& block, int d, int i, int j,
                          std::complex<double> value);

}  // namespace risisac::conic
