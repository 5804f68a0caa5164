#include "risisac/conic/program.hpp"

#include <cmath>
#include <ostream>

#include "risisac/errors.hpp"

namespace risisac::conic {

namespace {
const double kSqrt2 = std::sqrt(2.0);
}

int svec_size(int d) { return d * (d + 1) / 2; }

int svec_index(int d, int i, int j) {
  if (j > i) std::swap(i, j);
  return j * d - j * (j - 1) / 2 + (i - j);
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v, int d) {
  Eigen::MatrixXd m(d, d);
  int idx = 0;
  for (int c = 0; c < d; ++c) {
    m(c, c) = v(idx++);
    for (int r = c + 1; r < d; ++r) {
      const double x = v(idx++) / kSqrt2;
      m(r, c) = x;
      m(c, r) = x;
    }
  }
  return m;
}

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_size(d));
  int idx = 0;
  for (int c = 0; c < d; ++c) {
    v(idx++) = m(c, c);
    for (int r = c + 1; r < d; ++r) v(idx++) = kSqrt2 * 0.5 * (m(r, c) + m(c, r));
  }
  return v;
}

void ConstraintBlock::add_coeff(int row, int var, double value) {
  if (value != 0.0) coeffs.emplace_back(row, var, value);
}

void ConstraintBlock::add_offset(int row, double value) {
  if (value != 0.0) offsets.emplace_back(row, value);
}

void ConstraintBlock::add_psd_coeff(int i, int j, int var, double value) {
  if (value == 0.0) return;
  const double scaled = (i == j) ? value : kSqrt2 * value;
  coeffs.emplace_back(svec_index(dim, i, j), var, scaled);
}

void ConstraintBlock::add_psd_offset(int i, int j, double value) {
  if (value == 0.0) return;
  const double scaled = (i == j) ? value : kSqrt2 * value;
  offsets.emplace_back(svec_index(dim, i, j), scaled);
}

void add_hermitian_coeff(ConstraintBlock& block, int d, int i, int j,
                         std::complex<double> value, int var) {
  if (i == j) {
    block.add_psd_coeff(i, i, var, value.real());
    block.add_psd_coeff(i + d, i + d, var, value.real());
    return;
  }
  block.add_psd_coeff(i, j, var, value.real());
  block.add_psd_coeff(i + d, j + d, var, value.real());
  block.add_psd_coeff(j + d, i, var, -value.imag());
  block.add_psd_coeff(i + d, j, var, value.imag());
}

void add_hermitian_offset(ConstraintBlock& block, int d, int i, int j,
                          std::complex<double> value) {
  if (i == j) {
    block.add_psd_offset(i, i, value.real());
    block.add_psd_offset(i + d, i + d, value.real());
    return;
  }
  block.add_psd_offset(i, j, value.real());
  block.add_psd_offset(i + d, j + d, value.real());
  block.add_psd_offset(j + d, i, -value.imag());
  block.add_psd_offset(i + d, j, value.imag());
}

int ConicProgram::add_block(ConeTag tag, int dim) {
  ConstraintBlock b;
  b.tag = tag;
  b.dim = dim;
  blocks.push_back(std::move(b));
  return static_cast<int>(blocks.size()) - 1;
}

int ConicProgram::total_rows() const {
  int rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  return rows;
}

void ConicProgram::validate() const {
  if (cost.size() != num_vars)
    throw StructuralError("conic program: cost size does not match num_vars");
  for (const auto& b : blocks) {
    if (b.dim < 1) throw StructuralError("conic program: empty cone block");
    if (b.tag == ConeTag::rsoc && b.dim < 2)
      throw StructuralError("conic program: rotated cone needs dim >= 2");
    const int rows = b.rows();
    for (const auto& t : b.coeffs) {
      if (t.row() < 0 || t.row() >= rows)
        throw StructuralError("conic program: coefficient row out of range");
      if (t.col() < 0 || t.col() >= num_vars)
        throw StructuralError("conic program: coefficient variable out of range");
    }
    for (const auto& o : b.offsets)
      if (o.first < 0 || o.first >= rows)
        throw StructuralError("conic program: offset row out of range");
  }
}

void ConicProgram::write_text(std::ostream& out) const {
  out.precision(17);
  out << "risisac-conic 1\n";
  out << "vars " << num_vars << "\n";
  int cost_nnz = 0;
  for (int i = 0; i < cost.size(); ++i)
    if (cost(i) != 0.0) ++cost_nnz;
  out << "minimize " << cost_nnz << "\n";
  for (int i = 0; i < cost.size(); ++i)
    if (cost(i) != 0.0) out << i << " " << cost(i) << "\n";
  for (const auto& b : blocks) {
    const char* tag = "zero";
    switch (b.tag) {
      case ConeTag::zero: tag = "zero"; break;
      case ConeTag::nonneg: tag = "nonneg"; break;
      case ConeTag::soc: tag = "soc"; break;
      case ConeTag::rsoc: tag = "rsoc"; break;
      case ConeTag::psd: tag = "psd"; break;
    }
    out << "block " << tag << " " << b.dim << "\n";
    out << "triplets " << b.coeffs.size() << "\n";
    for (const auto& t : b.coeffs)
      out << t.row() << " " << t.col() << " " << t.value() << "\n";
    out << "offsets " << b.offsets.size() << "\n";
    for (const auto& o : b.offsets) out << o.first << " " << o.second << "\n";
  }
  out << "end\n";
}

}  // namespace risisac::conic
