#include "risisac/manifold.hpp"

#include <cmath>
#include <string>

namespace risisac {

namespace {

using Cplx = std::complex<double>;

/// Tangent-space projection at v: x - Re{x .* conj(v)} .* v.
Eigen::VectorXcd project_tangent(const Eigen::VectorXcd& x, const Eigen::VectorXcd& v) {
  const Eigen::VectorXd radial = (x.array() * v.array().conjugate()).real();
  return x - (radial.array() * v.array()).matrix();
}

}  // namespace

Eigen::VectorXcd xi_apply(const QuadraticObjective& obj, const Eigen::VectorXcd& v) {
  if (v.size() != obj.dim())
    throw InvalidInput("manifold objective: vector length does not match delta");
  switch (obj.form) {
    case QuadraticObjective::XiForm::dense:
      return obj.xi * v;
    case QuadraticObjective::XiForm::diagonal:
      return (obj.xi_diag.array() * v.array()).matrix();
    case QuadraticObjective::XiForm::kron_right: {
      const Eigen::Map<const Eigen::MatrixXcd> vm(v.data(), obj.kron_rows,
                                                  obj.xi.rows());
      const Eigen::MatrixXcd prod = vm * obj.xi;
      return Eigen::Map<const Eigen::VectorXcd>(prod.data(), prod.size());
    }
  }
  throw StructuralError("manifold objective: unknown xi form");
}

double xi_lambda_max(const QuadraticObjective& obj) {
  switch (obj.form) {
    case QuadraticObjective::XiForm::dense: {
      if (obj.xi.size() == 0) return 0.0;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
          0.5 * (obj.xi + obj.xi.adjoint()), Eigen::EigenvaluesOnly);
      return es.eigenvalues().maxCoeff();
    }
    case QuadraticObjective::XiForm::diagonal:
      return obj.xi_diag.size() == 0 ? 0.0 : obj.xi_diag.maxCoeff();
    case QuadraticObjective::XiForm::kron_right: {
      // Eigenvalues of S (x) I are those of S.
      if (obj.xi.size() == 0) return 0.0;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
          0.5 * (obj.xi + obj.xi.adjoint()), Eigen::EigenvaluesOnly);
      return es.eigenvalues().maxCoeff();
    }
  }
  throw StructuralError("manifold objective: unknown xi form");
}

double quad_value(const QuadraticObjective& obj, const Eigen::VectorXcd& v) {
  const Cplx quad = v.dot(xi_apply(obj, v));
  const Cplx lin = obj.delta.dot(v);
  return quad.real() - 2.0 * lin.real() + obj.tau;
}

QuadraticObjective build_frf_objective(const Eigen::MatrixXcd& w,
                                       const Eigen::MatrixXcd& f_bb) {
  if (w.cols() != f_bb.cols())
    throw InvalidInput("frf objective: w and f_bb must share the stream count");
  QuadraticObjective obj;
  obj.form = QuadraticObjective::XiForm::kron_right;
  obj.kron_rows = static_cast<int>(w.rows());
  obj.xi = f_bb * f_bb.adjoint();
  const Eigen::MatrixXcd wf = w * f_bb.adjoint();
  obj.delta = Eigen::Map<const Eigen::VectorXcd>(wf.data(), wf.size());
  obj.tau = w.squaredNorm();
  return obj;
}

QuadraticObjective build_theta_objective(const ChannelSet& channels,
                                         const Eigen::MatrixXcd& w,
                                         const Eigen::MatrixXcd& z) {
  if (channels.h.cols() != w.rows())
    throw InvalidInput("theta objective: h and w dimensions disagree");
  if (z.rows() != channels.h.rows() || z.cols() != w.cols())
    throw InvalidInput("theta objective: z must be m_reflect x n_s");
  const Eigen::MatrixXcd hw = channels.h * w;
  QuadraticObjective obj;
  obj.form = QuadraticObjective::XiForm::diagonal;
  obj.xi_diag = hw.rowwise().squaredNorm();
  obj.delta = (z.array() * hw.array().conjugate()).rowwise().sum();
  obj.tau = z.squaredNorm();
  return obj;
}

Eigen::VectorXcd euclidean_gradient(const QuadraticObjective& obj,
                                    const Eigen::VectorXcd& v) {
  return 2.0 * (xi_apply(obj, v) - obj.delta);
}

Eigen::VectorXcd riemannian_gradient(const QuadraticObjective& obj,
                                     const Eigen::VectorXcd& v) {
  return project_tangent(euclidean_gradient(obj, v), v);
}

Eigen::VectorXcd retract(const Eigen::VectorXcd& v_bar) {
  Eigen::VectorXcd out(v_bar.size());
  for (Eigen::Index i = 0; i < v_bar.size(); ++i) {
    const double mag = std::abs(v_bar(i));
    if (mag < 1e-14)
      throw DegenerateRetraction("circle retraction of entry " + std::to_string(i) +
                                 " with modulus " + std::to_string(mag));
    out(i) = v_bar(i) / mag;
  }
  return out;
}

Eigen::VectorXcd minimize_on_circles(const QuadraticObjective& obj,
                                     const Eigen::VectorXcd& v0,
                                     const ManifoldOptions& opts,
                                     ManifoldTrace* trace) {
  if (v0.size() != obj.dim())
    throw InvalidInput("circle descent: start point length does not match objective");
  for (Eigen::Index i = 0; i < v0.size(); ++i)
    if (std::abs(std::abs(v0(i)) - 1.0) > 1e-9)
      throw InvalidInput("circle descent: start point is off the manifold");

  Eigen::VectorXcd v = v0;
  double f = quad_value(obj, v);
  if (trace) {
    trace->values.assign(1, f);
    trace->iterations = 0;
  }

  const double alpha0 = 1.0 / (2.0 * xi_lambda_max(obj) + 1.0);
  constexpr double kSufficientDecrease = 1e-4;
  constexpr int kMaxHalvings = 60;

  Eigen::VectorXcd grad_prev, dir_prev;
  for (int it = 1; it <= opts.max_iters; ++it) {
    const Eigen::VectorXcd grad = riemannian_gradient(obj, v);
    const double grad_sq = grad.squaredNorm();
    if (trace) trace->iterations = it;
    if (grad_sq == 0.0) break;

    Eigen::VectorXcd dir = -grad;
    if (opts.polak_ribiere && dir_prev.size() == v.size()) {
      const Eigen::VectorXcd old_grad = project_tangent(grad_prev, v);
      const double beta =
          std::max(0.0, grad.dot(grad - old_grad).real() / grad_prev.squaredNorm());
      dir = -grad + beta * project_tangent(dir_prev, v);
      // Fall back to steepest descent when the conjugate direction loses
      // the descent property.
      if (grad.dot(dir).real() >= -1e-12 * grad_sq) dir = -grad;
    }
    const double slope = grad.dot(dir).real();

    double alpha = alpha0;
    bool accepted = false;
    Eigen::VectorXcd cand;
    double f_cand = f;
    for (int h = 0; h < kMaxHalvings; ++h) {
      // Tangent steps only lengthen the entries (|v_i + a d_i|^2 =
      // 1 + a^2 |d_i|^2), so this retraction cannot degenerate.
      cand = retract(v + alpha * dir);
      f_cand = quad_value(obj, cand);
      if (f_cand <= f + kSufficientDecrease * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    const double f_prev = f;
    v = cand;
    f = f_cand;
    if (trace) trace->values.push_back(f);
    grad_prev = grad;
    dir_prev = dir;
    if (std::abs(f_prev - f) < opts.eps) break;
  }
  return v;
}

}  // namespace risisac
