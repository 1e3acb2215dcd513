// Solving rho(h) Psi = Psi pi(h) for equivariant linear maps Psi : pi -> rho.
//
// Psi has shape dim(rho) x dim(pi) and is vectorized row-major, so that
// vec(A Psi B) = (A kron B^T) vec(Psi). Bases are stored column-wise as a
// (dim rho * dim pi) x n matrix, which is also the on-disk layout.

#pragma once

#include <Eigen/SVD>

#include <numeric>

#include "equisteer/representation.hpp"

namespace equisteer {

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector flatten_rows(const Matrix& m) {
  Vector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

inline Matrix unflatten_rows(const Eigen::Ref<const Vector>& v, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v(i * cols + j);
  return m;
}

// Stacked system over the generators {r, m} (or all 8 elements); its null space is Hom_H(pi, rho).
inline Matrix constraint_matrix(const Representation& pi, const Representation& rho, bool all_elements = false) {
  const Eigen::Index dp = pi.dim(), dr = rho.dim(), n = dp * dr;
  constexpr auto group = d4_elements();
  const std::vector<Dihedral> gens = all_elements ? std::vector<Dihedral>(group.begin(), group.end())
                                                  : std::vector<Dihedral>{Dihedral::rotation(), Dihedral::mirror()};
  Matrix c(static_cast<Eigen::Index>(gens.size()) * n, n);
  const Matrix ip = Matrix::Identity(dp, dp), ir = Matrix::Identity(dr, dr);
  for (std::size_t k = 0; k < gens.size(); ++k)
    c.middleRows(static_cast<Eigen::Index>(k) * n, n) = kron(rho(gens[k]), ip) - kron(ir, pi(gens[k]).transpose());
  return c;
}

// max_h |rho(h) Psi - Psi pi(h)| over all 8 elements.
inline double equivariance_residual(const Matrix& psi, const Representation& pi, const Representation& rho) {
  if (psi.size() == 0) return 0;
  double worst = 0;
  for (const Dihedral h : d4_elements()) worst = std::max(worst, (rho(h) * psi - psi * pi(h)).cwiseAbs().maxCoeff());
  return worst;
}

inline int intertwining_number(const Representation& pi, const Representation& rho) {
  if (pi.dim() == 0 || rho.dim() == 0) return 0;
  return integral_multiplicity(char_inner(character(pi), character(rho)), "intertwining number");
}

struct Rational {
  long num = 0;
  long den = 1;

  static Rational make(long n, long d) {
    const long g = std::gcd(n, d);
    return {n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
  std::string str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }
};

// Ratio of unconstrained to equivariant parameter counts.
inline Rational parameter_utilization(const Representation& pi, const Representation& rho) {
  const int n = intertwining_number(pi, rho);
  if (n == 0) throw UndefinedUtilization("Hom space is zero-dimensional; utilization is undefined");
  return Rational::make(static_cast<long>(pi.dim()) * rho.dim(), n);
}

// Group-average projection (1/8) sum_h rho(h)^-1 Psi0 pi(h).
inline Matrix project_equivariant(const Matrix& psi0, const Representation& pi, const Representation& rho) {
  if (psi0.rows() != rho.dim() || psi0.cols() != pi.dim()) throw InvalidArgument("project_equivariant: Psi0 has the wrong shape");
  Matrix acc = Matrix::Zero(psi0.rows(), psi0.cols());
  for (const Dihedral h : d4_elements()) acc += rho(h.inverse()) * psi0 * pi(h);
  return acc / kGroupOrder;
}

struct IntertwinerBasis {
  int in_dim = 0;
  int out_dim = 0;
  Matrix basis;

  int size() const { return static_cast<int>(basis.cols()); }
  Matrix element(int k) const { return unflatten_rows(basis.col(k), out_dim, in_dim); }
};

namespace detail {

// Orthonormal basis of span(v) that depends only on the subspace: pivoted
// Gram-Schmidt over the columns of the orthogonal projector V V^T, lowest index
// winning ties, then first nonzero coefficient made positive.
inline Matrix canonical_basis(const Matrix& v) {
  const Eigen::Index n = v.cols();
  Matrix residual = v * v.transpose();
  Matrix q(v.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vector norms = residual.colwise().norm();
    const double best = norms.maxCoeff();
    Eigen::Index pick = 0;
    while (norms(pick) < best * (1 - 1e-9)) ++pick;
    Vector col = residual.col(pick);
    for (Eigen::Index j = 0; j < k; ++j) col -= q.col(j).dot(col) * q.col(j);
    col.normalize();
    for (Eigen::Index i = 0; i < col.size(); ++i)
      if (std::abs(col(i)) > 1e-9) {
        if (col(i) < 0) col = -col;
        break;
      }
    q.col(k) = col;
    residual -= col * (col.transpose() * residual);
  }
  return q;
}

}  // namespace detail

inline constexpr double kNullspaceRelTol = 1e-10;

// Orthonormal (Frobenius) basis of Hom_H(pi, rho) from the null space of the
// generator constraint system. The dimension must match the character formula.
inline IntertwinerBasis hom_basis(const Representation& pi, const Representation& rho, double rel_tol = kNullspaceRelTol) {
  IntertwinerBasis out;
  out.in_dim = pi.dim();
  out.out_dim = rho.dim();
  const Eigen::Index n = static_cast<Eigen::Index>(pi.dim()) * rho.dim();
  const int expected = intertwining_number(pi, rho);
  if (n == 0) {
    out.basis = Matrix(0, 0);
    return out;
  }

  // JacobiSVD rather than BDCSVD: the latter returns inaccurate singular
  // vectors for large clusters of exactly-zero singular values.
  const Matrix c = constraint_matrix(pi, rho);
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  Eigen::Index null_dim = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) <= rel_tol * smax) ++null_dim;
  null_dim += n - sv.size();

  if (null_dim != expected)
    throw NumericalFailure("Hom(" + pi.name() + ", " + rho.name() + "): null space has dimension " + std::to_string(null_dim) +
                           " but the character formula gives " + std::to_string(expected));
  out.basis = expected ? detail::canonical_basis(svd.matrixV().rightCols(null_dim)) : Matrix(n, 0);
  return out;
}

}  // namespace equisteer
