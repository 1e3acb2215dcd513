#pragma once

#include <Eigen/LU>

#include "equisteer/intertwiner.hpp"

namespace equisteer {

struct DecompositionResult {
  Matrix basis;                  // A, with A^-1 rho(g) A block diagonal
  std::vector<Irrep> sequence;   // irreps along the diagonal, in order
  double residual = 0;           // max_g |A^-1 rho(g) A - blockdiag(g)|
};

// block_diag(phi_{i1}(g), phi_{i2}(g), ...)
inline Matrix block_matrix(const std::vector<Irrep>& sequence, Dihedral g) {
  int total = 0;
  for (const Irrep i : sequence) total += irrep_dim(i);
  Matrix m = Matrix::Zero(total, total);
  int off = 0;
  for (const Irrep i : sequence) {
    const int d = irrep_dim(i);
    m.block(off, off, d, d) = irrep(i)(g);
    off += d;
  }
  return m;
}

inline constexpr double kBlockDiagonalTolerance = 1e-8;
inline constexpr double kMaxConditionNumber = 1e8;

// Columns of A are the equivariant embeddings of each irrep copy, taken from an
// orthonormal basis of Hom(phi_i, rho); irreps appear in the order A1, A2, B1, B2, E.
inline DecompositionResult block_diagonalize(const Representation& rho) {
  DecompositionResult out;
  const int d = rho.dim();
  if (d == 0) return out;
  out.basis = Matrix(d, d);
  int col = 0;
  for (const Irrep i : kIrreps) {
    const Representation phi = irrep(i);
    const IntertwinerBasis homs = hom_basis(phi, rho);
    const double scale = std::sqrt(static_cast<double>(phi.dim()));
    for (int k = 0; k < homs.size(); ++k) {
      if (col + phi.dim() > d) throw NumericalFailure("block_diagonalize: more irrep copies than dimensions");
      out.basis.middleCols(col, phi.dim()) = scale * homs.element(k);
      out.sequence.push_back(i);
      col += phi.dim();
    }
  }
  if (col != d) throw NumericalFailure("block_diagonalize: irrep copies do not fill the space");

  const Eigen::JacobiSVD<Matrix> svd(out.basis);
  const double cond = svd.singularValues()(0) / svd.singularValues()(d - 1);
  if (!(cond <= kMaxConditionNumber)) throw NumericalFailure("block_diagonalize: basis is ill-conditioned (cond " + std::to_string(cond) + ")");

  const Eigen::PartialPivLU<Matrix> lu(out.basis);
  for (const Dihedral g : d4_elements()) {
    const Matrix blocks = lu.solve(rho(g) * out.basis);
    out.residual = std::max(out.residual, (blocks - block_matrix(out.sequence, g)).cwiseAbs().maxCoeff());
  }
  if (out.residual > kBlockDiagonalTolerance)
    throw NumericalFailure("block_diagonalize: residual " + std::to_string(out.residual) + " exceeds tolerance");
  return out;
}

}  // namespace equisteer
