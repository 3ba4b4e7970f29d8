#pragma once

// Dense complex linear algebra on tensor-product spaces.
//
// A composite space is described by the dimensions of its legs, most
// significant leg first (big-endian mixed radix). Every helper here works on
// that convention; the lattice and operator layers decide which leg is which.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace qca {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Product of the leg dimensions.
Index total_dim(std::span<const int> dims);

/// Offset tables splitting a composite index into the legs at `positions`
/// (taken in the given order) and the remaining legs (in ascending order).
/// full index = sub[s] + rest[r].
struct LegSplit {
  std::vector<Index> sub;
  std::vector<Index> rest;
};
LegSplit split_legs(std::span<const int> dims, std::span<const int> positions);

/// `op` acts on the legs at `positions` (in that order); identity elsewhere.
Matrix embed_legs(const Matrix& op, std::span<const int> dims,
                  std::span<const int> positions);

/// Partial trace keeping the legs at `positions`, in that order.
Matrix partial_trace(const Matrix& op, std::span<const int> dims,
                     std::span<const int> positions);

/// Reorders the legs of an operator: leg k of the result is leg perm[k] of
/// the input.
Matrix permute_legs(const Matrix& op, std::span<const int> dims,
                    std::span<const int> perm);

/// Same reordering for a state vector.
Vector permute_legs(const Vector& v, std::span<const int> dims,
                    std::span<const int> perm);

/// Applies `op` on the legs at `positions` to every column of `columns`.
void apply_on_legs(const Matrix& op, std::span<const int> dims,
                   std::span<const int> positions, Matrix& columns);

/// Kronecker product a ⊗ b.
Matrix kron(const Matrix& a, const Matrix& b);

/// Realignment of an operator on legs (A, B) with dims (da, db): the result
/// has rows indexed by (iA, jA) and columns by (iB, jB), so its singular
/// value decomposition is the operator-Schmidt decomposition across A|B.
Matrix realign(const Matrix& op, Index da, Index db);

/// Frobenius norm of U†U - I.
double unitarity_defect(const Matrix& u);

/// Number of singular values strictly above `threshold`.
int numerical_rank(const Matrix& m, double threshold);

/// The unit-modulus phase that makes the largest-magnitude entry positive
/// real (first such entry in column-major order). Returns 1 for a zero
/// matrix.
Complex canonical_phase(const Matrix& m);

/// m multiplied by conj(canonical_phase(m)).
Matrix canonicalize_phase(const Matrix& m);

/// Haar-distributed unitary of size d.
Matrix haar_unitary(Index d, std::mt19937_64& rng);

/// Complex matrix with iid standard complex Gaussian entries.
Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng);

/// Unitary whose first column is the unit vector `v`.
Matrix unitary_with_first_column(const Vector& v);

/// Unitary polar factor of `m` restricted to its numerical range: U V† from
/// the singular values above `threshold`.
Matrix polar_isometry(const Matrix& m, double threshold);

/// Hilbert–Schmidt inner product tr(a† b).
inline Complex hs_inner(const Matrix& a, const Matrix& b) {
  return (a.array().conjugate() * b.array()).sum();
}

}  // namespace qca
