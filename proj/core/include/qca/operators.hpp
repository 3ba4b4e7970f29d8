#pragma once

// Local operators: a finite site support plus a matrix on the tensor product
// of the cell spaces over that support. Tensor legs always follow the
// lexicographic site order of the support.

#include <span>
#include <vector>

#include "qca/lattice.hpp"
#include "qca/linalg.hpp"
#include "qca/tolerances.hpp"

namespace qca {

class LocalOperator {
 public:
  LocalOperator() = default;

  /// `support` must be sorted and duplicate-free; `matrix` must have size
  /// cell_dim^|support|. The result is not reduced; call reduce() for that.
  LocalOperator(std::vector<Site> support, Matrix matrix, int cell_dim);

  /// Takes the support in any order, with the matrix legs in that order, and
  /// permutes the legs into canonical order.
  static LocalOperator from_unordered(std::vector<Site> support, const Matrix& matrix,
                                      int cell_dim);

  static LocalOperator scalar(Complex value, int cell_dim);
  static LocalOperator identity(int cell_dim) { return scalar(Complex{1.0, 0.0}, cell_dim); }
  /// e_ij at `site`.
  static LocalOperator matrix_unit(const Site& site, int i, int j, int cell_dim);
  /// A d x d matrix acting at one site.
  static LocalOperator on_site(const Site& site, Matrix m);

  const std::vector<Site>& support() const noexcept { return support_; }
  const Matrix& matrix() const noexcept { return matrix_; }
  int cell_dim() const noexcept { return cell_dim_; }

  /// Leg dimensions, one per support site.
  std::vector<int> leg_dims() const {
    return std::vector<int>(support_.size(), cell_dim_);
  }

 private:
  std::vector<Site> support_;
  Matrix matrix_ = Matrix::Identity(1, 1);
  int cell_dim_ = 1;
};

/// Drops every support site on which the operator acts as the identity
/// (up to `tol` in max-abs entry). Idempotent.
LocalOperator reduce(const LocalOperator& a, double tol = Tolerances{}.reduce);

/// Pads with identities onto `target`, which must contain the support.
LocalOperator embed(const LocalOperator& a, std::span<const Site> target);

/// Sorted union of two supports.
std::vector<Site> support_union(std::span<const Site> a, std::span<const Site> b);

LocalOperator multiply(const LocalOperator& a, const LocalOperator& b,
                       double tol = Tolerances{}.reduce);
LocalOperator adjoint(const LocalOperator& a);
LocalOperator add(const LocalOperator& a, const LocalOperator& b,
                  double tol = Tolerances{}.reduce);
LocalOperator scale(const LocalOperator& a, Complex factor);
/// a b - b a.
LocalOperator commutator(const LocalOperator& a, const LocalOperator& b,
                         double tol = Tolerances{}.reduce);

/// Operator translation matching translate_state: pi(translate_operator(b, z))
/// = tau_z pi(b) tau_z^{-1}. The support moves by -z.
LocalOperator translate_operator(const LocalOperator& a, const Site& z);

/// Largest entry modulus of a - b after embedding both on the union support.
/// Invariant under identity padding.
double max_abs_difference(const LocalOperator& a, const LocalOperator& b);

/// Largest entry modulus of a - (tr_out a / dim_out) (x) I, where "out" is
/// the part of the support outside `allowed`. Zero iff a is local upon
/// `allowed`.
double leakage_outside(const LocalOperator& a, std::span<const Site> allowed);

/// (tr_out a / dim_out), restricted to support within `allowed`.
LocalOperator restrict_support(const LocalOperator& a, std::span<const Site> allowed,
                               double tol = Tolerances{}.reduce);

/// The action pi of a local operator on a sparse state.
SparseState apply_local(const LocalOperator& a, const SparseState& psi,
                        double prune = Tolerances{}.prune);

/// Reduced density matrix of a pure state on a finite region.
struct RegionDensity {
  std::vector<Site> region;
  Matrix matrix;
  int cell_dim = 1;
};

/// Partial trace of |psi><psi| over all cells outside `region`. `region` is
/// sorted on return; the matrix legs follow that order.
RegionDensity restrict_density(const SparseState& psi, std::vector<Site> region);

}  // namespace qca
