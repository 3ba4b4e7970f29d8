#pragma once

// Concrete causal unitary evolutions on sparse states: lattice gas automata
// (propagation followed by an on-site collision) and partitioned circuits.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "qca/error.hpp"
#include "qca/lattice.hpp"
#include "qca/linalg.hpp"
#include "qca/operators.hpp"
#include "qca/tolerances.hpp"

namespace qca {

/// A collision that fixes the quiescent vector only up to a nontrivial phase.
class QuiescentPhaseError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// One sub-cell factor as written in model files.
struct SubcellFactor {
  Site offset;
  int dim = 1;
  int quiescent = 0;
};

/// A lattice gas automaton: W = (x)_{y in N} V_y, R = F^ sigma.
///
/// In memory the quiescent sub-index of every factor is 0; from_factors
/// relabels other choices. Cell basis indices are mixed-radix, big-endian in
/// neighborhood order.
class QlgaModel {
 public:
  QlgaModel() = default;

  /// Validates unitarity of `collision` and F|0> = |0>, both within `tol`,
  /// then snaps the quiescent row and column to exact unit vectors.
  QlgaModel(Neighborhood neighborhood, std::vector<int> dims, Matrix collision,
            double tol = Tolerances{}.algebraic);

  /// Accepts factors in any order and any quiescent sub-index.
  static QlgaModel from_factors(std::vector<SubcellFactor> factors, Matrix collision,
                                double tol = Tolerances{}.algebraic);

  int lattice_dim() const { return neighborhood_.dim(); }
  const Neighborhood& neighborhood() const noexcept { return neighborhood_; }
  const std::vector<int>& dims() const noexcept { return dims_; }
  int cell_dim() const noexcept { return cell_dim_; }
  const Matrix& collision() const noexcept { return collision_; }

  /// Mixed-radix digits of a cell basis index; throws when out of range.
  std::vector<std::uint32_t> decode(std::uint32_t k) const;
  std::uint32_t encode(std::span<const std::uint32_t> digits) const;

 private:
  Neighborhood neighborhood_;
  std::vector<int> dims_;
  int cell_dim_ = 1;
  Matrix collision_ = Matrix::Identity(1, 1);
};

/// Same decoding as a free function.
std::vector<std::uint32_t> decode_cell(std::uint32_t k, const QlgaModel& m);

/// One layer of a partitioned circuit: the block acts on every tile
/// shape + offset + (k_1 p_1, ..., k_n p_n).
struct CircuitLayer {
  std::vector<Site> shape;      ///< sorted; a complete residue system mod period
  Site offset;
  std::vector<std::int64_t> period;
  Matrix block;                 ///< legs follow the sorted shape
};

class PartitionedCircuit {
 public:
  PartitionedCircuit() = default;
  /// Validates tiling, unitarity and quiescent fixing of every block, and
  /// snaps the quiescent row and column of each block.
  PartitionedCircuit(int lattice_dim, int cell_dim, std::vector<CircuitLayer> layers,
                     double tol = Tolerances{}.algebraic);

  /// Layer whose shape is given in any order, with block legs in that order.
  static CircuitLayer make_layer(std::vector<Site> shape, Site offset,
                                 std::vector<std::int64_t> period, const Matrix& block,
                                 int cell_dim);

  int lattice_dim() const noexcept { return lattice_dim_; }
  int cell_dim() const noexcept { return cell_dim_; }
  const std::vector<CircuitLayer>& layers() const noexcept { return layers_; }

  /// Per-axis least common multiple of the layer periods: the circuit is
  /// translation invariant under these shifts.
  std::vector<std::int64_t> homogeneity_scale() const;

  /// Tiles of `layer` meeting any of `sites`, each as sorted site list.
  std::vector<std::vector<Site>> tiles_meeting(std::size_t layer,
                                               std::span<const Site> sites) const;

 private:
  int lattice_dim_ = 1;
  int cell_dim_ = 1;
  std::vector<CircuitLayer> layers_;
};

// Schrödinger-picture application. All functions throw TermCapExceeded when
// an intermediate state exceeds limits.term_cap terms.

SparseState apply_sigma(const SparseState& psi, const QlgaModel& m,
                        const EvolutionLimits& limits = {});
SparseState apply_sigma_inverse(const SparseState& psi, const QlgaModel& m,
                                const EvolutionLimits& limits = {});
SparseState apply_collision(const SparseState& psi, const QlgaModel& m,
                            const EvolutionLimits& limits = {});
SparseState apply_collision_adjoint(const SparseState& psi, const QlgaModel& m,
                                    const EvolutionLimits& limits = {});
SparseState step(const SparseState& psi, const QlgaModel& m,
                 const EvolutionLimits& limits = {});
SparseState step_inverse(const SparseState& psi, const QlgaModel& m,
                         const EvolutionLimits& limits = {});
SparseState apply_circuit(const SparseState& psi, const PartitionedCircuit& c,
                          const EvolutionLimits& limits = {});
SparseState apply_circuit_inverse(const SparseState& psi, const PartitionedCircuit& c,
                                  const EvolutionLimits& limits = {});

/// Applies a d x d matrix at one site of every configuration.
SparseState apply_at_site(const Matrix& m, const Site& site, const SparseState& psi,
                          const EvolutionLimits& limits = {});

/// A causal unitary R given by a model, together with a global phase and an
/// optional coarse-graining.
///
/// With block factors b, coarse cell c is the box of fine sites
/// b*c + r, 0 <= r < b, and its basis index is big-endian over that box in
/// lexicographic order. The handle then acts on coarse states and operators.
class EvolutionHandle {
 public:
  static EvolutionHandle from_qlga(QlgaModel m);
  static EvolutionHandle from_circuit(PartitionedCircuit c);
  /// The identity evolution on cells of dimension d.
  static EvolutionHandle identity(int lattice_dim, int cell_dim);

  /// Same evolution multiplied by exp(i theta).
  EvolutionHandle with_phase(double theta) const;
  /// Same evolution viewed on coarse cells.
  EvolutionHandle blocked(std::vector<std::int64_t> factors) const;

  int lattice_dim() const;
  int cell_dim() const;
  double phase() const noexcept { return phase_; }
  bool is_qlga() const noexcept { return std::holds_alternative<QlgaModel>(model_); }
  const QlgaModel* qlga() const { return std::get_if<QlgaModel>(&model_); }
  const PartitionedCircuit* circuit() const {
    return std::get_if<PartitionedCircuit>(&model_);
  }
  const std::vector<std::int64_t>& block_factors() const noexcept { return block_; }

  SparseState apply(const SparseState& psi, const EvolutionLimits& limits = {}) const;
  SparseState apply_inverse(const SparseState& psi,
                            const EvolutionLimits& limits = {}) const;

  /// R^dagger b R, computed by exact conjugation and reduced.
  LocalOperator heisenberg(const LocalOperator& b, double tol = Tolerances{}.reduce) const;
  /// R b R^dagger.
  LocalOperator heisenberg_inverse(const LocalOperator& b,
                                   double tol = Tolerances{}.reduce) const;

  /// Fine <-> coarse conversions (identity when not blocked).
  SparseState to_fine(const SparseState& psi) const;
  SparseState to_coarse(const SparseState& psi) const;
  LocalOperator to_fine(const LocalOperator& b) const;
  LocalOperator to_coarse(const LocalOperator& b, double tol = Tolerances{}.reduce) const;

 private:
  LocalOperator conjugate_fine(const LocalOperator& b, bool forward, double tol) const;

  std::variant<QlgaModel, PartitionedCircuit> model_;
  double phase_ = 0.0;
  std::vector<std::int64_t> block_;
};

}  // namespace qca
