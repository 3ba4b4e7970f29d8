#pragma once

// The Heisenberg picture: the automorphism b -> R^dagger b R on local
// observables, local rules (images of the cell matrix units at the origin)
// and the checks of the automaton axioms.

#include <cstdint>
#include <string>
#include <vector>

#include "qca/evolution.hpp"
#include "qca/lattice.hpp"
#include "qca/operators.hpp"
#include "qca/tolerances.hpp"

namespace qca {

/// Images gamma(e_ij) of the matrix units at the origin, each supported
/// within the neighborhood of the origin.
class LocalRule {
 public:
  LocalRule() = default;
  /// `images` holds d*d operators, index i*d + j.
  LocalRule(Neighborhood neighborhood, int cell_dim, std::vector<LocalOperator> images);

  const Neighborhood& neighborhood() const noexcept { return neighborhood_; }
  int cell_dim() const noexcept { return cell_dim_; }
  int lattice_dim() const { return neighborhood_.dim(); }
  const LocalOperator& image(int i, int j) const {
    return images_[static_cast<std::size_t>(i * cell_dim_ + j)];
  }
  const std::vector<LocalOperator>& images() const noexcept { return images_; }

  /// gamma(e_ij at z), the translate of the stored image.
  LocalOperator image_at(int i, int j, const Site& z) const;

  /// gamma(a at z) for a d x d matrix a, by linearity.
  LocalOperator apply_cell(const Matrix& a, const Site& z) const;

  /// The identity rule gamma = id with the given neighborhood.
  static LocalRule identity(Neighborhood neighborhood, int cell_dim);

 private:
  Neighborhood neighborhood_;
  int cell_dim_ = 1;
  std::vector<LocalOperator> images_;
};

/// gamma(e_ij(z)) for all i, j by exact conjugation, restricted to N_z.
/// Throws SupportLeakage when an image is not local upon N_z within
/// `tol.leakage`.
std::vector<LocalOperator> gamma_of_cell(const EvolutionHandle& r, const Site& z,
                                         const Neighborhood& neighborhood,
                                         const Tolerances& tol = {});

/// The rule of an evolution at the declared neighborhood.
LocalRule extract_rule(const EvolutionHandle& r, const Neighborhood& neighborhood,
                       const Tolerances& tol = {});

/// Offsets (relative to the origin) on which the images of the cell matrix
/// units at the origin act nontrivially: the smallest valid neighborhood.
Neighborhood light_cone(const EvolutionHandle& r, const Tolerances& tol = {});

/// Second route to gamma: matrix elements <R c'| e_ij(z) |R c> over the
/// configurations of N_z with quiescent environment, plus a locality check
/// on the hull N_z + (N_z - N). Exponential in the hull size.
struct MatrixElementImages {
  std::vector<LocalOperator> images;
  double leakage = 0.0;       ///< max deviation from (image on N_z) (x) I on the hull
  double norm_deficit = 0.0;  ///< max of ||e_ij R c||^2 not captured inside R(hull)
};
MatrixElementImages gamma_by_matrix_elements(const EvolutionHandle& r, const Site& z,
                                             const Neighborhood& neighborhood,
                                             const EvolutionLimits& limits = {});

struct CheckResult {
  std::string name;
  double residual = 0.0;
  bool passed = true;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool accepted = true;
  double max_residual() const;
};

/// Checks the *-map, homomorphism, unitality, support and commuting-translate
/// conditions; accepted iff every residual is within tol.validation.
ValidationReport validate_rule(const LocalRule& rule, const Tolerances& tol = {});

/// ||[a, b]||_F on the union support, computed through operator-Schmidt
/// decompositions across the shared legs (never forms the union matrix).
double commutator_norm(const LocalOperator& a, const LocalOperator& b);

struct TranslationReport {
  double theta = 0.0;
  double residual = 0.0;
  bool passed = true;
};

/// Compares tau_z R tau_z^{-1} with R on every basis configuration of the box
/// [0, extent)^n and fits the global phase.
TranslationReport check_translation_invariance(const EvolutionHandle& r, int extent,
                                               const Site& z, const Tolerances& tol = {},
                                               const EvolutionLimits& limits = {});

struct CausalityReport {
  double max_deviation = 0.0;
  int trials = 0;
  bool passed = true;
};

/// Evolves pairs phi (x) chi and phi (x) chi' with identical content phi on
/// N_z and different environments chi, chi' around it, and compares the
/// evolved restrictions to z.
CausalityReport check_causality_density(const EvolutionHandle& r, const Site& z,
                                        const Neighborhood& neighborhood, int trials,
                                        std::uint64_t seed, const Tolerances& tol = {},
                                        const EvolutionLimits& limits = {});

struct ReversibilityReport {
  double forward_leakage = 0.0;   ///< R^dagger A_z R outside N_z
  double backward_leakage = 0.0;  ///< R A_z R^dagger outside V_z = z - N
  std::vector<Site> forward_support;   ///< union of image supports
  std::vector<Site> backward_support;
  bool passed = true;
};

ReversibilityReport check_structural_reversibility(const EvolutionHandle& r, const Site& z,
                                                   const Neighborhood& neighborhood,
                                                   const Tolerances& tol = {});

}  // namespace qca
