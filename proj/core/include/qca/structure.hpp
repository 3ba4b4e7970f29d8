#pragma once

// Structure of a local rule: the patches gamma(A_z) ∩ A_x, the lattice gas
// decomposition test, the tensor factorization of the cell space, recovery of
// the collision, and the finite-window intertwiner.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qca/evolution.hpp"
#include "qca/heisenberg.hpp"
#include "qca/linalg.hpp"
#include "qca/tolerances.hpp"

namespace qca {

/// The subalgebra gamma(A_z) ∩ A_x of the cell algebra at x, z = x - y.
struct Patch {
  Site target;   ///< x (always the origin here)
  Site source;   ///< z = x - y
  Site offset;   ///< y
  std::vector<Matrix> basis;  ///< Hilbert–Schmidt orthonormal d x d matrices

  int dim() const { return static_cast<int>(basis.size()); }
};

/// Patch for neighborhood offset y at x = origin.
Patch compute_patch(const LocalRule& rule, const Site& y, const Tolerances& tol = {});

/// One patch per neighborhood offset, in neighborhood order.
std::vector<Patch> compute_patches(const LocalRule& rule, const Tolerances& tol = {});

struct QlgaCondition {
  bool satisfied = false;
  int rank = 0;       ///< rank of the span of ordered products
  int target = 0;     ///< d^2
  std::vector<int> patch_dims;
  double max_commutator = 0.0;  ///< between elements of distinct patches
};

QlgaCondition check_qlga_condition(const std::vector<Patch>& patches, int cell_dim,
                                   const Tolerances& tol = {});

struct FactorizationResult {
  /// S maps the cell space onto (x)_y V_y, legs in neighborhood order.
  Matrix s;
  std::vector<int> dims;
  std::vector<int> quiescent;  ///< quiescent sub-index per leg (0 after alignment)
  /// True when S|0> is a product vector, so S can be aligned to S|0> = |0>.
  bool quiescent_product = false;
  /// When S itself is a tensor product (x)_y B_y, the factors B_y.
  std::vector<Matrix> leg_bases;
  std::uint64_t seed = 0;
  int attempts = 0;
  double residual = 0.0;  ///< max deviation of S D_y S^dagger from End(V_y) (x) I
};

/// Recursive isotypic splitting of the patch algebras. Seeded; a degenerate
/// random sample is retried up to 8 times.
FactorizationResult factorize(const std::vector<Patch>& patches, int cell_dim,
                              std::uint64_t seed, const Tolerances& tol = {});

/// The collision F in the frame of `fact`, normalized so that F|0> = |0>.
Matrix extract_collision(const LocalRule& rule, const FactorizationResult& fact,
                         const Tolerances& tol = {});

/// The rule conjugated cell-wise by s: gamma'(a) = S~ gamma(S^dagger a S) S~^dagger.
LocalRule conjugate_rule(const LocalRule& rule, const Matrix& s, const Tolerances& tol = {});

/// Max over generators of the entrywise difference between two rules.
double rule_distance(const LocalRule& a, const LocalRule& b);

struct DetectionReport {
  bool qlga = false;
  std::vector<int> dims;
  Matrix s;
  Matrix f;
  std::vector<Matrix> leg_bases;
  std::vector<int> patch_dims;
  int rank = 0;
  int target_rank = 0;
  std::optional<QlgaModel> model;  ///< reconstructed model in the frame of S
  std::map<std::string, double> residuals;
  std::vector<std::string> diagnostics;
  std::uint64_t seed = 0;
  Tolerances tolerances;
};

/// Full pipeline: patches, condition, factorization, collision, and the
/// semantic round trip gamma_reconstructed(S a S^dagger) = S~ gamma(a) S~^dagger.
/// Stage failures throw StageError tagged with the stage name.
DetectionReport detect_and_reconstruct(const LocalRule& rule, std::uint64_t seed,
                                       const Tolerances& tol = {});

// ----------------------------------------------------------- intertwiner

enum class Uniqueness { unique, non_unique, no_solution };
const char* to_string(Uniqueness u);

/// A periodic window Z_{L_1} x ... x Z_{L_n}; cells are ordered
/// lexicographically and the window space is big-endian over them.
struct Torus {
  std::vector<std::int64_t> extents;

  std::int64_t cells() const;
  /// Lexicographic index of a site after wrapping.
  std::int64_t index_of(const Site& s) const;
  Site site(std::int64_t index) const;
};

struct IntertwinerResult {
  Torus window;
  Matrix r;                 ///< phase-canonical, empty unless unique
  int nullspace_dim = 0;    ///< dimension of the common fixed space of the vacuum projections
  Uniqueness uniqueness = Uniqueness::no_solution;
  double residual = 0.0;    ///< max violation of pi(b) R = R pi(gamma(b)) over checked generators
  double unitarity = 0.0;   ///< ||R^dagger R - I|| (exact or probed)
  bool residual_exhaustive = false;
  std::string phase_convention = "largest-magnitude entry positive real";
};

/// Solves pi(b) R = R pi(gamma(b)) for the matrix units of every window
/// cell on a periodic window. `seed` drives the cell ordering and probes.
IntertwinerResult solve_intertwiner(const LocalRule& rule, const Torus& window,
                                    std::uint64_t seed, const Tolerances& tol = {});

/// Grows a cubic window from `start` until the fixed-space dimension agrees
/// for two consecutive sizes, or `max_extent` is reached.
IntertwinerResult solve_intertwiner_stabilized(const LocalRule& rule, std::uint64_t seed,
                                               const Tolerances& tol = {}, int start = 0,
                                               int max_extent = 6);

/// Dense F^ sigma of a lattice gas model on a periodic window.
Matrix windowed_evolution(const QlgaModel& m, const Torus& window);

/// |tr(a^dagger b)| / dim and the max entry deviation of b from
/// exp(i theta) a at the fitted phase.
struct PhaseComparison {
  double overlap = 0.0;
  double max_deviation = 0.0;
};
PhaseComparison compare_up_to_phase(const Matrix& a, const Matrix& b);

}  // namespace qca
