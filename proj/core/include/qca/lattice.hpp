#pragma once

// Lattice sites, neighborhoods, finite configurations and sparse states of
// the Hilbert space of finite configurations.
//
// Translation convention: translating by z makes new cell j read old cell
// j + z. The support of a configuration therefore moves by -z.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "qca/linalg.hpp"
#include "qca/tolerances.hpp"

namespace qca {

inline constexpr int kMaxLatticeDim = 3;

/// A point of the integer lattice Z^n, 1 <= n <= kMaxLatticeDim.
///
/// Arithmetic is checked: leaving the int64 range throws CoordinateOverflow.
class Site {
 public:
  Site() = default;
  Site(std::initializer_list<std::int64_t> coords);
  explicit Site(std::span<const std::int64_t> coords);

  static Site origin(int dim);
  /// Unit vector along `axis`.
  static Site unit(int dim, int axis);

  int dim() const noexcept { return dim_; }
  std::int64_t operator[](int axis) const { return coords_[axis]; }
  std::span<const std::int64_t> coords() const noexcept {
    return {coords_.data(), static_cast<std::size_t>(dim_)};
  }

  Site operator+(const Site& other) const;
  Site operator-(const Site& other) const;
  Site operator-() const;
  bool is_origin() const noexcept;

  /// Lexicographic on coordinates.
  friend auto operator<=>(const Site&, const Site&) = default;

  std::string to_string() const;

 private:
  std::array<std::int64_t, kMaxLatticeDim> coords_{};
  int dim_ = 0;
};

struct SiteHash {
  std::size_t operator()(const Site& s) const noexcept;
};

/// Sorts lexicographically and checks for duplicates and a common dimension.
std::vector<Site> canonical_sites(std::vector<Site> sites);

/// A finite, nonempty, duplicate-free set of offsets in lexicographic order.
class Neighborhood {
 public:
  Neighborhood() = default;
  explicit Neighborhood(std::vector<Site> offsets);

  int dim() const noexcept { return offsets_.front().dim(); }
  std::size_t size() const noexcept { return offsets_.size(); }
  const std::vector<Site>& offsets() const noexcept { return offsets_; }
  const Site& operator[](std::size_t k) const { return offsets_[k]; }

  /// Position of `offset` in the canonical order; throws if absent.
  std::size_t index_of(const Site& offset) const;
  bool contains(const Site& offset) const;

  /// N_z = z + N, sorted.
  std::vector<Site> at(const Site& z) const;
  /// V = -N.
  Neighborhood reflected() const;
  /// {a - b : a, b in N}.
  std::vector<Site> differences() const;

  friend bool operator==(const Neighborhood&, const Neighborhood&) = default;

 private:
  std::vector<Site> offsets_;
};

/// The cell Hilbert space W. The quiescent basis index is always 0 in memory.
struct CellSpace {
  int dim = 1;
  int quiescent = 0;

  friend bool operator==(const CellSpace&, const CellSpace&) = default;
};

struct ActiveCell {
  Site site;
  std::uint32_t value = 0;

  friend auto operator<=>(const ActiveCell&, const ActiveCell&) = default;
};

/// A basis element of the set of finite configurations: finitely many active
/// cells over the quiescent background. Quiescent cells are never stored.
class Configuration {
 public:
  Configuration() = default;

  /// Drops quiescent (value 0) entries, sorts by site, rejects duplicates.
  static Configuration from_cells(std::vector<ActiveCell> cells);

  std::span<const ActiveCell> cells() const noexcept { return cells_; }
  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }

  /// Value at `site`, 0 when quiescent.
  std::uint32_t value_at(const Site& site) const;

  /// Copy with `site` set to `value` (0 removes it).
  Configuration with_value(const Site& site, std::uint32_t value) const;

  /// Takes cells already sorted by site with nonzero values (asserted in
  /// debug builds). Used on hot paths that preserve ordering.
  static Configuration from_sorted(std::vector<ActiveCell> cells);

  friend auto operator<=>(const Configuration&, const Configuration&) = default;

 private:
  std::vector<ActiveCell> cells_;
};

struct ConfigurationHash {
  std::size_t operator()(const Configuration& c) const noexcept;
};

/// New cell j holds old cell j + z.
Configuration translate_config(const Configuration& c, const Site& z);

struct Term {
  Configuration config;
  Complex amplitude;
};

/// A finite superposition of configurations, sorted by configuration.
///
/// Amplitudes of magnitude below the prune threshold are never stored.
class SparseState {
 public:
  SparseState() = default;
  SparseState(int lattice_dim, CellSpace cell) : dim_(lattice_dim), cell_(cell) {}

  /// Merges duplicate configurations (summing in input order) and prunes.
  /// A negative `prune` skips validation and takes `terms` as already sorted,
  /// merged and pruned.
  static SparseState from_terms(int lattice_dim, CellSpace cell,
                                std::vector<Term> terms,
                                double prune = Tolerances{}.prune);
  static SparseState basis(int lattice_dim, CellSpace cell, Configuration c);
  /// The all-quiescent configuration.
  static SparseState vacuum(int lattice_dim, CellSpace cell);

  int lattice_dim() const noexcept { return dim_; }
  const CellSpace& cell() const noexcept { return cell_; }
  std::span<const Term> terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }

  Complex amplitude(const Configuration& c) const;
  double norm() const;
  /// Sorted union of the active sites of all terms.
  std::vector<Site> support() const;

 private:
  int dim_ = 1;
  CellSpace cell_;
  std::vector<Term> terms_;
};

/// Accumulates terms and produces a canonical SparseState.
class TermAccumulator {
 public:
  TermAccumulator(int lattice_dim, CellSpace cell) : dim_(lattice_dim), cell_(cell) {}
  void add(Configuration c, Complex amplitude) {
    terms_.push_back(Term{std::move(c), amplitude});
  }
  void reserve(std::size_t n) { terms_.reserve(n); }
  std::size_t size() const noexcept { return terms_.size(); }
  SparseState finish(double prune) &&;

 private:
  int dim_;
  CellSpace cell_;
  std::vector<Term> terms_;
};

SparseState translate_state(const SparseState& psi, const Site& z);

/// <psi|phi>, conjugate-linear in psi. Throws on mismatched spaces.
Complex inner_product(const SparseState& psi, const SparseState& phi);

/// Throws InvariantError for the zero vector.
SparseState normalize(const SparseState& psi);

SparseState add(const SparseState& a, const SparseState& b,
                double prune = Tolerances{}.prune);
SparseState scale(const SparseState& a, Complex factor,
                  double prune = Tolerances{}.prune);
/// ||a - b||.
double distance(const SparseState& a, const SparseState& b);

/// All configurations supported on `sites`, in index order (big-endian over
/// the sites in lexicographic order, 0 = quiescent).
std::vector<Configuration> window_configurations(std::span<const Site> sites,
                                                 int cell_dim);

/// Index of `c` restricted to `sites` (big-endian); cells outside are ignored.
Index window_index(const Configuration& c, std::span<const Site> sites,
                   int cell_dim);

}  // namespace qca
