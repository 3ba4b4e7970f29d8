#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace qca {

/// Every numerical threshold used by the library, in one place.
///
/// The ladder: algebraic identities 1e-10, causality and density comparisons
/// 1e-9, intertwiner residuals and rank decisions 1e-8.
struct Tolerances {
  double prune = 1e-14;        ///< amplitudes below this are dropped
  double reduce = 1e-12;       ///< identity-leg detection in LocalOperator
  double algebraic = 1e-10;    ///< unitarity, *-homomorphism identities
  double leakage = 1e-10;      ///< support leakage of Heisenberg images
  double causality = 1e-9;     ///< density-restriction comparisons
  double validation = 1e-9;    ///< LocalRule acceptance
  double intertwiner = 1e-8;   ///< intertwiner and round-trip residuals
  double rank = 1e-8;          ///< singular-value and eigenvalue-1 thresholds
  double translation = 1e-8;   ///< translation-invariance residual

  /// Sets a tolerance by name; throws InvariantError on unknown names or
  /// non-positive values.
  void set(std::string_view name, double value);

  /// Parses "NAME=VALUE".
  void set_from_string(std::string_view assignment);

  /// (name, value) pairs in a fixed order, for reports.
  std::vector<std::pair<std::string, double>> entries() const;
};

/// Limits on sparse evolution.
struct EvolutionLimits {
  std::size_t term_cap = 1'000'000;
  double prune = 1e-14;
};

}  // namespace qca
