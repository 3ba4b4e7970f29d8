#pragma once

// Seeded generators for models, circuits and sparse states.

#include <cstdint>
#include <random>
#include <vector>

#include "qca/evolution.hpp"
#include "qca/lattice.hpp"

namespace qca {

/// Independent stream seed number `stream` derived from `seed` (splitmix64).
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream);

/// A collision 1 (+) U with U Haar on the complement of the quiescent vector.
Matrix random_collision(Index d, std::mt19937_64& rng);

/// Lattice gas model with the given neighborhood and sub-cell dimensions
/// (neighborhood order) and a random quiescent-fixing collision.
QlgaModel random_qlga(const Neighborhood& neighborhood, std::vector<int> dims,
                      std::mt19937_64& rng);

/// 1D brickwork on cells of dimension d: blocks on {2k, 2k+1}, then on
/// {2k+1, 2k+2}, each an independent random quiescent-fixing two-cell unitary.
PartitionedCircuit brickwork_circuit(int cell_dim, std::mt19937_64& rng);

struct StateShape {
  int max_active = 4;        ///< active cells per configuration
  int terms = 3;             ///< configurations in the superposition
  std::int64_t extent = 4;   ///< active cells lie in [0, extent)^n
};

/// A normalized superposition of random configurations.
SparseState random_state(int lattice_dim, int cell_dim, const StateShape& shape,
                         std::mt19937_64& rng);

/// Sites carrying a non-quiescent sub-cell after the propagation of `c`.
std::vector<Site> propagated_sites(const Configuration& c, const QlgaModel& m);

/// As random_state, but redraws until the propagated sites of all terms
/// together number at most `max_touched`. This bounds the number of terms
/// after one step by d^max_touched.
SparseState random_state_within(const QlgaModel& m, const StateShape& shape,
                                std::size_t max_touched, std::mt19937_64& rng);

}  // namespace qca
