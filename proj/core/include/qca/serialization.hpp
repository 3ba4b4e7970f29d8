#pragma once

// JSON forms of the library types and atomic file output.
//
// Cell basis values in state files use the in-memory labelling, where the
// quiescent index is 0. Model files may name another quiescent sub-index per
// factor; loading relabels it to 0.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "qca/evolution.hpp"
#include "qca/heisenberg.hpp"
#include "qca/lattice.hpp"
#include "qca/operators.hpp"
#include "qca/structure.hpp"

namespace qca {

using Json = nlohmann::json;

Json to_json(const Site& s);
Site site_from_json(const Json& j);

Json to_json(const Configuration& c);
Configuration configuration_from_json(const Json& j);

Json to_json(const SparseState& psi);
SparseState state_from_json(const Json& j, int lattice_dim, CellSpace cell);

/// {"dim": m, "re": [[...]], "im": [[...]]}, row-major. Non-square matrices
/// carry "rows" and "cols" instead of "dim".
Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const LocalOperator& a);
LocalOperator operator_from_json(const Json& j, int cell_dim);

Json to_json(const Neighborhood& n);
Neighborhood neighborhood_from_json(const Json& j);

Json to_json(const QlgaModel& m);
QlgaModel qlga_from_json(const Json& j, double tol = Tolerances{}.algebraic);

Json to_json(const PartitionedCircuit& c);
PartitionedCircuit circuit_from_json(const Json& j, double tol = Tolerances{}.algebraic);

/// A model file holds either a lattice gas model or a circuit (with "layers").
/// Circuits may carry "block": [b_1, ..., b_n] to be viewed on coarse cells.
EvolutionHandle handle_from_json(const Json& j, double tol = Tolerances{}.algebraic);

Json to_json(const LocalRule& r);
LocalRule rule_from_json(const Json& j);

Json to_json(const ValidationReport& r);
Json to_json(const Tolerances& t);
Json to_json(const Patch& p);
Json to_json(const DetectionReport& r, const std::vector<Patch>& patches = {});
Json to_json(const IntertwinerResult& r, bool include_matrix = true);

/// Reads and parses a JSON file; throws Error with the path on failure.
Json read_json(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
void write_json_atomic(const std::filesystem::path& path, const Json& j);

}  // namespace qca
