#include "qca/random.hpp"

#include <algorithm>
#include <set>

#include "qca/error.hpp"

namespace qca {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix random_collision(Index d, std::mt19937_64& rng) {
  Matrix f = Matrix::Identity(d, d);
  if (d > 1) f.bottomRightCorner(d - 1, d - 1) = haar_unitary(d - 1, rng);
  return f;
}

QlgaModel random_qlga(const Neighborhood& neighborhood, std::vector<int> dims,
                      std::mt19937_64& rng) {
  Index d = 1;
  for (int v : dims) d *= v;
  return QlgaModel(neighborhood, std::move(dims), random_collision(d, rng));
}

PartitionedCircuit brickwork_circuit(int cell_dim, std::mt19937_64& rng) {
  const std::vector<Site> shape = {Site{0}, Site{1}};
  const Index block = static_cast<Index>(cell_dim) * cell_dim;
  std::vector<CircuitLayer> layers;
  layers.push_back({shape, Site{0}, {2}, random_collision(block, rng)});
  layers.push_back({shape, Site{1}, {2}, random_collision(block, rng)});
  return PartitionedCircuit(1, cell_dim, std::move(layers));
}

namespace {

Configuration random_configuration(int lattice_dim, int cell_dim, const StateShape& shape,
                                   std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> coord(0, shape.extent - 1);
  std::uniform_int_distribution<int> count(0, shape.max_active);
  std::uniform_int_distribution<std::uint32_t> value(1, static_cast<std::uint32_t>(cell_dim - 1));
  if (cell_dim == 1) return {};
  std::set<Site> sites;
  const int want = count(rng);
  std::int64_t box = 1;
  for (int a = 0; a < lattice_dim; ++a) box *= shape.extent;
  while (static_cast<int>(sites.size()) < std::min<std::int64_t>(want, box)) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(lattice_dim));
    for (auto& v : c) v = coord(rng);
    sites.insert(Site(c));
  }
  std::vector<ActiveCell> cells;
  for (const auto& s : sites) cells.push_back({s, value(rng)});
  return Configuration::from_cells(std::move(cells));
}

}  // namespace

SparseState random_state(int lattice_dim, int cell_dim, const StateShape& shape,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Term> terms;
  for (int k = 0; k < shape.terms; ++k) {
    Configuration c = random_configuration(lattice_dim, cell_dim, shape, rng);
    const double re = normal(rng);
    const double im = normal(rng);
    terms.push_back({std::move(c), Complex{re, im}});
  }
  SparseState psi = SparseState::from_terms(lattice_dim, CellSpace{cell_dim, 0}, std::move(terms));
  if (psi.norm() == 0.0) return SparseState::vacuum(lattice_dim, CellSpace{cell_dim, 0});
  return normalize(psi);
}

std::vector<Site> propagated_sites(const Configuration& c, const QlgaModel& m) {
  std::set<Site> out;
  const auto& offsets = m.neighborhood().offsets();
  for (const auto& cell : c.cells()) {
    const auto digits = m.decode(cell.value);
    for (std::size_t y = 0; y < digits.size(); ++y) {
      if (digits[y] != 0) out.insert(cell.site - offsets[y]);
    }
  }
  return {out.begin(), out.end()};
}

SparseState random_state_within(const QlgaModel& m, const StateShape& shape,
                                std::size_t max_touched, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    SparseState psi = random_state(m.lattice_dim(), m.cell_dim(), shape, rng);
    std::set<Site> touched;
    for (const auto& t : psi.terms()) {
      for (const auto& s : propagated_sites(t.config, m)) touched.insert(s);
    }
    if (touched.size() <= max_touched) return psi;
  }
  throw InvariantError("random_state_within: no state met the propagated-site budget");
}

}  // namespace qca
