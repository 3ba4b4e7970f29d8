#include "qca/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qca/error.hpp"

namespace qca {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

/// Checks that `u` is unitary and fixes the first basis vector, then snaps
/// the first row and column to exact unit vectors.
Matrix checked_quiescent_unitary(Matrix u, double tol, const std::string& what) {
  if (u.rows() != u.cols()) throw InvariantError(what + " is not square");
  const double defect = unitarity_defect(u);
  if (!(defect <= tol)) {
    throw InvariantError(what + " is not unitary (defect " + std::to_string(defect) + ")");
  }
  Vector e0 = Vector::Zero(u.rows());
  e0(0) = 1.0;
  const double fixed = (u.col(0) - e0).norm();
  if (!(fixed <= tol)) {
    const double up_to_phase = std::sqrt(std::max(0.0, 1.0 - std::norm(u(0, 0))));
    if (up_to_phase <= tol) {
      throw QuiescentPhaseError(what + " maps the quiescent vector to a nontrivial phase multiple "
                                       "of itself; it must fix it exactly");
    }
    throw InvariantError(what + " does not fix the quiescent vector (deviation " +
                         std::to_string(fixed) + ")");
  }
  u.col(0) = e0;
  u.row(0) = e0.transpose();
  return u;
}

void check_cap(const SparseState& psi, const EvolutionLimits& limits) {
  if (psi.size() > limits.term_cap) throw TermCapExceeded(psi.size(), limits.term_cap);
}

std::vector<Site> sorted_unique(std::vector<Site> sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

/// Applies (x)_k u on the listed legs from the left.
void apply_each_leg(const Matrix& u, std::span<const int> dims, std::span<const int> legs,
                    Matrix& m) {
  for (int leg : legs) {
    const int pos[] = {leg};
    apply_on_legs(u, dims, pos, m);
  }
}

/// m <- V m V^dagger where V applies `u` on every listed leg.
void conjugate_each_leg(const Matrix& u, std::span<const int> dims, std::span<const int> legs,
                        Matrix& m) {
  apply_each_leg(u, dims, legs, m);
  m.adjointInPlace();
  apply_each_leg(u, dims, legs, m);
  m.adjointInPlace();
}

}  // namespace

// ------------------------------------------------------------ QlgaModel

QlgaModel::QlgaModel(Neighborhood neighborhood, std::vector<int> dims, Matrix collision,
                     double tol)
    : neighborhood_(std::move(neighborhood)), dims_(std::move(dims)) {
  if (neighborhood_.size() == 0) throw InvariantError("empty neighborhood");
  if (dims_.size() != neighborhood_.size()) {
    throw InvariantError("one sub-cell dimension is needed per neighborhood offset");
  }
  cell_dim_ = 1;
  for (int d : dims_) {
    if (d < 1) throw InvariantError("sub-cell dimensions must be positive");
    cell_dim_ *= d;
  }
  if (collision.rows() != cell_dim_) {
    throw InvariantError("collision size " + std::to_string(collision.rows()) +
                         " does not match the cell dimension " + std::to_string(cell_dim_));
  }
  collision_ = checked_quiescent_unitary(std::move(collision), tol, "collision");
}

QlgaModel QlgaModel::from_factors(std::vector<SubcellFactor> factors, Matrix collision,
                                  double tol) {
  if (factors.empty()) throw InvariantError("a model needs at least one factor");
  std::vector<int> listed_dims;
  for (const auto& f : factors) {
    if (f.dim < 1) throw InvariantError("sub-cell dimensions must be positive");
    if (f.quiescent < 0 || f.quiescent >= f.dim) {
      throw InvariantError("quiescent sub-index out of range for offset " +
                           f.offset.to_string());
    }
    listed_dims.push_back(f.dim);
  }
  const Index d = total_dim(listed_dims);
  if (collision.rows() != d || collision.cols() != d) {
    throw InvariantError("collision size does not match the product of factor dimensions");
  }
  // Relabel each factor so its quiescent sub-index becomes 0.
  Matrix relabel = Matrix::Identity(1, 1);
  for (const auto& f : factors) {
    Matrix p = Matrix::Identity(f.dim, f.dim);
    if (f.quiescent != 0) {
      p.col(0).swap(p.col(f.quiescent));
    }
    relabel = kron(relabel, p);
  }
  collision = relabel.transpose() * collision * relabel;
  // Reorder legs into canonical neighborhood order.
  std::vector<int> order(factors.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return factors[a].offset < factors[b].offset; });
  std::vector<Site> offsets;
  std::vector<int> dims;
  for (int k : order) {
    offsets.push_back(factors[k].offset);
    dims.push_back(factors[k].dim);
  }
  collision = permute_legs(collision, listed_dims, order);
  return QlgaModel(Neighborhood(std::move(offsets)), std::move(dims), std::move(collision),
                   tol);
}

std::vector<std::uint32_t> QlgaModel::decode(std::uint32_t k) const {
  if (k >= static_cast<std::uint32_t>(cell_dim_)) {
    throw InvariantError("cell index " + std::to_string(k) + " out of range");
  }
  std::vector<std::uint32_t> digits(dims_.size());
  for (std::size_t p = dims_.size(); p-- > 0;) {
    digits[p] = k % static_cast<std::uint32_t>(dims_[p]);
    k /= static_cast<std::uint32_t>(dims_[p]);
  }
  return digits;
}

std::uint32_t QlgaModel::encode(std::span<const std::uint32_t> digits) const {
  if (digits.size() != dims_.size()) throw InvariantError("wrong number of sub-cell digits");
  std::uint32_t k = 0;
  for (std::size_t p = 0; p < dims_.size(); ++p) {
    if (digits[p] >= static_cast<std::uint32_t>(dims_[p])) {
      throw InvariantError("sub-cell digit out of range");
    }
    k = k * static_cast<std::uint32_t>(dims_[p]) + digits[p];
  }
  return k;
}

std::vector<std::uint32_t> decode_cell(std::uint32_t k, const QlgaModel& m) {
  return m.decode(k);
}

// ------------------------------------------------------ PartitionedCircuit

CircuitLayer PartitionedCircuit::make_layer(std::vector<Site> shape, Site offset,
                                            std::vector<std::int64_t> period,
                                            const Matrix& block, int cell_dim) {
  LocalOperator op = LocalOperator::from_unordered(std::move(shape), block, cell_dim);
  return CircuitLayer{op.support(), std::move(offset), std::move(period), op.matrix()};
}

PartitionedCircuit::PartitionedCircuit(int lattice_dim, int cell_dim,
                                       std::vector<CircuitLayer> layers, double tol)
    : lattice_dim_(lattice_dim), cell_dim_(cell_dim), layers_(std::move(layers)) {
  if (cell_dim_ < 1) throw InvariantError("cell dimension must be positive");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    const std::string name = "layer " + std::to_string(l);
    if (static_cast<int>(layer.period.size()) != lattice_dim_ ||
        layer.offset.dim() != lattice_dim_) {
      throw InvariantError(name + ": period and offset must match the lattice dimension");
    }
    std::int64_t cells = 1;
    for (auto p : layer.period) {
      if (p < 1) throw InvariantError(name + ": periods must be positive");
      cells *= p;
    }
    layer.shape = canonical_sites(std::move(layer.shape));
    if (static_cast<std::int64_t>(layer.shape.size()) != cells) {
      throw InvariantError(name + ": shape size must equal the product of the periods");
    }
    std::vector<std::vector<std::int64_t>> residues;
    for (const Site& s : layer.shape) {
      if (s.dim() != lattice_dim_) throw InvariantError(name + ": shape site dimension");
      std::vector<std::int64_t> r;
      for (int a = 0; a < lattice_dim_; ++a) r.push_back(floor_mod(s[a], layer.period[a]));
      residues.push_back(std::move(r));
    }
    std::sort(residues.begin(), residues.end());
    if (std::adjacent_find(residues.begin(), residues.end()) != residues.end()) {
      throw InvariantError(name + ": tiles overlap (shape is not a residue system)");
    }
    Index n = 1;
    for (std::size_t k = 0; k < layer.shape.size(); ++k) n *= cell_dim_;
    if (layer.block.rows() != n) throw InvariantError(name + ": block size mismatch");
    layer.block = checked_quiescent_unitary(std::move(layer.block), tol, name + " block");
  }
}

std::vector<std::int64_t> PartitionedCircuit::homogeneity_scale() const {
  std::vector<std::int64_t> scale(static_cast<std::size_t>(lattice_dim_), 1);
  for (const auto& layer : layers_) {
    for (int a = 0; a < lattice_dim_; ++a) scale[a] = std::lcm(scale[a], layer.period[a]);
  }
  return scale;
}

std::vector<std::vector<Site>> PartitionedCircuit::tiles_meeting(
    std::size_t layer_index, std::span<const Site> sites) const {
  const auto& layer = layers_.at(layer_index);
  std::vector<Site> anchors;
  for (const Site& s : sites) {
    const Site rel = s - layer.offset;
    std::size_t idx = layer.shape.size();
    for (std::size_t k = 0; k < layer.shape.size(); ++k) {
      bool same = true;
      for (int a = 0; a < lattice_dim_ && same; ++a) {
        same = floor_mod(rel[a] - layer.shape[k][a], layer.period[a]) == 0;
      }
      if (same) {
        idx = k;
        break;
      }
    }
    anchors.push_back(rel - layer.shape[idx]);
  }
  anchors = sorted_unique(std::move(anchors));
  std::vector<std::vector<Site>> tiles;
  tiles.reserve(anchors.size());
  for (const Site& anchor : anchors) {
    std::vector<Site> tile;
    for (const Site& s : layer.shape) tile.push_back(s + layer.offset + anchor);
    tiles.push_back(std::move(tile));
  }
  return tiles;
}

// ------------------------------------------------------ sparse application

SparseState apply_sigma(const SparseState& psi, const QlgaModel& m,
                        const EvolutionLimits& limits) {
  const auto& offsets = m.neighborhood().offsets();
  const std::size_t k = offsets.size();
  TermAccumulator acc(psi.lattice_dim(), psi.cell());
  acc.reserve(psi.size());
  struct Piece {
    Site site;
    std::size_t leg;
    std::uint32_t digit;
  };
  std::vector<Piece> pieces;
  std::vector<std::uint32_t> digits(k);
  for (const Term& t : psi.terms()) {
    pieces.clear();
    for (const ActiveCell& c : t.config.cells()) {
      const auto sub = m.decode(c.value);
      // Output cell x takes component y from input cell x + y.
      for (std::size_t y = 0; y < k; ++y) {
        if (sub[y] != 0) pieces.push_back({c.site - offsets[y], y, sub[y]});
      }
    }
    std::sort(pieces.begin(), pieces.end(),
              [](const Piece& a, const Piece& b) { return a.site < b.site; });
    std::vector<ActiveCell> cells;
    for (std::size_t p = 0; p < pieces.size();) {
      std::fill(digits.begin(), digits.end(), 0);
      std::size_t q = p;
      for (; q < pieces.size() && pieces[q].site == pieces[p].site; ++q) {
        digits[pieces[q].leg] = pieces[q].digit;
      }
      cells.push_back({pieces[p].site, m.encode(digits)});
      p = q;
    }
    acc.add(Configuration::from_sorted(std::move(cells)), t.amplitude);
  }
  SparseState out = std::move(acc).finish(limits.prune);
  check_cap(out, limits);
  return out;
}

SparseState apply_sigma_inverse(const SparseState& psi, const QlgaModel& m,
                                const EvolutionLimits& limits) {
  const auto& offsets = m.neighborhood().offsets();
  const std::size_t k = offsets.size();
  TermAccumulator acc(psi.lattice_dim(), psi.cell());
  acc.reserve(psi.size());
  std::vector<std::tuple<Site, std::size_t, std::uint32_t>> pieces;
  std::vector<std::uint32_t> digits(k);
  for (const Term& t : psi.terms()) {
    pieces.clear();
    for (const ActiveCell& c : t.config.cells()) {
      const auto sub = m.decode(c.value);
      for (std::size_t y = 0; y < k; ++y) {
        if (sub[y] != 0) pieces.emplace_back(c.site + offsets[y], y, sub[y]);
      }
    }
    std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) {
      return std::get<0>(a) < std::get<0>(b);
    });
    std::vector<ActiveCell> cells;
    for (std::size_t p = 0; p < pieces.size();) {
      std::fill(digits.begin(), digits.end(), 0);
      std::size_t q = p;
      for (; q < pieces.size() && std::get<0>(pieces[q]) == std::get<0>(pieces[p]); ++q) {
        digits[std::get<1>(pieces[q])] = std::get<2>(pieces[q]);
      }
      cells.push_back({std::get<0>(pieces[p]), m.encode(digits)});
      p = q;
    }
    acc.add(Configuration::from_sorted(std::move(cells)), t.amplitude);
  }
  SparseState out = std::move(acc).finish(limits.prune);
  check_cap(out, limits);
  return out;
}

SparseState apply_at_site(const Matrix& m, const Site& site, const SparseState& psi,
                          const EvolutionLimits& limits) {
  TermAccumulator acc(psi.lattice_dim(), psi.cell());
  acc.reserve(psi.size());
  for (const Term& t : psi.terms()) {
    const std::uint32_t v = t.config.value_at(site);
    for (Index r = 0; r < m.rows(); ++r) {
      const Complex coeff = m(r, v);
      if (coeff == Complex{0.0, 0.0}) continue;
      acc.add(t.config.with_value(site, static_cast<std::uint32_t>(r)), coeff * t.amplitude);
    }
    if (acc.size() > 4 * limits.term_cap + 64) {
      throw TermCapExceeded(acc.size(), limits.term_cap);
    }
  }
  SparseState out = std::move(acc).finish(limits.prune);
  check_cap(out, limits);
  return out;
}

namespace {

SparseState apply_on_support(const Matrix& f, const SparseState& psi,
                             const EvolutionLimits& limits) {
  // Quiescent cells are fixed exactly, so only active sites need visiting.
  SparseState out = psi;
  for (const Site& s : psi.support()) out = apply_at_site(f, s, out, limits);
  return out;
}

}  // namespace

SparseState apply_collision(const SparseState& psi, const QlgaModel& m,
                            const EvolutionLimits& limits) {
  return apply_on_support(m.collision(), psi, limits);
}

SparseState apply_collision_adjoint(const SparseState& psi, const QlgaModel& m,
                                    const EvolutionLimits& limits) {
  return apply_on_support(m.collision().adjoint(), psi, limits);
}

SparseState step(const SparseState& psi, const QlgaModel& m, const EvolutionLimits& limits) {
  return apply_collision(apply_sigma(psi, m, limits), m, limits);
}

SparseState step_inverse(const SparseState& psi, const QlgaModel& m,
                         const EvolutionLimits& limits) {
  return apply_sigma_inverse(apply_collision_adjoint(psi, m, limits), m, limits);
}

namespace {

SparseState apply_layer(const SparseState& psi, const PartitionedCircuit& c, std::size_t l,
                        const Matrix& block, const EvolutionLimits& limits) {
  SparseState out = psi;
  const auto support = psi.support();
  for (auto& tile : c.tiles_meeting(l, support)) {
    out = apply_local(LocalOperator(std::move(tile), block, c.cell_dim()), out, limits.prune);
    check_cap(out, limits);
  }
  return out;
}

}  // namespace

SparseState apply_circuit(const SparseState& psi, const PartitionedCircuit& c,
                          const EvolutionLimits& limits) {
  SparseState out = psi;
  for (std::size_t l = 0; l < c.layers().size(); ++l) {
    out = apply_layer(out, c, l, c.layers()[l].block, limits);
  }
  return out;
}

SparseState apply_circuit_inverse(const SparseState& psi, const PartitionedCircuit& c,
                                  const EvolutionLimits& limits) {
  SparseState out = psi;
  for (std::size_t l = c.layers().size(); l-- > 0;) {
    out = apply_layer(out, c, l, c.layers()[l].block.adjoint(), limits);
  }
  return out;
}

// -------------------------------------------------------- EvolutionHandle

EvolutionHandle EvolutionHandle::from_qlga(QlgaModel m) {
  EvolutionHandle h;
  h.model_ = std::move(m);
  return h;
}

EvolutionHandle EvolutionHandle::from_circuit(PartitionedCircuit c) {
  EvolutionHandle h;
  h.model_ = std::move(c);
  return h;
}

EvolutionHandle EvolutionHandle::identity(int lattice_dim, int cell_dim) {
  return from_qlga(QlgaModel(Neighborhood({Site::origin(lattice_dim)}), {cell_dim},
                             Matrix::Identity(cell_dim, cell_dim)));
}

EvolutionHandle EvolutionHandle::with_phase(double theta) const {
  EvolutionHandle h = *this;
  h.phase_ += theta;
  return h;
}

EvolutionHandle EvolutionHandle::blocked(std::vector<std::int64_t> factors) const {
  if (!block_.empty()) throw InvariantError("evolution is already coarse-grained");
  if (static_cast<int>(factors.size()) != lattice_dim()) {
    throw InvariantError("one block factor is needed per lattice axis");
  }
  for (auto f : factors) {
    if (f < 1) throw InvariantError("block factors must be positive");
  }
  EvolutionHandle h = *this;
  h.block_ = std::move(factors);
  return h;
}

int EvolutionHandle::lattice_dim() const {
  return std::visit([](const auto& m) { return m.lattice_dim(); }, model_);
}

namespace {

int fine_cell_dim(const std::variant<QlgaModel, PartitionedCircuit>& model) {
  return std::visit([](const auto& m) { return m.cell_dim(); }, model);
}

std::int64_t box_size(const std::vector<std::int64_t>& block) {
  std::int64_t n = 1;
  for (auto b : block) n *= b;
  return n;
}

/// Fine sites of coarse cell c in box (lexicographic) order.
std::vector<Site> box_sites(const Site& c, const std::vector<std::int64_t>& block) {
  const int n = c.dim();
  std::vector<Site> out;
  std::array<std::int64_t, kMaxLatticeDim> r{};
  const std::int64_t count = box_size(block);
  for (std::int64_t idx = 0; idx < count; ++idx) {
    std::int64_t rem = idx;
    for (int a = n; a-- > 0;) {
      r[a] = rem % block[a];
      rem /= block[a];
    }
    std::array<std::int64_t, kMaxLatticeDim> coords{};
    for (int a = 0; a < n; ++a) coords[a] = c[a] * block[a] + r[a];
    out.emplace_back(std::span<const std::int64_t>(coords.data(), static_cast<std::size_t>(n)));
  }
  return out;
}

/// (coarse cell, position within its box) of a fine site.
std::pair<Site, std::int64_t> coarse_of(const Site& s, const std::vector<std::int64_t>& block) {
  const int n = s.dim();
  std::array<std::int64_t, kMaxLatticeDim> coords{};
  std::int64_t pos = 0;
  for (int a = 0; a < n; ++a) {
    coords[a] = floor_div(s[a], block[a]);
    pos = pos * block[a] + floor_mod(s[a], block[a]);
  }
  return {Site(std::span<const std::int64_t>(coords.data(), static_cast<std::size_t>(n))), pos};
}

}  // namespace

int EvolutionHandle::cell_dim() const {
  const int d = fine_cell_dim(model_);
  if (block_.empty()) return d;
  int out = 1;
  for (std::int64_t k = 0; k < box_size(block_); ++k) out *= d;
  return out;
}

SparseState EvolutionHandle::to_fine(const SparseState& psi) const {
  if (block_.empty()) return psi;
  const int d = fine_cell_dim(model_);
  const std::int64_t box = box_size(block_);
  TermAccumulator acc(psi.lattice_dim(), CellSpace{d, 0});
  acc.reserve(psi.size());
  for (const Term& t : psi.terms()) {
    std::vector<ActiveCell> cells;
    for (const ActiveCell& c : t.config.cells()) {
      const auto sites = box_sites(c.site, block_);
      std::uint32_t v = c.value;
      for (std::int64_t p = box; p-- > 0;) {
        const std::uint32_t digit = v % static_cast<std::uint32_t>(d);
        v /= static_cast<std::uint32_t>(d);
        if (digit != 0) cells.push_back({sites[static_cast<std::size_t>(p)], digit});
      }
    }
    acc.add(Configuration::from_cells(std::move(cells)), t.amplitude);
  }
  return std::move(acc).finish(0.0);
}

SparseState EvolutionHandle::to_coarse(const SparseState& psi) const {
  if (block_.empty()) return psi;
  const int d = fine_cell_dim(model_);
  const std::int64_t box = box_size(block_);
  TermAccumulator acc(psi.lattice_dim(), CellSpace{cell_dim(), 0});
  acc.reserve(psi.size());
  for (const Term& t : psi.terms()) {
    std::vector<std::pair<Site, std::uint32_t>> parts;
    for (const ActiveCell& c : t.config.cells()) {
      auto [coarse, pos] = coarse_of(c.site, block_);
      std::uint32_t weight = c.value;
      for (std::int64_t p = pos + 1; p < box; ++p) weight *= static_cast<std::uint32_t>(d);
      parts.emplace_back(std::move(coarse), weight);
    }
    std::sort(parts.begin(), parts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ActiveCell> cells;
    for (const auto& [site, w] : parts) {
      if (!cells.empty() && cells.back().site == site) {
        cells.back().value += w;
      } else {
        cells.push_back({site, w});
      }
    }
    acc.add(Configuration::from_sorted(std::move(cells)), t.amplitude);
  }
  return std::move(acc).finish(0.0);
}

LocalOperator EvolutionHandle::to_fine(const LocalOperator& b) const {
  if (block_.empty()) return b;
  std::vector<Site> sites;
  for (const Site& c : b.support()) {
    auto box = box_sites(c, block_);
    sites.insert(sites.end(), box.begin(), box.end());
  }
  return LocalOperator::from_unordered(std::move(sites), b.matrix(), fine_cell_dim(model_));
}

LocalOperator EvolutionHandle::to_coarse(const LocalOperator& b, double tol) const {
  if (block_.empty()) return b;
  std::vector<Site> coarse;
  for (const Site& s : b.support()) coarse.push_back(coarse_of(s, block_).first);
  coarse = sorted_unique(std::move(coarse));
  std::vector<Site> fine;
  for (const Site& c : coarse) {
    auto box = box_sites(c, block_);
    fine.insert(fine.end(), box.begin(), box.end());
  }
  std::vector<Site> sorted = fine;
  std::sort(sorted.begin(), sorted.end());
  const LocalOperator padded = embed(b, sorted);
  std::vector<int> perm;
  for (const Site& s : fine) {
    perm.push_back(static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), s) -
                                    sorted.begin()));
  }
  const std::vector<int> dims(fine.size(), fine_cell_dim(model_));
  return reduce(LocalOperator(std::move(coarse), permute_legs(padded.matrix(), dims, perm),
                              cell_dim()),
                tol);
}

SparseState EvolutionHandle::apply(const SparseState& psi, const EvolutionLimits& limits) const {
  SparseState fine = to_fine(psi);
  if (const auto* m = qlga()) {
    fine = step(fine, *m, limits);
  } else {
    fine = apply_circuit(fine, *circuit(), limits);
  }
  if (phase_ != 0.0) fine = scale(fine, std::polar(1.0, phase_), 0.0);
  return to_coarse(fine);
}

SparseState EvolutionHandle::apply_inverse(const SparseState& psi,
                                           const EvolutionLimits& limits) const {
  SparseState fine = to_fine(psi);
  if (const auto* m = qlga()) {
    fine = step_inverse(fine, *m, limits);
  } else {
    fine = apply_circuit_inverse(fine, *circuit(), limits);
  }
  if (phase_ != 0.0) fine = scale(fine, std::polar(1.0, -phase_), 0.0);
  return to_coarse(fine);
}

LocalOperator EvolutionHandle::conjugate_fine(const LocalOperator& b, bool forward,
                                              double tol) const {
  // The global phase cancels in every conjugation and is never applied here.
  const int d = fine_cell_dim(model_);
  if (const auto* m = qlga()) {
    const auto& offsets = m->neighborhood().offsets();
    const std::size_t k = offsets.size();
    std::vector<int> sub_dims;
    const auto cells_of = [&](std::size_t ncells) {
      sub_dims.clear();
      for (std::size_t c = 0; c < ncells; ++c) {
        sub_dims.insert(sub_dims.end(), m->dims().begin(), m->dims().end());
      }
      return sub_dims;
    };
    const auto& support = b.support();
    Matrix x = b.matrix();
    const std::vector<int> cell_dims(support.size(), d);
    std::vector<int> all_legs(support.size());
    std::iota(all_legs.begin(), all_legs.end(), 0);
    if (forward) {
      // F^dagger b F on the support cells, then sigma^dagger ( . ) sigma.
      conjugate_each_leg(m->collision().adjoint(), cell_dims, all_legs, x);
    }
    // Relabel sub-cell leg (x, y) to cell x + y (forward) or x - y (inverse).
    std::vector<Site> targets;
    for (const Site& s : support) {
      for (const Site& y : offsets) targets.push_back(forward ? s + y : s - y);
    }
    const std::vector<Site> cells = sorted_unique(targets);
    const std::vector<int> dims = cells_of(cells.size());
    std::vector<int> positions;
    positions.reserve(targets.size());
    for (std::size_t p = 0; p < targets.size(); ++p) {
      const auto cell = static_cast<std::size_t>(
          std::lower_bound(cells.begin(), cells.end(), targets[p]) - cells.begin());
      positions.push_back(static_cast<int>(cell * k + p % k));
    }
    Matrix y = embed_legs(x, dims, positions);
    if (!forward) {
      const std::vector<int> out_dims(cells.size(), d);
      std::vector<int> legs(cells.size());
      std::iota(legs.begin(), legs.end(), 0);
      conjugate_each_leg(m->collision(), out_dims, legs, y);
    }
    return reduce(LocalOperator(cells, std::move(y), d), tol);
  }

  const auto& c = *circuit();
  LocalOperator cur = b;
  const std::size_t nl = c.layers().size();
  for (std::size_t step_index = 0; step_index < nl; ++step_index) {
    // R = L_m ... L_1: R^dagger b R peels the last layer first.
    const std::size_t l = forward ? nl - 1 - step_index : step_index;
    const Matrix& block = c.layers()[l].block;
    const auto tiles = c.tiles_meeting(l, cur.support());
    std::vector<Site> u;
    for (const auto& tile : tiles) u.insert(u.end(), tile.begin(), tile.end());
    u = sorted_unique(std::move(u));
    Matrix x = embed(cur, u).matrix();
    const std::vector<int> dims(u.size(), d);
    const Matrix left = forward ? Matrix(block.adjoint()) : block;
    for (const auto& tile : tiles) {
      std::vector<int> pos;
      for (const Site& s : tile) {
        pos.push_back(static_cast<int>(std::lower_bound(u.begin(), u.end(), s) - u.begin()));
      }
      apply_on_legs(left, dims, pos, x);
      x.adjointInPlace();
      apply_on_legs(left, dims, pos, x);
      x.adjointInPlace();
    }
    cur = reduce(LocalOperator(std::move(u), std::move(x), d), tol);
  }
  return cur;
}

LocalOperator EvolutionHandle::heisenberg(const LocalOperator& b, double tol) const {
  if (b.cell_dim() != cell_dim()) throw InvariantError("operator cell dimension mismatch");
  return to_coarse(conjugate_fine(to_fine(b), true, tol), tol);
}

LocalOperator EvolutionHandle::heisenberg_inverse(const LocalOperator& b, double tol) const {
  if (b.cell_dim() != cell_dim()) throw InvariantError("operator cell dimension mismatch");
  return to_coarse(conjugate_fine(to_fine(b), false, tol), tol);
}

}  // namespace qca
