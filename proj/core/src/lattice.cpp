#include "qca/lattice.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

#include "qca/error.hpp"

namespace qca {

namespace {

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw CoordinateOverflow("site coordinate overflow");
  }
  return out;
}

std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_sub_overflow(a, b, &out)) {
    throw CoordinateOverflow("site coordinate overflow");
  }
  return out;
}

void require_same_dim(const Site& a, const Site& b) {
  if (a.dim() != b.dim()) {
    throw InvariantError("site dimension mismatch: " + a.to_string() + " vs " +
                         b.to_string());
  }
}

}  // namespace

// ---------------------------------------------------------------- Site

Site::Site(std::initializer_list<std::int64_t> coords)
    : Site(std::span<const std::int64_t>(coords.begin(), coords.size())) {}

Site::Site(std::span<const std::int64_t> coords) {
  if (coords.empty() || coords.size() > static_cast<std::size_t>(kMaxLatticeDim)) {
    throw InvariantError("lattice dimension must be between 1 and " +
                         std::to_string(kMaxLatticeDim));
  }
  dim_ = static_cast<int>(coords.size());
  std::copy(coords.begin(), coords.end(), coords_.begin());
}

Site Site::origin(int dim) {
  std::array<std::int64_t, kMaxLatticeDim> zeros{};
  return Site(std::span<const std::int64_t>(zeros.data(), static_cast<std::size_t>(dim)));
}

Site Site::unit(int dim, int axis) {
  std::array<std::int64_t, kMaxLatticeDim> c{};
  c[axis] = 1;
  return Site(std::span<const std::int64_t>(c.data(), static_cast<std::size_t>(dim)));
}

Site Site::operator+(const Site& other) const {
  require_same_dim(*this, other);
  Site out = *this;
  for (int a = 0; a < dim_; ++a) out.coords_[a] = checked_add(coords_[a], other.coords_[a]);
  return out;
}

Site Site::operator-(const Site& other) const {
  require_same_dim(*this, other);
  Site out = *this;
  for (int a = 0; a < dim_; ++a) out.coords_[a] = checked_sub(coords_[a], other.coords_[a]);
  return out;
}

Site Site::operator-() const {
  Site out = *this;
  for (int a = 0; a < dim_; ++a) out.coords_[a] = checked_sub(0, coords_[a]);
  return out;
}

bool Site::is_origin() const noexcept {
  for (int a = 0; a < dim_; ++a) {
    if (coords_[a] != 0) return false;
  }
  return true;
}

std::string Site::to_string() const {
  std::ostringstream out;
  out << '(';
  for (int a = 0; a < dim_; ++a) {
    if (a) out << ',';
    out << coords_[a];
  }
  out << ')';
  return out.str();
}

std::size_t SiteHash::operator()(const Site& s) const noexcept {
  std::size_t h = static_cast<std::size_t>(s.dim());
  for (std::int64_t c : s.coords()) {
    h ^= std::hash<std::int64_t>{}(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

std::vector<Site> canonical_sites(std::vector<Site> sites) {
  std::sort(sites.begin(), sites.end());
  for (std::size_t k = 1; k < sites.size(); ++k) {
    require_same_dim(sites[k - 1], sites[k]);
    if (sites[k - 1] == sites[k]) {
      throw InvariantError("duplicate site " + sites[k].to_string());
    }
  }
  return sites;
}

// -------------------------------------------------------- Neighborhood

Neighborhood::Neighborhood(std::vector<Site> offsets)
    : offsets_(canonical_sites(std::move(offsets))) {
  if (offsets_.empty()) throw InvariantError("neighborhood must be nonempty");
}

std::size_t Neighborhood::index_of(const Site& offset) const {
  auto it = std::lower_bound(offsets_.begin(), offsets_.end(), offset);
  if (it == offsets_.end() || *it != offset) {
    throw InvariantError("offset " + offset.to_string() + " not in neighborhood");
  }
  return static_cast<std::size_t>(it - offsets_.begin());
}

bool Neighborhood::contains(const Site& offset) const {
  return std::binary_search(offsets_.begin(), offsets_.end(), offset);
}

std::vector<Site> Neighborhood::at(const Site& z) const {
  std::vector<Site> out;
  out.reserve(offsets_.size());
  for (const Site& y : offsets_) out.push_back(z + y);
  return out;  // translation preserves lexicographic order
}

Neighborhood Neighborhood::reflected() const {
  std::vector<Site> out;
  out.reserve(offsets_.size());
  for (const Site& y : offsets_) out.push_back(-y);
  return Neighborhood(std::move(out));
}

std::vector<Site> Neighborhood::differences() const {
  std::vector<Site> out;
  for (const Site& a : offsets_) {
    for (const Site& b : offsets_) out.push_back(a - b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ------------------------------------------------------- Configuration

Configuration Configuration::from_cells(std::vector<ActiveCell> cells) {
  std::erase_if(cells, [](const ActiveCell& c) { return c.value == 0; });
  std::sort(cells.begin(), cells.end(),
            [](const ActiveCell& a, const ActiveCell& b) { return a.site < b.site; });
  for (std::size_t k = 1; k < cells.size(); ++k) {
    require_same_dim(cells[k - 1].site, cells[k].site);
    if (cells[k - 1].site == cells[k].site) {
      throw InvariantError("configuration lists site " + cells[k].site.to_string() +
                           " twice");
    }
  }
  Configuration out;
  out.cells_ = std::move(cells);
  return out;
}

Configuration Configuration::from_sorted(std::vector<ActiveCell> cells) {
#ifndef NDEBUG
  for (std::size_t k = 0; k < cells.size(); ++k) {
    assert(cells[k].value != 0);
    if (k) assert(cells[k - 1].site < cells[k].site);
  }
#endif
  Configuration out;
  out.cells_ = std::move(cells);
  return out;
}

std::uint32_t Configuration::value_at(const Site& site) const {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), site,
                             [](const ActiveCell& c, const Site& s) { return c.site < s; });
  if (it == cells_.end() || it->site != site) return 0;
  return it->value;
}

Configuration Configuration::with_value(const Site& site, std::uint32_t value) const {
  Configuration out = *this;
  auto it = std::lower_bound(out.cells_.begin(), out.cells_.end(), site,
                             [](const ActiveCell& c, const Site& s) { return c.site < s; });
  const bool present = it != out.cells_.end() && it->site == site;
  if (value == 0) {
    if (present) out.cells_.erase(it);
  } else if (present) {
    it->value = value;
  } else {
    out.cells_.insert(it, ActiveCell{site, value});
  }
  return out;
}

std::size_t ConfigurationHash::operator()(const Configuration& c) const noexcept {
  std::size_t h = c.size();
  SiteHash site_hash;
  for (const ActiveCell& cell : c.cells()) {
    h ^= site_hash(cell.site) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::uint32_t>{}(cell.value) + 0x9e3779b97f4a7c15ULL + (h << 6) +
         (h >> 2);
  }
  return h;
}

Configuration translate_config(const Configuration& c, const Site& z) {
  std::vector<ActiveCell> cells;
  cells.reserve(c.size());
  // New cell j reads old cell j + z, so old site s lands on s - z.
  for (const ActiveCell& cell : c.cells()) cells.push_back({cell.site - z, cell.value});
  return Configuration::from_sorted(std::move(cells));
}

// --------------------------------------------------------- SparseState

SparseState TermAccumulator::finish(double prune) && {
  std::stable_sort(terms_.begin(), terms_.end(),
                   [](const Term& a, const Term& b) { return a.config < b.config; });
  std::vector<Term> merged;
  merged.reserve(terms_.size());
  for (auto& t : terms_) {
    if (!merged.empty() && merged.back().config == t.config) {
      merged.back().amplitude += t.amplitude;
    } else {
      merged.push_back(std::move(t));
    }
  }
  std::erase_if(merged, [prune](const Term& t) { return std::abs(t.amplitude) < prune; });
  // A negative prune tells from_terms the list is already canonical.
  return SparseState::from_terms(dim_, cell_, std::move(merged), -1.0);
}

SparseState SparseState::from_terms(int lattice_dim, CellSpace cell,
                                    std::vector<Term> terms, double prune) {
  SparseState out(lattice_dim, cell);
  if (prune < 0.0) {
    // Already canonical (internal fast path from TermAccumulator).
    out.terms_ = std::move(terms);
    return out;
  }
  for (const Term& t : terms) {
    for (const ActiveCell& c : t.config.cells()) {
      if (c.site.dim() != lattice_dim) {
        throw InvariantError("configuration site dimension does not match state");
      }
      if (c.value >= static_cast<std::uint32_t>(cell.dim)) {
        throw InvariantError("cell value " + std::to_string(c.value) +
                             " out of range for cell dimension " +
                             std::to_string(cell.dim));
      }
    }
  }
  TermAccumulator acc(lattice_dim, cell);
  acc.reserve(terms.size());
  for (auto& t : terms) acc.add(std::move(t.config), t.amplitude);
  return std::move(acc).finish(prune);
}

SparseState SparseState::basis(int lattice_dim, CellSpace cell, Configuration c) {
  std::vector<Term> terms;
  terms.push_back(Term{std::move(c), Complex{1.0, 0.0}});
  return from_terms(lattice_dim, cell, std::move(terms));
}

SparseState SparseState::vacuum(int lattice_dim, CellSpace cell) {
  return basis(lattice_dim, cell, Configuration{});
}

Complex SparseState::amplitude(const Configuration& c) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), c,
                             [](const Term& t, const Configuration& k) { return t.config < k; });
  if (it == terms_.end() || it->config != c) return Complex{0.0, 0.0};
  return it->amplitude;
}

double SparseState::norm() const {
  double sum = 0.0;
  for (const Term& t : terms_) sum += std::norm(t.amplitude);
  return std::sqrt(sum);
}

std::vector<Site> SparseState::support() const {
  std::vector<Site> sites;
  for (const Term& t : terms_) {
    for (const ActiveCell& c : t.config.cells()) sites.push_back(c.site);
  }
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

namespace {

void require_same_space(const SparseState& a, const SparseState& b) {
  if (a.lattice_dim() != b.lattice_dim() || a.cell() != b.cell()) {
    throw InvariantError("states live in different spaces (lattice or cell dimension)");
  }
}

}  // namespace

SparseState translate_state(const SparseState& psi, const Site& z) {
  std::vector<Term> terms;
  terms.reserve(psi.size());
  for (const Term& t : psi.terms()) {
    terms.push_back(Term{translate_config(t.config, z), t.amplitude});
  }
  // Translation preserves the configuration order, so the list stays canonical.
  return SparseState::from_terms(psi.lattice_dim(), psi.cell(), std::move(terms), -1.0);
}

Complex inner_product(const SparseState& psi, const SparseState& phi) {
  require_same_space(psi, phi);
  Complex sum{0.0, 0.0};
  auto a = psi.terms().begin();
  auto b = phi.terms().begin();
  while (a != psi.terms().end() && b != phi.terms().end()) {
    if (a->config < b->config) {
      ++a;
    } else if (b->config < a->config) {
      ++b;
    } else {
      sum += std::conj(a->amplitude) * b->amplitude;
      ++a;
      ++b;
    }
  }
  return sum;
}

SparseState normalize(const SparseState& psi) {
  const double n = psi.norm();
  if (n == 0.0) throw InvariantError("cannot normalize the zero state");
  return scale(psi, Complex{1.0 / n, 0.0});
}

SparseState add(const SparseState& a, const SparseState& b, double prune) {
  require_same_space(a, b);
  TermAccumulator acc(a.lattice_dim(), a.cell());
  acc.reserve(a.size() + b.size());
  for (const Term& t : a.terms()) acc.add(t.config, t.amplitude);
  for (const Term& t : b.terms()) acc.add(t.config, t.amplitude);
  return std::move(acc).finish(prune);
}

SparseState scale(const SparseState& a, Complex factor, double prune) {
  TermAccumulator acc(a.lattice_dim(), a.cell());
  acc.reserve(a.size());
  for (const Term& t : a.terms()) acc.add(t.config, t.amplitude * factor);
  return std::move(acc).finish(prune);
}

double distance(const SparseState& a, const SparseState& b) {
  return add(a, scale(b, Complex{-1.0, 0.0}, 0.0), 0.0).norm();
}

std::vector<Configuration> window_configurations(std::span<const Site> sites,
                                                 int cell_dim) {
  const std::size_t k = sites.size();
  std::size_t count = 1;
  for (std::size_t i = 0; i < k; ++i) count *= static_cast<std::size_t>(cell_dim);
  std::vector<Configuration> out;
  out.reserve(count);
  std::vector<std::uint32_t> digits(k, 0);
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t rem = idx;
    for (std::size_t pos = k; pos-- > 0;) {
      digits[pos] = static_cast<std::uint32_t>(rem % static_cast<std::size_t>(cell_dim));
      rem /= static_cast<std::size_t>(cell_dim);
    }
    std::vector<ActiveCell> cells;
    for (std::size_t pos = 0; pos < k; ++pos) {
      if (digits[pos] != 0) cells.push_back({sites[pos], digits[pos]});
    }
    out.push_back(Configuration::from_cells(std::move(cells)));
  }
  return out;
}

Index window_index(const Configuration& c, std::span<const Site> sites, int cell_dim) {
  Index idx = 0;
  for (const Site& s : sites) idx = idx * cell_dim + c.value_at(s);
  return idx;
}

}  // namespace qca
