#include "qca/operators.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "qca/error.hpp"

namespace qca {

namespace {

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Index power(int base, std::size_t exp) {
  Index out = 1;
  for (std::size_t k = 0; k < exp; ++k) out *= base;
  return out;
}

/// Positions of `sites` inside the sorted list `target`; throws if absent.
std::vector<int> positions_in(std::span<const Site> sites, std::span<const Site> target) {
  std::vector<int> out;
  out.reserve(sites.size());
  for (const Site& s : sites) {
    auto it = std::lower_bound(target.begin(), target.end(), s);
    if (it == target.end() || *it != s) {
      throw InvariantError("site " + s.to_string() + " is not in the target support");
    }
    out.push_back(static_cast<int>(it - target.begin()));
  }
  return out;
}

void require_same_cell(const LocalOperator& a, const LocalOperator& b) {
  if (a.cell_dim() != b.cell_dim()) {
    throw InvariantError("local operators over different cell dimensions");
  }
}

/// Operator acting as `a` with the legs outside `keep` traced out and
/// divided by their dimension.
Matrix averaged_restriction(const Matrix& m, std::span<const int> dims,
                            std::span<const int> keep, Index dim_out) {
  return partial_trace(m, dims, keep) / static_cast<double>(dim_out);
}

}  // namespace

LocalOperator::LocalOperator(std::vector<Site> support, Matrix matrix, int cell_dim)
    : support_(std::move(support)), matrix_(std::move(matrix)), cell_dim_(cell_dim) {
  if (cell_dim_ < 1) throw InvariantError("cell dimension must be positive");
  for (std::size_t k = 1; k < support_.size(); ++k) {
    if (!(support_[k - 1] < support_[k])) {
      throw InvariantError("local operator support must be sorted and duplicate-free");
    }
  }
  const Index n = power(cell_dim_, support_.size());
  if (matrix_.rows() != n || matrix_.cols() != n) {
    throw InvariantError("local operator matrix has size " + std::to_string(matrix_.rows()) +
                         "x" + std::to_string(matrix_.cols()) + ", expected " +
                         std::to_string(n));
  }
}

LocalOperator LocalOperator::from_unordered(std::vector<Site> support, const Matrix& matrix,
                                            int cell_dim) {
  std::vector<int> order(support.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return support[a] < support[b]; });
  std::vector<Site> sorted;
  sorted.reserve(support.size());
  for (int k : order) sorted.push_back(support[k]);
  const std::vector<int> dims(support.size(), cell_dim);
  if (matrix.rows() != total_dim(dims) || matrix.cols() != total_dim(dims)) {
    throw InvariantError("local operator matrix does not match its support");
  }
  return LocalOperator(std::move(sorted), permute_legs(matrix, dims, order), cell_dim);
}

LocalOperator LocalOperator::scalar(Complex value, int cell_dim) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return LocalOperator({}, std::move(m), cell_dim);
}

LocalOperator LocalOperator::matrix_unit(const Site& site, int i, int j, int cell_dim) {
  if (i < 0 || j < 0 || i >= cell_dim || j >= cell_dim) {
    throw InvariantError("matrix unit index out of range");
  }
  Matrix m = Matrix::Zero(cell_dim, cell_dim);
  m(i, j) = 1.0;
  return LocalOperator({site}, std::move(m), cell_dim);
}

LocalOperator LocalOperator::on_site(const Site& site, Matrix m) {
  const int d = static_cast<int>(m.rows());
  return LocalOperator({site}, std::move(m), d);
}

LocalOperator reduce(const LocalOperator& a, double tol) {
  std::vector<Site> support = a.support();
  Matrix m = a.matrix();
  const int d = a.cell_dim();
  if (d == 1) return LocalOperator({}, m.size() ? m : Matrix::Identity(1, 1), 1);
  const double threshold = tol * std::max(1.0, max_abs(m));
  std::size_t k = 0;
  while (k < support.size()) {
    const std::vector<int> dims(support.size(), d);
    std::vector<int> keep;
    for (std::size_t p = 0; p < support.size(); ++p) {
      if (p != k) keep.push_back(static_cast<int>(p));
    }
    const Matrix rest = averaged_restriction(m, dims, keep, d);
    const Matrix padded = embed_legs(rest, dims, keep);
    if (max_abs(padded - m) <= threshold) {
      m = rest;
      support.erase(support.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      ++k;
    }
  }
  return LocalOperator(std::move(support), std::move(m), d);
}

std::vector<Site> support_union(std::span<const Site> a, std::span<const Site> b) {
  std::vector<Site> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

LocalOperator embed(const LocalOperator& a, std::span<const Site> target) {
  std::vector<Site> sorted(target.begin(), target.end());
  const auto positions = positions_in(a.support(), sorted);
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (!(sorted[k - 1] < sorted[k])) {
      throw InvariantError("embed target must be sorted and duplicate-free");
    }
  }
  const std::vector<int> dims(sorted.size(), a.cell_dim());
  return LocalOperator(std::move(sorted), embed_legs(a.matrix(), dims, positions),
                       a.cell_dim());
}

LocalOperator multiply(const LocalOperator& a, const LocalOperator& b, double tol) {
  require_same_cell(a, b);
  const auto u = support_union(a.support(), b.support());
  const LocalOperator ea = embed(a, u);
  const LocalOperator eb = embed(b, u);
  return reduce(LocalOperator(u, ea.matrix() * eb.matrix(), a.cell_dim()), tol);
}

LocalOperator adjoint(const LocalOperator& a) {
  return LocalOperator(a.support(), a.matrix().adjoint(), a.cell_dim());
}

LocalOperator add(const LocalOperator& a, const LocalOperator& b, double tol) {
  require_same_cell(a, b);
  const auto u = support_union(a.support(), b.support());
  return reduce(
      LocalOperator(u, embed(a, u).matrix() + embed(b, u).matrix(), a.cell_dim()), tol);
}

LocalOperator scale(const LocalOperator& a, Complex factor) {
  return LocalOperator(a.support(), a.matrix() * factor, a.cell_dim());
}

LocalOperator commutator(const LocalOperator& a, const LocalOperator& b, double tol) {
  require_same_cell(a, b);
  const auto u = support_union(a.support(), b.support());
  const Matrix ma = embed(a, u).matrix();
  const Matrix mb = embed(b, u).matrix();
  return reduce(LocalOperator(u, ma * mb - mb * ma, a.cell_dim()), tol);
}

LocalOperator translate_operator(const LocalOperator& a, const Site& z) {
  std::vector<Site> support;
  support.reserve(a.support().size());
  for (const Site& s : a.support()) support.push_back(s - z);
  return LocalOperator(std::move(support), a.matrix(), a.cell_dim());
}

double max_abs_difference(const LocalOperator& a, const LocalOperator& b) {
  require_same_cell(a, b);
  const auto u = support_union(a.support(), b.support());
  return max_abs(embed(a, u).matrix() - embed(b, u).matrix());
}

double leakage_outside(const LocalOperator& a, std::span<const Site> allowed) {
  std::vector<int> keep;
  for (std::size_t p = 0; p < a.support().size(); ++p) {
    if (std::binary_search(allowed.begin(), allowed.end(), a.support()[p])) {
      keep.push_back(static_cast<int>(p));
    }
  }
  if (keep.size() == a.support().size()) return 0.0;
  const std::vector<int> dims = a.leg_dims();
  const Index dim_out = power(a.cell_dim(), a.support().size() - keep.size());
  const Matrix rest = averaged_restriction(a.matrix(), dims, keep, dim_out);
  return max_abs(embed_legs(rest, dims, keep) - a.matrix());
}

LocalOperator restrict_support(const LocalOperator& a, std::span<const Site> allowed,
                               double tol) {
  std::vector<int> keep;
  std::vector<Site> kept;
  for (std::size_t p = 0; p < a.support().size(); ++p) {
    if (std::binary_search(allowed.begin(), allowed.end(), a.support()[p])) {
      keep.push_back(static_cast<int>(p));
      kept.push_back(a.support()[p]);
    }
  }
  if (keep.size() == a.support().size()) return reduce(a, tol);
  const std::vector<int> dims = a.leg_dims();
  const Index dim_out = power(a.cell_dim(), a.support().size() - keep.size());
  return reduce(LocalOperator(std::move(kept),
                              averaged_restriction(a.matrix(), dims, keep, dim_out),
                              a.cell_dim()),
                tol);
}

SparseState apply_local(const LocalOperator& a, const SparseState& psi, double prune) {
  if (a.cell_dim() != psi.cell().dim) {
    throw InvariantError("operator and state have different cell dimensions");
  }
  const auto& support = a.support();
  const int d = a.cell_dim();
  const std::size_t k = support.size();
  const Matrix& m = a.matrix();
  TermAccumulator acc(psi.lattice_dim(), psi.cell());
  std::vector<std::uint32_t> digits(k);
  for (const Term& t : psi.terms()) {
    // Environment cells (outside the support) are carried over unchanged.
    std::vector<ActiveCell> env;
    env.reserve(t.config.size());
    Index col = 0;
    std::size_t next = 0;
    for (const ActiveCell& c : t.config.cells()) {
      while (next < k && support[next] < c.site) {
        col = col * d;
        ++next;
      }
      if (next < k && support[next] == c.site) {
        col = col * d + c.value;
        ++next;
      } else {
        env.push_back(c);
      }
    }
    for (; next < k; ++next) col = col * d;

    for (Index r = 0; r < m.rows(); ++r) {
      const Complex coeff = m(r, col);
      if (coeff == Complex{0.0, 0.0}) continue;
      Index rem = r;
      for (std::size_t p = k; p-- > 0;) {
        digits[p] = static_cast<std::uint32_t>(rem % d);
        rem /= d;
      }
      std::vector<ActiveCell> cells;
      cells.reserve(env.size() + k);
      std::size_t e = 0;
      for (std::size_t p = 0; p < k; ++p) {
        while (e < env.size() && env[e].site < support[p]) cells.push_back(env[e++]);
        if (digits[p] != 0) cells.push_back({support[p], digits[p]});
      }
      while (e < env.size()) cells.push_back(env[e++]);
      acc.add(Configuration::from_sorted(std::move(cells)), coeff * t.amplitude);
    }
  }
  return std::move(acc).finish(prune);
}

RegionDensity restrict_density(const SparseState& psi, std::vector<Site> region) {
  if (region.empty()) throw InvariantError("restrict_density: empty region");
  region = canonical_sites(std::move(region));
  const int d = psi.cell().dim;
  const Index n = power(d, region.size());
  if (n > (Index{1} << 14)) {
    throw InvariantError("restrict_density: region space too large for a dense matrix");
  }
  // Group amplitudes by the environment configuration.
  std::map<Configuration, std::vector<std::pair<Index, Complex>>> groups;
  for (const Term& t : psi.terms()) {
    std::vector<ActiveCell> env;
    for (const ActiveCell& c : t.config.cells()) {
      if (!std::binary_search(region.begin(), region.end(), c.site)) env.push_back(c);
    }
    groups[Configuration::from_sorted(std::move(env))].emplace_back(
        window_index(t.config, region, d), t.amplitude);
  }
  Matrix rho = Matrix::Zero(n, n);
  Vector v(n);
  for (const auto& [env, entries] : groups) {
    v.setZero();
    for (const auto& [idx, amp] : entries) v(idx) += amp;
    rho.noalias() += v * v.adjoint();
  }
  return RegionDensity{std::move(region), std::move(rho), d};
}

}  // namespace qca
