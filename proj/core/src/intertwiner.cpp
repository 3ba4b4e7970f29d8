#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "qca/error.hpp"
#include "qca/structure.hpp"

namespace qca {

const char* to_string(Uniqueness u) {
  switch (u) {
    case Uniqueness::unique:
      return "unique";
    case Uniqueness::non_unique:
      return "non-unique";
    case Uniqueness::no_solution:
      return "no-solution";
  }
  return "?";
}

std::int64_t Torus::cells() const {
  std::int64_t n = 1;
  for (auto e : extents) n *= e;
  return n;
}

std::int64_t Torus::index_of(const Site& s) const {
  if (s.dim() != static_cast<int>(extents.size())) throw InvariantError("Torus: dimension mismatch");
  std::int64_t idx = 0;
  for (std::size_t a = 0; a < extents.size(); ++a) {
    const std::int64_t l = extents[a];
    const std::int64_t c = ((s[static_cast<int>(a)] % l) + l) % l;
    idx = idx * l + c;
  }
  return idx;
}

Site Torus::site(std::int64_t index) const {
  std::vector<std::int64_t> coords(extents.size());
  for (std::size_t a = extents.size(); a-- > 0;) {
    coords[a] = index % extents[a];
    index /= extents[a];
  }
  return Site(coords);
}

namespace {

constexpr Index kMaxWindowDim = 8192;
constexpr Index kExactFixedSpace = 256;
constexpr Index kExactUnitarity = 1024;
constexpr Index kExhaustiveResidual = 256;
constexpr int kProbes = 8;

bool offsets_fit(const Neighborhood& nbhd, const Torus& t) {
  std::set<std::int64_t> seen;
  for (const auto& y : nbhd.offsets()) {
    if (!seen.insert(t.index_of(y)).second) return false;
  }
  return true;
}

Index window_dim(int d, std::int64_t cells) {
  Index n = 1;
  for (std::int64_t c = 0; c < cells; ++c) {
    if (n > kMaxWindowDim / d) throw InvariantError("window space exceeds " + std::to_string(kMaxWindowDim));
    n *= d;
  }
  return n;
}

/// A rule image placed on the window: wrapped leg positions in support order.
struct Placed {
  Matrix m;
  std::vector<int> pos;
};

Placed place(const LocalOperator& op, const Torus& t) {
  Placed p{op.matrix(), {}};
  for (const auto& s : op.support()) p.pos.push_back(static_cast<int>(t.index_of(s)));
  return p;
}

Matrix random_probes(Index n, int k, std::mt19937_64& rng) {
  Matrix m = gaussian_matrix(n, k, rng);
  for (Index c = 0; c < m.cols(); ++c) m.col(c).normalize();
  return m;
}

}  // namespace

IntertwinerResult solve_intertwiner(const LocalRule& rule, const Torus& window,
                                    std::uint64_t seed, const Tolerances& tol) {
  if (static_cast<int>(window.extents.size()) != rule.lattice_dim()) {
    throw InvariantError("solve_intertwiner: window dimension does not match the rule");
  }
  for (auto e : window.extents) {
    if (e < 1) throw InvariantError("solve_intertwiner: window extents must be positive");
  }
  if (!offsets_fit(rule.neighborhood(), window)) {
    throw InvariantError("solve_intertwiner: neighborhood offsets collide on this window");
  }
  const int d = rule.cell_dim();
  const std::int64_t cells = window.cells();
  const Index n = window_dim(d, cells);
  const std::vector<int> dims(static_cast<std::size_t>(cells), d);
  std::mt19937_64 rng(seed);

  IntertwinerResult out;
  out.window = window;

  const auto generator = [&](int i, int j, std::int64_t c) {
    return place(rule.image_at(i, j, window.site(c)), window);
  };

  // Column for the all-quiescent basis vector: the common fixed space of the
  // images of the quiescent projectors.
  std::vector<Placed> vacuum;
  for (std::int64_t c = 0; c < cells; ++c) vacuum.push_back(generator(0, 0, c));
  Vector x0;
  if (n <= kExactFixedSpace) {
    Matrix stacked(n * cells, n);
    for (std::int64_t c = 0; c < cells; ++c) {
      Matrix g = Matrix::Identity(n, n);
      apply_on_legs(vacuum[static_cast<std::size_t>(c)].m, dims, vacuum[static_cast<std::size_t>(c)].pos, g);
      stacked.middleRows(c * n, n) = Matrix::Identity(n, n) - g;
    }
    Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    int null = 0;
    for (Index k = 0; k < sv.size(); ++k) null += sv(k) <= tol.rank ? 1 : 0;
    out.nullspace_dim = null;
    if (null == 1) x0 = svd.matrixV().col(n - 1);
  } else {
    Matrix y = random_probes(n, kProbes, rng);
    for (int round = 0; round < 2; ++round) {
      for (const auto& g : vacuum) apply_on_legs(g.m, dims, g.pos, y);
    }
    Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Index k = 0; k < sv.size(); ++k) rank += sv(k) > tol.rank ? 1 : 0;
    out.nullspace_dim = rank;
    if (rank == 1) x0 = svd.matrixU().col(0);
  }
  if (out.nullspace_dim == 0) {
    out.uniqueness = Uniqueness::no_solution;
    return out;
  }
  if (out.nullspace_dim > 1) {
    out.uniqueness = Uniqueness::non_unique;
    return out;
  }
  out.uniqueness = Uniqueness::unique;

  // Every other column follows from X e_i0(z) = G_i0(z) X, one cell at a time.
  Matrix x = Matrix::Zero(n, n);
  x.col(0) = x0;
  std::vector<std::int64_t> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Index> filled = {0};
  std::vector<Index> stride(static_cast<std::size_t>(cells));
  for (std::int64_t c = cells, s = 1; c-- > 0; s *= d) stride[static_cast<std::size_t>(c)] = s;
  for (std::int64_t c : order) {
    Matrix src(n, static_cast<Index>(filled.size()));
    for (std::size_t k = 0; k < filled.size(); ++k) src.col(static_cast<Index>(k)) = x.col(filled[k]);
    const std::size_t before = filled.size();
    for (int i = 1; i < d; ++i) {
      const Placed g = generator(i, 0, c);
      Matrix moved = src;
      apply_on_legs(g.m, dims, g.pos, moved);
      for (std::size_t k = 0; k < before; ++k) {
        const Index a = filled[k] + i * stride[static_cast<std::size_t>(c)];
        x.col(a) = moved.col(static_cast<Index>(k));
        filled.push_back(a);
      }
    }
  }

  // Residual of X e_ij(z) = G_ij(z) X on the checked columns.
  std::vector<Index> cols;
  out.residual_exhaustive = n <= kExhaustiveResidual;
  if (out.residual_exhaustive) {
    cols.resize(static_cast<std::size_t>(n));
    std::iota(cols.begin(), cols.end(), 0);
  } else {
    std::uniform_int_distribution<Index> pick(0, n - 1);
    cols.push_back(0);
    for (int k = 0; k < 2 * kProbes; ++k) cols.push_back(pick(rng));
  }
  Matrix sub(n, static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Index>(k)) = x.col(cols[k]);
  for (std::int64_t c = 0; c < cells; ++c) {
    const Index st = stride[static_cast<std::size_t>(c)];
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        // Products of e_i0 and e_0j generate the rest; small windows check all.
        if (!out.residual_exhaustive && i != 0 && j != 0) continue;
        const Placed g = generator(i, j, c);
        Matrix rhs = sub;
        apply_on_legs(g.m, dims, g.pos, rhs);
        for (std::size_t k = 0; k < cols.size(); ++k) {
          const Index a = cols[k];
          const Index digit = (a / st) % d;
          const auto col = static_cast<Index>(k);
          const double dev = digit == j
                                 ? (rhs.col(col) - x.col(a + (i - j) * st)).cwiseAbs().maxCoeff()
                                 : rhs.col(col).cwiseAbs().maxCoeff();
          out.residual = std::max(out.residual, dev);
        }
      }
    }
  }

  out.r = canonicalize_phase(x.adjoint());
  if (n <= kExactUnitarity) {
    out.unitarity = unitarity_defect(out.r);
  } else {
    const Matrix probes = random_probes(n, kProbes, rng);
    out.unitarity = (out.r.adjoint() * (out.r * probes) - probes).colwise().norm().maxCoeff();
  }
  return out;
}

IntertwinerResult solve_intertwiner_stabilized(const LocalRule& rule, std::uint64_t seed,
                                               const Tolerances& tol, int start, int max_extent) {
  const int n = rule.lattice_dim();
  int extent = std::max(start, 1);
  const auto cube = [n](int e) { return Torus{std::vector<std::int64_t>(static_cast<std::size_t>(n), e)}; };
  while (!offsets_fit(rule.neighborhood(), cube(extent))) ++extent;
  if (extent > max_extent) throw InvariantError("solve_intertwiner_stabilized: no admissible window");
  IntertwinerResult last = solve_intertwiner(rule, cube(extent), seed, tol);
  for (int e = extent + 1; e <= max_extent; ++e) {
    IntertwinerResult next;
    try {
      next = solve_intertwiner(rule, cube(e), seed, tol);
    } catch (const InvariantError&) {
      break;  // window space too large
    }
    const bool stable = next.nullspace_dim == last.nullspace_dim;
    last = std::move(next);
    if (stable) break;
  }
  return last;
}

Matrix windowed_evolution(const QlgaModel& m, const Torus& window) {
  const int d = m.cell_dim();
  const std::int64_t cells = window.cells();
  const Index n = window_dim(d, cells);
  const auto& offsets = m.neighborhood().offsets();
  const std::size_t k = offsets.size();
  // source[x][y]: window cell feeding component y of cell x.
  std::vector<std::vector<std::int64_t>> source(static_cast<std::size_t>(cells));
  for (std::int64_t c = 0; c < cells; ++c) {
    const Site s = window.site(c);
    for (const auto& y : offsets) source[static_cast<std::size_t>(c)].push_back(window.index_of(s + y));
  }
  Matrix out = Matrix::Zero(n, n);
  std::vector<std::vector<std::uint32_t>> in_digits(static_cast<std::size_t>(cells));
  std::vector<std::uint32_t> sub(k);
  for (Index a = 0; a < n; ++a) {
    Index rest = a;
    for (std::int64_t c = cells; c-- > 0;) {
      in_digits[static_cast<std::size_t>(c)] = m.decode(static_cast<std::uint32_t>(rest % d));
      rest /= d;
    }
    Index b = 0;
    for (std::int64_t c = 0; c < cells; ++c) {
      for (std::size_t y = 0; y < k; ++y) {
        sub[y] = in_digits[static_cast<std::size_t>(source[static_cast<std::size_t>(c)][y])][y];
      }
      b = b * d + m.encode(sub);
    }
    out(b, a) = 1.0;
  }
  const std::vector<int> dims(static_cast<std::size_t>(cells), d);
  for (std::int64_t c = 0; c < cells; ++c) {
    const int pos[] = {static_cast<int>(c)};
    apply_on_legs(m.collision(), dims, pos, out);
  }
  return out;
}

PhaseComparison compare_up_to_phase(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvariantError("compare_up_to_phase: shape mismatch");
  }
  PhaseComparison out;
  const Complex t = hs_inner(a, b);
  out.overlap = std::abs(t) / static_cast<double>(a.rows());
  const Complex phase = std::abs(t) > 0.0 ? t / std::abs(t) : Complex{1.0, 0.0};
  out.max_deviation = a.size() ? (b - phase * a).cwiseAbs().maxCoeff() : 0.0;
  return out;
}

}  // namespace qca
