#include "qca/heisenberg.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "qca/error.hpp"

namespace qca {

// ------------------------------------------------------------- LocalRule

LocalRule::LocalRule(Neighborhood neighborhood, int cell_dim, std::vector<LocalOperator> images)
    : neighborhood_(std::move(neighborhood)), cell_dim_(cell_dim), images_(std::move(images)) {
  if (images_.size() != static_cast<std::size_t>(cell_dim_ * cell_dim_)) {
    throw InvariantError("a local rule needs d*d images");
  }
  for (const auto& img : images_) {
    if (img.cell_dim() != cell_dim_) throw InvariantError("rule image cell dimension mismatch");
  }
}

LocalOperator LocalRule::image_at(int i, int j, const Site& z) const {
  // gamma(e_ij at z) = mu_{-z} gamma(e_ij at 0); translate_operator moves by -(-z).
  return translate_operator(image(i, j), -z);
}

LocalOperator LocalRule::apply_cell(const Matrix& a, const Site& z) const {
  if (a.rows() != cell_dim_ || a.cols() != cell_dim_) {
    throw InvariantError("apply_cell: matrix size does not match the cell dimension");
  }
  const Site origin = Site::origin(lattice_dim());
  std::vector<Site> u = neighborhood_.at(origin);
  for (const auto& img : images_) u = support_union(u, img.support());
  Matrix sum = Matrix::Zero(Index{1}, Index{1});
  bool first = true;
  for (int i = 0; i < cell_dim_; ++i) {
    for (int j = 0; j < cell_dim_; ++j) {
      const Complex c = a(i, j);
      if (c == Complex{0.0, 0.0}) continue;
      Matrix term = embed(image(i, j), u).matrix() * c;
      if (first) {
        sum = std::move(term);
        first = false;
      } else {
        sum += term;
      }
    }
  }
  if (first) {
    Index n = 1;
    for (std::size_t k = 0; k < u.size(); ++k) n *= cell_dim_;
    sum = Matrix::Zero(n, n);
  }
  return translate_operator(reduce(LocalOperator(std::move(u), std::move(sum), cell_dim_)), -z);
}

LocalRule LocalRule::identity(Neighborhood neighborhood, int cell_dim) {
  const Site origin = Site::origin(neighborhood.dim());
  std::vector<LocalOperator> images;
  for (int i = 0; i < cell_dim; ++i) {
    for (int j = 0; j < cell_dim; ++j) {
      images.push_back(LocalOperator::matrix_unit(origin, i, j, cell_dim));
    }
  }
  return LocalRule(std::move(neighborhood), cell_dim, std::move(images));
}

// ------------------------------------------------------- gamma extraction

std::vector<LocalOperator> gamma_of_cell(const EvolutionHandle& r, const Site& z,
                                         const Neighborhood& neighborhood,
                                         const Tolerances& tol) {
  const int d = r.cell_dim();
  const std::vector<Site> allowed = neighborhood.at(z);
  std::vector<LocalOperator> out;
  out.reserve(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const LocalOperator img = r.heisenberg(LocalOperator::matrix_unit(z, i, j, d), tol.reduce);
      const double leak = leakage_outside(img, allowed);
      if (leak > tol.leakage) {
        throw SupportLeakage("image of e_" + std::to_string(i) + std::to_string(j) + " at " +
                                 z.to_string() + " leaks outside the declared neighborhood",
                             leak);
      }
      out.push_back(restrict_support(img, allowed, tol.reduce));
    }
  }
  return out;
}

LocalRule extract_rule(const EvolutionHandle& r, const Neighborhood& neighborhood,
                       const Tolerances& tol) {
  return LocalRule(neighborhood, r.cell_dim(),
                   gamma_of_cell(r, Site::origin(neighborhood.dim()), neighborhood, tol));
}

Neighborhood light_cone(const EvolutionHandle& r, const Tolerances& tol) {
  const int d = r.cell_dim();
  const Site origin = Site::origin(r.lattice_dim());
  std::vector<Site> support;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const LocalOperator img = r.heisenberg(LocalOperator::matrix_unit(origin, i, j, d), tol.reduce);
      support = support_union(support, img.support());
    }
  }
  if (support.empty()) support.push_back(origin);
  return Neighborhood(std::move(support));
}

MatrixElementImages gamma_by_matrix_elements(const EvolutionHandle& r, const Site& z,
                                             const Neighborhood& neighborhood,
                                             const EvolutionLimits& limits) {
  const int d = r.cell_dim();
  const int n = neighborhood.dim();
  const std::vector<Site> window = neighborhood.at(z);
  std::vector<Site> hull = window;
  for (const Site& w : window) {
    for (const Site& y : neighborhood.offsets()) hull.push_back(w - y);
  }
  std::sort(hull.begin(), hull.end());
  hull.erase(std::unique(hull.begin(), hull.end()), hull.end());
  const auto configs = window_configurations(hull, d);
  const auto nh = static_cast<Index>(configs.size());
  const CellSpace cell{d, 0};

  // Column (c, v) of `a` holds the amplitudes of R|c> whose value at z is v,
  // indexed by the environment (the configuration with z made quiescent).
  std::map<Configuration, Index> env_ids;
  std::vector<Eigen::Triplet<Complex>> triplets;
  for (Index c = 0; c < nh; ++c) {
    const SparseState out = r.apply(SparseState::basis(n, cell, configs[c]), limits);
    for (const Term& t : out.terms()) {
      const std::uint32_t v = t.config.value_at(z);
      const Configuration env = t.config.with_value(z, 0);
      const auto [it, inserted] = env_ids.emplace(env, static_cast<Index>(env_ids.size()));
      triplets.emplace_back(it->second, c * d + v, t.amplitude);
    }
  }
  Eigen::SparseMatrix<Complex> a(static_cast<Index>(env_ids.size()), nh * d);
  a.setFromTriplets(triplets.begin(), triplets.end());
  // k((c', i), (c, j)) = <R c'| e_ij(z) |R c>.
  const Matrix k = Matrix(a.adjoint() * a);

  std::vector<int> positions;
  for (const Site& w : window) {
    positions.push_back(static_cast<int>(std::lower_bound(hull.begin(), hull.end(), w) -
                                         hull.begin()));
  }
  const std::vector<int> hull_dims(hull.size(), d);
  const LegSplit split = split_legs(hull_dims, positions);  // window part, environment part
  const auto nw = static_cast<Index>(split.sub.size());

  MatrixElementImages result;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      Matrix kij(nh, nh);
      for (Index c = 0; c < nh; ++c) {
        for (Index cp = 0; cp < nh; ++cp) kij(cp, c) = k(cp * d + i, c * d + j);
      }
      // Window block with quiescent environment: environment offset 0.
      Matrix m(nw, nw);
      for (Index b = 0; b < nw; ++b) {
        for (Index a2 = 0; a2 < nw; ++a2) m(a2, b) = kij(split.sub[a2], split.sub[b]);
      }
      const Matrix local = embed_legs(m, hull_dims, positions);
      double leak = (kij - local).cwiseAbs().maxCoeff();
      for (Index c = 0; c < nh; ++c) {
        const double total = k(c * d + j, c * d + j).real();
        const double captured = kij.col(c).squaredNorm();
        result.norm_deficit = std::max(result.norm_deficit, total - captured);
      }
      result.leakage = std::max(result.leakage, leak);
      result.images.push_back(reduce(LocalOperator(window, std::move(m), d)));
    }
  }
  return result;
}

// ------------------------------------------------------------ validation

double ValidationReport::max_residual() const {
  double m = 0.0;
  for (const auto& c : checks) m = std::max(m, c.residual);
  return m;
}

namespace {

/// Leg permutation putting `first` then `second` (both subsets of the
/// support, disjoint, covering it) in order.
std::vector<int> leg_order(const std::vector<Site>& support, const std::vector<Site>& first,
                           const std::vector<Site>& second) {
  std::vector<int> perm;
  for (const auto* part : {&first, &second}) {
    for (const Site& s : *part) {
      perm.push_back(static_cast<int>(std::lower_bound(support.begin(), support.end(), s) -
                                      support.begin()));
    }
  }
  return perm;
}

struct SchmidtTerms {
  std::vector<double> weights;  // squared coefficients times outer-factor norms
  std::vector<Matrix> shared;   // unit-norm factors on the shared legs
};

/// Operator-Schmidt decomposition of `m` with legs (outer, shared) or
/// (shared, outer).
SchmidtTerms schmidt(const Matrix& m, Index d_outer, Index d_shared, bool shared_first) {
  const Matrix re = shared_first ? realign(m, d_shared, d_outer) : realign(m, d_outer, d_shared);
  Eigen::BDCSVD<Matrix> svd(re, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  SchmidtTerms out;
  const double cutoff = (s.size() ? s(0) : 0.0) * 1e-15;
  for (Index k = 0; k < s.size(); ++k) {
    if (s(k) <= cutoff) break;
    const Vector w = shared_first ? Vector(svd.matrixU().col(k)) : Vector(svd.matrixV().col(k).conjugate());
    Matrix f(d_shared, d_shared);
    for (Index i = 0; i < d_shared; ++i) {
      for (Index j = 0; j < d_shared; ++j) f(i, j) = w(i * d_shared + j);
    }
    out.weights.push_back(s(k) * s(k));
    out.shared.push_back(std::move(f));
  }
  return out;
}

Index pow_index(int base, std::size_t exp) {
  Index out = 1;
  for (std::size_t k = 0; k < exp; ++k) out *= base;
  return out;
}

}  // namespace

double commutator_norm(const LocalOperator& a, const LocalOperator& b) {
  const int d = a.cell_dim();
  std::vector<Site> shared;
  std::set_intersection(a.support().begin(), a.support().end(), b.support().begin(),
                        b.support().end(), std::back_inserter(shared));
  if (shared.empty()) return 0.0;
  std::vector<Site> only_a;
  std::vector<Site> only_b;
  std::set_difference(a.support().begin(), a.support().end(), shared.begin(), shared.end(),
                      std::back_inserter(only_a));
  std::set_difference(b.support().begin(), b.support().end(), shared.begin(), shared.end(),
                      std::back_inserter(only_b));
  const Index dp = pow_index(d, only_a.size());
  const Index dc = pow_index(d, shared.size());
  const Index dq = pow_index(d, only_b.size());
  const Matrix ma = permute_legs(a.matrix(), a.leg_dims(), leg_order(a.support(), only_a, shared));
  const Matrix mb = permute_legs(b.matrix(), b.leg_dims(), leg_order(b.support(), shared, only_b));
  const SchmidtTerms sa = schmidt(ma, dp, dc, false);
  const SchmidtTerms sb = schmidt(mb, dq, dc, true);
  double sum = 0.0;
  for (std::size_t k = 0; k < sa.shared.size(); ++k) {
    for (std::size_t l = 0; l < sb.shared.size(); ++l) {
      const Matrix c = sa.shared[k] * sb.shared[l] - sb.shared[l] * sa.shared[k];
      sum += sa.weights[k] * sb.weights[l] * c.squaredNorm();
    }
  }
  return std::sqrt(sum);
}

ValidationReport validate_rule(const LocalRule& rule, const Tolerances& tol) {
  const int d = rule.cell_dim();
  const Site origin = Site::origin(rule.lattice_dim());
  const std::vector<Site> home = rule.neighborhood().at(origin);
  ValidationReport report;
  const auto record = [&](std::string name, double residual) {
    const bool ok = std::isfinite(residual) && residual <= tol.validation;
    report.checks.push_back({std::move(name), residual, ok});
    report.accepted = report.accepted && ok;
  };

  double support = 0.0;
  for (const auto& img : rule.images()) support = std::max(support, leakage_outside(img, home));
  record("support", support);

  // Work on images padded to the neighborhood of the origin.
  std::vector<Matrix> g;
  g.reserve(rule.images().size());
  for (const auto& img : rule.images()) g.push_back(embed(restrict_support(img, home), home).matrix());
  const auto at = [&](int i, int j) -> const Matrix& {
    return g[static_cast<std::size_t>(i * d + j)];
  };
  const auto max_abs = [](const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; };

  double star = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) star = std::max(star, max_abs(at(i, j).adjoint() - at(j, i)));
  }
  record("adjoint", star);

  // Generating relations of the matrix units; with the *-map they imply
  // gamma(e_ij) gamma(e_kl) = delta_jk gamma(e_il).
  double hom = 0.0;
  Matrix prod;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      prod.noalias() = at(i, 0) * at(0, j);
      hom = std::max(hom, max_abs(prod - at(i, j)));
      prod.noalias() = at(0, i) * at(j, 0);
      if (i == j) {
        hom = std::max(hom, max_abs(prod - at(0, 0)));
      } else {
        hom = std::max(hom, max_abs(prod));
      }
    }
  }
  record("homomorphism", hom);

  Matrix unit = -Matrix::Identity(g.front().rows(), g.front().cols());
  for (int i = 0; i < d; ++i) unit += at(i, i);
  record("unitality", max_abs(unit));

  // Translates commute: test a cyclic shift and a diagonal with distinct
  // entries, which generate the whole cell algebra.
  Matrix shift = Matrix::Zero(d, d);
  Matrix diag = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    shift((i + 1) % d, i) = 1.0;
    diag(i, i) = static_cast<double>(i + 1) / d;
  }
  const LocalOperator gens[] = {rule.apply_cell(shift, origin), rule.apply_cell(diag, origin)};
  double comm = 0.0;
  for (const Site& z : rule.neighborhood().differences()) {
    if (z.is_origin()) continue;
    for (const auto& a : gens) {
      for (const auto& b : gens) {
        const LocalOperator bz = translate_operator(b, -z);
        const auto u = support_union(a.support(), bz.support());
        const double norm = std::sqrt(static_cast<double>(pow_index(d, u.size())));
        comm = std::max(comm, commutator_norm(a, bz) / norm);
      }
    }
  }
  record("commuting_translates", comm);
  return report;
}

// ------------------------------------------------------ Schrödinger checks

TranslationReport check_translation_invariance(const EvolutionHandle& r, int extent,
                                               const Site& z, const Tolerances& tol,
                                               const EvolutionLimits& limits) {
  if (extent < 1) throw InvariantError("translation window extent must be positive");
  const int n = r.lattice_dim();
  const int d = r.cell_dim();
  std::vector<Site> box;
  std::vector<std::int64_t> coords(static_cast<std::size_t>(n), 0);
  std::int64_t count = 1;
  for (int a = 0; a < n; ++a) count *= extent;
  for (std::int64_t idx = 0; idx < count; ++idx) {
    std::int64_t rem = idx;
    for (int a = n; a-- > 0;) {
      coords[a] = rem % extent;
      rem /= extent;
    }
    box.emplace_back(std::span<const std::int64_t>(coords));
  }
  const CellSpace cell{d, 0};
  std::vector<SparseState> lhs;
  std::vector<SparseState> rhs;
  Complex overlap{0.0, 0.0};
  for (const Configuration& c : window_configurations(box, d)) {
    const SparseState psi = SparseState::basis(n, cell, c);
    rhs.push_back(r.apply(psi, limits));
    lhs.push_back(translate_state(r.apply(translate_state(psi, -z), limits), z));
    overlap += inner_product(rhs.back(), lhs.back());
  }
  TranslationReport report;
  const Complex phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex{1.0, 0.0};
  report.theta = std::arg(phase);
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    report.residual = std::max(report.residual, distance(lhs[k], scale(rhs[k], phase, 0.0)));
  }
  report.passed = report.residual <= tol.translation;
  return report;
}

namespace {

SparseState random_superposition(std::span<const Site> sites, int lattice_dim, int d,
                                 int max_active, int max_configs, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nconf(1, max_configs);
  std::uniform_int_distribution<int> nact(0, std::min<int>(max_active, static_cast<int>(sites.size())));
  std::uniform_int_distribution<std::uint32_t> value(1, static_cast<std::uint32_t>(d - 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Term> terms;
  const int m = nconf(rng);
  for (int k = 0; k < m; ++k) {
    std::vector<Site> pool(sites.begin(), sites.end());
    std::shuffle(pool.begin(), pool.end(), rng);
    const int active = d > 1 ? nact(rng) : 0;
    std::vector<ActiveCell> cells;
    for (int a = 0; a < active; ++a) cells.push_back({pool[a], value(rng)});
    const double re = normal(rng);
    const double im = normal(rng);
    terms.push_back({Configuration::from_cells(std::move(cells)), Complex{re, im}});
  }
  SparseState psi = SparseState::from_terms(lattice_dim, CellSpace{d, 0}, std::move(terms));
  if (psi.norm() == 0.0) return SparseState::vacuum(lattice_dim, CellSpace{d, 0});
  return normalize(psi);
}

SparseState product(const SparseState& a, const SparseState& b) {
  TermAccumulator acc(a.lattice_dim(), a.cell());
  for (const Term& s : a.terms()) {
    for (const Term& t : b.terms()) {
      std::vector<ActiveCell> cells(s.config.cells().begin(), s.config.cells().end());
      cells.insert(cells.end(), t.config.cells().begin(), t.config.cells().end());
      acc.add(Configuration::from_cells(std::move(cells)), s.amplitude * t.amplitude);
    }
  }
  return std::move(acc).finish(0.0);
}

}  // namespace

CausalityReport check_causality_density(const EvolutionHandle& r, const Site& z,
                                        const Neighborhood& neighborhood, int trials,
                                        std::uint64_t seed, const Tolerances& tol,
                                        const EvolutionLimits& limits) {
  const int n = r.lattice_dim();
  const int d = r.cell_dim();
  const std::vector<Site> inner = neighborhood.at(z);
  // Environment: every site within Chebyshev distance 1 of N_z, outside it.
  std::vector<Site> env;
  for (const Site& s : inner) {
    std::int64_t count = 1;
    for (int a = 0; a < n; ++a) count *= 3;
    for (std::int64_t idx = 0; idx < count; ++idx) {
      std::vector<std::int64_t> delta(static_cast<std::size_t>(n));
      std::int64_t rem = idx;
      for (int a = 0; a < n; ++a) {
        delta[a] = rem % 3 - 1;
        rem /= 3;
      }
      const Site t = s + Site(std::span<const std::int64_t>(delta));
      if (!std::binary_search(inner.begin(), inner.end(), t)) env.push_back(t);
    }
  }
  std::sort(env.begin(), env.end());
  env.erase(std::unique(env.begin(), env.end()), env.end());

  std::mt19937_64 rng(seed);
  CausalityReport report;
  const std::vector<Site> target = {z};
  for (int trial = 0; trial < trials; ++trial) {
    bool done = false;
    for (int attempt = 0; attempt < 200 && !done; ++attempt) {
      const SparseState phi = random_superposition(inner, n, d, static_cast<int>(inner.size()), 2, rng);
      const SparseState chi = random_superposition(env, n, d, 2, 2, rng);
      const SparseState chi2 = random_superposition(env, n, d, 2, 2, rng);
      try {
        const SparseState out1 = r.apply(product(phi, chi), limits);
        const SparseState out2 = r.apply(product(phi, chi2), limits);
        const Matrix diff = restrict_density(out1, target).matrix -
                            restrict_density(out2, target).matrix;
        report.max_deviation = std::max(report.max_deviation, diff.cwiseAbs().maxCoeff());
        done = true;
      } catch (const TermCapExceeded&) {
        // Resample: this draw is beyond the desk-scale term budget.
      }
    }
    if (!done) throw InvariantError("causality check: could not draw a state within the term cap");
    ++report.trials;
  }
  report.passed = report.max_deviation <= tol.causality;
  return report;
}

ReversibilityReport check_structural_reversibility(const EvolutionHandle& r, const Site& z,
                                                   const Neighborhood& neighborhood,
                                                   const Tolerances& tol) {
  const int d = r.cell_dim();
  const std::vector<Site> forward = neighborhood.at(z);
  const std::vector<Site> backward = neighborhood.reflected().at(z);
  ReversibilityReport report;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const LocalOperator e = LocalOperator::matrix_unit(z, i, j, d);
      const LocalOperator f = r.heisenberg(e, tol.reduce);
      const LocalOperator b = r.heisenberg_inverse(e, tol.reduce);
      report.forward_leakage = std::max(report.forward_leakage, leakage_outside(f, forward));
      report.backward_leakage = std::max(report.backward_leakage, leakage_outside(b, backward));
      report.forward_support = support_union(report.forward_support, f.support());
      report.backward_support = support_union(report.backward_support, b.support());
    }
  }
  report.passed = report.forward_leakage <= tol.leakage && report.backward_leakage <= tol.leakage;
  return report;
}

}  // namespace qca
