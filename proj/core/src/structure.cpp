#include "qca/structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qca/error.hpp"

namespace qca {

namespace {

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Index ipow(Index base, std::size_t exp) {
  Index out = 1;
  for (std::size_t k = 0; k < exp; ++k) out *= base;
  return out;
}

Matrix unvec(const Vector& v, Index d) {
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = v(i * d + j);
  }
  return m;
}

Vector vec(const Matrix& m) {
  const Index d = m.rows();
  Vector v(d * m.cols());
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  }
  return v;
}

Complex complex_gaussian(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

/// Conjugates every cell leg of `m` by s: (x) s  m  (x) s^dagger.
Matrix conjugate_legs(Matrix m, const Matrix& s, std::size_t legs) {
  const std::vector<int> dims(legs, static_cast<int>(s.rows()));
  for (std::size_t k = 0; k < legs; ++k) {
    const int pos[] = {static_cast<int>(k)};
    apply_on_legs(s, dims, pos, m);
  }
  m.adjointInPlace();
  for (std::size_t k = 0; k < legs; ++k) {
    const int pos[] = {static_cast<int>(k)};
    apply_on_legs(s, dims, pos, m);
  }
  m.adjointInPlace();
  return m;
}

}  // namespace

// ---------------------------------------------------------------- patches

Patch compute_patch(const LocalRule& rule, const Site& y, const Tolerances& tol) {
  const int d = rule.cell_dim();
  const Site x = Site::origin(rule.lattice_dim());
  const Site z = x - y;
  if (!rule.neighborhood().contains(y)) {
    throw InvariantError("compute_patch: offset " + y.to_string() + " is not in the neighborhood");
  }
  const std::vector<Site> home = rule.neighborhood().at(z);
  const int xpos = static_cast<int>(std::lower_bound(home.begin(), home.end(), x) - home.begin());
  const std::vector<int> dims(home.size(), d);
  const Index big = ipow(d, home.size());
  const auto nd = static_cast<Index>(d) * d;

  std::vector<Matrix> images;
  images.reserve(static_cast<std::size_t>(nd));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) images.push_back(embed(rule.image_at(i, j, z), home).matrix());
  }
  // Hilbert–Schmidt Gram matrix of the images of the matrix units.
  Matrix gram(nd, nd);
  for (Index a = 0; a < nd; ++a) {
    for (Index b = a; b < nd; ++b) {
      gram(a, b) = hs_inner(images[a], images[b]);
      gram(b, a) = std::conj(gram(a, b));
    }
  }
  // <G_b, (e_kl at x) (x) I> / norm, through the partial trace at x.
  const int keep[] = {xpos};
  const double q2_norm = std::sqrt(static_cast<double>(big / d));
  Matrix overlaps(nd, nd);  // row b, column (k, l)
  for (Index b = 0; b < nd; ++b) {
    const Matrix pt = partial_trace(images[b], dims, keep);
    for (Index k = 0; k < d; ++k) {
      for (Index l = 0; l < d; ++l) overlaps(b, k * d + l) = std::conj(pt(k, l)) / q2_norm;
    }
  }
  images.clear();

  // Orthonormal basis Q1 = images * W of gamma(A_z).
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const auto& lambda = eig.eigenvalues();
  const double lmax = lambda.size() ? lambda(lambda.size() - 1) : 0.0;
  std::vector<Index> keep_cols;
  for (Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) > lmax * 1e-12) keep_cols.push_back(k);
  }
  Matrix w(nd, static_cast<Index>(keep_cols.size()));
  for (std::size_t c = 0; c < keep_cols.size(); ++c) {
    w.col(static_cast<Index>(c)) =
        eig.eigenvectors().col(keep_cols[c]) / std::sqrt(lambda(keep_cols[c]));
  }
  // Cosines of the principal angles between gamma(A_z) and A_x (x) I are the
  // singular values of Q1^dagger Q2; eigenvalue one of P1 P2 P1 is sigma = 1.
  const Matrix c = w.adjoint() * overlaps;
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Patch patch{x, z, y, {}};
  const auto& sigma = svd.singularValues();
  for (Index k = 0; k < sigma.size(); ++k) {
    if (sigma(k) * sigma(k) >= 1.0 - tol.rank) {
      // The Q2 side of the principal pair is exactly (A at x) (x) I.
      patch.basis.push_back(unvec(svd.matrixV().col(k), d));
    }
  }
  return patch;
}

std::vector<Patch> compute_patches(const LocalRule& rule, const Tolerances& tol) {
  std::vector<Patch> out;
  for (const Site& y : rule.neighborhood().offsets()) out.push_back(compute_patch(rule, y, tol));
  return out;
}

QlgaCondition check_qlga_condition(const std::vector<Patch>& patches, int cell_dim,
                                   const Tolerances& tol) {
  const Index d = cell_dim;
  QlgaCondition out;
  out.target = static_cast<int>(d * d);
  for (const auto& p : patches) out.patch_dims.push_back(p.dim());

  // Scale basis elements to normalized-trace norm one so products of
  // tensor-factor elements keep unit scale.
  const double s = std::sqrt(static_cast<double>(d));
  std::vector<std::size_t> radix;
  Index count = 1;
  for (const auto& p : patches) {
    if (p.basis.empty()) return out;
    radix.push_back(p.basis.size());
    count *= static_cast<Index>(p.basis.size());
  }
  // Chunked singular values: sv([A B]) = sv([U Sigma, B]).
  const Index chunk = 4096;
  Matrix carry(d * d, 0);
  std::vector<std::size_t> digit(patches.size(), 0);
  Index done = 0;
  while (done < count) {
    const Index take = std::min(chunk, count - done);
    Matrix block(d * d, carry.cols() + take);
    block.leftCols(carry.cols()) = carry;
    for (Index t = 0; t < take; ++t) {
      Matrix prod = Matrix::Identity(d, d);
      for (std::size_t p = 0; p < patches.size(); ++p) prod = prod * (patches[p].basis[digit[p]] * s);
      block.col(carry.cols() + t) = vec(prod);
      for (std::size_t p = patches.size(); p-- > 0;) {
        if (++digit[p] < radix[p]) break;
        digit[p] = 0;
      }
    }
    done += take;
    Eigen::BDCSVD<Matrix> svd(block, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    Index r = 0;
    while (r < sv.size() && sv(r) > tol.rank) ++r;
    carry = svd.matrixU().leftCols(r) * sv.head(r).asDiagonal();
  }
  out.rank = static_cast<int>(carry.cols());
  out.satisfied = out.rank == out.target;

  for (std::size_t a = 0; a < patches.size(); ++a) {
    for (std::size_t b = a + 1; b < patches.size(); ++b) {
      for (const auto& u : patches[a].basis) {
        for (const auto& v : patches[b].basis) {
          out.max_commutator = std::max(out.max_commutator, (u * v - v * u).norm());
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------- factorization

namespace {

struct Split {
  Matrix p;  // columns: product basis of the current space
  std::vector<int> dims;
  double residual = 0.0;
};

class Degenerate : public std::exception {};

/// Unitary T with T^dagger B T = End(C^r) (x) I_q for the simple algebra B
/// (given by a *-closed basis), or throws Degenerate for an unlucky sample.
Matrix split_off(const std::vector<Matrix>& basis, Index m, Index r, std::mt19937_64& rng) {
  const Index q = m / r;
  Matrix h = Matrix::Zero(m, m);
  for (const auto& b : basis) {
    const Complex c = complex_gaussian(rng);
    h += c * b + std::conj(c) * b.adjoint();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const auto& lam = eig.eigenvalues();
  const double scale = 1.0 + lam.cwiseAbs().maxCoeff();
  for (Index t = 0; t < r; ++t) {
    if (lam((t + 1) * q - 1) - lam(t * q) > 1e-7 * scale) throw Degenerate{};
    if (t + 1 < r && lam((t + 1) * q) - lam((t + 1) * q - 1) < 1e-4 * scale) throw Degenerate{};
  }
  Matrix b = Matrix::Zero(m, m);
  for (const auto& e : basis) b += complex_gaussian(rng) * e;

  Matrix t_mat(m, m);
  const Matrix e0 = eig.eigenvectors().leftCols(q);
  t_mat.leftCols(q) = e0;
  for (Index t = 1; t < r; ++t) {
    const Matrix et = eig.eigenvectors().middleCols(t * q, q);
    // p_t b p_0 is a multiple of the matrix unit e_t0 (x) I; its polar part
    // carries range(p_0) onto range(p_t).
    const Matrix y = et.adjoint() * b * e0;
    Eigen::JacobiSVD<Matrix> svd(y);
    const auto& sv = svd.singularValues();
    if (sv(0) < 1e-4 * scale || sv(q - 1) < 1e-4 * scale) throw Degenerate{};
    t_mat.middleCols(t * q, q) = et * polar_isometry(y, 0.0);
  }
  return t_mat;
}

Split split(const std::vector<std::vector<Matrix>>& algebras, std::size_t first, Index m,
            std::mt19937_64& rng, int& attempts, double tol) {
  if (first == algebras.size()) {
    if (m != 1) {
      throw StageError("factorize", "the patches do not exhaust the cell space (remaining dimension " +
                                        std::to_string(m) + ")");
    }
    return Split{Matrix::Identity(1, 1), {}, 0.0};
  }
  const auto& basis = algebras[first];
  const auto k = static_cast<Index>(basis.size());
  const auto r = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(k))));
  if (r * r != k || r < 1) {
    throw StageError("factorize", "patch dimension " + std::to_string(k) + " is not a square");
  }
  if (m % r != 0) {
    throw StageError("factorize", "patch of dimension " + std::to_string(k) +
                                      " does not fit a space of dimension " + std::to_string(m));
  }
  if (r == 1) {
    Split rest = split(algebras, first + 1, m, rng, attempts, tol);
    rest.dims.insert(rest.dims.begin(), 1);
    return rest;
  }
  const Index q = m / r;
  Matrix t_mat;
  for (int attempt = 0;; ++attempt) {
    ++attempts;
    try {
      t_mat = split_off(basis, m, r, rng);
      break;
    } catch (const Degenerate&) {
      if (attempt >= 8) {
        throw StageError("factorize", "spectral sample stayed degenerate after 8 retries");
      }
    }
  }
  const std::vector<int> dims = {static_cast<int>(r), static_cast<int>(q)};
  const int first_leg[] = {0};
  const int second_leg[] = {1};
  double residual = 0.0;
  for (const auto& b : basis) {
    const Matrix x = t_mat.adjoint() * b * t_mat;
    const Matrix a = partial_trace(x, dims, first_leg) / static_cast<double>(q);
    residual = std::max(residual, max_abs(x - kron(a, Matrix::Identity(q, q))));
  }
  std::vector<std::vector<Matrix>> reduced(algebras.size());
  for (std::size_t j = first + 1; j < algebras.size(); ++j) {
    for (const auto& c : algebras[j]) {
      const Matrix x = t_mat.adjoint() * c * t_mat;
      const Matrix inner = partial_trace(x, dims, second_leg) / static_cast<double>(r);
      residual = std::max(residual, max_abs(x - kron(Matrix::Identity(r, r), inner)));
      reduced[j].push_back(inner * std::sqrt(static_cast<double>(r)));
    }
  }
  if (residual > tol) {
    throw StageError("factorize", "patch algebras do not split as End(V) (x) I (residual " +
                                      std::to_string(residual) + ")");
  }
  Split rest = split(reduced, first + 1, q, rng, attempts, tol);
  Split out;
  out.p = t_mat * kron(Matrix::Identity(r, r), rest.p);
  out.dims = {static_cast<int>(r)};
  out.dims.insert(out.dims.end(), rest.dims.begin(), rest.dims.end());
  out.residual = std::max(residual, rest.residual);
  return out;
}

/// Splits v on legs `dims` into unit vectors with v = lambda (x) u_y. Returns
/// false when v is not a product within tol.
bool product_factors(const Vector& v, const std::vector<int>& dims, double tol,
                     std::vector<Vector>& factors) {
  factors.clear();
  Vector rest = v;
  for (int dy : dims) {
    const Index other = rest.size() / dy;
    Matrix m(dy, other);
    for (Index i = 0; i < dy; ++i) {
      for (Index j = 0; j < other; ++j) m(i, j) = rest(i * other + j);
    }
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double tail = 0.0;
    for (Index k = 1; k < sv.size(); ++k) tail += sv(k) * sv(k);
    if (std::sqrt(tail) > tol) return false;
    factors.push_back(svd.matrixU().col(0));
    rest = sv(0) * svd.matrixV().col(0).conjugate();
  }
  return true;
}

/// Splits a matrix into Kronecker factors over `dims`, each unitary with a
/// positive real (0,0) entry. Empty when the matrix is not a product.
std::vector<Matrix> kron_factors(const Matrix& s, const std::vector<int>& dims, double tol) {
  std::vector<Matrix> out;
  Matrix rest = s;
  for (int dy : dims) {
    const Index other = rest.rows() / dy;
    const Matrix re = realign(rest, dy, other);
    Eigen::JacobiSVD<Matrix> svd(re, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double tail = 0.0;
    for (Index k = 1; k < sv.size(); ++k) tail += sv(k) * sv(k);
    if (std::sqrt(tail) > tol * sv(0)) return {};
    Matrix b = unvec(svd.matrixU().col(0), dy) * std::sqrt(static_cast<double>(dy));
    rest = unvec(svd.matrixV().col(0).conjugate(), other) * (sv(0) / std::sqrt(static_cast<double>(dy)));
    const Complex corner = b(0, 0);
    if (std::abs(corner) > 0.0) {
      const Complex ph = corner / std::abs(corner);
      b *= std::conj(ph);
      rest *= ph;
    }
    out.push_back(std::move(b));
  }
  Matrix check = Matrix::Identity(1, 1);
  for (const auto& b : out) check = kron(check, b);
  if (max_abs(check - s) > tol) return {};
  return out;
}

}  // namespace

FactorizationResult factorize(const std::vector<Patch>& patches, int cell_dim,
                              std::uint64_t seed, const Tolerances& tol) {
  std::vector<std::vector<Matrix>> algebras;
  for (const auto& p : patches) algebras.push_back(p.basis);
  std::mt19937_64 rng(seed);
  FactorizationResult out;
  out.seed = seed;
  const Split sp = split(algebras, 0, cell_dim, rng, out.attempts, tol.intertwiner);
  out.s = sp.p.adjoint();
  out.dims = sp.dims;
  out.residual = sp.residual;

  // Align the frame so that S|0> = |0>, when S|0> is a product vector.
  std::vector<Vector> factors;
  out.quiescent_product = product_factors(out.s.col(0), out.dims, tol.intertwiner, factors);
  if (out.quiescent_product) {
    Matrix align = Matrix::Identity(1, 1);
    for (const auto& u : factors) align = kron(align, Matrix(unitary_with_first_column(u).adjoint()));
    out.s = align * out.s;
    const Complex lead = out.s(0, 0);
    out.s *= std::conj(lead) / std::abs(lead);
    out.quiescent.assign(out.dims.size(), 0);
  } else {
    out.s = canonicalize_phase(out.s);
  }
  out.leg_bases = kron_factors(out.s, out.dims, tol.intertwiner);
  return out;
}

// ---------------------------------------------------------------- collision

namespace {

/// gamma'(a at origin) on the neighborhood of the origin, with
/// gamma' the rule in the frame of s.
Matrix conjugated_image(const LocalRule& rule, const Matrix& s, const Matrix& a,
                        const std::vector<Site>& home) {
  const Site origin = Site::origin(rule.lattice_dim());
  const LocalOperator g = rule.apply_cell(s.adjoint() * a * s, origin);
  return conjugate_legs(embed(restrict_support(g, home), home).matrix(), s, home.size());
}

}  // namespace

LocalRule conjugate_rule(const LocalRule& rule, const Matrix& s, const Tolerances& tol) {
  const int d = rule.cell_dim();
  const Site origin = Site::origin(rule.lattice_dim());
  const std::vector<Site> home = rule.neighborhood().at(origin);
  const Index big = ipow(d, home.size());
  const auto nd = static_cast<Index>(d) * d;
  // gamma(S^dagger e_ij S) = sum_kl conj(S_ik) S_jl gamma(e_kl), as one product.
  Matrix stacked(big * big, nd);
  for (Index u = 0; u < nd; ++u) {
    const Matrix m = embed(rule.images()[static_cast<std::size_t>(u)], home).matrix();
    stacked.col(u) = Eigen::Map<const Vector>(m.data(), big * big);
  }
  Matrix coeff(nd, nd);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      for (Index k = 0; k < d; ++k) {
        for (Index l = 0; l < d; ++l) coeff(k * d + l, i * d + j) = std::conj(s(i, k)) * s(j, l);
      }
    }
  }
  const Matrix mixed = stacked * coeff;
  stacked.resize(0, 0);
  std::vector<LocalOperator> images;
  for (Index u = 0; u < nd; ++u) {
    Matrix m = Eigen::Map<const Matrix>(mixed.col(u).data(), big, big);
    images.push_back(reduce(LocalOperator(home, conjugate_legs(std::move(m), s, home.size()), d), tol.reduce));
  }
  return LocalRule(rule.neighborhood(), d, std::move(images));
}

double rule_distance(const LocalRule& a, const LocalRule& b) {
  if (a.cell_dim() != b.cell_dim()) return std::numeric_limits<double>::infinity();
  double out = 0.0;
  for (std::size_t k = 0; k < a.images().size(); ++k) {
    out = std::max(out, max_abs_difference(a.images()[k], b.images()[k]));
  }
  return out;
}

Matrix extract_collision(const LocalRule& rule, const FactorizationResult& fact,
                         const Tolerances& tol) {
  const int d = rule.cell_dim();
  const auto& offsets = rule.neighborhood().offsets();
  const std::size_t k = offsets.size();
  if (fact.dims.size() != k) throw StageError("collision", "factor count does not match the neighborhood");
  const Site origin = Site::origin(rule.lattice_dim());
  const std::vector<Site> home = rule.neighborhood().at(origin);

  // Undo the propagation: leg y of cell 0 arrived from leg y of cell y.
  std::vector<int> sub_dims;
  for (std::size_t c = 0; c < k; ++c) sub_dims.insert(sub_dims.end(), fact.dims.begin(), fact.dims.end());
  std::vector<int> legs;
  for (std::size_t c = 0; c < k; ++c) legs.push_back(static_cast<int>(c * k + c));
  const double other = static_cast<double>(ipow(d, k)) / d;
  double locality = 0.0;
  const auto phi = [&](const Matrix& a) {
    const Matrix x = conjugated_image(rule, fact.s, a, home);
    const Matrix local = partial_trace(x, sub_dims, legs) / other;
    locality = std::max(locality, max_abs(x - embed_legs(local, sub_dims, legs)));
    return local;
  };
  Matrix e = Matrix::Zero(d, d);
  e(0, 0) = 1.0;
  const Matrix p = phi(e);
  Eigen::SelfAdjointEigenSolver<Matrix> eig((p + p.adjoint()) / 2.0);
  const auto& lam = eig.eigenvalues();
  if (std::abs(lam(d - 1) - 1.0) > tol.intertwiner || (d > 1 && std::abs(lam(d - 2)) > tol.intertwiner)) {
    throw StageError("collision", "image of the quiescent projector is not a rank-one projection");
  }
  const Vector v = eig.eigenvectors().col(d - 1);
  Matrix g(d, d);
  for (int i = 0; i < d; ++i) {
    Matrix ei0 = Matrix::Zero(d, d);
    ei0(i, 0) = 1.0;
    g.col(i) = (i == 0 ? p : phi(ei0)) * v;
  }
  if (locality > tol.intertwiner) {
    throw StageError("collision", "rule is not a propagation followed by an on-site map (residual " +
                                      std::to_string(locality) + ")");
  }
  Matrix f = g.adjoint();
  const Complex lead = f(0, 0);
  Vector fq = f.col(0);
  fq(0) = 0.0;
  if (std::abs(lead) < 0.5 || fq.norm() > tol.intertwiner) {
    throw StageError("collision", "no phase choice makes F fix the quiescent vector");
  }
  f *= std::conj(lead) / std::abs(lead);
  if (unitarity_defect(f) > tol.intertwiner) {
    throw StageError("collision", "recovered collision is not unitary");
  }
  return f;
}

// ---------------------------------------------------------------- pipeline

DetectionReport detect_and_reconstruct(const LocalRule& rule, std::uint64_t seed,
                                       const Tolerances& tol) {
  DetectionReport report;
  report.seed = seed;
  report.tolerances = tol;
  const int d = rule.cell_dim();
  if (d == 1) {
    report.qlga = true;
    report.s = Matrix::Identity(1, 1);
    report.f = Matrix::Identity(1, 1);
    report.diagnostics.push_back("trivial cell: nothing to decompose");
    return report;
  }

  std::vector<Patch> patches;
  try {
    patches = compute_patches(rule, tol);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("patch", e.what());
  }
  const QlgaCondition cond = check_qlga_condition(patches, d, tol);
  report.patch_dims = cond.patch_dims;
  report.rank = cond.rank;
  report.target_rank = cond.target;
  report.residuals["patch_commutator"] = cond.max_commutator;
  if (!cond.satisfied) {
    report.qlga = false;
    report.diagnostics.push_back("product span of the patches has rank " + std::to_string(cond.rank) +
                                 " < " + std::to_string(cond.target));
    return report;
  }
  if (cond.max_commutator > tol.validation) {
    throw StageError("condition", "patches do not commute (max commutator " +
                                      std::to_string(cond.max_commutator) + ")");
  }

  const FactorizationResult fact = factorize(patches, d, seed, tol);
  report.dims = fact.dims;
  report.s = fact.s;
  report.leg_bases = fact.leg_bases;
  report.residuals["factorize"] = fact.residual;
  if (!fact.quiescent_product) {
    report.diagnostics.push_back("S|0> is not a product vector; quiescent alignment skipped");
  }

  report.f = extract_collision(rule, fact, tol);
  try {
    report.model.emplace(rule.neighborhood(), fact.dims, report.f, tol.intertwiner);
  } catch (const Error& e) {
    throw StageError("reconstruct", e.what());
  }
  report.f = report.model->collision();

  // gamma_reconstructed taken back to the input frame, generator by generator.
  const LocalRule rebuilt = extract_rule(EvolutionHandle::from_qlga(*report.model), rule.neighborhood(), tol);
  const LocalRule back = conjugate_rule(rebuilt, fact.s.adjoint(), tol);
  const double roundtrip = rule_distance(back, rule);
  report.residuals["roundtrip"] = roundtrip;
  if (!(roundtrip <= tol.intertwiner)) {
    throw StageError("verify", "reconstructed rule differs from the input by " + std::to_string(roundtrip));
  }
  report.qlga = true;
  return report;
}

}  // namespace qca
