#include "qca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qca/error.hpp"

namespace qca {

namespace {

std::vector<Index> strides_of(std::span<const int> dims) {
  std::vector<Index> strides(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) {
    strides[k - 1] = strides[k] * dims[k];
  }
  return strides;
}

std::vector<Index> enumerate_offsets(std::span<const int> dims,
                                     std::span<const Index> strides,
                                     std::span<const int> legs) {
  Index count = 1;
  for (int leg : legs) count *= dims[leg];
  std::vector<Index> offsets(static_cast<std::size_t>(count), 0);
  // Big-endian over `legs`: the last leg varies fastest.
  Index block = 1;
  for (std::size_t k = legs.size(); k-- > 0;) {
    const int leg = legs[k];
    const Index d = dims[leg];
    for (Index idx = 0; idx < count; ++idx) {
      const Index digit = (idx / block) % d;
      offsets[static_cast<std::size_t>(idx)] += digit * strides[leg];
    }
    block *= d;
  }
  return offsets;
}

}  // namespace

Index total_dim(std::span<const int> dims) {
  Index n = 1;
  for (int d : dims) n *= d;
  return n;
}

LegSplit split_legs(std::span<const int> dims, std::span<const int> positions) {
  const auto strides = strides_of(dims);
  std::vector<int> rest_legs;
  std::vector<bool> used(dims.size(), false);
  for (int p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= dims.size() || used[p]) {
      throw InvariantError("split_legs: invalid or repeated leg position");
    }
    used[p] = true;
  }
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (!used[k]) rest_legs.push_back(static_cast<int>(k));
  }
  return LegSplit{enumerate_offsets(dims, strides, positions),
                  enumerate_offsets(dims, strides, rest_legs)};
}

Matrix embed_legs(const Matrix& op, std::span<const int> dims,
                  std::span<const int> positions) {
  const LegSplit split = split_legs(dims, positions);
  const auto dsub = static_cast<Index>(split.sub.size());
  if (op.rows() != dsub || op.cols() != dsub) {
    throw InvariantError("embed_legs: operator size does not match legs");
  }
  const Index n = total_dim(dims);
  Matrix out = Matrix::Zero(n, n);
  for (Index r : split.rest) {
    for (Index j = 0; j < dsub; ++j) {
      const Index col = split.sub[j] + r;
      for (Index i = 0; i < dsub; ++i) {
        out(split.sub[i] + r, col) = op(i, j);
      }
    }
  }
  return out;
}

Matrix partial_trace(const Matrix& op, std::span<const int> dims,
                     std::span<const int> positions) {
  const LegSplit split = split_legs(dims, positions);
  const auto dsub = static_cast<Index>(split.sub.size());
  Matrix out = Matrix::Zero(dsub, dsub);
  for (Index r : split.rest) {
    for (Index j = 0; j < dsub; ++j) {
      const Index col = split.sub[j] + r;
      for (Index i = 0; i < dsub; ++i) {
        out(i, j) += op(split.sub[i] + r, col);
      }
    }
  }
  return out;
}

Matrix permute_legs(const Matrix& op, std::span<const int> dims,
                    std::span<const int> perm) {
  if (perm.size() != dims.size()) {
    throw InvariantError("permute_legs: permutation size mismatch");
  }
  const LegSplit split = split_legs(dims, perm);
  const auto n = static_cast<Index>(split.sub.size());
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      out(i, j) = op(split.sub[i], split.sub[j]);
    }
  }
  return out;
}

Vector permute_legs(const Vector& v, std::span<const int> dims,
                    std::span<const int> perm) {
  if (perm.size() != dims.size()) {
    throw InvariantError("permute_legs: permutation size mismatch");
  }
  const LegSplit split = split_legs(dims, perm);
  const auto n = static_cast<Index>(split.sub.size());
  Vector out(n);
  for (Index i = 0; i < n; ++i) out(i) = v(split.sub[i]);
  return out;
}

void apply_on_legs(const Matrix& op, std::span<const int> dims,
                   std::span<const int> positions, Matrix& columns) {
  const LegSplit split = split_legs(dims, positions);
  const auto dsub = static_cast<Index>(split.sub.size());
  const auto nrest = static_cast<Index>(split.rest.size());
  if (op.rows() != dsub || op.cols() != dsub) {
    throw InvariantError("apply_on_legs: operator size does not match legs");
  }
  if (columns.rows() != dsub * nrest) {
    throw InvariantError("apply_on_legs: vector length does not match legs");
  }
  const Index batch =
      std::max<Index>(1, (Index{1} << 22) / std::max<Index>(1, columns.rows()));
  Matrix gathered;
  for (Index c0 = 0; c0 < columns.cols(); c0 += batch) {
    const Index nc = std::min(batch, columns.cols() - c0);
    gathered.resize(dsub, nrest * nc);
    for (Index c = 0; c < nc; ++c) {
      for (Index r = 0; r < nrest; ++r) {
        const Index base = split.rest[r];
        for (Index i = 0; i < dsub; ++i) {
          gathered(i, c * nrest + r) = columns(base + split.sub[i], c0 + c);
        }
      }
    }
    const Matrix result = op * gathered;
    for (Index c = 0; c < nc; ++c) {
      for (Index r = 0; r < nrest; ++r) {
        const Index base = split.rest[r];
        for (Index i = 0; i < dsub; ++i) {
          columns(base + split.sub[i], c0 + c) = result(i, c * nrest + r);
        }
      }
    }
  }
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix realign(const Matrix& op, Index da, Index db) {
  if (op.rows() != da * db || op.cols() != da * db) {
    throw InvariantError("realign: operator size does not match da*db");
  }
  Matrix out(da * da, db * db);
  for (Index ia = 0; ia < da; ++ia) {
    for (Index ja = 0; ja < da; ++ja) {
      for (Index ib = 0; ib < db; ++ib) {
        for (Index jb = 0; jb < db; ++jb) {
          out(ia * da + ja, ib * db + jb) = op(ia * db + ib, ja * db + jb);
        }
      }
    }
  }
  return out;
}

double unitarity_defect(const Matrix& u) {
  if (u.rows() != u.cols()) return std::numeric_limits<double>::infinity();
  return (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).norm();
}

int numerical_rank(const Matrix& m, double threshold) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > threshold) ++rank;
  }
  return rank;
}

Complex canonical_phase(const Matrix& m) {
  double best = 0.0;
  Complex value{1.0, 0.0};
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      const double mag = std::abs(m(i, j));
      if (mag > best) {
        best = mag;
        value = m(i, j);
      }
    }
  }
  if (best == 0.0) return Complex{1.0, 0.0};
  return value / best;
}

Matrix canonicalize_phase(const Matrix& m) {
  return m * std::conj(canonical_phase(m));
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(i, j) = Complex{re, im};
    }
  }
  return m;
}

Matrix haar_unitary(Index d, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(d, d, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < d; ++k) {
    const Complex rk = r(k, k);
    const double mag = std::abs(rk);
    if (mag > 0.0) q.col(k) *= rk / mag;
  }
  return q;
}

Matrix unitary_with_first_column(const Vector& v) {
  const Index d = v.size();
  Matrix seed(d, d + 1);
  seed.col(0) = v;
  seed.rightCols(d) = Matrix::Identity(d, d);
  // Column-pivoting would reorder v; plain Householder keeps it first.
  Eigen::HouseholderQR<Matrix> qr(seed);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Complex overlap = q.col(0).dot(v);
  const double mag = std::abs(overlap);
  if (mag > 0.0) q.col(0) *= overlap / mag;
  return q;
}

Matrix polar_isometry(const Matrix& m, double threshold) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Index r = 0;
  while (r < s.size() && s(r) > threshold) ++r;
  return svd.matrixU().leftCols(r) * svd.matrixV().leftCols(r).adjoint();
}

}  // namespace qca
