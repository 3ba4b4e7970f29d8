#include <gtest/gtest.h>

#include "dense_reference.hpp"
#include "qca/error.hpp"
#include "qca/operators.hpp"
#include "qca/random.hpp"

using namespace qca;
using qca::testing::naive_kron;

namespace {

Matrix random_matrix(Index r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gaussian_matrix(r, r, rng);
}

}  // namespace

TEST(LocalOperator, ValidatesShape) {
  EXPECT_THROW(LocalOperator({Site{1}, Site{0}}, Matrix::Identity(4, 4), 2), InvariantError);
  EXPECT_THROW(LocalOperator({Site{0}}, Matrix::Identity(3, 3), 2), InvariantError);
}

TEST(LocalOperator, FromUnorderedPermutesLegs) {
  const Matrix a = random_matrix(2, 1);
  const Matrix b = random_matrix(2, 2);
  const auto op = LocalOperator::from_unordered({Site{1}, Site{0}}, kron(a, b), 2);
  EXPECT_EQ(op.support(), (std::vector<Site>{Site{0}, Site{1}}));
  EXPECT_LT((op.matrix() - kron(b, a)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LocalOperator, ReduceDropsIdentityLegs) {
  const Matrix a = random_matrix(2, 3);
  const LocalOperator padded({Site{0}, Site{1}, Site{2}},
                             naive_kron(naive_kron(Matrix::Identity(2, 2), a), Matrix::Identity(2, 2)), 2);
  const auto r = reduce(padded);
  EXPECT_EQ(r.support(), (std::vector<Site>{Site{1}}));
  EXPECT_LT((r.matrix() - a).cwiseAbs().maxCoeff(), 1e-14);
  const auto twice = reduce(r);
  EXPECT_EQ(twice.support(), r.support());
  const auto s = reduce(LocalOperator({Site{0}}, Matrix::Identity(2, 2) * 3.0, 2));
  EXPECT_TRUE(s.support().empty());
  EXPECT_NEAR(std::abs(s.matrix()(0, 0) - Complex(3.0)), 0.0, 1e-15);
}

TEST(LocalOperator, MultiplyMatchesDenseProduct) {
  const Matrix a = random_matrix(4, 4);
  const Matrix b = random_matrix(4, 5);
  const LocalOperator la({Site{0}, Site{1}}, a, 2);
  const LocalOperator lb({Site{1}, Site{2}}, b, 2);
  const auto prod = multiply(la, lb);
  const Matrix expected = naive_kron(a, Matrix::Identity(2, 2)) * naive_kron(Matrix::Identity(2, 2), b);
  const auto dense = embed(prod, std::vector<Site>{Site{0}, Site{1}, Site{2}});
  EXPECT_LT((dense.matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LocalOperator, DisjointCommutatorVanishes) {
  const LocalOperator a = LocalOperator::on_site(Site{0}, random_matrix(3, 6));
  const LocalOperator b = LocalOperator::on_site(Site{4}, random_matrix(3, 7));
  EXPECT_LT(commutator(a, b).matrix().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LocalOperator, TranslationMatchesStateTranslation) {
  std::mt19937_64 rng(8);
  const LocalOperator a({Site{0}, Site{2}}, gaussian_matrix(4, 4, rng), 2);
  const SparseState psi = random_state(1, 2, StateShape{3, 4, 4}, rng);
  const Site z{3};
  // pi(tau a) tau psi = tau pi(a) psi
  const auto lhs = apply_local(translate_operator(a, z), translate_state(psi, z));
  const auto rhs = translate_state(apply_local(a, psi), z);
  EXPECT_LT(distance(lhs, rhs), 1e-13);
}

TEST(LocalOperator, ApplyLocalMatchesDenseWindow) {
  std::mt19937_64 rng(9);
  const Matrix m = gaussian_matrix(4, 4, rng);
  const LocalOperator a({Site{1}, Site{2}}, m, 2);
  const SparseState psi = random_state(1, 2, StateShape{3, 5, 4}, rng);
  const qca::testing::Window1D w{0, 4, 2};
  const Matrix full = naive_kron(naive_kron(Matrix::Identity(2, 2), m), Matrix::Identity(2, 2));
  const Vector expected = full * qca::testing::to_dense(psi, w);
  EXPECT_LT((qca::testing::to_dense(apply_local(a, psi), w) - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(LocalOperator, LeakageAndRestriction) {
  const Matrix a = random_matrix(2, 10);
  const Matrix b = random_matrix(2, 11);
  const LocalOperator prod({Site{0}, Site{1}}, kron(a, Matrix::Identity(2, 2)), 2);
  const std::vector<Site> only0 = {Site{0}};
  EXPECT_LT(leakage_outside(prod, only0), 1e-14);
  const LocalOperator ent({Site{0}, Site{1}}, kron(a, b), 2);
  EXPECT_GT(leakage_outside(ent, only0), 1e-3);
  const auto r = restrict_support(ent, only0);
  EXPECT_LT((r.matrix() - a * (b.trace() / 2.0)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(RegionDensity, MatchesDensePartialTrace) {
  std::mt19937_64 rng(12);
  const SparseState psi = random_state(1, 2, StateShape{3, 6, 3}, rng);
  const qca::testing::Window1D w{0, 3, 2};
  const Vector v = qca::testing::to_dense(psi, w);
  const Matrix rho = v * v.adjoint();
  // Trace out cell 1 by explicit summation.
  Matrix expected = Matrix::Zero(4, 4);
  for (int a0 = 0; a0 < 2; ++a0)
    for (int a2 = 0; a2 < 2; ++a2)
      for (int b0 = 0; b0 < 2; ++b0)
        for (int b2 = 0; b2 < 2; ++b2)
          for (int m = 0; m < 2; ++m) expected(a0 * 2 + a2, b0 * 2 + b2) += rho(a0 * 4 + m * 2 + a2, b0 * 4 + m * 2 + b2);
  const RegionDensity rd = restrict_density(psi, {Site{2}, Site{0}});
  EXPECT_EQ(rd.region, (std::vector<Site>{Site{0}, Site{2}}));
  EXPECT_LT((rd.matrix - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(rd.matrix.trace().real(), 1.0, 1e-14);
}
