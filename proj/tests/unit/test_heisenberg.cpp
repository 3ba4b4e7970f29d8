#include <gtest/gtest.h>

#include "dense_reference.hpp"
#include "qca/error.hpp"
#include "qca/heisenberg.hpp"
#include "qca/random.hpp"

using namespace qca;

namespace {

QlgaModel model_22(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_qlga(Neighborhood({Site{0}, Site{1}}), {2, 2}, rng);
}

Complex expectation(const LocalOperator& b, const SparseState& psi) {
  return inner_product(psi, apply_local(b, psi));
}

}  // namespace

TEST(Heisenberg, ExpectationsAgreeWithSchrodingerPicture) {
  std::mt19937_64 rng(1);
  const std::vector<EvolutionHandle> handles = {
      EvolutionHandle::from_qlga(model_22(2)),
      EvolutionHandle::from_qlga(random_qlga(Neighborhood({Site{-1}, Site{1}}), {2, 3}, rng)),
      EvolutionHandle::from_circuit(brickwork_circuit(2, rng)).blocked({2}),
  };
  for (const auto& h : handles) {
    const int d = h.cell_dim();
    for (int t = 0; t < 5; ++t) {
      const LocalOperator b({Site{0}, Site{1}}, gaussian_matrix(d * d, d * d, rng), d);
      const SparseState psi = random_state(1, d, StateShape{2, 3, 3}, rng);
      const Complex lhs = expectation(h.heisenberg(b), psi);
      const Complex rhs = expectation(b, h.apply(psi));
      EXPECT_LT(std::abs(lhs - rhs), 1e-11);
      const Complex lhs_inv = expectation(h.heisenberg_inverse(b), psi);
      const Complex rhs_inv = expectation(b, h.apply_inverse(psi));
      EXPECT_LT(std::abs(lhs_inv - rhs_inv), 1e-11);
    }
  }
}

TEST(Heisenberg, ExactConjugationMatchesMatrixElementRoute) {
  for (std::uint64_t seed : {3, 4, 5}) {
    const EvolutionHandle h = EvolutionHandle::from_qlga(model_22(seed));
    const Neighborhood n({Site{0}, Site{1}});
    const Site z{2};
    const auto exact = gamma_of_cell(h, z, n);
    const MatrixElementImages me = gamma_by_matrix_elements(h, z, n);
    EXPECT_LT(me.leakage, 1e-10);
    EXPECT_LT(me.norm_deficit, 1e-10);
    ASSERT_EQ(exact.size(), me.images.size());
    for (std::size_t k = 0; k < exact.size(); ++k) {
      EXPECT_LT(max_abs_difference(exact[k], me.images[k]), 1e-10);
    }
  }
}

TEST(Heisenberg, ImagesStayInsideTheNeighborhood) {
  const EvolutionHandle h = EvolutionHandle::from_qlga(model_22(6));
  const ReversibilityReport r = check_structural_reversibility(h, Site{3}, Neighborhood({Site{0}, Site{1}}));
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.forward_support, (std::vector<Site>{Site{3}, Site{4}}));
  EXPECT_EQ(r.backward_support, (std::vector<Site>{Site{2}, Site{3}}));
  EXPECT_THROW(extract_rule(h, Neighborhood({Site{0}})), SupportLeakage);
  EXPECT_EQ(light_cone(h).offsets(), (std::vector<Site>{Site{0}, Site{1}}));
}

TEST(Validation, ExtractedAndIdentityRulesAreAccepted) {
  const EvolutionHandle h = EvolutionHandle::from_qlga(model_22(7));
  const ValidationReport v = validate_rule(extract_rule(h, Neighborhood({Site{0}, Site{1}})));
  EXPECT_TRUE(v.accepted) << v.max_residual();
  EXPECT_TRUE(validate_rule(LocalRule::identity(Neighborhood({Site{0}}), 3)).accepted);
}

TEST(Validation, BrokenHomomorphismIsRejected) {
  const EvolutionHandle h = EvolutionHandle::from_qlga(model_22(8));
  const LocalRule good = extract_rule(h, Neighborhood({Site{0}, Site{1}}));
  std::vector<LocalOperator> images = good.images();
  images[1] = scale(images[1], 2.0);
  const ValidationReport v = validate_rule(LocalRule(good.neighborhood(), 4, images));
  EXPECT_FALSE(v.accepted);
  bool homomorphism_failed = false;
  for (const auto& c : v.checks) {
    if (c.name == "homomorphism") homomorphism_failed = !c.passed;
  }
  EXPECT_TRUE(homomorphism_failed);
}

TEST(Validation, NonCommutingTranslatesAreRejected) {
  // gamma(e_ij) = e_ij at 0 conjugated by a non-product two-cell unitary is
  // a homomorphism of one cell but translates do not commute.
  std::mt19937_64 rng(9);
  const Matrix u = haar_unitary(4, rng);
  const Site o{0};
  std::vector<LocalOperator> images;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const Matrix e = kron(LocalOperator::matrix_unit(o, i, j, 2).matrix(), Matrix::Identity(2, 2));
      images.emplace_back(std::vector<Site>{Site{0}, Site{1}}, Matrix(u.adjoint() * e * u), 2);
    }
  }
  const ValidationReport v = validate_rule(LocalRule(Neighborhood({Site{0}, Site{1}}), 2, images));
  EXPECT_FALSE(v.accepted);
}

TEST(Commutator, NormMatchesDenseEmbedding) {
  std::mt19937_64 rng(10);
  const LocalOperator a({Site{0}, Site{1}}, gaussian_matrix(4, 4, rng), 2);
  const LocalOperator b({Site{1}, Site{3}}, gaussian_matrix(4, 4, rng), 2);
  const std::vector<Site> all = {Site{0}, Site{1}, Site{3}};
  const Matrix ea = embed(a, all).matrix();
  const Matrix eb = embed(b, all).matrix();
  EXPECT_NEAR(commutator_norm(a, b), (ea * eb - eb * ea).norm(), 1e-11);
}

TEST(Translation, GlobalPhaseGivesZeroTheta) {
  const EvolutionHandle h = EvolutionHandle::from_qlga(model_22(11)).with_phase(1.1);
  const TranslationReport t = check_translation_invariance(h, 2, Site{1});
  EXPECT_TRUE(t.passed);
  EXPECT_NEAR(t.theta, 0.0, 1e-12);
  EXPECT_LT(t.residual, 1e-12);
}

TEST(Translation, CircuitIsInvariantOnlyAtItsScale) {
  std::mt19937_64 rng(12);
  const EvolutionHandle fine = EvolutionHandle::from_circuit(brickwork_circuit(2, rng));
  EXPECT_FALSE(check_translation_invariance(fine, 3, Site{1}).passed);
  EXPECT_TRUE(check_translation_invariance(fine, 3, Site{2}).passed);
  EXPECT_TRUE(check_translation_invariance(fine.blocked({2}), 2, Site{1}).passed);
}

TEST(Causality, DeclaredNeighborhoodPassesAndSmallerFails) {
  const EvolutionHandle h = EvolutionHandle::from_qlga(model_22(13));
  const CausalityReport ok = check_causality_density(h, Site{0}, Neighborhood({Site{0}, Site{1}}), 20, 14);
  EXPECT_TRUE(ok.passed) << ok.max_deviation;
  EXPECT_EQ(ok.trials, 20);
  const CausalityReport bad = check_causality_density(h, Site{0}, Neighborhood({Site{0}}), 20, 14);
  EXPECT_FALSE(bad.passed);
}

TEST(LocalRule, ApplyCellIsLinearAndTranslated) {
  const EvolutionHandle h = EvolutionHandle::from_qlga(model_22(15));
  const LocalRule rule = extract_rule(h, Neighborhood({Site{0}, Site{1}}));
  std::mt19937_64 rng(16);
  const Matrix a = gaussian_matrix(4, 4, rng);
  const Site z{-2};
  const LocalOperator direct = h.heisenberg(LocalOperator::on_site(z, a));
  EXPECT_LT(max_abs_difference(rule.apply_cell(a, z), direct), 1e-11);
}
