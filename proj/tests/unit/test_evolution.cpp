#include <gtest/gtest.h>

#include "dense_reference.hpp"
#include "qca/error.hpp"
#include "qca/evolution.hpp"
#include "qca/random.hpp"

using namespace qca;
namespace qt = qca::testing;

namespace {

Matrix swap4() {
  Matrix s = Matrix::Zero(4, 4);
  s(0, 0) = s(1, 2) = s(2, 1) = s(3, 3) = 1.0;
  return s;
}

SparseState single(const QlgaModel& m, std::int64_t x, std::uint32_t v) {
  return SparseState::basis(1, CellSpace{m.cell_dim(), 0}, Configuration::from_cells({{Site{x}, v}}));
}

std::vector<std::int64_t> offsets_1d(const QlgaModel& m) {
  std::vector<std::int64_t> out;
  for (const auto& y : m.neighborhood().offsets()) out.push_back(y[0]);
  return out;
}

}  // namespace

TEST(QlgaModel, RejectsInvalidCollisions) {
  const Neighborhood n({Site{0}, Site{1}});
  EXPECT_THROW(QlgaModel(n, {2, 2}, Matrix::Identity(4, 4) * 2.0), InvariantError);
  Matrix phase = Matrix::Identity(4, 4);
  phase(0, 0) = -1.0;
  EXPECT_THROW(QlgaModel(n, {2, 2}, phase), QuiescentPhaseError);
  Matrix moves = swap4();
  moves.col(0).swap(moves.col(1));
  EXPECT_THROW(QlgaModel(n, {2, 2}, moves), InvariantError);
  EXPECT_THROW(QlgaModel(n, {2}, Matrix::Identity(2, 2)), InvariantError);
}

TEST(QlgaModel, DecodeIsBigEndianInOffsetOrder) {
  const QlgaModel m(Neighborhood({Site{0}, Site{1}}), {2, 3}, Matrix::Identity(6, 6));
  EXPECT_EQ(m.decode(4), (std::vector<std::uint32_t>{1, 1}));
  const std::uint32_t digits[] = {1, 2};
  EXPECT_EQ(m.encode(digits), 5u);
  EXPECT_THROW(m.decode(6), InvariantError);
  EXPECT_EQ(decode_cell(5, m), (std::vector<std::uint32_t>{1, 2}));
}

TEST(QlgaModel, FromFactorsRelabelsAndReorders) {
  std::mt19937_64 rng(1);
  const Matrix f = random_collision(6, rng);
  // Factors listed as (offset 1, dim 3), (offset 0, dim 2): legs of f are (1, 0).
  const QlgaModel listed = QlgaModel::from_factors({{Site{1}, 3, 0}, {Site{0}, 2, 0}}, f);
  const std::vector<int> dims = {3, 2};
  const int perm[] = {1, 0};
  const QlgaModel direct(Neighborhood({Site{0}, Site{1}}), {2, 3}, permute_legs(f, dims, perm));
  EXPECT_LT((listed.collision() - direct.collision()).cwiseAbs().maxCoeff(), 1e-14);

  // A quiescent sub-index of 1 on a factor is relabelled to 0.
  Matrix g = Matrix::Identity(4, 4);
  g.bottomRightCorner(3, 3) = haar_unitary(3, rng);
  // The same collision written with quiescent state |0>|1> (index 1).
  Matrix x = Matrix::Zero(4, 4);
  x(0, 1) = x(1, 0) = x(2, 3) = x(3, 2) = 1.0;  // flip of the second leg
  const Matrix written = x * g * x;
  const QlgaModel relabelled = QlgaModel::from_factors({{Site{0}, 2, 0}, {Site{1}, 2, 1}}, written);
  EXPECT_LT((relabelled.collision() - g).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sigma, SignConvention) {
  const QlgaModel m(Neighborhood({Site{0}, Site{1}}), {2, 2}, Matrix::Identity(4, 4));
  // Value 1 = digits (0, 1): only the offset-1 component is occupied; it
  // moves from cell s to s - 1. The offset-0 component stays.
  const auto moved = apply_sigma(single(m, 5, 1), m);
  EXPECT_EQ(moved.terms()[0].config.cells()[0].site, Site{4});
  const auto stays = apply_sigma(single(m, 5, 2), m);
  EXPECT_EQ(stays.terms()[0].config.cells()[0].site, Site{5});
  // Both components split apart.
  const auto both = apply_sigma(single(m, 0, 3), m);
  EXPECT_EQ(both.terms()[0].config.size(), 2u);
  EXPECT_LT(distance(apply_sigma_inverse(both, m), single(m, 0, 3)), 1e-15);
}

TEST(Step, SwapAlternatesComponents) {
  const QlgaModel m(Neighborhood({Site{0}, Site{1}}), {2, 2}, swap4());
  SparseState psi = single(m, 0, 1);
  const std::vector<std::int64_t> expected = {-1, -1, -2, -2, -3};
  for (std::size_t s = 0; s < expected.size(); ++s) {
    psi = step(psi, m);
    ASSERT_EQ(psi.size(), 1u);
    EXPECT_EQ(psi.terms()[0].config.cells()[0].site, Site{expected[s]});
  }
}

TEST(Step, MatchesDenseReference) {
  std::mt19937_64 rng(2);
  const std::vector<std::pair<std::vector<Site>, std::vector<int>>> families = {
      {{Site{0}, Site{1}}, {2, 2}}, {{Site{0}, Site{1}}, {2, 3}}, {{Site{-1}, Site{1}}, {2, 2}}};
  for (const auto& [offsets, dims] : families) {
    const QlgaModel m = random_qlga(Neighborhood(offsets), dims, rng);
    const qt::Window1D w{-1, 4, m.cell_dim()};
    const Matrix dense = qt::dense_qlga_step(offsets_1d(m), m.dims(), m.collision(), w);
    for (int t = 0; t < 10; ++t) {
      const SparseState psi = random_state(1, m.cell_dim(), StateShape{2, 3, 2}, rng);
      const Vector expected = dense * qt::to_dense(psi, w);
      EXPECT_LT((qt::to_dense(step(psi, m), w) - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Step, UnitaryInvertibleAndTranslationCovariant) {
  std::mt19937_64 rng(3);
  const QlgaModel m = random_qlga(Neighborhood({Site{0}, Site{1}}), {2, 2}, rng);
  for (int t = 0; t < 100; ++t) {
    const SparseState psi = random_state(1, 4, StateShape{4, 2, 6}, rng);
    const SparseState out = step(psi, m);
    EXPECT_NEAR(out.norm(), psi.norm(), 1e-10);
    EXPECT_LT(distance(step_inverse(out, m), psi), 1e-10);
    const Site z{static_cast<std::int64_t>(t % 7) - 3};
    EXPECT_LT(distance(step(translate_state(psi, z), m), translate_state(out, z)), 1e-12);
  }
}

TEST(Step, VacuumIsFixed) {
  std::mt19937_64 rng(4);
  const QlgaModel m = random_qlga(Neighborhood({Site{0, 0}, Site{1, 0}, Site{0, 1}}), {2, 2, 2}, rng);
  const auto v = SparseState::vacuum(2, CellSpace{8, 0});
  EXPECT_LT(distance(step(v, m), v), 1e-15);
}

TEST(Step, TermCapIsEnforced) {
  std::mt19937_64 rng(5);
  const QlgaModel m = random_qlga(Neighborhood({Site{0}, Site{1}}), {2, 2}, rng);
  const SparseState psi = SparseState::basis(
      1, CellSpace{4, 0}, Configuration::from_cells({{Site{0}, 3}, {Site{1}, 3}, {Site{2}, 3}}));
  EXPECT_THROW(step(psi, m, EvolutionLimits{8, 1e-14}), TermCapExceeded);
}

TEST(Circuit, EmptyAndIdentityLayers) {
  const PartitionedCircuit empty(1, 2, {});
  std::mt19937_64 rng(6);
  const SparseState psi = random_state(1, 2, StateShape{3, 3, 5}, rng);
  EXPECT_LT(distance(apply_circuit(psi, empty), psi), 1e-15);
  const PartitionedCircuit ident(1, 2, {{{Site{0}, Site{1}}, Site{0}, {2}, Matrix::Identity(4, 4)}});
  EXPECT_LT(distance(apply_circuit(psi, ident), psi), 1e-15);
}

TEST(Circuit, RejectsBadTilings) {
  EXPECT_THROW(PartitionedCircuit(1, 2, {{{Site{0}}, Site{0}, {2}, Matrix::Identity(2, 2)}}), InvariantError);
  Matrix moves = swap4();
  moves.col(0).swap(moves.col(3));
  EXPECT_THROW(PartitionedCircuit(1, 2, {{{Site{0}, Site{1}}, Site{0}, {2}, moves}}), InvariantError);
}

TEST(Circuit, BrickworkMatchesDenseReference) {
  std::mt19937_64 rng(7);
  const PartitionedCircuit c = brickwork_circuit(2, rng);
  EXPECT_EQ(c.homogeneity_scale(), (std::vector<std::int64_t>{2}));
  std::vector<qt::DenseLayer> layers;
  for (const auto& l : c.layers()) layers.push_back({l.offset[0], l.period[0], l.block});
  const qt::Window1D w{-4, 10, 2};
  const Matrix dense = qt::dense_brickwork(layers, w);
  for (int t = 0; t < 20; ++t) {
    const SparseState psi = random_state(1, 2, StateShape{3, 3, 3}, rng);
    const Vector expected = dense * qt::to_dense(psi, w);
    EXPECT_LT((qt::to_dense(apply_circuit(psi, c), w) - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(distance(apply_circuit_inverse(apply_circuit(psi, c), c), psi), 1e-12);
  }
}

TEST(Handle, BlockingCommutesWithEvolution) {
  std::mt19937_64 rng(8);
  const EvolutionHandle fine = EvolutionHandle::from_circuit(brickwork_circuit(2, rng));
  const EvolutionHandle coarse = fine.blocked({2});
  EXPECT_EQ(coarse.cell_dim(), 4);
  for (int t = 0; t < 10; ++t) {
    const SparseState psi = random_state(1, 4, StateShape{2, 2, 3}, rng);
    const SparseState via_fine = coarse.to_coarse(fine.apply(coarse.to_fine(psi)));
    EXPECT_LT(distance(coarse.apply(psi), via_fine), 1e-13);
    EXPECT_LT(distance(coarse.to_coarse(coarse.to_fine(psi)), psi), 1e-15);
  }
}

TEST(Handle, PhaseMultipliesState) {
  std::mt19937_64 rng(9);
  const EvolutionHandle h = EvolutionHandle::from_qlga(random_qlga(Neighborhood({Site{0}, Site{1}}), {2, 2}, rng));
  const SparseState psi = random_state(1, 4, StateShape{2, 2, 3}, rng);
  const SparseState a = h.with_phase(0.3).apply(psi);
  EXPECT_LT(distance(a, scale(h.apply(psi), std::polar(1.0, 0.3))), 1e-14);
  EXPECT_LT(distance(h.with_phase(0.3).apply_inverse(a), psi), 1e-13);
}

TEST(Handle, IdentityEvolution) {
  const EvolutionHandle h = EvolutionHandle::identity(1, 3);
  std::mt19937_64 rng(10);
  const SparseState psi = random_state(1, 3, StateShape{3, 3, 4}, rng);
  EXPECT_LT(distance(h.apply(psi), psi), 1e-15);
}
