#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "qca/error.hpp"
#include "qca/random.hpp"
#include "qca/serialization.hpp"

using namespace qca;
namespace fs = std::filesystem;

TEST(Json, ConfigurationAndStateRoundTrip) {
  std::mt19937_64 rng(1);
  const SparseState psi = random_state(2, 3, StateShape{3, 4, 4}, rng);
  const Json j = to_json(psi);
  const SparseState back = state_from_json(j, 2, CellSpace{3, 0});
  EXPECT_EQ(distance(back, psi), 0.0);
  EXPECT_EQ(to_json(back), j);
  const Json c = to_json(psi.terms()[0].config);
  EXPECT_TRUE(c.contains("sites"));
  EXPECT_TRUE(c.contains("values"));
}

TEST(Json, MatrixIsRowMajorAndExact) {
  std::mt19937_64 rng(2);
  const Matrix m = gaussian_matrix(3, 3, rng);
  const Json j = to_json(m);
  EXPECT_EQ(j.at("dim"), 3);
  EXPECT_EQ(j.at("re")[0][1].get<double>(), m(0, 1).real());
  EXPECT_EQ(matrix_from_json(j), m);
  EXPECT_THROW(matrix_from_json(Json{{"dim", 2}, {"re", {{1.0}}}}), InvariantError);
}

TEST(Json, ModelFileWithQuiescentRelabel) {
  const Json j = Json::parse(R"({"n": 1, "neighborhood": [[0],[1]],
    "factors": [{"offset": [1], "dim": 2, "q": 1}, {"offset": [0], "dim": 2, "q": 0}],
    "collision": {"dim": 4, "re": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]],
                  "im": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}})");
  const QlgaModel m = qlga_from_json(j);
  EXPECT_EQ(m.dims(), (std::vector<int>{2, 2}));
  EXPECT_EQ(m.collision(), Matrix::Identity(4, 4));
  const Json out = to_json(m);
  for (const auto& f : out.at("factors")) EXPECT_EQ(f.at("q"), 0);
  const QlgaModel again = qlga_from_json(out);
  EXPECT_EQ(again.collision(), m.collision());
}

TEST(Json, ModelFileRejectsPhaseOnQuiescent) {
  Json j = Json::parse(R"({"n": 1, "neighborhood": [[0]], "factors": [{"offset": [0], "dim": 2, "q": 0}],
    "collision": {"dim": 2, "re": [[-1,0],[0,1]], "im": [[0,0],[0,0]]}})");
  EXPECT_THROW(qlga_from_json(j), InvariantError);
  j["neighborhood"] = Json::parse("[[0],[1]]");
  j["collision"]["re"] = Json::parse("[[1,0],[0,1]]");
  EXPECT_THROW(qlga_from_json(j), InvariantError);
}

TEST(Json, CircuitAndRuleRoundTrip) {
  std::mt19937_64 rng(3);
  const PartitionedCircuit c = brickwork_circuit(2, rng);
  const PartitionedCircuit back = circuit_from_json(to_json(c));
  ASSERT_EQ(back.layers().size(), 2u);
  EXPECT_EQ(back.layers()[1].block, c.layers()[1].block);
  Json blocked = to_json(c);
  blocked["block"] = {2};
  EXPECT_EQ(handle_from_json(blocked).cell_dim(), 4);

  const QlgaModel m = random_qlga(Neighborhood({Site{0}, Site{1}}), {2, 2}, rng);
  const LocalRule rule = extract_rule(EvolutionHandle::from_qlga(m), m.neighborhood());
  const LocalRule rb = rule_from_json(to_json(rule));
  EXPECT_EQ(rule_distance(rb, rule), 0.0);
  Json broken = to_json(rule);
  broken["images"].erase(0);
  EXPECT_THROW(rule_from_json(broken), InvariantError);
}

TEST(Files, AtomicWriteReplacesContent) {
  const fs::path dir = fs::temp_directory_path() / "qca_serialization_test";
  fs::create_directories(dir);
  const fs::path p = dir / "out.json";
  write_json_atomic(p, Json{{"a", 1}});
  write_json_atomic(p, Json{{"a", 2}});
  EXPECT_EQ(read_json(p).at("a"), 2);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "out.json");
  EXPECT_THROW(read_json(dir / "missing.json"), InvariantError);
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{ not json";
  }
  EXPECT_THROW(read_json(dir / "bad.json"), InvariantError);
  fs::remove_all(dir);
}
