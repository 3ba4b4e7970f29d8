// qca: simulate, check, detect and intertwine from the command line.
//
// Exit codes: 0 success, 1 a check or validation failed, 2 invalid input,
// 3 term cap exceeded.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qca/error.hpp"
#include "qca/heisenberg.hpp"
#include "qca/random.hpp"
#include "qca/serialization.hpp"
#include "qca/structure.hpp"

namespace fs = std::filesystem;
using namespace qca;

namespace {

enum Exit : int { kOk = 0, kFailed = 1, kInvalid = 2, kTermCap = 3 };

struct RunConfig {
  std::string command;
  std::string model;
  std::string rule;
  std::string state;
  std::string neighborhood;
  std::string out;
  int steps = 1;
  int window = 4;
  int trials = 20;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tols;
  std::size_t term_cap = EvolutionLimits{}.term_cap;
  bool patches = false;
  bool no_matrix = false;
};

/// Reported when the input is unusable; maps to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

std::uint64_t resolve_seed(const RunConfig& cfg) {
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("QCA_CORR_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw InputError("QCA_CORR_SEED is not an unsigned integer");
  }
  return 0;
}

Tolerances resolve_tolerances(const RunConfig& cfg) {
  Tolerances tol;
  for (const auto& t : cfg.tols) tol.set_from_string(t);
  return tol;
}

void emit(const RunConfig& cfg, const Json& j) {
  if (cfg.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json_atomic(cfg.out, j);
  }
}

/// The model's evolution. Circuits without an explicit "block" are viewed at
/// their homogeneity scale, where they are translation invariant.
EvolutionHandle load_handle(const RunConfig& cfg, const Tolerances& tol) {
  if (cfg.model.empty()) throw InputError("--model is required for this command");
  const Json j = read_json(cfg.model);
  EvolutionHandle h = handle_from_json(j, tol.algebraic);
  if (h.circuit() && h.block_factors().empty()) {
    const auto scale = h.circuit()->homogeneity_scale();
    if (std::any_of(scale.begin(), scale.end(), [](auto s) { return s != 1; })) h = h.blocked(scale);
  }
  return h;
}

Neighborhood declared_neighborhood(const RunConfig& cfg, const EvolutionHandle& h, const Tolerances& tol) {
  if (!cfg.neighborhood.empty()) {
    try {
      return neighborhood_from_json(Json::parse(cfg.neighborhood));
    } catch (const Json::exception& e) {
      throw InputError(std::string("--neighborhood: ") + e.what());
    }
  }
  if (h.qlga() && h.block_factors().empty()) return h.qlga()->neighborhood();
  return light_cone(h, tol);
}

Json homogeneity_json(const EvolutionHandle& h) {
  if (!h.circuit()) return Json(nullptr);
  return Json(h.circuit()->homogeneity_scale());
}

struct RuleSource {
  LocalRule rule;
  std::optional<EvolutionHandle> handle;
};

RuleSource load_rule(const RunConfig& cfg, const Tolerances& tol) {
  if (!cfg.rule.empty()) return {rule_from_json(read_json(cfg.rule)), std::nullopt};
  EvolutionHandle h = load_handle(cfg, tol);
  const Neighborhood nbhd = declared_neighborhood(cfg, h, tol);
  return {extract_rule(h, nbhd, tol), h};
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const RunConfig& cfg) {
  const Tolerances tol = resolve_tolerances(cfg);
  const EvolutionHandle h = load_handle(cfg, tol);
  if (cfg.state.empty()) throw InputError("--state is required for simulate");
  if (cfg.out.empty()) throw InputError("--out DIR is required for simulate");
  if (cfg.steps < 0) throw InputError("--steps must be non-negative");
  const EvolutionLimits limits{cfg.term_cap, tol.prune};
  const SparseState psi0 = state_from_json(read_json(cfg.state), h.lattice_dim(), CellSpace{h.cell_dim(), 0});

  // Evolve everything first so that a failure leaves no trajectory behind.
  std::vector<SparseState> traj = {psi0};
  for (int s = 0; s < cfg.steps; ++s) traj.push_back(h.apply(traj.back(), limits));

  std::ostringstream csv;
  csv << std::setprecision(17) << "step";
  for (int a = 0; a < h.lattice_dim(); ++a) csv << ",x" << a;
  csv << ",mass\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    std::map<Site, double> mass;
    for (const auto& t : traj[s].terms()) {
      for (const auto& cell : t.config.cells()) mass[cell.site] += std::norm(t.amplitude);
    }
    for (const auto& [site, m] : mass) {
      csv << s;
      for (auto c : site.coords()) csv << "," << c;
      csv << "," << m << "\n";
    }
  }
  fs::create_directories(cfg.out);
  for (std::size_t s = 0; s < traj.size(); ++s) {
    std::ostringstream name;
    name << "step_" << std::setw(4) << std::setfill('0') << s << ".json";
    write_json_atomic(fs::path(cfg.out) / name.str(), to_json(traj[s]));
  }
  write_file_atomic(fs::path(cfg.out) / "mass.csv", csv.str());
  return kOk;
}

// ------------------------------------------------------------------- check

Json check_json(const std::string& name, double residual, bool passed) {
  return Json{{"name", name}, {"residual", residual}, {"passed", passed}};
}

int cmd_check(const RunConfig& cfg) {
  const Tolerances tol = resolve_tolerances(cfg);
  const std::uint64_t seed = resolve_seed(cfg);
  Json report;
  report["seed"] = seed;
  report["tolerances"] = to_json(tol);
  Json checks = Json::array();
  bool ok = true;
  const auto add = [&](Json c) {
    ok = ok && c.at("passed").get<bool>();
    checks.push_back(std::move(c));
  };

  if (!cfg.rule.empty()) {
    const LocalRule rule = rule_from_json(read_json(cfg.rule));
    const ValidationReport v = validate_rule(rule, tol);
    for (const auto& c : v.checks) add(check_json("rule." + c.name, c.residual, c.passed));
    report["checks"] = checks;
    report["accepted"] = ok;
    emit(cfg, report);
    return ok ? kOk : kFailed;
  }

  const EvolutionHandle h = load_handle(cfg, tol);
  const Neighborhood nbhd = declared_neighborhood(cfg, h, tol);
  const EvolutionLimits limits{cfg.term_cap, tol.prune};
  const int n = h.lattice_dim();
  const int d = h.cell_dim();
  const Site origin = Site::origin(n);
  report["neighborhood"] = to_json(nbhd);
  report["homogeneity_scale"] = homogeneity_json(h);

  // Unitarity and inversion on random sparse states.
  std::mt19937_64 rng(sub_seed(seed, 0));
  double norm_dev = 0.0;
  double inverse_dev = 0.0;
  const StateShape shape{2, 2, 3};
  for (int t = 0; t < cfg.trials; ++t) {
    const SparseState psi = random_state(n, d, shape, rng);
    const SparseState out = h.apply(psi, limits);
    norm_dev = std::max(norm_dev, std::abs(out.norm() - psi.norm()));
    inverse_dev = std::max(inverse_dev, distance(h.apply_inverse(out, limits), psi));
  }
  add(check_json("unitarity", norm_dev, norm_dev <= tol.algebraic));
  add(check_json("inverse", inverse_dev, inverse_dev <= tol.algebraic));

  // Translation invariance along each axis, with the measured phase.
  int extent = 1;
  while (std::pow(static_cast<double>(d), std::pow(extent + 1.0, n)) <= 256.0) ++extent;
  Json thetas = Json::object();
  for (int a = 0; a < n; ++a) {
    const Site z = Site::unit(n, a);
    const TranslationReport tr = check_translation_invariance(h, extent, z, tol, limits);
    thetas[z.to_string()] = tr.theta;
    add(check_json("translation" + z.to_string(), tr.residual, tr.passed));
  }
  report["theta"] = thetas;

  const CausalityReport cr = check_causality_density(h, origin, nbhd, cfg.trials, sub_seed(seed, 1), tol, limits);
  add(check_json("causality", cr.max_deviation, cr.passed));

  const ReversibilityReport rr = check_structural_reversibility(h, origin, nbhd, tol);
  add(check_json("support.forward", rr.forward_leakage, rr.forward_leakage <= tol.leakage));
  add(check_json("support.backward", rr.backward_leakage, rr.backward_leakage <= tol.leakage));

  if (rr.passed) {
    const ValidationReport v = validate_rule(extract_rule(h, nbhd, tol), tol);
    for (const auto& c : v.checks) add(check_json("rule." + c.name, c.residual, c.passed));
  }
  report["checks"] = checks;
  report["accepted"] = ok;
  emit(cfg, report);
  return ok ? kOk : kFailed;
}

// ------------------------------------------------------------------ detect

int validation_failure(const RunConfig& cfg, const ValidationReport& v) {
  Json j{{"error", "rule failed validation"}, {"validation", to_json(v)}};
  emit(cfg, j);
  std::cerr << "qca: rule failed validation (max residual " << v.max_residual() << ")\n";
  return kFailed;
}

int cmd_detect(const RunConfig& cfg) {
  const Tolerances tol = resolve_tolerances(cfg);
  const std::uint64_t seed = resolve_seed(cfg);
  RuleSource src;
  try {
    src = load_rule(cfg, tol);
  } catch (const SupportLeakage& e) {
    std::cerr << "qca: " << e.what() << " (leakage " << e.leakage() << ")\n";
    return kFailed;
  }
  const ValidationReport v = validate_rule(src.rule, tol);
  if (!v.accepted) return validation_failure(cfg, v);
  DetectionReport rep;
  try {
    rep = detect_and_reconstruct(src.rule, seed, tol);
  } catch (const StageError& e) {
    std::cerr << "qca: " << e.what() << "\n";
    return kFailed;
  }
  std::vector<Patch> patches;
  if (cfg.patches && src.rule.cell_dim() > 1) patches = compute_patches(src.rule, tol);
  Json j = to_json(rep, patches);
  j["neighborhood"] = to_json(src.rule.neighborhood());
  j["cell_dim"] = src.rule.cell_dim();
  if (src.handle) j["homogeneity_scale"] = homogeneity_json(*src.handle);
  emit(cfg, j);
  return kOk;
}

// -------------------------------------------------------------- intertwine

int cmd_intertwine(const RunConfig& cfg) {
  const Tolerances tol = resolve_tolerances(cfg);
  const std::uint64_t seed = resolve_seed(cfg);
  RuleSource src;
  try {
    src = load_rule(cfg, tol);
  } catch (const SupportLeakage& e) {
    std::cerr << "qca: " << e.what() << " (leakage " << e.leakage() << ")\n";
    return kFailed;
  }
  const ValidationReport v = validate_rule(src.rule, tol);
  if (!v.accepted) return validation_failure(cfg, v);
  if (cfg.window < 1) throw InputError("--window must be positive");
  const Torus window{std::vector<std::int64_t>(static_cast<std::size_t>(src.rule.lattice_dim()), cfg.window)};
  const IntertwinerResult r = solve_intertwiner(src.rule, window, seed, tol);
  Json j = to_json(r, !cfg.no_matrix);
  j["seed"] = seed;
  j["tolerances"] = to_json(tol);
  emit(cfg, j);
  return kOk;
}

// --------------------------------------------------------------- extract

int cmd_extract(const RunConfig& cfg) {
  const Tolerances tol = resolve_tolerances(cfg);
  const EvolutionHandle h = load_handle(cfg, tol);
  const Neighborhood nbhd = declared_neighborhood(cfg, h, tol);
  try {
    emit(cfg, to_json(extract_rule(h, nbhd, tol)));
  } catch (const SupportLeakage& e) {
    std::cerr << "qca: " << e.what() << " (leakage " << e.leakage() << ")\n";
    return kFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Quantum cellular automata: simulation, Heisenberg rules and lattice gas structure"};
  app.require_subcommand(1, 1);

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Seed for every randomized step (default: $QCA_CORR_SEED, else 0)");
    sub->add_option("--tol", cfg.tols, "Tolerance override NAME=VALUE (repeatable)");
    sub->add_option("--out", cfg.out, "Output path (stdout when omitted)");
    sub->add_option("--term-cap", cfg.term_cap, "Maximum number of terms in a sparse state");
  };
  const auto rule_input = [&](CLI::App* sub) {
    auto* m = sub->add_option("--model", cfg.model, "Model JSON (lattice gas or circuit)");
    auto* r = sub->add_option("--rule", cfg.rule, "Local rule JSON");
    m->excludes(r);
    sub->add_option("--neighborhood", cfg.neighborhood,
                    "Neighborhood as JSON offsets, e.g. [[0],[1]] (default: the model's)");
  };

  auto* simulate = app.add_subcommand("simulate", "Evolve a sparse state and write the trajectory");
  simulate->add_option("--model", cfg.model, "Model JSON")->required();
  simulate->add_option("--state", cfg.state, "Initial state JSON")->required();
  simulate->add_option("--steps", cfg.steps, "Number of steps");
  common(simulate);

  auto* check = app.add_subcommand("check", "Check unitarity, translation invariance, causality and supports");
  rule_input(check);
  check->add_option("--trials", cfg.trials, "Random trials for the sampled checks");
  common(check);

  auto* detect = app.add_subcommand("detect", "Decide whether a rule is a lattice gas and reconstruct it");
  rule_input(detect);
  detect->add_flag("--patches", cfg.patches, "Include the patch bases in the report");
  common(detect);

  auto* intertwine = app.add_subcommand("intertwine", "Solve for the unitary implementing a rule on a periodic window");
  rule_input(intertwine);
  intertwine->add_option("--window", cfg.window, "Window extent along every axis");
  intertwine->add_flag("--no-matrix", cfg.no_matrix, "Omit R from the report");
  common(intertwine);

  auto* extract = app.add_subcommand("extract", "Write the local rule of a model");
  rule_input(extract);
  common(extract);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*simulate) return cmd_simulate(cfg);
    if (*check) return cmd_check(cfg);
    if (*detect) return cmd_detect(cfg);
    if (*intertwine) return cmd_intertwine(cfg);
    if (*extract) return cmd_extract(cfg);
  } catch (const TermCapExceeded& e) {
    std::cerr << "qca: " << e.what() << "\n";
    return kTermCap;
  } catch (const Error& e) {
    std::cerr << "qca: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "qca: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
