#include "qca/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "qca/error.hpp"

namespace qca {

namespace {

template <class F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw InvariantError(std::string(what) + ": " + e.what());
  }
}

Json vector_json(const std::vector<int>& v) { return Json(v); }

}  // namespace

Json to_json(const Site& s) {
  return Json(std::vector<std::int64_t>(s.coords().begin(), s.coords().end()));
}

Site site_from_json(const Json& j) {
  return guarded("site", [&] {
    const auto c = j.get<std::vector<std::int64_t>>();
    if (c.empty()) throw InvariantError("site: empty coordinate list");
    return Site(std::span<const std::int64_t>(c));
  });
}

Json to_json(const Configuration& c) {
  Json sites = Json::array();
  Json values = Json::array();
  for (const auto& cell : c.cells()) {
    sites.push_back(to_json(cell.site));
    values.push_back(cell.value);
  }
  return Json{{"sites", sites}, {"values", values}};
}

Configuration configuration_from_json(const Json& j) {
  return guarded("configuration", [&] {
    const auto& sites = j.at("sites");
    const auto& values = j.at("values");
    if (sites.size() != values.size()) {
      throw InvariantError("configuration: sites and values differ in length");
    }
    std::vector<ActiveCell> cells;
    for (std::size_t k = 0; k < sites.size(); ++k) {
      cells.push_back({site_from_json(sites[k]), values[k].get<std::uint32_t>()});
    }
    return Configuration::from_cells(std::move(cells));
  });
}

Json to_json(const SparseState& psi) {
  Json out = Json::array();
  for (const auto& t : psi.terms()) {
    out.push_back({{"config", to_json(t.config)}, {"re", t.amplitude.real()}, {"im", t.amplitude.imag()}});
  }
  return out;
}

SparseState state_from_json(const Json& j, int lattice_dim, CellSpace cell) {
  return guarded("state", [&] {
    if (!j.is_array()) throw InvariantError("state: expected an array of terms");
    std::vector<Term> terms;
    for (const auto& t : j) {
      Configuration c = configuration_from_json(t.at("config"));
      for (const auto& a : c.cells()) {
        if (a.site.dim() != lattice_dim) throw InvariantError("state: site dimension mismatch");
      }
      terms.push_back({std::move(c), Complex{t.at("re").get<double>(), t.at("im").get<double>()}});
    }
    return SparseState::from_terms(lattice_dim, cell, std::move(terms));
  });
}

Json to_json(const Matrix& m) {
  Json re = Json::array();
  Json im = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json rr = Json::array();
    Json ii = Json::array();
    for (Index k = 0; k < m.cols(); ++k) {
      rr.push_back(m(i, k).real());
      ii.push_back(m(i, k).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ii));
  }
  Json out;
  if (m.rows() == m.cols()) {
    out["dim"] = m.rows();
  } else {
    out["rows"] = m.rows();
    out["cols"] = m.cols();
  }
  out["re"] = std::move(re);
  out["im"] = std::move(im);
  return out;
}

Matrix matrix_from_json(const Json& j) {
  return guarded("matrix", [&] {
    const Index rows = j.contains("dim") ? j.at("dim").get<Index>() : j.at("rows").get<Index>();
    const Index cols = j.contains("dim") ? rows : j.at("cols").get<Index>();
    const auto& re = j.at("re");
    const bool has_im = j.contains("im");
    if (static_cast<Index>(re.size()) != rows || (has_im && static_cast<Index>(j.at("im").size()) != rows)) {
      throw InvariantError("matrix: row count does not match its dimension");
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      const auto& rr = re[static_cast<std::size_t>(i)];
      if (static_cast<Index>(rr.size()) != cols) throw InvariantError("matrix: ragged rows");
      for (Index k = 0; k < cols; ++k) {
        const double imag = has_im ? j.at("im")[static_cast<std::size_t>(i)].at(static_cast<std::size_t>(k)).get<double>() : 0.0;
        m(i, k) = Complex{rr[static_cast<std::size_t>(k)].get<double>(), imag};
      }
    }
    return m;
  });
}

Json to_json(const LocalOperator& a) {
  Json support = Json::array();
  for (const auto& s : a.support()) support.push_back(to_json(s));
  return Json{{"support", support}, {"matrix", to_json(a.matrix())}};
}

LocalOperator operator_from_json(const Json& j, int cell_dim) {
  return guarded("operator", [&] {
    std::vector<Site> support;
    for (const auto& s : j.at("support")) support.push_back(site_from_json(s));
    return LocalOperator::from_unordered(std::move(support), matrix_from_json(j.at("matrix")), cell_dim);
  });
}

Json to_json(const Neighborhood& n) {
  Json out = Json::array();
  for (const auto& y : n.offsets()) out.push_back(to_json(y));
  return out;
}

Neighborhood neighborhood_from_json(const Json& j) {
  return guarded("neighborhood", [&] {
    std::vector<Site> offsets;
    for (const auto& s : j) offsets.push_back(site_from_json(s));
    return Neighborhood(std::move(offsets));
  });
}

Json to_json(const QlgaModel& m) {
  Json factors = Json::array();
  for (std::size_t k = 0; k < m.dims().size(); ++k) {
    factors.push_back({{"offset", to_json(m.neighborhood()[k])}, {"dim", m.dims()[k]}, {"q", 0}});
  }
  return Json{{"n", m.lattice_dim()},
              {"neighborhood", to_json(m.neighborhood())},
              {"factors", factors},
              {"collision", to_json(m.collision())}};
}

QlgaModel qlga_from_json(const Json& j, double tol) {
  return guarded("model", [&] {
    std::vector<SubcellFactor> factors;
    for (const auto& f : j.at("factors")) {
      factors.push_back({site_from_json(f.at("offset")), f.at("dim").get<int>(), f.value("q", 0)});
    }
    QlgaModel m = QlgaModel::from_factors(std::move(factors), matrix_from_json(j.at("collision")), tol);
    if (j.contains("n") && j.at("n").get<int>() != m.lattice_dim()) {
      throw InvariantError("model: \"n\" does not match the offsets");
    }
    if (j.contains("neighborhood") &&
        neighborhood_from_json(j.at("neighborhood")).offsets() != m.neighborhood().offsets()) {
      throw InvariantError("model: neighborhood does not match the factor offsets");
    }
    return m;
  });
}

Json to_json(const PartitionedCircuit& c) {
  Json layers = Json::array();
  for (const auto& l : c.layers()) {
    Json shape = Json::array();
    for (const auto& s : l.shape) shape.push_back(to_json(s));
    layers.push_back({{"shape", shape}, {"offset", to_json(l.offset)}, {"period", l.period}, {"block", to_json(l.block)}});
  }
  return Json{{"n", c.lattice_dim()}, {"d", c.cell_dim()}, {"layers", layers}};
}

PartitionedCircuit circuit_from_json(const Json& j, double tol) {
  return guarded("circuit", [&] {
    const int n = j.at("n").get<int>();
    const int d = j.at("d").get<int>();
    std::vector<CircuitLayer> layers;
    for (const auto& l : j.at("layers")) {
      std::vector<Site> shape;
      for (const auto& s : l.at("shape")) shape.push_back(site_from_json(s));
      layers.push_back(PartitionedCircuit::make_layer(std::move(shape), site_from_json(l.at("offset")),
                                                      l.at("period").get<std::vector<std::int64_t>>(),
                                                      matrix_from_json(l.at("block")), d));
    }
    return PartitionedCircuit(n, d, std::move(layers), tol);
  });
}

EvolutionHandle handle_from_json(const Json& j, double tol) {
  EvolutionHandle h = j.contains("layers") ? EvolutionHandle::from_circuit(circuit_from_json(j, tol))
                                           : EvolutionHandle::from_qlga(qlga_from_json(j, tol));
  if (j.contains("block")) {
    h = h.blocked(guarded("model", [&] { return j.at("block").get<std::vector<std::int64_t>>(); }));
  }
  return h;
}

Json to_json(const LocalRule& r) {
  Json images = Json::array();
  for (int i = 0; i < r.cell_dim(); ++i) {
    for (int k = 0; k < r.cell_dim(); ++k) images.push_back({{"i", i}, {"j", k}, {"op", to_json(r.image(i, k))}});
  }
  return Json{{"neighborhood", to_json(r.neighborhood())}, {"d", r.cell_dim()}, {"images", images}};
}

LocalRule rule_from_json(const Json& j) {
  return guarded("rule", [&] {
    Neighborhood nbhd = neighborhood_from_json(j.at("neighborhood"));
    const auto& items = j.at("images");
    int d = 0;
    if (j.contains("d")) {
      d = j.at("d").get<int>();
    } else {
      d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(items.size()))));
    }
    if (d < 1 || static_cast<std::size_t>(d) * d != items.size()) {
      throw InvariantError("rule: expected d*d images");
    }
    std::vector<LocalOperator> images(items.size());
    std::vector<bool> seen(items.size(), false);
    for (const auto& item : items) {
      const int i = item.at("i").get<int>();
      const int k = item.at("j").get<int>();
      if (i < 0 || k < 0 || i >= d || k >= d) throw InvariantError("rule: matrix unit index out of range");
      const auto slot = static_cast<std::size_t>(i * d + k);
      if (seen[slot]) throw InvariantError("rule: duplicate image");
      seen[slot] = true;
      images[slot] = operator_from_json(item.at("op"), d);
    }
    return LocalRule(std::move(nbhd), d, std::move(images));
  });
}

Json to_json(const ValidationReport& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"residual", c.residual}, {"passed", c.passed}});
  return Json{{"accepted", r.accepted}, {"max_residual", r.max_residual()}, {"checks", checks}};
}

Json to_json(const Tolerances& t) {
  Json out = Json::object();
  for (const auto& [name, value] : t.entries()) out[name] = value;
  return out;
}

Json to_json(const Patch& p) {
  Json basis = Json::array();
  for (const auto& b : p.basis) basis.push_back(to_json(b));
  return Json{{"offset", to_json(p.offset)}, {"source", to_json(p.source)}, {"dim", p.dim()}, {"basis", basis}};
}

Json to_json(const DetectionReport& r, const std::vector<Patch>& patches) {
  Json out{{"qlga", r.qlga},
           {"dims", vector_json(r.dims)},
           {"patch_dims", vector_json(r.patch_dims)},
           {"rank", r.rank},
           {"target_rank", r.target_rank},
           {"S", r.s.size() ? to_json(r.s) : Json(nullptr)},
           {"F", r.f.size() ? to_json(r.f) : Json(nullptr)},
           {"residuals", r.residuals},
           {"diagnostics", r.diagnostics},
           {"seed", r.seed},
           {"tolerances", to_json(r.tolerances)}};
  if (!r.leg_bases.empty()) {
    Json legs = Json::array();
    for (const auto& b : r.leg_bases) legs.push_back(to_json(b));
    out["leg_bases"] = legs;
  }
  if (r.model) out["model"] = to_json(*r.model);
  if (!patches.empty()) {
    Json ps = Json::array();
    for (const auto& p : patches) ps.push_back(to_json(p));
    out["patches"] = ps;
  }
  return out;
}

Json to_json(const IntertwinerResult& r, bool include_matrix) {
  Json out{{"window", r.window.extents},
           {"uniqueness", to_string(r.uniqueness)},
           {"nullspace_dim", r.nullspace_dim},
           {"residual", r.residual},
           {"residual_exhaustive", r.residual_exhaustive},
           {"unitarity", r.unitarity},
           {"phase_convention", r.phase_convention}};
  if (include_matrix) out["R"] = r.r.size() ? to_json(r.r) : Json(nullptr);
  return out;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvariantError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InvariantError(path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

void write_json_atomic(const std::filesystem::path& path, const Json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace qca
