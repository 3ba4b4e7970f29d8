#include "qca/tolerances.hpp"

#include <charconv>
#include <cmath>

#include "qca/error.hpp"

namespace qca {

namespace {

struct Field {
  const char* name;
  double Tolerances::*member;
};

constexpr Field kFields[] = {
    {"prune", &Tolerances::prune},
    {"reduce", &Tolerances::reduce},
    {"algebraic", &Tolerances::algebraic},
    {"leakage", &Tolerances::leakage},
    {"causality", &Tolerances::causality},
    {"validation", &Tolerances::validation},
    {"intertwiner", &Tolerances::intertwiner},
    {"rank", &Tolerances::rank},
    {"translation", &Tolerances::translation},
};

}  // namespace

void Tolerances::set(std::string_view name, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvariantError("tolerance " + std::string(name) + " must be positive and finite");
  }
  for (const Field& f : kFields) {
    if (name == f.name) {
      this->*f.member = value;
      return;
    }
  }
  throw InvariantError("unknown tolerance name: " + std::string(name));
}

void Tolerances::set_from_string(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw InvariantError("tolerance override must look like NAME=VALUE, got '" +
                         std::string(assignment) + "'");
  }
  const std::string_view name = assignment.substr(0, eq);
  const std::string_view text = assignment.substr(eq + 1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvariantError("cannot parse tolerance value '" + std::string(text) + "'");
  }
  set(name, value);
}

std::vector<std::pair<std::string, double>> Tolerances::entries() const {
  std::vector<std::pair<std::string, double>> out;
  for (const Field& f : kFields) out.emplace_back(f.name, this->*f.member);
  return out;
}

}  // namespace qca
