#pragma once

#include <random>
#include <vector>

#include "typ3/engine.hpp"

namespace typ3::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(r, c);
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t i = 0; i < r; ++i) m(i, j) = normal(rng);
  return m;
}

/// A 3×3 table with cell sizes (1,2,3,3,1,2,3,2,1).
inline const std::vector<std::vector<double>>& table1_cells() {
  static const std::vector<std::vector<double>> cells{
      {50.0}, {22.2, 111.7}, {65.3, 53.2, 54.2}, {101.3, 42.0, 95.5}, {65.4},
      {99.8, 126.8}, {87.3, 88.6, 133.2}, {67.0, 70.2}, {106.2}};
  return cells;
}

/// table1 with the listed cells emptied.
inline Dataset table1(const std::vector<std::size_t>& drop = {}) {
  Dataset d;
  const auto& cells = table1_cells();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (std::find(drop.begin(), drop.end(), c) != drop.end()) continue;
    for (double v : cells[c]) {
      d.cells.push_back(c);
      d.response.push_back(v);
    }
  }
  return d;
}

inline FactorLayout layout3x3() { return FactorLayout({"A", "B"}, {3, 3}); }

inline DesignContext table1_context(const std::string& formula, const std::vector<std::size_t>& drop = {}) {
  return build_context(layout3x3(), parse_formula(formula, {"A", "B"}, {}), table1(drop));
}

inline TermRef term(const char* bits, std::size_t submodel = 0) { return {submodel, EffectId::parse(bits)}; }

}  // namespace typ3::test
