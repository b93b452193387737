#pragma once

// Combinatorial and matrix objects of a factorial layout: effect tuples and
// containment, dummy-variable blocks E_j, ANOVA projectors H_j, and the
// observation-to-cell incidence matrix.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "typ3/matrix.hpp"

namespace typ3 {

/// Factors, their level counts, and (optionally) level labels.
/// Cells are ordered lexicographically with the last factor varying fastest.
struct FactorLayout {
  std::vector<std::string> names;
  std::vector<std::size_t> levels;
  std::vector<std::vector<std::string>> labels;  // may be empty

  FactorLayout() = default;
  FactorLayout(std::vector<std::string> n, std::vector<std::size_t> l,
               std::vector<std::vector<std::string>> lab = {})
      : names(std::move(n)), levels(std::move(l)), labels(std::move(lab)) {
    validate();
  }

  void validate() const {
    if (names.empty()) throw input_error("layout needs at least one factor");
    if (names.size() != levels.size()) throw input_error("layout: names/levels mismatch");
    if (names.size() > 16) throw input_error("layout: more than 16 factors");
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (levels[i] < 1) throw input_error("layout: factor " + names[i] + " has no levels");
      for (std::size_t j = 0; j < i; ++j)
        if (names[i] == names[j]) throw input_error("layout: duplicate factor " + names[i]);
    }
    if (!labels.empty()) {
      if (labels.size() != names.size()) throw input_error("layout: labels mismatch");
      for (std::size_t i = 0; i < names.size(); ++i)
        if (labels[i].size() != levels[i]) throw input_error("layout: labels mismatch");
    }
  }

  std::size_t factor_count() const noexcept { return names.size(); }

  std::size_t cell_count() const noexcept {
    return std::accumulate(levels.begin(), levels.end(), std::size_t{1},
                           std::multiplies<>());
  }

  /// Level index tuple (0-based) -> lexicographic cell index.
  std::size_t cell_index(std::span<const std::size_t> lv) const {
    if (lv.size() != levels.size()) throw input_error("cell_index: wrong tuple length");
    std::size_t idx = 0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (lv[k] >= levels[k]) throw input_error("cell_index: level out of range");
      idx = idx * levels[k] + lv[k];
    }
    return idx;
  }

  std::vector<std::size_t> cell_levels(std::size_t cell) const {
    std::vector<std::size_t> lv(levels.size());
    for (std::size_t k = levels.size(); k-- > 0;) {
      lv[k] = cell % levels[k];
      cell /= levels[k];
    }
    return lv;
  }

  std::string level_label(std::size_t factor, std::size_t level) const {
    if (!labels.empty()) return labels[factor][level];
    return std::to_string(level + 1);
  }

  std::size_t factor_index(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return k;
    throw input_error("unknown factor '" + name + "'");
  }
};

/// Binary f-tuple naming an effect. Bit k (counted from the left) is set when
/// factor k participates: "10" is A, "11" is A:B, "00" is the intercept.
class EffectId {
 public:
  EffectId() = default;
  EffectId(std::size_t f, std::uint32_t mask) : f_(f), mask_(mask) {
    if (f > 32 || (f < 32 && (mask >> f) != 0)) throw input_error("EffectId: mask wider than f");
  }

  /// From a string of '0'/'1' characters, e.g. "101".
  static EffectId parse(const std::string& bits) {
    if (bits.empty() || bits.size() > 16) throw input_error("EffectId: expected 1 to 16 digits");
    std::uint32_t m = 0;
    for (char c : bits) {
      if (c != '0' && c != '1') throw input_error("EffectId: expected 0/1 string");
      m = (m << 1) | static_cast<std::uint32_t>(c == '1');
    }
    return EffectId(bits.size(), m);
  }

  static EffectId intercept(std::size_t f) { return {f, 0}; }
  static EffectId saturated(std::size_t f) {
    return {f, f == 32 ? ~0u : ((1u << f) - 1u)};
  }

  std::size_t size() const noexcept { return f_; }
  std::uint32_t mask() const noexcept { return mask_; }
  bool bit(std::size_t k) const noexcept { return (mask_ >> (f_ - 1 - k)) & 1u; }
  EffectId with_bit(std::size_t k) const { return {f_, mask_ | (1u << (f_ - 1 - k))}; }
  bool is_intercept() const noexcept { return mask_ == 0; }
  std::size_t order() const noexcept { return static_cast<std::size_t>(__builtin_popcount(mask_)); }

  std::string to_string() const {
    std::string s(f_, '0');
    for (std::size_t k = 0; k < f_; ++k)
      if (bit(k)) s[k] = '1';
    return s;
  }

  friend bool operator==(const EffectId&, const EffectId&) = default;
  /// Lexicographic on the bit string.
  friend bool operator<(const EffectId& a, const EffectId& b) {
    return a.f_ != b.f_ ? a.f_ < b.f_ : a.mask_ < b.mask_;
  }

 private:
  std::size_t f_ = 0;
  std::uint32_t mask_ = 0;
};

/// j2 ⪰ j1: every factor of j1 also participates in j2.
inline bool contains(const EffectId& j2, const EffectId& j1) {
  if (j2.size() != j1.size()) throw input_error("contains: tuple length mismatch");
  return (j2.mask() & j1.mask()) == j1.mask();
}

/// j2 ≻ j1
inline bool strictly_contains(const EffectId& j2, const EffectId& j1) {
  return contains(j2, j1) && !(j2 == j1);
}

/// Ordered set of effects; order is insertion order.
class EffectSet {
 public:
  EffectSet() = default;
  EffectSet(std::initializer_list<EffectId> ids) {
    for (const auto& j : ids) insert(j);
  }
  static EffectSet from_strings(std::initializer_list<const char*> bits) {
    EffectSet s;
    for (const char* b : bits) s.insert(EffectId::parse(b));
    return s;
  }

  /// Returns false (and leaves the set unchanged) on a duplicate.
  bool insert(const EffectId& j) {
    if (has(j)) return false;
    if (!ids_.empty() && ids_.front().size() != j.size())
      throw input_error("EffectSet: mixed tuple lengths");
    ids_.push_back(j);
    return true;
  }
  bool erase(const EffectId& j) {
    auto it = std::find(ids_.begin(), ids_.end(), j);
    if (it == ids_.end()) return false;
    ids_.erase(it);
    return true;
  }
  bool has(const EffectId& j) const {
    return std::find(ids_.begin(), ids_.end(), j) != ids_.end();
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }
  const EffectId& operator[](std::size_t i) const { return ids_[i]; }

  /// Membership equality, ignoring order.
  bool same_members(const EffectSet& o) const {
    if (size() != o.size()) return false;
    return std::all_of(ids_.begin(), ids_.end(), [&](const EffectId& j) { return o.has(j); });
  }

  friend bool operator==(const EffectSet&, const EffectSet&) = default;

 private:
  std::vector<EffectId> ids_;
};

/// J̄: every tuple contained in at least one member of s, lexicographic order.
/// The tuple length comes from s (or from f when s is empty).
inline EffectSet closure(const EffectSet& s, std::size_t f = 0) {
  if (!s.empty()) f = s[0].size();
  EffectSet out;
  if (f == 0) return out;
  const std::uint32_t total = f == 32 ? 0 : (1u << f);
  for (std::uint32_t m = 0; m < total; ++m) {
    const EffectId j(f, m);
    for (const auto& member : s)
      if (contains(member, j)) {
        out.insert(j);
        break;
      }
  }
  return out;
}

/// All 2^f tuples, lexicographic.
inline EffectSet all_effects(std::size_t f) {
  return closure(EffectSet{EffectId::saturated(f)});
}

namespace detail {
inline Matrix ones_column(std::size_t a) { return Matrix(a, 1, 1.0); }

inline Matrix mean_projector(std::size_t a) {
  return Matrix(a, a, 1.0 / static_cast<double>(a));
}

inline Matrix centering_projector(std::size_t a) {
  return Matrix::identity(a) - mean_projector(a);
}

inline void check_effect(const FactorLayout& layout, const EffectId& j) {
  if (j.size() != layout.factor_count())
    throw input_error("effect " + j.to_string() + " does not match layout");
}
}  // namespace detail

/// E_j = ⊗ₖ (1_{a_k} if j_k = 0, I_{a_k} if j_k = 1).
inline Matrix effect_columns(const FactorLayout& layout, const EffectId& j) {
  detail::check_effect(layout, j);
  Matrix e = Matrix::identity(1);
  for (std::size_t k = 0; k < layout.factor_count(); ++k) {
    const std::size_t a = layout.levels[k];
    e = kron(e, j.bit(k) ? Matrix::identity(a) : detail::ones_column(a));
  }
  return e;
}

/// E_𝒥: concatenation of effect_columns over s in set order.
inline Matrix model_columns(const FactorLayout& layout, const EffectSet& s) {
  if (s.empty()) throw input_error("model_columns: empty effect set");
  Matrix e;
  for (const auto& j : s) e = hconcat(e, effect_columns(layout, j));
  return e;
}

/// H_j = ⊗ₖ (U_{a_k} if j_k = 0, S_{a_k} if j_k = 1).
inline Matrix anova_projector(const FactorLayout& layout, const EffectId& j) {
  detail::check_effect(layout, j);
  Matrix h = Matrix::identity(1);
  for (std::size_t k = 0; k < layout.factor_count(); ++k) {
    const std::size_t a = layout.levels[k];
    h = kron(h, j.bit(k) ? detail::centering_projector(a) : detail::mean_projector(a));
  }
  return h;
}

/// Σ H_j over s.
inline Matrix anova_projector_sum(const FactorLayout& layout, const EffectSet& s) {
  const std::size_t n = layout.cell_count();
  Matrix h(n, n);
  for (const auto& j : s) h = h + anova_projector(layout, j);
  return h;
}

/// ν* for a single effect: ∏_{k: j_k=1} (a_k − 1).
inline std::size_t innate_df(const FactorLayout& layout, const EffectId& j) {
  detail::check_effect(layout, j);
  std::size_t d = 1;
  for (std::size_t k = 0; k < layout.factor_count(); ++k)
    if (j.bit(k)) d *= layout.levels[k] - 1;
  return d;
}

/// Per-cell observation counts n_ℓ in cell order.
struct CellCounts {
  std::vector<std::size_t> counts;

  std::size_t total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  }
  std::size_t empty_cells() const {
    return static_cast<std::size_t>(std::count(counts.begin(), counts.end(), 0u));
  }
};

struct Incidence {
  Matrix k;  // n x a•
  CellCounts counts;
};

/// 𝕂: one row per observation with a single 1 in its cell's column.
inline Incidence incidence(const FactorLayout& layout, std::span<const std::size_t> cells) {
  const std::size_t a = layout.cell_count();
  Incidence out{Matrix(cells.size(), a), CellCounts{std::vector<std::size_t>(a, 0)}};
  for (std::size_t t = 0; t < cells.size(); ++t) {
    if (cells[t] >= a)
      throw input_error("observation " + std::to_string(t) + ": cell index out of range");
    out.k(t, cells[t]) = 1.0;
    ++out.counts.counts[cells[t]];
  }
  return out;
}

/// 𝕂ᵢ = Diag(x)𝕂.
inline Matrix covariate_incidence(const Matrix& k0, std::span<const double> x) {
  if (x.size() != k0.rows()) throw input_error("covariate length does not match observations");
  Matrix ki = k0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (!std::isfinite(x[t]))
      throw input_error("covariate value at observation " + std::to_string(t) + " is not finite");
    for (std::size_t j = 0; j < ki.cols(); ++j) ki(t, j) *= x[t];
  }
  return ki;
}

/// Observations: the cell of each subject, covariate columns, response.
struct Dataset {
  std::vector<std::size_t> cells;
  std::vector<std::pair<std::string, std::vector<double>>> covariates;
  std::vector<double> response;

  std::size_t size() const noexcept { return cells.size(); }

  const std::vector<double>& covariate(const std::string& name) const {
    for (const auto& [n, v] : covariates)
      if (n == name) return v;
    throw input_error("covariate column '" + name + "' missing");
  }
};

}  // namespace typ3
