#pragma once

// Brute-force cross-checks for the engine. Least squares here goes through
// the normal equations in long double with full pivoting, a numerical path
// that shares nothing with the Gram–Schmidt machinery it validates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "typ3/engine.hpp"

namespace typ3::oracle {

namespace detail {

struct PivotedSolve {
  std::size_t rank = 0;
  std::vector<long double> solution;
};

// Solves (XᵀX) b = Xᵀy by Gauss–Jordan with full pivoting; free variables are 0.
inline PivotedSolve normal_equations(const Matrix& x, std::span<const double> y) {
  const std::size_t k = x.cols(), n = x.rows();
  std::vector<long double> a(k * k), b(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      long double s = 0;
      for (std::size_t t = 0; t < n; ++t) s += static_cast<long double>(x(t, i)) * x(t, j);
      a[i * k + j] = a[j * k + i] = s;
    }
    long double s = 0;
    for (std::size_t t = 0; t < n; ++t) s += static_cast<long double>(x(t, i)) * y[t];
    b[i] = s;
  }
  long double scale = 0;
  for (std::size_t i = 0; i < k; ++i) scale = std::max(scale, std::fabs(a[i * k + i]));

  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  PivotedSolve out;
  std::size_t r = 0;
  for (; r < k; ++r) {
    std::size_t pi = r, pj = r;
    long double best = 0;
    for (std::size_t i = r; i < k; ++i)
      for (std::size_t j = r; j < k; ++j)
        if (std::fabs(a[i * k + j]) > best) {
          best = std::fabs(a[i * k + j]);
          pi = i;
          pj = j;
        }
    if (!(best > 1e-11L * scale) || scale == 0) break;
    for (std::size_t j = 0; j < k; ++j) std::swap(a[r * k + j], a[pi * k + j]);
    std::swap(b[r], b[pi]);
    for (std::size_t i = 0; i < k; ++i) std::swap(a[i * k + r], a[i * k + pj]);
    std::swap(perm[r], perm[pj]);
    const long double d = a[r * k + r];
    for (std::size_t i = 0; i < k; ++i) {
      if (i == r) continue;
      const long double m = a[i * k + r] / d;
      if (m == 0) continue;
      for (std::size_t j = r; j < k; ++j) a[i * k + j] -= m * a[r * k + j];
      b[i] -= m * b[r];
    }
  }
  out.rank = r;
  out.solution.assign(k, 0);
  for (std::size_t i = 0; i < r; ++i) out.solution[perm[i]] = b[i] / a[i * k + i];
  return out;
}

}  // namespace detail

/// Rank by pivoted elimination on XᵀX.
inline std::size_t oracle_rank(const Matrix& x) {
  if (x.cols() == 0) return 0;
  std::vector<double> zero(x.rows(), 0.0);
  return detail::normal_equations(x, zero).rank;
}

/// min_b ‖y − Xb‖².
inline double ls_sse(const Matrix& x, std::span<const double> y) {
  if (x.rows() != y.size()) throw input_error("ls_sse: dimension mismatch");
  long double sse = 0;
  if (x.cols() == 0) {
    for (double v : y) sse += static_cast<long double>(v) * v;
    return static_cast<double>(sse);
  }
  const auto sol = detail::normal_equations(x, y);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    long double r = y[t];
    for (std::size_t j = 0; j < x.cols(); ++j) r -= sol.solution[j] * x(t, j);
    sse += r * r;
  }
  return static_cast<double>(sse);
}

/// SSE(restricted) − SSE(full); span(restricted) must lie in span(full).
inline double rmfm_oracle(const Matrix& x_full, const Matrix& x_restricted, std::span<const double> y) {
  if (x_restricted.cols() > 0) {
    if (oracle_rank(hconcat(x_full, x_restricted)) != oracle_rank(x_full))
      throw input_error("rmfm_oracle: restricted model is not contained in the full model");
  }
  return ls_sse(x_restricted, y) - ls_sse(x_full, y);
}

/// gᵀβ estimable iff the residual of regressing g on the rows of X vanishes.
inline bool estimable_oracle(const Matrix& x, std::span<const double> g) {
  if (g.size() != x.cols()) throw input_error("estimable_oracle: length mismatch");
  const double gn = norm2(g);
  if (gn == 0.0) return true;
  return std::sqrt(std::max(ls_sse(transpose(x), g), 0.0)) <= 1e-9 * gn;
}

/// A reproducible random factorial data set with a model and a true β.
struct SyntheticScenario {
  std::uint64_t seed = 0;
  FactorLayout layout;
  CellCounts counts;
  ModelSpec spec;
  Dataset data;
  std::vector<double> beta;
  double sigma = 1.0;
};

struct ScenarioOptions {
  std::size_t max_factors = 3;
  std::size_t max_levels = 4;
  double empty_fraction = 0.0;
  /// When non-empty, overrides the random layout.
  std::vector<std::size_t> fixed_levels;
  double covariate_probability = 0.3;
};

inline SyntheticScenario random_design(std::uint64_t seed, const ScenarioOptions& opt = {}) {
  if (opt.max_factors < 1 || opt.max_factors > 3 || opt.max_levels < 2 || opt.max_levels > 4 ||
      opt.empty_fraction < 0.0 || opt.empty_fraction >= 1.0)
    throw input_error("random_design: parameters out of range");
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticScenario s;
  s.seed = seed;
  std::vector<std::size_t> levels = opt.fixed_levels;
  if (levels.empty()) {
    const std::size_t f = uniform(1, opt.max_factors);
    for (std::size_t k = 0; k < f; ++k) levels.push_back(uniform(2, opt.max_levels));
  }
  const std::size_t f = levels.size();
  std::vector<std::string> names;
  for (std::size_t k = 0; k < f; ++k) names.push_back(std::string(1, static_cast<char>('A' + k)));
  s.layout = FactorLayout(names, levels);

  const std::size_t cells = s.layout.cell_count();
  s.counts.counts.assign(cells, 0);
  for (auto& c : s.counts.counts) c = coin(opt.empty_fraction) ? 0 : uniform(1, 3);
  if (s.counts.total() == 0) s.counts.counts[uniform(0, cells - 1)] = 1;

  // Model: full factorial half the time, otherwise a random (possibly
  // non-hierarchical) subset of effects; sometimes a covariate sub-model.
  const bool use_covariate = coin(opt.covariate_probability);
  std::string formula = "y ~ ";
  const bool full = coin(0.5);
  std::vector<std::string> terms;
  for (const auto& j : all_effects(f)) {
    if (j.is_intercept()) continue;
    if (!full && !coin(0.6)) continue;
    std::string t;
    for (std::size_t k = 0; k < f; ++k)
      if (j.bit(k)) t += (t.empty() ? "" : ":") + names[k];
    terms.push_back(t);
  }
  std::stable_sort(terms.begin(), terms.end(), [](const std::string& a, const std::string& b) {
    return std::count(a.begin(), a.end(), ':') < std::count(b.begin(), b.end(), ':');
  });
  if (use_covariate) {
    terms.push_back("x1");
    for (std::size_t k = 0; k < f; ++k)
      if (coin(0.5)) terms.push_back(names[k] + ":x1");
  }
  formula += "1";
  for (const auto& t : terms) formula += " + " + t;
  std::vector<std::string> covs;
  if (use_covariate) covs.push_back("x1");
  s.spec = parse_formula(formula, names, covs);

  for (std::size_t c = 0; c < cells; ++c)
    for (std::size_t m = 0; m < s.counts.counts[c]; ++m) s.data.cells.push_back(c);
  const std::size_t n = s.data.cells.size();
  if (use_covariate) {
    std::vector<double> x(n);
    for (auto& v : x) v = normal(rng);
    s.data.covariates.push_back({"x1", x});
  }
  s.data.response.assign(n, 0.0);
  const auto ctx = build_context(s.layout, s.spec, s.data);
  s.beta.resize(ctx.x.cols());
  for (auto& b : s.beta) b = 2.0 * normal(rng);
  const auto mu = matvec(ctx.x, s.beta);
  for (std::size_t t = 0; t < n; ++t) s.data.response[t] = mu[t] + s.sigma * normal(rng);
  return s;
}

/// One cross-check between an engine value and its oracle counterpart.
struct OracleReport {
  std::size_t scenario = 0;
  std::uint64_t seed = 0;
  std::string check;
  std::string effect;
  double engine = 0.0;
  double oracle = 0.0;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  nlohmann::ordered_json to_json() const {
    return {{"scenario", scenario}, {"seed", seed},       {"check", check},
            {"effect", effect},     {"engine", engine},   {"oracle", oracle},
            {"discrepancy", discrepancy}, {"tolerance", tolerance}, {"pass", pass}};
  }
};

struct SuiteResult {
  std::vector<OracleReport> reports;
  std::size_t scenarios = 0;
  /// Scenarios where every pair of Type III contrast spans met only at {0}.
  std::size_t trivially_intersecting = 0;

  bool all_pass() const {
    return std::all_of(reports.begin(), reports.end(), [](const OracleReport& r) { return r.pass; });
  }
  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(reports.begin(), reports.end(), [](const OracleReport& r) { return !r.pass; }));
  }
};

/// Per-scenario seed derived from the suite seed (splitmix64 step).
inline std::uint64_t scenario_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

// Relative difference; floor keeps values at rounding-noise level (both ≈ 0) comparable.
inline double relative(double engine, double oracle, double floor) {
  const double scale = std::max({std::abs(engine), std::abs(oracle), floor});
  return scale > 0.0 ? std::abs(engine - oracle) / scale : 0.0;
}

}  // namespace detail

/// Runs every engine-vs-oracle check on one scenario, appending to out.
inline void check_scenario(const SyntheticScenario& s, std::size_t index, SuiteResult& out) {
  const auto ctx = build_context(s.layout, s.spec, s.data);
  const auto& y = s.data.response;

  auto report = [&](const std::string& check, const std::string& effect, double engine, double oracle,
                    double discrepancy, double tol) {
    out.reports.push_back({index, s.seed, check, effect, engine, oracle, discrepancy, tol,
                           discrepancy <= tol});
  };
  double total = 0.0;
  for (double v : y) total += v * v;
  const double floor = 1e-12 * total;
  auto compare = [&](const std::string& check, const std::string& effect, double engine, double oracle,
                     double tol) {
    report(check, effect, engine, oracle, detail::relative(engine, oracle, floor), tol);
  };
  auto exact = [&](const std::string& check, const std::string& effect, double engine, double oracle) {
    report(check, effect, engine, oracle, std::abs(engine - oracle), 0.0);
  };
  auto bound = [&](const std::string& check, const std::string& effect, double value, double limit) {
    report(check, effect, value, limit, value, limit);
  };

  // Fit and the sequential decomposition.
  const auto fitted = fit(ctx, y);
  compare("sse", "", fitted.sse, ls_sse(ctx.x, y), 1e-8);
  exact("df_error", "", static_cast<double>(fitted.df_error),
        static_cast<double>(ctx.n() - oracle_rank(ctx.x)));
  double type1_sum = fitted.sse;
  {
    Matrix acc(ctx.n(), 0);
    for (const auto& row : type1_table(ctx, y)) {
      const Matrix before = acc;
      acc = hconcat(acc, select_columns(ctx.x, ctx.columns_of(row.term)));
      const std::string label = s.spec.label(row.term);
      compare("type1_ss", label, row.ss, rmfm_oracle(acc, before, y), 1e-8);
      exact("type1_df", label, static_cast<double>(row.df),
            static_cast<double>(oracle_rank(acc) - oracle_rank(before)));
      type1_sum += row.ss;
    }
  }
  compare("type1_additivity", "", type1_sum, total, 1e-9);

  std::vector<OrthonormalBasis> spans;
  for (const auto& term : s.spec.term_order) {
    const std::string label = s.spec.label(term);
    const auto a = analyze_effect(ctx, term, y);
    const auto& p = a.part;
    const Matrix full3 = hconcat(hconcat(p.x0, p.x1), a.constr.x2star);
    const Matrix restricted3 = hconcat(p.x0, a.constr.x2star);
    compare("type3_ss", label, a.type3.ss, rmfm_oracle(full3, restricted3, y), 1e-8);
    exact("type3_df", label, static_cast<double>(a.type3.df),
          static_cast<double>(oracle_rank(ctx.x) - oracle_rank(restricted3)));
    const Matrix full2 = hconcat(p.x0, p.x1);
    compare("type2_ss", label, a.type2.ss, rmfm_oracle(full2, p.x0, y), 1e-8);
    exact("type2_df", label, static_cast<double>(a.type2.df),
          static_cast<double>(oracle_rank(full2) - oracle_rank(p.x0)));
    exact("type2_df_eq_type3_df", label, static_cast<double>(a.type2.df),
          static_cast<double>(a.type3.df));

    const auto& d = a.dfs;
    const bool chain = d.estimable_part <= d.type3 && d.type3 <= d.one_given_zero &&
                       d.one_given_zero <= d.innate;
    report("df_chain", label, chain ? 1.0 : 0.0, 1.0, chain ? 0.0 : 1.0, 0.0);

    // Estimable part: dimension by rank arithmetic, and each basis direction
    // passes the residual test.
    const auto bh = gram_schmidt(a.hstar);
    const Matrix v = lift_to_beta(ctx, term.submodel, bh.carrier);
    const Matrix xt = transpose(ctx.x);
    const std::size_t oracle_dim = oracle_rank(v) + oracle_rank(xt) - oracle_rank(hconcat(v, xt));
    exact("estimable_part_dim", label, static_cast<double>(a.estimable.dim()),
          static_cast<double>(oracle_dim));
    for (std::size_t k = 0; k < a.estimable.dim(); ++k) {
      const Matrix g = lift_to_beta(ctx, term.submodel, Matrix::column(a.estimable.carrier.col(k)));
      const bool ok = estimable_oracle(ctx.x, g.col(0));
      report("estimable_direction", label, ok ? 1.0 : 0.0, 1.0, ok ? 0.0 : 1.0, 0.0);
    }

    // H*E₀ = 0, H*E_{1|0} = E_{1|0}, H*E_{2*} = 0.
    const auto blocks = cell_space_blocks(ctx, p, a.constr);
    auto scaled = [](const Matrix& m, const Matrix& ref) { return max_abs(m) / std::max(1.0, max_abs(ref)); };
    bound("hstar_e0", label, scaled(multiply(a.hstar, blocks.e0), blocks.e0), 1e-9);
    bound("hstar_e1_given_0", label,
          scaled(multiply(a.hstar, blocks.e1_given_0) - blocks.e1_given_0, blocks.e1_given_0), 1e-9);
    bound("hstar_e2star", label, scaled(multiply(a.hstar, blocks.e2star), blocks.e2star), 1e-9);

    // Tested contrasts include the estimable part of H*η.
    if (a.estimable.dim() > 0) {
      const Matrix resid = a.estimable.carrier - project(a.contrasts.span, a.estimable.carrier);
      bound("estimable_in_contrasts", label, max_abs(resid), 1e-8);
    }

    // Null direction: μ = X₀b₀ + X₁b₁ + X₂*b₂ with X_{1|0}b₁ = 0 gives P₃μ = 0.
    {
      std::mt19937_64 rng(s.seed ^ (0x5bd1e995ULL * (index + 7)));
      std::normal_distribution<double> normal(0.0, 1.0);
      auto draw = [&](std::size_t k) {
        std::vector<double> b(k);
        for (auto& v : b) v = normal(rng);
        return b;
      };
      const auto q0 = gram_schmidt(p.x0);
      const Matrix x1_given_0 = p.x1 - project(q0, p.x1);
      const auto null_b1 = complement_within(transpose(x1_given_0), Matrix::identity(p.x1.cols()));
      std::vector<double> mu(ctx.n(), 0.0);
      auto add = [&](const std::vector<double>& v) {
        for (std::size_t t = 0; t < mu.size(); ++t) mu[t] += v[t];
      };
      if (p.x0.cols() > 0) add(matvec(p.x0, draw(p.x0.cols())));
      if (null_b1.dim() > 0) add(matvec(p.x1, matvec(null_b1.carrier, draw(null_b1.dim()))));
      add(matvec(a.constr.x2star, draw(a.constr.x2star.cols())));
      const double mn = norm2(mu);
      const double p3 = std::sqrt(projected_sq_norm(a.constr.q3, mu));
      bound("null_delta3", label, mn > 0.0 ? p3 / mn : 0.0, 1e-9);
    }
    if (term.submodel == 0) spans.push_back(a.contrasts.span);
  }

  bool trivial = true;
  for (std::size_t i = 0; i < spans.size(); ++i)
    for (std::size_t j = i + 1; j < spans.size(); ++j)
      if (intersect(spans[i], spans[j], Tolerance{1e-8, 1e-12}).dim() > 0) trivial = false;
  if (trivial) ++out.trivially_intersecting;
  ++out.scenarios;
}

/// count scenarios, alternating between no empty cells and ~25% empty cells.
inline SuiteResult run_suite(std::uint64_t seed, std::size_t count) {
  SuiteResult out;
  for (std::size_t i = 0; i < count; ++i) {
    ScenarioOptions opt;
    opt.empty_fraction = (i % 2 == 0) ? 0.0 : 0.25;
    check_scenario(random_design(scenario_seed(seed, i), opt), i, out);
  }
  return out;
}

}  // namespace typ3::oracle
