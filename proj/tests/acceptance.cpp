// Acceptance checks. `acceptance` runs all criteria; `acceptance N` runs one.
// One PASS/FAIL line per criterion; exit status is nonzero if any selected
// criterion fails.

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "typ3/cli.hpp"
#include "typ3/oracle.hpp"

using namespace typ3;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? " ok" : " FAILED");
  }
};

cli::Ingested load(const std::string& file) {
  cli::IngestConfig cfg;
  cfg.data_path = std::string(TYP3_DATA_DIR) + "/" + file;
  cfg.response = "y";
  cfg.factors = {"A", "B"};
  cfg.levels = {{"A", {"1", "2", "3"}}, {"B", {"1", "2", "3"}}};
  return cli::ingest(cfg);
}

DesignContext context(const cli::Ingested& in, const std::string& formula) {
  return build_context(in.layout, parse_formula(formula, in.layout.names, {}), in.data);
}

TermRef term(const char* bits) { return {0, EffectId::parse(bits)}; }

double printed(double v) { return std::stod(cli::fixed(v, 4)); }

std::string num(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// ‖c − P c‖ / ‖c‖ for the orthonormal span.
double outside(const OrthonormalBasis& b, const std::vector<double>& c) {
  const double n = norm2(c);
  const double inside = projected_sq_norm(b, c);
  return std::sqrt(std::max(0.0, n * n - inside)) / n;
}

double proportional_residual(const std::vector<double>& c, const std::vector<double>& v) {
  const double t = dot(c, v) / dot(v, v);
  std::vector<double> r(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) r[i] = c[i] - t * v[i];
  return norm2(r) / norm2(c);
}

Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto in = load("table1.csv");
  const auto ctx = context(in, "y ~ A*B");
  const auto a = analyze_effect(ctx, term("10"), in.data.response);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.check(std::abs(printed(a.type3.ss) - 3286.4603) <= 1e-3, "SS3A=" + cli::fixed(a.type3.ss, 4) + " vs 3286.4603");
  o.check(a.type3.df == 2, "df=" + std::to_string(a.type3.df));
  o.check(secs < 1.0, "runtime " + num(secs, 3) + "s");
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto in = load("table1_no11.csv");
  const auto ctx = context(in, "y ~ A*B");
  const auto a = analyze_effect(ctx, term("10"), in.data.response);
  o.check(std::abs(printed(a.type3.ss) - 2798.1879) <= 1e-3,
          "SS3A=" + cli::fixed(a.type3.ss, 4) + " vs 2798.1879");
  o.check(a.type3.df == 2, "df=" + std::to_string(a.type3.df));
  // Cells in order (1,1),(1,2),(1,3),(2,1),...,(3,3).
  const std::vector<double> a2_minus_a3{0, 0, 0, 1. / 3, 1. / 3, 1. / 3, -1. / 3, -1. / 3, -1. / 3};
  const std::vector<double> non_anova{0, 2, 2, 0, -1, -1, 0, -1, -1};
  const double r1 = outside(a.contrasts.span, a2_minus_a3), r2 = outside(a.contrasts.span, non_anova);
  o.check(r1 <= 1e-8, "eta2.-eta3. in span (resid " + num(r1, 2) + ")");
  o.check(r2 <= 1e-8, "2(eta12+eta13)-(eta22+eta23+eta32+eta33) in span (resid " + num(r2, 2) + ")");
  o.check(a.dfs.estimable_part == 1, "nu*0=" + std::to_string(a.dfs.estimable_part));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto in = load("table1_diag_empty.csv");
  const auto ctx = context(in, "y ~ A*B");
  const auto& y = in.data.response;
  const auto a = analyze_effect(ctx, term("10"), y);
  const auto b = analyze_effect(ctx, term("01"), y);
  const auto ab = analyze_effect(ctx, term("11"), y);
  o.check(a.type3.df == 2 && b.type3.df == 2 && ab.type3.df == 1,
          "dfs " + std::to_string(a.type3.df) + "," + std::to_string(b.type3.df) + "," +
              std::to_string(ab.type3.df));
  const std::vector<double> v{0, 1, -1, -1, 0, 1, 1, -1, 0};
  bool ab_ok = ab.contrasts.rows.size() == 1;
  if (ab_ok) {
    const auto& c = ab.contrasts.rows[0];
    ab_ok = proportional_residual(c.coeffs, v) <= 1e-8 && c.classification.anova &&
            *c.classification.anova == EffectId::parse("11");
  }
  o.check(ab_ok, "AB contrast proportional to eta12-eta13-eta21+eta23+eta31-eta32 and anova(AB)");
  std::size_t main_rows = 0;
  bool non_anova = true;
  for (const auto* e : {&a, &b})
    for (const auto& r : e->contrasts.rows) {
      ++main_rows;
      non_anova = non_anova && !r.classification.anova;
    }
  o.check(main_rows == 4 && non_anova, std::to_string(main_rows) + " main-effect contrasts non-anova");
  o.check(a.dfs.estimable_part == 0 && b.dfs.estimable_part == 0,
          "nu*0 A=" + std::to_string(a.dfs.estimable_part) + " B=" + std::to_string(b.dfs.estimable_part));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto in = load("table1.csv");
  const auto ctx = context(in, "y ~ A + A:B");
  const auto target = term("11");
  const Matrix hs = h_star(ctx.layout, ctx.spec, target);
  Matrix s_b = Matrix::identity(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) s_b(i, j) -= 1.0 / 3.0;
  const double hdiff = max_abs(hs - kron(Matrix::identity(3), s_b));
  o.check(hdiff <= 1e-12, "H* = I(x)S (max diff " + num(hdiff, 2) + ")");

  // Oracle: cell-means model versus η_ij = η_i.
  const std::size_t n = in.data.size();
  Matrix full(n, 9, 0.0), restricted(n, 3, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    full(t, in.data.cells[t]) = 1.0;
    restricted(t, in.data.cells[t] / 3) = 1.0;
  }
  const double oracle_ss = oracle::rmfm_oracle(full, restricted, in.data.response);
  const auto a = analyze_effect(ctx, target, in.data.response);
  const double rel = std::abs(a.type3.ss - oracle_ss) / std::abs(oracle_ss);
  o.check(rel <= 1e-8, "SS3=" + cli::fixed(a.type3.ss, 4) + " vs oracle " + cli::fixed(oracle_ss, 4) +
                           " (rel " + num(rel, 2) + ")");
  return o;
}

constexpr std::uint64_t kSuiteSeed = 1;
constexpr std::size_t kSuiteCount = 200;

Outcome suite_criterion(const std::set<std::string>& checks, double time_limit) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = oracle::run_suite(kSuiteSeed, kSuiteCount);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::map<std::string, std::pair<std::size_t, double>> stats;  // failures, worst discrepancy
  for (const auto& r : result.reports) {
    if (!checks.count(r.check)) continue;
    auto& s = stats[r.check];
    s.first += !r.pass;
    s.second = std::max(s.second, r.discrepancy);
  }
  for (const auto& c : checks) {
    const auto it = stats.find(c);
    const bool present = it != stats.end();
    o.check(present && it->second.first == 0,
            c + (present ? " (" + std::to_string(it->second.first) + " failures, worst " + num(it->second.second, 2) + ")"
                         : " (never ran)"));
  }
  o.check(result.scenarios == kSuiteCount, std::to_string(result.scenarios) + " scenarios");
  if (time_limit > 0) o.check(secs < time_limit, "runtime " + num(secs, 3) + "s");
  return o;
}

Outcome criterion5() {
  return suite_criterion({"type1_ss", "type2_ss", "type3_ss", "type1_df", "type2_df", "type3_df",
                          "type2_df_eq_type3_df", "df_chain"},
                         30.0);
}

Outcome criterion6() {
  return suite_criterion({"hstar_e0", "hstar_e1_given_0", "hstar_e2star", "null_delta3"}, 0.0);
}

Outcome criterion7() {
  Outcome o;
  const FactorLayout layout({"A", "B"}, {3, 3});
  const std::size_t m = 2;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(10.0, 3.0);
  Dataset d;
  std::vector<double> means(9, 0.0);
  for (std::size_t c = 0; c < 9; ++c)
    for (std::size_t r = 0; r < m; ++r) {
      d.cells.push_back(c);
      d.response.push_back(normal(rng));
      means[c] += d.response.back() / m;
    }
  const auto ctx = build_context(layout, parse_formula("y ~ A*B", {"A", "B"}, {}), d);
  const auto table = anova_table(ctx, d.response, {SsType::I, SsType::II, SsType::III});
  double worst = 0.0;
  for (const auto& t : ctx.spec.term_order) {
    const auto h = anova_projector(layout, t.id);
    const auto hy = matvec(h, means);
    const double expected = static_cast<double>(m) * dot(means, hy);
    for (const auto& row : table.rows)
      if (row.term == t) worst = std::max(worst, std::abs(row.ss - expected) / std::abs(expected));
  }
  o.check(worst <= 1e-10, "Type I/II/III = m*ybar'H_j*ybar for every effect (worst rel " + num(worst, 2) + ")");
  return o;
}

Outcome criterion8() {
  Outcome o;
  double worst = 0.0;
  std::size_t layouts = 0;
  for (std::size_t f = 1; f <= 3; ++f) {
    std::vector<std::size_t> lv(f, 2);
    while (true) {
      std::vector<std::string> names;
      for (std::size_t k = 0; k < f; ++k) names.push_back(std::string(1, static_cast<char>('A' + k)));
      const FactorLayout layout(names, lv);
      const std::size_t a = layout.cell_count();
      Matrix sum(a, a, 0.0);
      for (const auto& j : all_effects(f))
        if (!j.is_intercept()) sum = sum + anova_projector(layout, j);
      for (std::size_t r = 0; r < a; ++r)
        for (std::size_t c = 0; c < a; ++c) {
          const double s = (r == c ? 1.0 : 0.0) - 1.0 / static_cast<double>(a);
          worst = std::max(worst, std::abs(sum(r, c) - s));
        }
      ++layouts;
      std::size_t k = 0;
      while (k < f && lv[k] == 4) lv[k++] = 2;
      if (k == f) break;
      ++lv[k];
    }
  }
  o.check(worst <= 1e-12, std::to_string(layouts) + " layouts, max entry error " + num(worst, 2));
  return o;
}

Outcome criterion9() {
  Outcome o;
  double worst = 0.0;
  std::size_t spans = 0;
  bool dims = true;
  auto compare = [&](const FactorLayout& layout, const ModelSpec& spec, const std::vector<std::size_t>& counts,
                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset many, single;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      for (std::size_t r = 0; r < counts[c]; ++r) {
        many.cells.push_back(c);
        many.response.push_back(normal(rng));
      }
      if (counts[c] > 0) {
        single.cells.push_back(c);
        single.response.push_back(normal(rng));
      }
    }
    const auto c1 = build_context(layout, spec, many);
    const auto c2 = build_context(layout, spec, single);
    for (const auto& t : spec.term_order) {
      const auto a1 = analyze_effect(c1, t, many.response);
      const auto a2 = analyze_effect(c2, t, single.response);
      if (a1.contrasts.span.dim() != a2.contrasts.span.dim()) {
        dims = false;
        continue;
      }
      if (a1.contrasts.span.dim() == 0) continue;
      worst = std::max({worst, max_principal_angle(a1.contrasts.span, a2.contrasts.span),
                        max_principal_angle(a2.contrasts.span, a1.contrasts.span)});
      ++spans;
    }
  };
  for (const char* file : {"table1.csv", "table1_no11.csv", "table1_diag_empty.csv"}) {
    const auto in = load(file);
    const auto ctx = context(in, "y ~ A*B");
    compare(in.layout, ctx.spec, ctx.counts.counts, 11);
  }
  for (std::size_t i = 0; i < 60; ++i) {
    oracle::ScenarioOptions opt;
    opt.empty_fraction = i % 2 ? 0.3 : 0.1;
    opt.covariate_probability = 0.0;
    const auto s = oracle::random_design(oracle::scenario_seed(99, i), opt);
    compare(s.layout, s.spec, s.counts.counts, i);
  }
  o.check(dims, "span dimensions equal");
  o.check(worst <= 1e-8, std::to_string(spans) + " spans, max principal angle " + num(worst, 2));
  return o;
}

// P(F > f) = I_x(ν₂/2, ν₁/2), x = ν₂/(ν₂ + ν₁f), integrated from the beta density.
double f_tail_quadrature(double f, double d1, double d2) {
  const double a = d2 / 2, b = d1 / 2;
  const double x = d2 / (d2 + d1 * f);
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto density = [&](double t, double tc) {
    // tc is the distance to the nearer endpoint, used to keep (1 − t) accurate.
    (void)tc;
    return std::exp((a - 1) * std::log(t) + (b - 1) * std::log1p(-t) - log_beta);
  };
  if (x <= 0.5) return integrator.integrate(density, 0.0, x);
  auto upper = [&](double t, double tc) {
    (void)tc;
    return std::exp((a - 1) * std::log1p(-t) + (b - 1) * std::log(t) - log_beta);
  };
  return 1.0 - integrator.integrate(upper, 0.0, 1.0 - x);
}

Outcome criterion10() {
  Outcome o;
  double worst = 0.0;
  std::size_t points = 0;
  for (double f : {0.05, 0.3, 1.0, 2.5, 7.0, 25.0})
    for (std::size_t d1 : {1, 2, 3, 5, 10, 20, 30})
      for (std::size_t d2 : {1, 2, 4, 7, 15, 30}) {
        const double q = f_tail_quadrature(f, static_cast<double>(d1), static_cast<double>(d2));
        worst = std::max(worst, std::abs(f_tail(f, d1, d2) - q));
        ++points;
      }
  o.check(worst <= 1e-8, std::to_string(points) + " grid points, max abs error " + num(worst, 2));
  return o;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> c{
      {"full data Type III SS for A", criterion1},
      {"(1,1) removed: SS, tested span, nu*0", criterion2},
      {"diagonal-empty dfs and contrasts", criterion3},
      {"y ~ A + A:B tests B within A", criterion4},
      {"random designs: SS/df match oracle", criterion5},
      {"projector identities and null direction", criterion6},
      {"balanced collapse", criterion7},
      {"ANOVA identity", criterion8},
      {"empty-cell pattern invariance", criterion9},
      {"f_tail against quadrature", criterion10},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoul(argv[i]));
  if (selected.empty())
    for (std::size_t i = 1; i <= criteria().size(); ++i) selected.push_back(i);
  bool all = true;
  for (std::size_t k : selected) {
    if (k < 1 || k > criteria().size()) {
      std::cerr << "no criterion " << k << "\n";
      return 2;
    }
    const auto& [name, fn] = criteria()[k - 1];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    all = all && o.pass;
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << name << "  ["
              << o.detail.str() << "]\n";
  }
  return all ? 0 : 1;
}
