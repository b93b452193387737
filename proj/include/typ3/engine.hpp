#pragma once

// Type I/II/III sums of squares for factor-effects models with covariates.
//
// The model matrix is X = concat over sub-models i of 𝕂ᵢE_{𝒥ᵢ}. For a target
// effect j* in sub-model i the columns split into
//   X₁ = 𝕂ᵢE_{j*},  X₂ = 𝕂ᵢE_{j ∈ 𝒥ᵢ : j ≻ j*},  X₀ = everything else,
// and the Type III space is span(X₀, X₂X₂ᵀN₀₁)⊥ ∩ span(X), where N₀₁ spans
// span(X₀, X₁)⊥ ∩ span(X). Both orthonormal bases come out of Gram–Schmidt
// as the vectors contributed by X after the leading block.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "typ3/design.hpp"
#include "typ3/f_dist.hpp"
#include "typ3/formula.hpp"
#include "typ3/subspace.hpp"

namespace typ3 {

struct ColumnOrigin {
  std::size_t submodel;
  EffectId id;
};

/// Everything derived from (layout, model, data) before any response enters.
struct DesignContext {
  FactorLayout layout;
  ModelSpec spec;
  CellCounts counts;
  /// 𝕂₀, 𝕂₁, ... indexed by sub-model.
  std::vector<Matrix> incidences;
  Matrix x;
  /// Cell-space column that generated each column of X (the E column).
  Matrix cell_columns;
  std::vector<ColumnOrigin> columns;
  OrthonormalBasis qx;       // span(X)
  OrthonormalBasis row_space;  // span(Xᵀ)
  Tolerance tol;

  std::size_t n() const noexcept { return x.rows(); }
  std::size_t submodel_of(const TermRef& t) const { return t.submodel; }

  std::vector<std::size_t> columns_of(const TermRef& t) const {
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c].submodel == t.submodel && columns[c].id == t.id) idx.push_back(c);
    return idx;
  }
};

inline DesignContext build_context(const FactorLayout& layout, const ModelSpec& spec,
                                   const Dataset& data, const Tolerance& tol = {}) {
  tol.validate();
  layout.validate();
  if (spec.factors != layout.names) throw input_error("model factors do not match layout");
  if (data.size() == 0) throw input_error("no observations");
  if (data.response.size() != data.size())
    throw input_error("response length does not match observations");

  DesignContext ctx;
  ctx.layout = layout;
  ctx.spec = spec;
  ctx.tol = tol;
  Incidence inc = incidence(layout, data.cells);
  ctx.counts = inc.counts;
  ctx.incidences.push_back(inc.k);
  for (const auto& cov : spec.covariate_submodels)
    ctx.incidences.push_back(covariate_incidence(inc.k, data.covariate(cov.name)));

  ctx.x = Matrix(data.size(), 0);
  ctx.cell_columns = Matrix(layout.cell_count(), 0);
  for (std::size_t s = 0; s < spec.submodel_count(); ++s) {
    for (const auto& j : spec.submodel(s)) {
      const Matrix e = effect_columns(layout, j);
      const Matrix block = multiply(ctx.incidences[s], e);
      for (std::size_t c = 0; c < e.cols(); ++c) {
        ctx.x.append_column(block.col(c));
        ctx.cell_columns.append_column(e.col(c));
        ctx.columns.push_back({s, j});
      }
    }
  }
  if (ctx.x.cols() == 0) throw input_error("model has no columns");
  ctx.qx = gram_schmidt(ctx.x, tol);
  ctx.row_space = gram_schmidt(transpose(ctx.x), tol);
  return ctx;
}

/// Column blocks (X₀, X₁, X₂) for one target effect.
struct EffectPartition {
  TermRef target;
  std::vector<std::size_t> cols0, cols1, cols2;
  Matrix x0, x1, x2;
  /// Within the target's sub-model: effects not containing j*, and those
  /// strictly containing it.
  EffectSet within0, within2;
};

inline EffectPartition partition(const DesignContext& ctx, const TermRef& target) {
  if (target.submodel >= ctx.spec.submodel_count() ||
      !ctx.spec.submodel(target.submodel).has(target.id))
    throw input_error("target effect " + ctx.spec.label(target) + " is not in the model");
  EffectPartition p;
  p.target = target;
  for (std::size_t c = 0; c < ctx.columns.size(); ++c) {
    const auto& o = ctx.columns[c];
    if (o.submodel != target.submodel) {
      p.cols0.push_back(c);
    } else if (o.id == target.id) {
      p.cols1.push_back(c);
    } else if (strictly_contains(o.id, target.id)) {
      p.cols2.push_back(c);
    } else {
      p.cols0.push_back(c);
    }
  }
  p.x0 = select_columns(ctx.x, p.cols0);
  p.x1 = select_columns(ctx.x, p.cols1);
  p.x2 = select_columns(ctx.x, p.cols2);
  for (const auto& j : ctx.spec.submodel(target.submodel)) {
    if (!contains(j, target.id)) p.within0.insert(j);
    if (strictly_contains(j, target.id)) p.within2.insert(j);
  }
  return p;
}

struct TypeIIIConstruction {
  OrthonormalBasis n01;
  Matrix x2star;
  OrthonormalBasis q3;
  std::size_t df = 0;
};

inline TypeIIIConstruction type3_construction(const DesignContext& ctx, const EffectPartition& part) {
  TypeIIIConstruction t;
  const std::size_t n = ctx.n();
  t.n01 = complement_within(hconcat(part.x0, part.x1), ctx.qx.carrier, ctx.tol);
  if (part.x2.cols() == 0 || t.n01.dim() == 0) {
    // Zero column placeholder: the construction collapses to Type II.
    t.x2star = Matrix(n, 1);
  } else {
    t.x2star = multiply(part.x2, multiply_tn(part.x2, t.n01.carrier));
  }
  t.q3 = complement_within(hconcat(part.x0, t.x2star), ctx.qx.carrier, ctx.tol);
  t.df = t.q3.dim();
  return t;
}

struct SsResult {
  double ss = 0.0;
  std::size_t df = 0;
};

inline SsResult type3_ss(const TypeIIIConstruction& constr, std::span<const double> y) {
  if (y.size() != constr.q3.ambient()) throw input_error("type3_ss: response length mismatch");
  double ss = projected_sq_norm(constr.q3, y);
#ifdef TYP3_INJECT_PERTURBATION
  ss *= 1.0 + 1e-6;
#endif
  return {ss, constr.df};
}

/// yᵀ(P_{(X₀,X₁)} − P_{X₀})y.
inline SsResult type2_ss(const DesignContext& ctx, const EffectPartition& part,
                         std::span<const double> y) {
  if (y.size() != ctx.n()) throw input_error("type2_ss: response length mismatch");
  const auto q = complement_within(part.x0, part.x1, ctx.tol);
  return {projected_sq_norm(q, y), q.dim()};
}

struct SequentialRow {
  TermRef term;
  double ss;
  std::size_t df;
};

/// Sequential SS in formula order.
inline std::vector<SequentialRow> type1_table(const DesignContext& ctx, std::span<const double> y) {
  if (y.size() != ctx.n()) throw input_error("type1_table: response length mismatch");
  detail::GramSchmidtBuilder gs(ctx.n(), detail::rank_threshold(max_column_norm(ctx.x), ctx.tol));
  std::vector<SequentialRow> rows;
  for (const auto& t : ctx.spec.term_order) {
    const std::size_t before = gs.basis().dim();
    for (std::size_t c : ctx.columns_of(t)) gs.offer(ctx.x.col(c), c);
    double ss = 0.0;
    for (std::size_t k = before; k < gs.basis().dim(); ++k) {
      const double v = dot(gs.basis().carrier.col(k), y);
      ss += v * v;
    }
    rows.push_back({t, ss, gs.basis().dim() - before});
  }
  return rows;
}

/// Effects whose ANOVA projectors make up H*: closure({j*}) \ closure(non-containing).
inline EffectSet h_star_effects(const ModelSpec& spec, const TermRef& target) {
  const EffectSet& sub = spec.submodel(target.submodel);
  if (!sub.has(target.id)) throw input_error("target effect " + spec.label(target) + " is not in the model");
  EffectSet j0;
  for (const auto& j : sub)
    if (!contains(j, target.id)) j0.insert(j);
  const std::size_t f = target.id.size();
  const EffectSet bar1 = closure(EffectSet{target.id}, f);
  const EffectSet bar0 = closure(j0, f);
  EffectSet out;
  for (const auto& j : bar1)
    if (!bar0.has(j)) out.insert(j);
  return out;
}

inline Matrix h_star(const FactorLayout& layout, const ModelSpec& spec, const TermRef& target) {
  return anova_projector_sum(layout, h_star_effects(spec, target));
}

namespace detail {

// z minimizing ‖Vz − w‖ for each column w of W, V of full column rank.
inline Matrix solve_normal_full_rank(const Matrix& v, const Matrix& w) {
  const auto eig = symmetric_eigen(multiply_tn(v, v));
  const Matrix vtw = multiply_tn(v, w);
  const std::size_t r = v.cols();
  Matrix z(r, w.cols());
  const double top = eig.values.empty() ? 0.0 : eig.values.front();
  for (std::size_t k = 0; k < r; ++k) {
    const double lam = eig.values[k];
    if (!(lam > 1e-14 * top)) throw numerical_error("estimable part: singular lift");
    auto u = eig.vectors.col(k);
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const double coef = dot(u, vtw.col(c)) / lam;
      for (std::size_t i = 0; i < r; ++i) z(i, c) += coef * u[i];
    }
  }
  return z;
}

}  // namespace detail

/// Maps cell-space coefficient vectors c (columns) on ηᵢ to coefficient vectors
/// on β: the block of sub-model i gets E_{𝒥ᵢ}ᵀc, all other blocks zero.
inline Matrix lift_to_beta(const DesignContext& ctx, std::size_t submodel, const Matrix& c) {
  if (c.rows() != ctx.layout.cell_count()) throw input_error("lift_to_beta: dimension mismatch");
  Matrix g(ctx.columns.size(), c.cols());
  for (std::size_t col = 0; col < ctx.columns.size(); ++col) {
    if (ctx.columns[col].submodel != submodel) continue;
    for (std::size_t k = 0; k < c.cols(); ++k) g(col, k) = dot(ctx.cell_columns.col(col), c.col(k));
  }
  return g;
}

/// Basis (in cell space) of the estimable part of span(h): the c ∈ span(h)
/// whose lifted coefficient vector lies in the row space of X. The lift is
/// injective on span(h) ⊆ span(E_{𝒥ᵢ}), so the intersection is taken in
/// β-space and pulled back.
inline OrthonormalBasis estimable_part(const DesignContext& ctx, const Matrix& h,
                                       std::size_t submodel) {
  const std::size_t cells = ctx.layout.cell_count();
  const OrthonormalBasis bh = gram_schmidt(h, ctx.tol);
  if (bh.dim() == 0) return OrthonormalBasis::empty(cells);
  const Matrix v = lift_to_beta(ctx, submodel, bh.carrier);
  const OrthonormalBasis w = intersect(gram_schmidt(v, ctx.tol), ctx.row_space, ctx.tol);
  if (w.dim() == 0) return OrthonormalBasis::empty(cells);
  const Matrix z = detail::solve_normal_full_rank(v, w.carrier);
  return gram_schmidt(multiply(bh.carrier, z), ctx.tol);
}

struct Classification {
  std::optional<EffectId> anova;  // nullopt: not an ANOVA effect
};

/// anova(j) when c ∈ span(H_j) within tol·‖c‖.
inline Classification classify_contrast(const FactorLayout& layout, std::span<const double> c,
                                        double tol = 1e-8) {
  if (c.size() != layout.cell_count()) throw input_error("classify_contrast: length mismatch");
  const double nc = norm2(c);
  if (!(nc > 0.0)) throw input_error("classify_contrast: zero vector");
  for (const auto& j : all_effects(layout.factor_count())) {
    const auto hc = matvec(anova_projector(layout, j), c);
    double r = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) r += (hc[i] - c[i]) * (hc[i] - c[i]);
    if (std::sqrt(r) <= tol * nc) return {j};
  }
  return {};
}

namespace detail {

// Snap to p/q with q ≤ 24 when within 1e-6.
inline double rationalize(double x) {
  for (int q = 1; q <= 24; ++q) {
    const double p = std::round(x * q);
    if (std::abs(x - p / q) <= 1e-6) return p / q;
  }
  return x;
}

// Reduced row echelon form of the rows of m (r x n), rank r assumed.
inline Matrix rref(Matrix m, double tol) {
  const std::size_t r = m.rows(), n = m.cols();
  std::size_t row = 0;
  for (std::size_t col = 0; col < n && row < r; ++col) {
    std::size_t piv = row;
    for (std::size_t i = row + 1; i < r; ++i)
      if (std::abs(m(i, col)) > std::abs(m(piv, col))) piv = i;
    if (std::abs(m(piv, col)) <= tol) continue;
    for (std::size_t j = 0; j < n; ++j) std::swap(m(row, j), m(piv, j));
    const double d = m(row, col);
    for (std::size_t j = 0; j < n; ++j) m(row, j) /= d;
    for (std::size_t i = 0; i < r; ++i) {
      if (i == row || m(i, col) == 0.0) continue;
      const double s = m(i, col);
      for (std::size_t j = 0; j < n; ++j) m(i, j) -= s * m(row, j);
    }
    ++row;
  }
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (std::abs(m(i, j)) <= tol) m(i, j) = 0.0;
  return m;
}

}  // namespace detail

struct ContrastRow {
  /// Largest-magnitude coefficient scaled to +1, optionally snapped to small rationals.
  std::vector<double> coeffs;
  Classification classification;
};

struct TestedContrasts {
  /// Orthonormal basis (cell space) of the tested-contrast span.
  OrthonormalBasis span;
  std::vector<ContrastRow> rows;
};

/// Contrasts on ηᵢ tested by the Type III SS: the columns of 𝕂ᵢᵀQ₃, reduced to
/// their representatives in span(E_{𝒥ᵢ}) and presented in reduced row echelon
/// form.
inline TestedContrasts tested_contrasts(const DesignContext& ctx, const EffectPartition& part,
                                        const TypeIIIConstruction& constr, bool rationalize = true,
                                        double classify_tol = 1e-8) {
  const std::size_t s = part.target.submodel;
  const std::size_t cells = ctx.layout.cell_count();
  TestedContrasts out{OrthonormalBasis::empty(cells), {}};
  if (constr.df == 0) return out;
  const Matrix raw = multiply_tn(ctx.incidences[s], constr.q3.carrier);
  const Matrix pe = anova_projector_sum(ctx.layout, closure(ctx.spec.submodel(s)));
  out.span = gram_schmidt(multiply(pe, raw), ctx.tol);
  if (out.span.dim() == 0) return out;

  const Matrix echelon = detail::rref(transpose(out.span.carrier), 1e-9);
  for (std::size_t i = 0; i < echelon.rows(); ++i) {
    std::vector<double> c = echelon.row(i);
    double big = 0.0;
    for (double v : c)
      if (std::abs(v) > std::abs(big) + 1e-12) big = v;
    if (big == 0.0) continue;
    for (double& v : c) v /= big;
    ContrastRow row{c, classify_contrast(ctx.layout, c, classify_tol)};
    if (rationalize)
      for (double& v : row.coeffs) v = detail::rationalize(v);
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// Cell-space pieces of the Type III construction for sub-model i:
/// E₀ (non-containing effects), E_{1|0} = (I − P_{E₀})E₁, E_{2*} = E₂E₂ᵀ𝕂ᵢᵀN₀₁.
struct CellSpaceBlocks {
  Matrix e0;
  Matrix e1_given_0;
  Matrix e2star;
};

inline CellSpaceBlocks cell_space_blocks(const DesignContext& ctx, const EffectPartition& part,
                                         const TypeIIIConstruction& constr) {
  const auto& layout = ctx.layout;
  const std::size_t cells = layout.cell_count();
  CellSpaceBlocks b;
  b.e0 = part.within0.empty() ? Matrix(cells, 1) : model_columns(layout, part.within0);
  const Matrix e1 = effect_columns(layout, part.target.id);
  const auto q0 = gram_schmidt(b.e0, ctx.tol);
  b.e1_given_0 = e1 - project(q0, e1);
  if (part.within2.empty() || constr.n01.dim() == 0) {
    b.e2star = Matrix(cells, 1);
  } else {
    const Matrix e2 = model_columns(layout, part.within2);
    const Matrix kt_n01 = multiply_tn(ctx.incidences[part.target.submodel], constr.n01.carrier);
    b.e2star = multiply(e2, multiply_tn(e2, kt_n01));
  }
  return b;
}

/// Degrees of freedom around one target: ν*₀ ≤ ν₃ = ν₂ ≤ ν₁|₀ ≤ ν*.
struct DfChain {
  std::size_t innate = 0;          // ν*
  std::size_t one_given_zero = 0;  // ν₁|₀ = dim span(𝕂ᵢE_{1|0})
  std::size_t type3 = 0;
  std::size_t type2 = 0;
  std::size_t estimable_part = 0;  // ν*₀
};

struct FittedModel {
  std::vector<double> beta_hat;
  std::vector<double> fitted;
  double sse = 0.0;
  std::size_t df_error = 0;
  std::optional<double> mse;
};

inline FittedModel fit(const DesignContext& ctx, std::span<const double> y) {
  if (y.size() != ctx.n()) throw input_error("fit: response length mismatch");
  FittedModel m;
  m.fitted = project(ctx.qx, y);
  for (std::size_t i = 0; i < y.size(); ++i) m.sse += (y[i] - m.fitted[i]) * (y[i] - m.fitted[i]);
  m.df_error = ctx.n() - ctx.qx.dim();
  if (m.df_error > 0) m.mse = m.sse / static_cast<double>(m.df_error);

  // Solve on the independent columns picked by Gram–Schmidt: X_S = Q R with
  // R = QᵀX_S upper triangular, other coefficients zero.
  const auto& src = ctx.qx.source_columns;
  const std::size_t r = src.size();
  m.beta_hat.assign(ctx.x.cols(), 0.0);
  const Matrix rmat = multiply_tn(ctx.qx.carrier, select_columns(ctx.x, src));
  std::vector<double> rhs(r);
  for (std::size_t k = 0; k < r; ++k) rhs[k] = dot(ctx.qx.carrier.col(k), y);
  for (std::size_t k = r; k-- > 0;) {
    double v = rhs[k];
    for (std::size_t j = k + 1; j < r; ++j) v -= rmat(k, j) * m.beta_hat[src[j]];
    m.beta_hat[src[k]] = v / rmat(k, k);
  }
  return m;
}

/// Linear hypothesis Gβ = 0, with rows of G either on β or on the cell-space
/// vector ηᵢ of one sub-model.
struct HypothesisSpec {
  enum class Scale { Beta, CellMeans };
  Matrix g;
  Scale scale = Scale::Beta;
  std::size_t submodel = 0;
};

/// Restricted-model minus full-model SS: yᵀ(P_X − P_{XN})y, span(N) = null(G).
inline SsResult rmfm_ss(const DesignContext& ctx, const HypothesisSpec& hyp, std::span<const double> y) {
  if (y.size() != ctx.n()) throw input_error("rmfm_ss: response length mismatch");
  Matrix gt;  // k x m
  if (hyp.scale == HypothesisSpec::Scale::CellMeans) {
    if (hyp.g.cols() != ctx.layout.cell_count())
      throw input_error("rmfm_ss: hypothesis has wrong number of cell-mean columns");
    gt = lift_to_beta(ctx, hyp.submodel, transpose(hyp.g));
  } else {
    if (hyp.g.cols() != ctx.x.cols()) throw input_error("rmfm_ss: hypothesis has wrong number of columns");
    gt = transpose(hyp.g);
  }
  const auto null_g = complement_within(gt, Matrix::identity(ctx.x.cols()), ctx.tol);
  const Matrix xn = null_g.dim() == 0 ? Matrix(ctx.n(), 1) : multiply(ctx.x, null_g.carrier);
  const auto q = complement_within(xn, ctx.qx.carrier, ctx.tol);
  return {projected_sq_norm(q, y), q.dim()};
}

enum class SsType { I, II, III };

inline const char* to_string(SsType t) {
  switch (t) {
    case SsType::I: return "I";
    case SsType::II: return "II";
    case SsType::III: return "III";
  }
  return "?";
}

struct AnalysisOptions {
  bool rationalize = true;
  double classify_tol = 1e-8;
};

/// Full Type III analysis of one target.
struct EffectAnalysis {
  TermRef target;
  EffectPartition part;
  TypeIIIConstruction constr;
  SsResult type2, type3;
  EffectSet hstar_effects;
  Matrix hstar;
  OrthonormalBasis estimable;
  TestedContrasts contrasts;
  DfChain dfs;
};

inline EffectAnalysis analyze_effect(const DesignContext& ctx, const TermRef& target,
                                     std::span<const double> y, const AnalysisOptions& opt = {}) {
  EffectAnalysis a;
  a.target = target;
  a.part = partition(ctx, target);
  a.constr = type3_construction(ctx, a.part);
  a.type3 = type3_ss(a.constr, y);
  a.type2 = type2_ss(ctx, a.part, y);
  a.hstar_effects = h_star_effects(ctx.spec, target);
  a.hstar = anova_projector_sum(ctx.layout, a.hstar_effects);
  a.estimable = estimable_part(ctx, a.hstar, target.submodel);
  a.contrasts = tested_contrasts(ctx, a.part, a.constr, opt.rationalize, opt.classify_tol);

  const auto blocks = cell_space_blocks(ctx, a.part, a.constr);
  a.dfs.innate = rank(a.hstar, ctx.tol);
  a.dfs.one_given_zero = rank(multiply(ctx.incidences[target.submodel], blocks.e1_given_0), ctx.tol);
  a.dfs.type3 = a.type3.df;
  a.dfs.type2 = a.type2.df;
  a.dfs.estimable_part = a.estimable.dim();
  return a;
}

struct AnovaRow {
  TermRef term;
  std::string label;
  SsType type;
  double ss = 0.0;
  std::size_t df = 0;
  std::optional<double> f;
  std::optional<double> p;
  /// Type III rows only.
  std::vector<ContrastRow> contrasts;
  std::optional<DfChain> dfs;
};

struct AnovaTable {
  FittedModel fit;
  std::vector<AnovaRow> rows;
};

inline AnovaTable anova_table(const DesignContext& ctx, std::span<const double> y,
                              const std::vector<SsType>& types, const AnalysisOptions& opt = {}) {
  AnovaTable t;
  t.fit = fit(ctx, y);
  auto finish = [&](AnovaRow& r) {
    if (r.df > 0 && t.fit.mse && *t.fit.mse > 0.0) {
      r.f = (r.ss / static_cast<double>(r.df)) / *t.fit.mse;
      r.p = f_tail(*r.f, r.df, t.fit.df_error);
    }
  };
  for (SsType type : types) {
    if (type == SsType::I) {
      for (const auto& s : type1_table(ctx, y)) {
        AnovaRow r{s.term, ctx.spec.label(s.term), type, s.ss, s.df, {}, {}, {}, {}};
        finish(r);
        t.rows.push_back(std::move(r));
      }
      continue;
    }
    for (const auto& term : ctx.spec.term_order) {
      AnovaRow r{term, ctx.spec.label(term), type, 0.0, 0, {}, {}, {}, {}};
      if (type == SsType::II) {
        const auto part = partition(ctx, term);
        const auto s = type2_ss(ctx, part, y);
        r.ss = s.ss;
        r.df = s.df;
      } else {
        auto a = analyze_effect(ctx, term, y, opt);
        r.ss = a.type3.ss;
        r.df = a.type3.df;
        r.contrasts = std::move(a.contrasts.rows);
        r.dfs = a.dfs;
      }
      finish(r);
      t.rows.push_back(std::move(r));
    }
  }
  return t;
}

}  // namespace typ3
