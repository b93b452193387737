#pragma once

// CSV ingestion and report rendering behind the typ3 command-line tool.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "typ3/engine.hpp"
#include "typ3/formula.hpp"

namespace typ3::cli {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw input_error("column '" + name + "' not found in data");
  }
};

/// Comma-separated, double-quote escaping ("" inside quotes), header mandatory.
inline CsvTable parse_csv(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    rec.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(rec.size() == 1 && rec[0].empty())) records.push_back(std::move(rec));
    rec.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      if (field_started) throw input_error("stray quote in CSV at line " + std::to_string(line));
      quoted = field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
      ++line;
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_record();
      ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw input_error("unterminated quote in CSV");
  if (!field.empty() || !rec.empty()) end_record();
  if (records.empty()) throw input_error("no observations");

  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size())
      throw input_error("row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                        " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

struct IngestConfig {
  std::string data_path;
  std::string response;
  std::vector<std::string> factors;
  std::vector<std::string> covariates;
  /// Declared level order per factor; otherwise first appearance.
  std::map<std::string, std::vector<std::string>> levels;

  void validate() const {
    if (response.empty()) throw input_error("--response is required");
    if (factors.empty()) throw input_error("at least one factor is required");
    auto in = [](const std::vector<std::string>& v, const std::string& s) {
      return std::find(v.begin(), v.end(), s) != v.end();
    };
    if (in(factors, response) || in(covariates, response))
      throw input_error("response '" + response + "' is also a predictor");
    for (const auto& c : covariates)
      if (in(factors, c)) throw input_error("'" + c + "' is both a factor and a covariate");
    for (const auto& [name, lv] : levels)
      if (!in(factors, name)) throw input_error("--levels names unknown factor '" + name + "'");
  }
};

struct Ingested {
  FactorLayout layout;
  Dataset data;
};

inline double parse_real(const std::string& s, std::size_t row, const std::string& col) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  if (a == b) throw input_error("missing value in column '" + col + "' at row " + std::to_string(row));
  double v = 0.0;
  const char* first = s.data() + a;
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + b, v);
  if (ec != std::errc() || ptr != s.data() + b || !std::isfinite(v))
    throw input_error("non-numeric value '" + s + "' in column '" + col + "' at row " +
                      std::to_string(row));
  return v;
}

/// Rows are numbered from 1 (the first line after the header).
inline Ingested ingest(const CsvTable& t, const IngestConfig& cfg) {
  cfg.validate();
  const std::size_t ycol = t.column(cfg.response);
  std::vector<std::size_t> fcols, ccols;
  for (const auto& f : cfg.factors) fcols.push_back(t.column(f));
  for (const auto& c : cfg.covariates) ccols.push_back(t.column(c));
  if (t.rows.empty()) throw input_error("no observations");

  std::vector<std::vector<std::string>> labels(cfg.factors.size());
  for (std::size_t k = 0; k < cfg.factors.size(); ++k) {
    auto it = cfg.levels.find(cfg.factors[k]);
    if (it != cfg.levels.end()) {
      labels[k] = it->second;
      for (std::size_t a = 0; a < labels[k].size(); ++a)
        for (std::size_t b = 0; b < a; ++b)
          if (labels[k][a] == labels[k][b])
            throw input_error("duplicate level '" + labels[k][a] + "' for factor '" + cfg.factors[k] + "'");
    }
  }
  std::vector<std::vector<std::size_t>> level_idx(t.rows.size(), std::vector<std::size_t>(fcols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t k = 0; k < fcols.size(); ++k) {
      const std::string& v = t.rows[r][fcols[k]];
      if (v.empty())
        throw input_error("missing value in column '" + cfg.factors[k] + "' at row " + std::to_string(r + 1));
      auto& lab = labels[k];
      auto it = std::find(lab.begin(), lab.end(), v);
      if (it == lab.end()) {
        if (cfg.levels.count(cfg.factors[k]))
          throw input_error("level '" + v + "' of factor '" + cfg.factors[k] + "' at row " +
                            std::to_string(r + 1) + " is not declared");
        lab.push_back(v);
        it = lab.end() - 1;
      }
      level_idx[r][k] = static_cast<std::size_t>(it - lab.begin());
    }
  }
  std::vector<std::size_t> nlev;
  for (const auto& l : labels) nlev.push_back(l.size());

  Ingested out;
  out.layout = FactorLayout(cfg.factors, nlev, labels);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.data.cells.push_back(out.layout.cell_index(level_idx[r]));
    out.data.response.push_back(parse_real(t.rows[r][ycol], r + 1, cfg.response));
  }
  for (std::size_t c = 0; c < ccols.size(); ++c) {
    std::vector<double> v;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      v.push_back(parse_real(t.rows[r][ccols[c]], r + 1, cfg.covariates[c]));
    out.data.covariates.push_back({cfg.covariates[c], std::move(v)});
  }
  return out;
}

inline Ingested ingest(const IngestConfig& cfg) {
  std::ifstream in(cfg.data_path, std::ios::binary);
  if (!in) throw input_error("cannot open data file '" + cfg.data_path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ingest(parse_csv(ss.str()), cfg);
}

enum class Format { Text, Json };

struct RunConfig {
  std::string formula;
  std::vector<SsType> types{SsType::III};
  Tolerance tol;
  Format format = Format::Text;
  bool rationalize = true;
};

/// "I", "II", "III" or "all".
inline std::vector<SsType> parse_types(const std::string& s) {
  if (s == "I") return {SsType::I};
  if (s == "II") return {SsType::II};
  if (s == "III") return {SsType::III};
  if (s == "all") return {SsType::I, SsType::II, SsType::III};
  throw input_error("unknown SS type '" + s + "' (expected I, II, III or all)");
}

struct Report {
  DesignContext ctx;
  AnovaTable table;
};

inline Report analyze(const Ingested& in, const RunConfig& cfg) {
  std::vector<std::string> covs;
  for (const auto& [name, v] : in.data.covariates) covs.push_back(name);
  const ModelSpec spec = parse_formula(cfg.formula, in.layout.names, covs);
  Report r{build_context(in.layout, spec, in.data, cfg.tol), {}};
  r.table = anova_table(r.ctx, in.data.response, cfg.types, {cfg.rationalize, 1e-8});
  return r;
}

// Formatting helpers.

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

inline std::string significant(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline const std::string& undefined_mark() {
  static const std::string m = "—";
  return m;
}

/// Coefficient as an integer or small fraction when it is one, else 6 significant digits.
inline std::string coeff_text(double v) {
  for (long d = 1; d <= 24; ++d) {
    const double num = v * static_cast<double>(d);
    const double r = std::round(num);
    if (std::abs(num - r) <= 1e-9 * d) {
      const long n = static_cast<long>(r);
      return d == 1 ? std::to_string(n) : std::to_string(n) + "/" + std::to_string(d);
    }
  }
  return significant(v, 6);
}

inline std::string cell_name(const FactorLayout& layout, std::size_t cell) {
  const auto lv = layout.cell_levels(cell);
  std::string s = "eta[";
  for (std::size_t k = 0; k < lv.size(); ++k) s += (k ? "," : "") + layout.level_label(k, lv[k]);
  return s + "]";
}

/// Readable linear combination, e.g. "eta[1,2] - eta[1,3] + 1/2 eta[2,1]".
inline std::string contrast_label(const FactorLayout& layout, const std::vector<double>& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0) continue;
    const bool neg = c[i] < 0.0;
    const std::string mag = coeff_text(std::abs(c[i]));
    if (s.empty())
      s += neg ? "-" : "";
    else
      s += neg ? " - " : " + ";
    if (mag != "1") s += mag + " ";
    s += cell_name(layout, i);
  }
  return s.empty() ? "0" : s;
}

inline std::string classification_text(const ModelSpec& spec, const Classification& c) {
  if (!c.anova) return "non-anova";
  return "anova(" + spec.label({0, *c.anova}) + ")";
}

inline std::string render_text(const Report& r) {
  const auto& ctx = r.ctx;
  const auto& fitm = r.table.fit;
  std::ostringstream o;
  o << "Model: " << ctx.spec.render() << "\n";
  o << "Factors:";
  for (std::size_t k = 0; k < ctx.layout.factor_count(); ++k)
    o << " " << ctx.layout.names[k] << "(" << ctx.layout.levels[k] << ")";
  o << "\nObservations: " << ctx.n() << "  Cells: " << ctx.layout.cell_count() << " ("
    << ctx.counts.empty_cells() << " empty)\n";
  for (const auto& w : ctx.spec.warnings) o << "Warning: " << w << "\n";
  o << "Residual SS: " << fixed(fitm.sse, 4) << "  df: " << fitm.df_error
    << "  MS: " << (fitm.mse ? fixed(*fitm.mse, 4) : undefined_mark()) << "\n";

  std::size_t width = 6;
  for (const auto& row : r.table.rows) width = std::max(width, row.label.size());
  auto pad = [](const std::string& s, std::size_t w, bool left) {
    // Pads by code points so the dash mark aligns.
    std::size_t len = 0;
    for (unsigned char ch : s) len += (ch & 0xC0) != 0x80;
    const std::string fill(w > len ? w - len : 0, ' ');
    return left ? s + fill : fill + s;
  };
  for (SsType type : std::vector<SsType>{SsType::I, SsType::II, SsType::III}) {
    bool any = false;
    for (const auto& row : r.table.rows) any = any || row.type == type;
    if (!any) continue;
    o << "\nType " << to_string(type) << " sums of squares\n";
    o << pad("Effect", width, true) << "  " << pad("SS", 14, false) << "  " << pad("df", 4, false) << "  "
      << pad("F", 10, false) << "  " << pad("p", 10, false) << "\n";
    for (const auto& row : r.table.rows) {
      if (row.type != type) continue;
      o << pad(row.label, width, true) << "  " << pad(fixed(row.ss, 4), 14, false) << "  "
        << pad(std::to_string(row.df), 4, false) << "  "
        << pad(row.f ? fixed(*row.f, 4) : undefined_mark(), 10, false) << "  "
        << pad(row.p ? significant(*row.p, 4) : undefined_mark(), 10, false) << "\n";
    }
    o << pad("Residual", width, true) << "  " << pad(fixed(fitm.sse, 4), 14, false) << "  "
      << pad(std::to_string(fitm.df_error), 4, false) << "\n";
  }

  bool header = false;
  for (const auto& row : r.table.rows) {
    if (row.type != SsType::III) continue;
    if (!header) {
      o << "\nContrasts on cell means tested by Type III\n";
      header = true;
    }
    o << "\n" << row.label;
    if (row.dfs)
      o << "  (nu*0 = " << row.dfs->estimable_part << ", nu3 = " << row.dfs->type3
        << ", nu* = " << row.dfs->innate << ")";
    o << "\n";
    if (row.contrasts.empty()) o << "  (none)\n";
    for (const auto& c : row.contrasts)
      o << "  [" << classification_text(ctx.spec, c.classification) << "] "
        << contrast_label(ctx.layout, c.coeffs) << "\n";
  }
  return o.str();
}

inline nlohmann::ordered_json render_json(const Report& r) {
  using nlohmann::ordered_json;
  const auto& ctx = r.ctx;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };

  ordered_json factors = ordered_json::array();
  for (std::size_t k = 0; k < ctx.layout.factor_count(); ++k) {
    ordered_json lv = ordered_json::array();
    for (std::size_t l = 0; l < ctx.layout.levels[k]; ++l) lv.push_back(ctx.layout.level_label(k, l));
    factors.push_back({{"name", ctx.layout.names[k]}, {"levels", lv}});
  }
  ordered_json doc;
  doc["layout"] = {{"factors", factors},
                   {"cell_counts", ctx.counts.counts},
                   {"observations", ctx.n()},
                   {"empty_cells", ctx.counts.empty_cells()}};
  ordered_json covs = ordered_json::array();
  for (const auto& c : ctx.spec.covariate_submodels) covs.push_back(c.name);
  doc["model"] = {{"formula", ctx.spec.render()}, {"response", ctx.spec.response}, {"covariates", covs}};
  doc["fit"] = {{"sse", r.table.fit.sse}, {"df_error", r.table.fit.df_error}, {"mse", opt(r.table.fit.mse)}};

  ordered_json tables = ordered_json::array();
  for (SsType type : std::vector<SsType>{SsType::I, SsType::II, SsType::III}) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.table.rows) {
      if (row.type != type) continue;
      ordered_json contrasts = ordered_json::array();
      for (const auto& c : row.contrasts)
        contrasts.push_back({{"coeffs", c.coeffs},
                             {"label", contrast_label(ctx.layout, c.coeffs)},
                             {"classification", classification_text(ctx.spec, c.classification)}});
      ordered_json detail = nullptr;
      if (row.dfs)
        detail = {{"innate", row.dfs->innate},
                  {"type3", row.dfs->type3},
                  {"estimable_part", row.dfs->estimable_part}};
      rows.push_back({{"effect", row.label},
                      {"ss", row.ss},
                      {"df", row.df},
                      {"f", opt(row.f)},
                      {"p", opt(row.p)},
                      {"contrasts", contrasts},
                      {"df_detail", detail}});
    }
    if (!rows.empty()) tables.push_back({{"type", to_string(type)}, {"rows", rows}});
  }
  doc["tables"] = tables;
  doc["warnings"] = ctx.spec.warnings;
  return doc;
}

inline std::string render(const Report& r, Format f) {
  return f == Format::Json ? render_json(r).dump(2) + "\n" : render_text(r);
}

/// Exit status for an exception escaping a run.
enum ExitCode { Success = 0, Failure = 1, InputError = 2, NumericalError = 3 };

}  // namespace typ3::cli
