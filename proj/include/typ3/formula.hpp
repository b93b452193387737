#pragma once

// Model formulas:
//
//   formula := ident "~" rhs
//   rhs     := [sign] term { sign term }      sign := "+" | "-"
//   term    := product { "*" product }
//   product := atom { ":" atom }
//   atom    := ident | "1"
//
// A*B expands to A + B + A:B; "-term" removes a previously added term; the
// intercept is implicit and "-1" removes it. A product with exactly one
// covariate name lands in that covariate's sub-model; its remaining factor
// tokens name the effect there.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "typ3/design.hpp"

namespace typ3 {

class formula_error : public input_error {
 public:
  formula_error(const std::string& msg, std::size_t offset)
      : input_error(msg + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Sub-model 0 holds factor effects on the intercepts; sub-model i ≥ 1 holds
/// the effects on the coefficients of covariate i.
struct TermRef {
  std::size_t submodel = 0;
  EffectId id;
  friend bool operator==(const TermRef&, const TermRef&) = default;
};

struct CovariateSubmodel {
  std::string name;
  EffectSet effects;
  friend bool operator==(const CovariateSubmodel&, const CovariateSubmodel&) = default;
};

struct ModelSpec {
  std::string response;
  std::vector<std::string> factors;
  EffectSet intercept_submodel;
  std::vector<CovariateSubmodel> covariate_submodels;
  /// First-appearance order across all sub-models; drives Type I.
  std::vector<TermRef> term_order;
  std::vector<std::string> warnings;

  std::size_t submodel_count() const noexcept { return 1 + covariate_submodels.size(); }

  const EffectSet& submodel(std::size_t i) const {
    return i == 0 ? intercept_submodel : covariate_submodels.at(i - 1).effects;
  }

  std::string label(const TermRef& t) const {
    std::string s;
    for (std::size_t k = 0; k < factors.size(); ++k)
      if (t.id.bit(k)) s += (s.empty() ? "" : ":") + factors[k];
    if (t.submodel > 0) s += (s.empty() ? "" : ":") + covariate_submodels.at(t.submodel - 1).name;
    return s.empty() ? "(Intercept)" : s;
  }

  /// Canonical formula text; parse(render()) reproduces this spec.
  std::string render() const {
    std::string s = response + " ~ ";
    bool first = true;
    const TermRef lead{0, EffectId::intercept(factors.size())};
    if (term_order.empty() || !(term_order.front() == lead)) {
      s += "-1";
      first = false;
    }
    for (const auto& t : term_order) {
      if (!first) s += " + ";
      first = false;
      const std::string l = label(t);
      s += l == "(Intercept)" ? "1" : l;
    }
    return s;
  }

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
    return a.response == b.response && a.factors == b.factors &&
           a.intercept_submodel == b.intercept_submodel &&
           a.covariate_submodels == b.covariate_submodels && a.term_order == b.term_order;
  }
};

namespace detail {

struct Token {
  enum Kind { Ident, One, Tilde, Plus, Minus, Colon, Star, End } kind;
  std::string text;
  std::size_t offset;
};

inline bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && ident_char(text[j])) ++j;
      out.push_back({Token::Ident, std::string(text.substr(i, j - i)), i});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i + 1;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (text.substr(i, j - i) != "1")
        throw formula_error("only the number 1 is allowed in a formula", i);
      out.push_back({Token::One, "1", i});
      i = j;
      continue;
    }
    Token::Kind k;
    switch (c) {
      case '~': k = Token::Tilde; break;
      case '+': k = Token::Plus; break;
      case '-': k = Token::Minus; break;
      case ':': k = Token::Colon; break;
      case '*': k = Token::Star; break;
      default:
        throw formula_error(std::string("unexpected character '") + c + "'", i);
    }
    out.push_back({k, std::string(1, c), i});
    ++i;
  }
  out.push_back({Token::End, "", text.size()});
  return out;
}

struct Atom {
  std::string name;  // "1" for the intercept atom
  std::size_t offset;
};
using Product = std::vector<Atom>;

class FormulaParser {
 public:
  explicit FormulaParser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  const Token& expect(Token::Kind k, const char* what) {
    if (peek().kind != k) throw formula_error(std::string("expected ") + what, peek().offset);
    return next();
  }

  Atom atom() {
    const Token& t = peek();
    if (t.kind == Token::Ident || t.kind == Token::One) {
      next();
      return {t.text, t.offset};
    }
    throw formula_error("expected a term", t.offset);
  }

  Product product() {
    Product p{atom()};
    while (peek().kind == Token::Colon) {
      next();
      p.push_back(atom());
    }
    return p;
  }

  /// Expanded products of one "*"-term, in R's order (A, B, A:B, C, ...).
  std::vector<Product> term() {
    std::vector<Product> groups{product()};
    while (peek().kind == Token::Star) {
      next();
      groups.push_back(product());
    }
    std::vector<Product> out;
    for (const auto& g : groups) {
      const std::size_t existing = out.size();
      out.push_back(g);
      for (std::size_t i = 0; i < existing; ++i) {
        Product p = out[i];
        p.insert(p.end(), g.begin(), g.end());
        out.push_back(std::move(p));
      }
    }
    return out;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a formula against the declared factor and covariate names. Factor
/// order in known_factors fixes the bit order of every EffectId.
inline ModelSpec parse_formula(std::string_view text, const std::vector<std::string>& known_factors,
                               const std::vector<std::string>& known_covariates) {
  for (const auto& c : known_covariates)
    if (std::find(known_factors.begin(), known_factors.end(), c) != known_factors.end())
      throw input_error("'" + c + "' declared as both factor and covariate");
  const std::size_t f = known_factors.size();
  if (f == 0) throw input_error("at least one factor is required");
  if (f > 16) throw input_error("at most 16 factors are supported");

  detail::FormulaParser p(detail::tokenize(text));
  ModelSpec spec;
  spec.factors = known_factors;
  spec.response = p.expect(detail::Token::Ident, "response name").text;
  if (std::find(known_factors.begin(), known_factors.end(), spec.response) != known_factors.end() ||
      std::find(known_covariates.begin(), known_covariates.end(), spec.response) !=
          known_covariates.end())
    throw formula_error("response '" + spec.response + "' is also a predictor", 0);
  p.expect(detail::Token::Tilde, "'~'");

  // Working list of terms: (covariate name or "" for intercept sub-model, id).
  struct Entry {
    std::string covariate;
    EffectId id;
  };
  std::vector<Entry> terms{{"", EffectId::intercept(f)}};

  auto resolve = [&](const detail::Product& prod) -> Entry {
    if (prod.size() == 1 && prod[0].name == "1") return {"", EffectId::intercept(f)};
    Entry e{"", EffectId::intercept(f)};
    std::vector<bool> seen(f, false);
    for (const auto& a : prod) {
      if (a.name == "1") throw formula_error("'1' cannot appear inside an interaction", a.offset);
      auto fi = std::find(known_factors.begin(), known_factors.end(), a.name);
      if (fi != known_factors.end()) {
        const auto k = static_cast<std::size_t>(fi - known_factors.begin());
        if (seen[k]) throw formula_error("factor '" + a.name + "' repeated within a term", a.offset);
        seen[k] = true;
        e.id = e.id.with_bit(k);
        continue;
      }
      if (std::find(known_covariates.begin(), known_covariates.end(), a.name) !=
          known_covariates.end()) {
        if (!e.covariate.empty())
          throw formula_error(
              e.covariate == a.name ? "covariate '" + a.name + "' repeated within a term"
                                    : "products of covariates are not supported",
              a.offset);
        e.covariate = a.name;
        continue;
      }
      throw formula_error("unknown identifier '" + a.name + "'", a.offset);
    }
    return e;
  };

  auto find_entry = [&](const Entry& e) {
    return std::find_if(terms.begin(), terms.end(), [&](const Entry& t) {
      return t.covariate == e.covariate && t.id == e.id;
    });
  };

  bool first = true;
  while (p.peek().kind != detail::Token::End) {
    bool remove = false;
    if (p.peek().kind == detail::Token::Plus || p.peek().kind == detail::Token::Minus) {
      remove = p.next().kind == detail::Token::Minus;
    } else if (!first) {
      throw formula_error("expected '+' or '-'", p.peek().offset);
    }
    first = false;
    const std::size_t at = p.peek().offset;
    for (const auto& prod : p.term()) {
      Entry e = resolve(prod);
      auto it = find_entry(e);
      const std::string name = e.covariate.empty() && e.id.is_intercept() ? "1" : [&] {
        std::string s;
        for (const auto& a : prod) s += (s.empty() ? "" : ":") + a.name;
        return s;
      }();
      if (remove) {
        if (it == terms.end())
          spec.warnings.push_back("term '" + name + "' removed but never added (offset " +
                                  std::to_string(at) + ")");
        else
          terms.erase(it);
      } else if (it != terms.end()) {
        if (!(e.covariate.empty() && e.id.is_intercept()))
          spec.warnings.push_back("duplicate term '" + name + "' ignored (offset " +
                                  std::to_string(at) + ")");
      } else {
        terms.push_back(e);
      }
    }
  }
  if (terms.empty()) throw formula_error("model has no terms", text.size());

  for (const auto& t : terms) {
    std::size_t sub = 0;
    if (!t.covariate.empty()) {
      auto it = std::find_if(spec.covariate_submodels.begin(), spec.covariate_submodels.end(),
                             [&](const CovariateSubmodel& c) { return c.name == t.covariate; });
      if (it == spec.covariate_submodels.end()) {
        spec.covariate_submodels.push_back({t.covariate, {}});
        it = spec.covariate_submodels.end() - 1;
      }
      it->effects.insert(t.id);
      sub = static_cast<std::size_t>(it - spec.covariate_submodels.begin()) + 1;
    } else {
      spec.intercept_submodel.insert(t.id);
    }
    spec.term_order.push_back({sub, t.id});
  }
  return spec;
}

}  // namespace typ3
