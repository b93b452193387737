#include <gtest/gtest.h>

#include <random>

#include "typ3/formula.hpp"

using namespace typ3;

namespace {

const std::vector<std::string> kFactors{"A", "B"};
const std::vector<std::string> kCovs{"x1", "x2"};

ModelSpec parse(const std::string& s) { return parse_formula(s, kFactors, kCovs); }

std::size_t error_offset(const std::string& s) {
  try {
    parse(s);
  } catch (const formula_error& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no error for " << s;
  return 0;
}

}  // namespace

TEST(Formula, FullFactorialWithImplicitIntercept) {
  const auto m = parse("y ~ A + B + A:B");
  EXPECT_EQ(m.response, "y");
  EXPECT_EQ(m.intercept_submodel, EffectSet::from_strings({"00", "10", "01", "11"}));
  EXPECT_TRUE(m.covariate_submodels.empty());
}

TEST(Formula, NestedModel) {
  EXPECT_EQ(parse("y ~ A + A:B").intercept_submodel, EffectSet::from_strings({"00", "10", "11"}));
}

TEST(Formula, CovariateSubmodel) {
  const auto m = parse("y ~ A*B + x1 + A:x1");
  EXPECT_EQ(m.intercept_submodel, EffectSet::from_strings({"00", "10", "01", "11"}));
  ASSERT_EQ(m.covariate_submodels.size(), 1u);
  EXPECT_EQ(m.covariate_submodels[0].name, "x1");
  EXPECT_EQ(m.covariate_submodels[0].effects, EffectSet::from_strings({"00", "10"}));
  EXPECT_EQ(m.label({1, EffectId::parse("10")}), "A:x1");
  EXPECT_EQ(m.label({1, EffectId::parse("00")}), "x1");
}

TEST(Formula, InterceptOnly) {
  const auto m = parse("y ~ 1");
  EXPECT_EQ(m.intercept_submodel, EffectSet::from_strings({"00"}));
  EXPECT_TRUE(m.covariate_submodels.empty());
}

TEST(Formula, StarExpandsInOrder) {
  const auto m = parse_formula("y ~ A*B*C", {"A", "B", "C"}, {});
  EXPECT_EQ(m.intercept_submodel,
            EffectSet::from_strings({"000", "100", "010", "110", "001", "101", "011", "111"}));
}

TEST(Formula, InterceptRemovalAndTermRemoval) {
  const auto m = parse("y ~ A*B - 1");
  EXPECT_EQ(m.intercept_submodel, EffectSet::from_strings({"10", "01", "11"}));
  EXPECT_EQ(parse("y ~ -1 + A").intercept_submodel, EffectSet::from_strings({"10"}));
  EXPECT_EQ(parse("y ~ A*B - A:B").intercept_submodel, EffectSet::from_strings({"00", "10", "01"}));
}

TEST(Formula, CovariateOnlyModelHasEmptyInterceptSubmodel) {
  const auto m = parse("y ~ -1 + x1 + B:x1");
  EXPECT_TRUE(m.intercept_submodel.empty());
  EXPECT_EQ(m.covariate_submodels[0].effects, EffectSet::from_strings({"00", "01"}));
}

TEST(Formula, TermOrderIsFirstAppearance) {
  const auto m = parse("y ~ B + x1 + A + A:B");
  ASSERT_EQ(m.term_order.size(), 5u);
  EXPECT_EQ(m.label(m.term_order[0]), "(Intercept)");
  EXPECT_EQ(m.label(m.term_order[1]), "B");
  EXPECT_EQ(m.label(m.term_order[2]), "x1");
  EXPECT_EQ(m.label(m.term_order[3]), "A");
  EXPECT_EQ(m.intercept_submodel[1].to_string(), "01");
}

TEST(Formula, DuplicatesCollapseWithWarning) {
  const auto m = parse("y ~ A + B + A + B:A");
  EXPECT_EQ(m.intercept_submodel, EffectSet::from_strings({"00", "10", "01", "11"}));
  EXPECT_EQ(m.warnings.size(), 1u);
  EXPECT_EQ(parse("y ~ A - B").warnings.size(), 1u);
  EXPECT_TRUE(parse("y ~ 1 + A").warnings.empty());
}

TEST(Formula, Errors) {
  EXPECT_EQ(error_offset("y ~ A + C"), 8u);
  EXPECT_EQ(error_offset("y ~ A:A"), 6u);
  EXPECT_EQ(error_offset("y ~ x1:x2"), 7u);
  EXPECT_EQ(error_offset("y ~ x1:x1"), 7u);
  EXPECT_EQ(error_offset("y ~ A:1"), 6u);
  EXPECT_EQ(error_offset("y ~ 2"), 4u);
  EXPECT_EQ(error_offset("y ~ -1"), 6u);
  EXPECT_EQ(error_offset("y ~ A - A - 1"), 13u);
  EXPECT_EQ(error_offset("y A"), 2u);
  EXPECT_EQ(error_offset("y ~ A B"), 6u);
  EXPECT_EQ(error_offset("y ~ A + "), 8u);
  EXPECT_EQ(error_offset("y ~ A $"), 6u);
  EXPECT_THROW(parse("A ~ B"), formula_error);
  EXPECT_THROW(parse_formula("y ~ A", {"A"}, {"A"}), input_error);
}

TEST(Formula, WhitespaceInsensitive) {
  EXPECT_EQ(parse("y~A*B"), parse("  y ~ A  *   B "));
  EXPECT_EQ(parse_formula("y.1 ~ f_1", {"f_1"}, {}).response, "y.1");
}

TEST(Formula, RoundTripOfRandomModels) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> atoms{"A", "B", "C", "x1", "x2", "A:B", "B:C", "A:B:C", "A:x1", "C:x2", "A:C:x1"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string text = "y ~ ";
    const bool drop_intercept = rng() % 3 == 0;
    text += drop_intercept ? "-1" : "1";
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) text += (rng() % 5 == 0 ? " - " : " + ") + atoms[rng() % atoms.size()];
    ModelSpec m;
    try {
      m = parse_formula(text, {"A", "B", "C"}, {"x1", "x2"});
    } catch (const formula_error&) {
      continue;  // e.g. everything removed
    }
    const auto again = parse_formula(m.render(), {"A", "B", "C"}, {"x1", "x2"});
    EXPECT_EQ(again, m) << text << " -> " << m.render();
  }
}

TEST(Formula, FuzzNeverCrashes) {
  std::mt19937_64 rng(8);
  const std::string alphabet = "yABx12~+-*: .()_$#\t";
  std::size_t ok = 0, diagnosed = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::string s;
    const std::size_t len = rng() % 24;
    if (trial % 2 == 0) s = "y ~ ";
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    try {
      parse(s);
      ++ok;
    } catch (const formula_error& e) {
      EXPECT_LE(e.offset(), s.size());
      ++diagnosed;
    }
  }
  EXPECT_GT(ok, 0u);
  EXPECT_GT(diagnosed, 0u);
}
