#include <gtest/gtest.h>

#include "support.hpp"

using namespace typ3;

TEST(Matrix, RowMajorInitializerStoresColumnMajor) {
  const Matrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.col(2)[0], 3.0);
  EXPECT_EQ(m.row(1), (std::vector<double>{4, 5, 6}));
}

TEST(Matrix, RaggedInitializerRejected) { EXPECT_THROW((Matrix{{1, 2}, {3}}), input_error); }

TEST(Matrix, ZeroColumnMatrixIsAllowed) {
  Matrix m(4, 0);
  EXPECT_TRUE(m.empty());
  m.append_column(std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(m.cols(), 1u);
  EXPECT_THROW(m.append_column(std::vector<double>{1, 2}), input_error);
}

TEST(Matrix, MultiplyAndTransposeAgree) {
  std::mt19937_64 rng(3);
  const Matrix a = test::random_matrix(5, 3, rng), b = test::random_matrix(5, 4, rng);
  EXPECT_LE(max_abs(multiply_tn(a, b) - multiply(transpose(a), b)), 1e-14);
  EXPECT_THROW(multiply(a, b), input_error);
}

TEST(Matrix, KroneckerOfIdentities) {
  const Matrix k = kron(Matrix::identity(2), Matrix::identity(3));
  EXPECT_LE(max_abs(k - Matrix::identity(6)), 0.0);
  const Matrix m = kron(Matrix{{1, 2}}, Matrix{{1}, {1}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 2u);
  EXPECT_EQ(m(1, 1), 2.0);
}

TEST(Matrix, HconcatPassesThroughDefaultOperand) {
  const Matrix a{{1}, {2}};
  const Matrix c = hconcat(Matrix(), a);
  EXPECT_EQ(c.rows(), 2u);
  EXPECT_EQ(c.cols(), 1u);
  EXPECT_THROW(hconcat(a, Matrix(3, 1)), input_error);
}

TEST(Matrix, Reductions) {
  const Matrix m{{3, 0}, {4, -7}};
  EXPECT_EQ(max_abs(m), 7.0);
  EXPECT_DOUBLE_EQ(max_column_norm(m), 7.0);
  EXPECT_DOUBLE_EQ(trace(m), -4.0);
  EXPECT_DOUBLE_EQ(frobenius(m), std::sqrt(74.0));
  EXPECT_EQ(matvec(m, std::vector<double>{1, 1}), (std::vector<double>{3, -3}));
}

TEST(Tolerance, RejectsNonPositive) {
  EXPECT_THROW((Tolerance{0.0, 1e-12}.validate()), input_error);
  EXPECT_THROW((Tolerance{1e-10, -1.0}.validate()), input_error);
  EXPECT_NO_THROW(Tolerance{}.validate());
}
