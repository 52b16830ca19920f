#include <gtest/gtest.h>

#include "moviz/tasklet.hpp"

using moviz::ParseError;
using moviz::tasklet::count_arithmetic_ops;
using moviz::tasklet::parse;

TEST(TaskletOps, Examples) {
  EXPECT_EQ(count_arithmetic_ops("c = a * b"), 1);
  EXPECT_EQ(count_arithmetic_ops("o = a"), 0);
  EXPECT_EQ(count_arithmetic_ops("o = (a + b) * c + d"), 3);
}

TEST(TaskletOps, Intrinsics) {
  EXPECT_EQ(count_arithmetic_ops("o = fma(a, b, c)"), 2);
  EXPECT_EQ(count_arithmetic_ops("o = sqrt(a * a + b * b)"), 4);
  EXPECT_EQ(count_arithmetic_ops("o = max(abs(a), tanh(b))"), 3);
  EXPECT_EQ(count_arithmetic_ops("o = exp(-a)"), 1);
  EXPECT_EQ(count_arithmetic_ops("o = min(a, b, c)"), 1);
}

TEST(TaskletOps, NegationAndSubscriptsAreFree) {
  EXPECT_EQ(count_arithmetic_ops("o = -a"), 0);
  EXPECT_EQ(count_arithmetic_ops("o = w[i + 1, j] * 2"), 1);
}

TEST(TaskletOps, MultipleStatements) {
  EXPECT_EQ(count_arithmetic_ops("t = a + b; o = t * t"), 2);
  EXPECT_EQ(count_arithmetic_ops("t = a + b\n\no = t / 2.5\n"), 2);
  auto code = parse("x = 1; y = x % 3");
  ASSERT_EQ(code.statements.size(), 2u);
  EXPECT_EQ(code.statements[0].target, "x");
  EXPECT_EQ(code.statements[1].target, "y");
}

TEST(TaskletParse, Errors) {
  EXPECT_THROW(parse("o = a +"), ParseError);
  EXPECT_THROW(parse("= a"), ParseError);
  EXPECT_THROW(parse("o = frobnicate(a)"), ParseError);
  EXPECT_THROW(parse("o = fma(a, b)"), ParseError);
  EXPECT_THROW(parse("o = a $ b"), ParseError);
  try {
    parse("o = a\np = (b * ");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GE(e.position(), 6u);
  }
}
