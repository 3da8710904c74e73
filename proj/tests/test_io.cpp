#include <gtest/gtest.h>

#include <sstream>

#include "common.hpp"
#include "ogcp/io.hpp"

using namespace ogcp;
using namespace ogcp::test;

namespace {

SparseTensor parse(const std::string& text, bool merge = false) {
  std::istringstream in(text);
  return read_tns(in, {merge});
}

ErrorKind parse_error_kind(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Contract;
}

}  // namespace

TEST(Tns, SingleLineInfersDims) {
  const SparseTensor x = parse("1 1 1 2.5\n");
  EXPECT_EQ(x.dims(), (std::vector<Index>{1, 1, 1}));
  ASSERT_EQ(x.nnz(), 1u);
  EXPECT_EQ(x.value(0), 2.5);
}

TEST(Tns, HeaderOnlyGivesEmptyTensor) {
  const SparseTensor x = parse("# dims: 3 4\n");
  EXPECT_EQ(x.dims(), (std::vector<Index>{3, 4}));
  EXPECT_EQ(x.nnz(), 0u);
}

TEST(Tns, CommentsAndExplicitZeros) {
  const SparseTensor x = parse("# a comment\n2 3 1.5\n\n1 1 0\n");
  EXPECT_EQ(x.dims(), (std::vector<Index>{2, 3}));
  EXPECT_EQ(x.nnz(), 1u);
}

TEST(Tns, Errors) {
  EXPECT_EQ(parse_error_kind("1 1 2\n1 2\n"), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind("1 x 2\n"), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind("0 1 2\n"), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind("# dims: 2 2\n3 1 1\n"), ErrorKind::Parse);
  try {
    parse("1 1 1\n2 2 1\n2 2\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  EXPECT_THROW(read_tns(std::filesystem::path("/nonexistent/x.tns")), Error);
}

TEST(Tns, DuplicatesRejectedOrMerged) {
  const std::string text = "1 2 1.0\n2 2 3.0\n1 2 0.5\n";
  EXPECT_THROW(parse(text), Error);
  const SparseTensor x = parse(text, true);
  ASSERT_EQ(x.nnz(), 2u);
  const auto n = x.find(std::vector<Index>{0, 1});
  ASSERT_TRUE(n.has_value());
  EXPECT_EQ(x.value(*n), 1.5);
  // Entries that cancel are dropped.
  EXPECT_EQ(parse("1 1 2\n1 1 -2\n2 2 1\n", true).nnz(), 1u);
}

TEST(Tns, RoundTripIsExact) {
  std::mt19937_64 gen(1);
  const SparseTensor x = random_sparse({5, 4, 6}, 0.3, LossKind::Gaussian, gen);
  std::stringstream buf;
  write_tns(x, buf);
  const SparseTensor y = read_tns(buf);
  EXPECT_EQ(y.dims(), x.dims());
  EXPECT_EQ(densify(y), densify(x));

  std::stringstream empty;
  write_tns(SparseTensor({2, 3}), empty);
  EXPECT_EQ(empty.str(), "# dims: 2 3\n");
}

TEST(KtensorFormat, RankOneOnes) {
  const KTensor m(Vector::Ones(1), {FactorMatrix::Ones(2, 1), FactorMatrix::Ones(2, 1)});
  std::stringstream buf;
  write_ktensor(m, buf);
  EXPECT_EQ(buf.str(), "2 1\n2 2\n1\n1\n1\n1\n1\n");
}

TEST(KtensorFormat, RoundTripIsExact) {
  std::mt19937_64 gen(2);
  const KTensor m(random_weights(3, gen), random_factors({4, 2, 5}, 3, gen, -1, 1));
  std::stringstream buf;
  write_ktensor(m, buf);
  const KTensor back = read_ktensor(buf);
  EXPECT_EQ(back.weights(), m.weights());
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(back.factor(k), m.factor(k));
  std::istringstream bad("2 1\n2 2\n1\n1\n");
  EXPECT_THROW(read_ktensor(bad), Error);
}

TEST(SliceStream, OrderCountsAndReassembly) {
  std::mt19937_64 gen(3);
  const SparseTensor x = random_sparse({4, 3, 3}, 0.4, LossKind::Poisson, gen);
  SliceStream stream(x);
  EXPECT_EQ(stream.num_slices(), 3);
  std::vector<SparseTensor> slices;
  std::size_t total = 0;
  while (auto s = stream.next()) {
    EXPECT_EQ(s->dims(), (std::vector<Index>{4, 3}));
    total += s->nnz();
    slices.push_back(std::move(*s));
  }
  EXPECT_EQ(slices.size(), 3u);
  EXPECT_EQ(total, x.nnz());
  const SparseTensor back = stack_slices(slices);
  EXPECT_EQ(back.dims(), x.dims());
  EXPECT_EQ(densify(back), densify(x));
  EXPECT_EQ(densify(stream.slice(1)), densify(x.slice(1)));

  const SparseTensor mid = last_mode_range(x, 1, 3);
  EXPECT_EQ(mid.dim(2), 2);
  EXPECT_EQ(densify(mid.slice(0)), densify(x.slice(1)));
  EXPECT_THROW(last_mode_range(x, 2, 5), Error);
}
