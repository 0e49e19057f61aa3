#include "probekit/pooling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "probekit/errors.hpp"

namespace probekit {
namespace {

// One example, three tokens, d = 2.
ActivationFile three_tokens() {
  ActivationFile f;
  f.kind = ActivationKind::token_level;
  f.hidden_dim = 2;
  f.n_examples = 1;
  f.offsets = {0, 3};
  f.total_rows = 3;
  f.data = {1, 2, 3, 4, 5, 6};
  return f;
}

DatasetMeta one_example(std::uint64_t n_tokens, TokenSpan span) {
  DatasetMeta m;
  m.dataset_name = "p";
  m.n_layers = 1;
  m.examples = {{"only", Label::rhetorical, Split::train, n_tokens, span}};
  return m;
}

std::vector<float> pooled(const ActivationFile& f, const DatasetMeta& m, PoolingSpec spec) {
  return pool(f, m, spec).data;
}

TEST(Pooling, WorkedExamples) {
  const auto f = three_tokens();
  const auto m = one_example(3, {1, 3});
  EXPECT_EQ(pooled(f, m, PoolingSpec::last_token()), (std::vector<float>{5, 6}));
  EXPECT_EQ(pooled(f, m, PoolingSpec::mean_all()), (std::vector<float>{3, 4}));
  EXPECT_EQ(pooled(f, m, PoolingSpec::last_k(2)), (std::vector<float>{4, 5}));
  EXPECT_EQ(pooled(f, m, PoolingSpec::question_span()), (std::vector<float>{4, 5}));
}

TEST(Pooling, SingleTokenIsFixedPoint) {
  ActivationFile f;
  f.kind = ActivationKind::token_level;
  f.hidden_dim = 3;
  f.n_examples = 1;
  f.offsets = {0, 1};
  f.total_rows = 1;
  f.data = {0.25f, -7.0f, 3.5f};
  const auto m = one_example(1, {0, 1});
  for (const auto& spec : {PoolingSpec::last_token(), PoolingSpec::mean_all(),
                           PoolingSpec::last_k(4), PoolingSpec::question_span()}) {
    EXPECT_EQ(pooled(f, m, spec), f.data) << spec.name();
  }
}

TEST(Pooling, MeanOfTwoTokens) {
  ActivationFile f;
  f.kind = ActivationKind::token_level;
  f.hidden_dim = 2;
  f.n_examples = 1;
  f.offsets = {0, 2};
  f.total_rows = 2;
  f.data = {1, 3, 3, 1};
  EXPECT_EQ(pooled(f, one_example(2, {0, 2}), PoolingSpec::mean_all()),
            (std::vector<float>{2, 2}));
}

TEST(Pooling, LastKClampsToLength) {
  const auto f = three_tokens();
  const auto m = one_example(3, {0, 3});
  EXPECT_EQ(pooled(f, m, PoolingSpec::last_k(50)), pooled(f, m, PoolingSpec::mean_all()));
  EXPECT_EQ(pooled(f, m, PoolingSpec::last_k(1)), pooled(f, m, PoolingSpec::last_token()));
}

TEST(Pooling, OutputIsExampleLevel) {
  std::mt19937_64 rng(3);
  auto f = testing::random_activation_file(rng, ActivationKind::token_level);
  f.layer_index = 9;
  const auto out = pool(f, testing::meta_for(f), PoolingSpec::mean_all());
  EXPECT_EQ(out.kind, ActivationKind::example_level);
  EXPECT_EQ(out.layer_index, 9u);
  EXPECT_EQ(out.n_examples, f.n_examples);
  EXPECT_EQ(out.total_rows, f.n_examples);
  EXPECT_TRUE(out.offsets.empty());
  EXPECT_NO_THROW(out.validate());
}

TEST(Pooling, LastTokenCopiesRowBitwise) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testing::random_activation_file(rng, ActivationKind::token_level, 8, 6, 9);
    const auto out = pool(f, testing::meta_for(f), PoolingSpec::last_token());
    for (std::uint32_t i = 0; i < f.n_examples; ++i) {
      const auto src = f.row(f.offsets[i + 1] - 1);
      const auto dst = out.row(i);
      ASSERT_TRUE(std::equal(src.begin(), src.end(), dst.begin()));
    }
  }
}

TEST(Pooling, MeanMatchesDirectSum) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testing::random_activation_file(rng, ActivationKind::token_level, 8, 6, 9);
    const auto meta = testing::meta_for(f);
    const auto mean = pool(f, meta, PoolingSpec::mean_all());
    const auto span = pool(f, meta, PoolingSpec::question_span());
    for (std::uint32_t i = 0; i < f.n_examples; ++i) {
      const auto [b, e] = f.token_range(i);
      const auto& qs = meta.examples[i].question_span;
      for (std::uint32_t c = 0; c < f.hidden_dim; ++c) {
        long double all = 0, part = 0;
        for (auto r = b; r < e; ++r) all += f.row(r)[c];
        for (auto r = b + qs.start; r < b + qs.end; ++r) part += f.row(r)[c];
        const double m = static_cast<double>(all / (e - b));
        const double s = static_cast<double>(part / (qs.end - qs.start));
        ASSERT_NEAR(mean.row(i)[c], m, 1e-6 * (1.0 + std::abs(m)));
        ASSERT_NEAR(span.row(i)[c], s, 1e-6 * (1.0 + std::abs(s)));
      }
    }
  }
}

TEST(Pooling, MeanIgnoresTokenOrder) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto f = testing::random_activation_file(rng, ActivationKind::token_level, 5, 4, 8);
    const auto meta = testing::meta_for(f);
    const auto before = pool(f, meta, PoolingSpec::mean_all());
    for (std::uint32_t i = 0; i < f.n_examples; ++i) {
      const auto [b, e] = f.token_range(i);
      std::vector<std::vector<float>> rows;
      for (auto r = b; r < e; ++r) rows.emplace_back(f.row(r).begin(), f.row(r).end());
      std::shuffle(rows.begin(), rows.end(), rng);
      for (auto r = b; r < e; ++r) {
        std::copy(rows[r - b].begin(), rows[r - b].end(), f.data.begin() + r * f.hidden_dim);
      }
    }
    const auto after = pool(f, meta, PoolingSpec::mean_all());
    for (std::size_t j = 0; j < before.data.size(); ++j) {
      ASSERT_NEAR(after.data[j], before.data[j], 1e-6f * (1.0f + std::abs(before.data[j])));
    }
  }
}

TEST(Pooling, FullSpanEqualsMean) {
  std::mt19937_64 rng(21);
  auto f = testing::random_activation_file(rng, ActivationKind::token_level, 6, 5, 7);
  auto meta = testing::meta_for(f);
  for (auto& e : meta.examples) e.question_span = {0, e.n_tokens};
  EXPECT_EQ(pool(f, meta, PoolingSpec::question_span()).data,
            pool(f, meta, PoolingSpec::mean_all()).data);
}

TEST(Pooling, RejectsExampleLevelInput) {
  const auto f = ActivationFile::from_matrix(Eigen::MatrixXd::Ones(1, 2), 0);
  EXPECT_THROW(pool(f, one_example(1, {0, 1}), PoolingSpec::mean_all()), InvariantError);
}

TEST(Pooling, RejectsMetaMismatch) {
  const auto f = three_tokens();
  EXPECT_THROW(pool(f, one_example(4, {0, 4}), PoolingSpec::mean_all()), InvariantError);
  auto two = one_example(3, {0, 3});
  two.examples.push_back({"extra", Label::informational, Split::train, 1, {0, 1}});
  EXPECT_THROW(pool(f, two, PoolingSpec::mean_all()), InvariantError);
}

TEST(Pooling, RejectsSpanOutsideTokens) {
  const auto f = three_tokens();
  auto m = one_example(3, {0, 3});
  m.examples[0].question_span = {2, 4};
  EXPECT_THROW(pool(f, m, PoolingSpec::question_span()), InvariantError);
}

TEST(PoolingSpecTest, ParseAndName) {
  EXPECT_EQ(PoolingSpec::parse("last"), PoolingSpec::last_token());
  EXPECT_EQ(PoolingSpec::parse("mean"), PoolingSpec::mean_all());
  EXPECT_EQ(PoolingSpec::parse("lastk", 5), PoolingSpec::last_k(5));
  EXPECT_EQ(PoolingSpec::parse("span"), PoolingSpec::question_span());
  EXPECT_EQ(PoolingSpec::last_k(5).name(), "last5");
  EXPECT_EQ(PoolingSpec::question_span().name(), "span");
  EXPECT_THROW(PoolingSpec::parse("median"), InvariantError);
  EXPECT_THROW(PoolingSpec::parse("lastk", 0), InvariantError);
}

}  // namespace
}  // namespace probekit
