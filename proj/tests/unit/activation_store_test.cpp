#include "probekit/activation_store.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "probekit/errors.hpp"

namespace probekit {
namespace {

using testing::TempDir;

template <typename T>
T read_le(const std::vector<char>& bytes, std::size_t offset) {
  T value{};
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, bytes.data() + offset, sizeof(T));
  std::uint64_t acc = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) acc = (acc << 8) | raw[i];
  if constexpr (std::is_floating_point_v<T>) {
    std::uint32_t bits = static_cast<std::uint32_t>(acc);
    std::memcpy(&value, &bits, sizeof(T));
  } else {
    value = static_cast<T>(acc);
  }
  return value;
}

ActivationFile two_example_tokens() {
  ActivationFile f;
  f.kind = ActivationKind::token_level;
  f.layer_index = 3;
  f.hidden_dim = 2;
  f.n_examples = 2;
  f.offsets = {0, 2, 5};
  f.total_rows = 5;
  f.data = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  return f;
}

TEST(ActivationFileFormat, HeaderLayoutIsLittleEndian) {
  const auto bytes = encode_activation_file(two_example_tokens());
  ASSERT_EQ(bytes.size(), 32u + 3 * 8 + 10 * 4);
  EXPECT_EQ(std::string(bytes.data(), 4), "RQAC");
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 4), 1u);   // version
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 8), 0u);   // token_level
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 12), 3u);  // layer
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 16), 2u);  // hidden_dim
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 20), 2u);  // n_examples
  EXPECT_EQ(read_le<std::uint64_t>(bytes, 24), 5u);  // total_rows
  EXPECT_EQ(read_le<std::uint64_t>(bytes, 32), 0u);
  EXPECT_EQ(read_le<std::uint64_t>(bytes, 40), 2u);
  EXPECT_EQ(read_le<std::uint64_t>(bytes, 48), 5u);
  EXPECT_EQ(read_le<float>(bytes, 56), 1.0f);
  EXPECT_EQ(read_le<float>(bytes, 56 + 9 * 4), 10.0f);
  // 1.0f is 0x3f800000; least significant byte first.
  EXPECT_EQ(static_cast<unsigned char>(bytes[56]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[59]), 0x3f);
}

TEST(ActivationFileFormat, SingleTokenFile) {
  ActivationFile f;
  f.kind = ActivationKind::token_level;
  f.hidden_dim = 2;
  f.n_examples = 1;
  f.offsets = {0, 1};
  f.total_rows = 1;
  f.data = {1.0f, 2.0f};
  const auto bytes = encode_activation_file(f);
  EXPECT_EQ(bytes.size(), 32u + 16 + 8);
  EXPECT_EQ(decode_activation_file(bytes), f);
}

TEST(ActivationFileFormat, ExampleLevelWithOffsetsIsRejectedOnWrite) {
  auto f = ActivationFile::from_matrix(Eigen::MatrixXd::Ones(2, 2), 0);
  f.offsets = {0, 1, 2};
  TempDir dir;
  EXPECT_THROW(write_activation_file(dir.file("x.rqac"), f), InvariantError);
}

TEST(ActivationFileFormat, ShortDataSectionIsTruncation) {
  auto bytes = encode_activation_file(two_example_tokens());
  bytes.resize(bytes.size() - 4);
  EXPECT_THROW(decode_activation_file(bytes), TruncatedError);
}

TEST(ActivationFileFormat, ExampleLevelHasNoOffsets) {
  const auto f = ActivationFile::from_matrix(Eigen::MatrixXd::Ones(3, 4), 7);
  const auto bytes = encode_activation_file(f);
  EXPECT_EQ(bytes.size(), 32u + 3 * 4 * 4);
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 8), 1u);
}

TEST(ActivationFileFormat, RandomFilesRoundTripBitwise) {
  std::mt19937_64 rng(11);
  TempDir dir;
  for (int i = 0; i < 200; ++i) {
    const auto kind = i % 2 == 0 ? ActivationKind::token_level : ActivationKind::example_level;
    const auto f = testing::random_activation_file(rng, kind);
    const auto path = dir.file("f.rqac");
    write_activation_file(path, f);
    const auto back = read_activation_file(path);
    ASSERT_EQ(back, f);
    ASSERT_EQ(encode_activation_file(back), encode_activation_file(f));
  }
}

TEST(ActivationFileFormat, BadMagicIsRejected) {
  auto bytes = encode_activation_file(two_example_tokens());
  bytes[0] = 'X';
  EXPECT_THROW(decode_activation_file(bytes), BadMagicError);
}

TEST(ActivationFileFormat, UnknownVersionIsRejected) {
  auto bytes = encode_activation_file(two_example_tokens());
  bytes[4] = 2;
  EXPECT_THROW(decode_activation_file(bytes), UnsupportedVersionError);
}

TEST(ActivationFileFormat, EveryTruncationIsRejected) {
  const auto bytes = encode_activation_file(two_example_tokens());
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    const std::vector<char> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(len));
    EXPECT_THROW(decode_activation_file(cut), TruncatedError) << "length " << len;
  }
}

TEST(ActivationFileFormat, TrailingBytesAreRejected) {
  auto bytes = encode_activation_file(two_example_tokens());
  bytes.push_back(0);
  EXPECT_THROW(decode_activation_file(bytes), FormatError);
}

TEST(ActivationFileFormat, BadOffsetsAreRejected) {
  auto bytes = encode_activation_file(two_example_tokens());
  bytes[40] = 6;  // offsets[1] = 6 > offsets[2] = 5
  EXPECT_THROW(decode_activation_file(bytes), InvalidOffsetsError);

  bytes = encode_activation_file(two_example_tokens());
  bytes[32] = 1;  // offsets[0] != 0
  EXPECT_THROW(decode_activation_file(bytes), InvalidOffsetsError);

  bytes = encode_activation_file(two_example_tokens());
  bytes[40] = 0;  // empty example
  EXPECT_THROW(decode_activation_file(bytes), InvalidOffsetsError);
}

TEST(ActivationFileFormat, NonFiniteValuesAreRejected) {
  auto f = two_example_tokens();
  auto bytes = encode_activation_file(f);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + 56 + 4 * 4, &nan, 4);
  EXPECT_THROW(decode_activation_file(bytes), NonFiniteError);
}

TEST(ActivationFileFormat, UnknownKindIsRejected) {
  auto bytes = encode_activation_file(two_example_tokens());
  bytes[8] = 7;
  EXPECT_THROW(decode_activation_file(bytes), FormatError);
}

TEST(ActivationFileFormat, HugeLengthFieldsFailWithoutAllocating) {
  auto bytes = encode_activation_file(two_example_tokens());
  bytes[20] = bytes[21] = bytes[22] = bytes[23] = static_cast<char>(0xff);  // n_examples
  EXPECT_THROW(decode_activation_file(bytes), TruncatedError);

  bytes = encode_activation_file(ActivationFile::from_matrix(Eigen::MatrixXd::Ones(2, 2), 0));
  for (int i = 24; i < 32; ++i) bytes[i] = static_cast<char>(0xff);  // total_rows
  EXPECT_THROW(decode_activation_file(bytes), FormatError);
}

TEST(ActivationFileFormat, MissingFileNamesThePath) {
  try {
    read_activation_file("/nonexistent/dir/x.rqac");
    FAIL() << "expected NotFoundError";
  } catch (const NotFoundError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.rqac"), std::string::npos);
    EXPECT_EQ(e.path(), "/nonexistent/dir/x.rqac");
  }
}

TEST(ActivationFileValidate, CatchesInconsistentFields) {
  auto f = ActivationFile::from_matrix(Eigen::MatrixXd::Ones(2, 3), 0);
  EXPECT_NO_THROW(f.validate());
  f.offsets = {0, 1, 2};
  EXPECT_THROW(f.validate(), InvariantError);
  EXPECT_THROW(encode_activation_file(f), InvariantError);

  auto t = two_example_tokens();
  t.data.pop_back();
  EXPECT_THROW(t.validate(), InvariantError);
}

TEST(ActivationFileMatrix, FromMatrixNarrowsToFloat) {
  Eigen::MatrixXd m(2, 2);
  m << 0.1, 1.0, -2.5, 1e-3;
  const auto f = ActivationFile::from_matrix(m, 4);
  EXPECT_EQ(f.layer_index, 4u);
  EXPECT_EQ(f.data[0], 0.1f);
  const auto back = f.to_matrix();
  EXPECT_EQ(back(0, 0), static_cast<double>(0.1f));
  EXPECT_EQ(back(1, 0), -2.5);
}

DatasetMeta small_meta() {
  DatasetMeta m;
  m.dataset_name = "rq";
  m.tokenizer_id = "tok-1";
  m.model_id = "m";
  m.n_layers = 4;
  m.examples = {{"a", Label::rhetorical, Split::train, 5, {1, 5}},
                {"b", Label::informational, Split::test, 3, {0, 3}},
                {"c", Label::informational, Split::train, 2, {0, 1}},
                {"d", Label::rhetorical, Split::validation, 9, {4, 9}}};
  return m;
}

TEST(DatasetMetaJson, RoundTrips) {
  const auto m = small_meta();
  EXPECT_EQ(meta_from_json(meta_to_json(m)), m);
  TempDir dir;
  write_meta(dir.file("rq__meta.json"), m);
  EXPECT_EQ(read_meta(dir.file("rq__meta.json")), m);
}

TEST(DatasetMetaJson, RejectsDuplicateIdsAndBadSpans) {
  auto m = small_meta();
  m.examples[1].id = "a";
  EXPECT_THROW(m.validate(), InvariantError);
  m = small_meta();
  m.examples[0].question_span = {3, 6};
  EXPECT_THROW(m.validate(), InvariantError);
  m.examples[0].question_span = {2, 2};
  EXPECT_THROW(m.validate(), InvariantError);
}

TEST(DatasetMetaJson, MalformedJsonIsAFormatError) {
  EXPECT_THROW(meta_from_json("{\"dataset_name\": 3}"), FormatError);
  EXPECT_THROW(meta_from_json("not json"), FormatError);
  TempDir dir;
  std::ofstream(dir.file("bad.json")) << "{";
  EXPECT_THROW(read_meta(dir.file("bad.json")), FormatError);
  EXPECT_THROW(read_meta(dir.file("missing.json")), NotFoundError);
}

TEST(DatasetMeta, SubsetKeepsOrder) {
  const auto m = small_meta();
  EXPECT_EQ(m.count(Split::train), 2u);
  const auto train = m.subset(Split::train);
  ASSERT_EQ(train.size(), 2u);
  EXPECT_EQ(train.examples[0].id, "a");
  EXPECT_EQ(train.examples[1].id, "c");
  EXPECT_EQ(train.model_id, "m");
}

TEST(Join, SelectsSplitInMetaOrder) {
  const auto m = small_meta();
  Eigen::MatrixXd rows(4, 2);
  rows << 1, 2, 3, 4, 5, 6, 7, 8;
  const auto f = ActivationFile::from_matrix(rows, 0);
  const auto train = join(f, m, Split::train);
  ASSERT_EQ(train.rows(), 2);
  EXPECT_EQ(train.ids, (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(train.y, (std::vector<int>{1, 0}));
  EXPECT_EQ(train.X(1, 0), 5.0);
  EXPECT_EQ(join(f, m, Split::test).ids, std::vector<std::string>{"b"});
}

TEST(Join, RqShapedSplitCounts) {
  DatasetMeta m;
  m.dataset_name = "rq";
  m.n_layers = 1;
  const std::pair<Split, int> counts[] = {
      {Split::train, 3200}, {Split::validation, 797}, {Split::test, 1000}};
  int next = 0;
  for (const auto& [split, n] : counts) {
    for (int i = 0; i < n; ++i, ++next) {
      m.examples.push_back({"q" + std::to_string(next),
                            next % 2 ? Label::rhetorical : Label::informational, split, 1, {0, 1}});
    }
  }
  const auto f = ActivationFile::from_matrix(Eigen::MatrixXd::Zero(next, 3), 0);
  EXPECT_EQ(join(f, m, Split::validation).rows(), 797);
  EXPECT_EQ(join(f, m, Split::train).rows(), 3200);
  EXPECT_EQ(join(f, m, Split::test).rows(), 1000);
}

TEST(Join, RejectsCountMismatchAndTokenFiles) {
  const auto m = small_meta();
  const auto f = ActivationFile::from_matrix(Eigen::MatrixXd::Ones(3, 2), 0);
  EXPECT_THROW(join(f, m, Split::train), InvariantError);
  EXPECT_THROW(join(two_example_tokens(), m, Split::train), InvariantError);
}

TEST(TokenCounts, MustMatchOffsets) {
  auto f = two_example_tokens();
  auto m = testing::meta_for(f);
  EXPECT_NO_THROW(check_token_counts(f, m));
  m.examples[0].n_tokens = 3;
  EXPECT_THROW(check_token_counts(f, m), InvariantError);
}

TEST(FileNames, RoundTripThroughParse) {
  const auto name = activation_filename("rq_v2", Split::validation, 17);
  EXPECT_EQ(name, "rq_v2__validation__L17.rqac");
  const auto parsed = parse_activation_filename(name);
  ASSERT_TRUE(parsed.has_value());
  EXPECT_EQ(parsed->dataset, "rq_v2");
  EXPECT_EQ(parsed->split, Split::validation);
  EXPECT_EQ(parsed->layer, 17u);
  EXPECT_EQ(meta_filename("rq"), "rq__meta.json");
}

TEST(FileNames, GarbageDoesNotParse) {
  for (const char* bad : {"x.rqac", "rq__train__Lx.rqac", "rq__dev__L1.rqac", "rq__train__L1.bin",
                          "__train__L1.rqac", "rq__train__L.rqac"}) {
    EXPECT_FALSE(parse_activation_filename(bad).has_value()) << bad;
  }
}

TEST(Fingerprint, TracksContent) {
  TempDir dir;
  const auto path = dir.file("a.bin");
  std::ofstream(path) << "abc";
  const auto h1 = fingerprint_file(path);
  EXPECT_EQ(h1.size(), 16u);
  EXPECT_EQ(fingerprint_file(path), h1);
  std::ofstream(path) << "abd";
  EXPECT_NE(fingerprint_file(path), h1);
  // FNV-1a 64 of the empty input is the offset basis.
  std::ofstream(path, std::ios::trunc).close();
  EXPECT_EQ(fingerprint_file(path), "cbf29ce484222325");
}

TEST(Labels, ParseAndPrint) {
  EXPECT_EQ(parse_label(to_string(Label::rhetorical)), Label::rhetorical);
  EXPECT_EQ(parse_split(to_string(Split::test)), Split::test);
  EXPECT_THROW(parse_label("maybe"), InvariantError);
  EXPECT_THROW(parse_split("dev"), InvariantError);
}

}  // namespace
}  // namespace probekit
