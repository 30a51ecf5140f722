#include "flick/ingestion.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "flick/errors.hpp"
#include "support/oracles.hpp"
#include "test_paths.hpp"

namespace flick {
namespace {

LabelTable balanced_table(std::size_t per_class, std::size_t classes) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (std::size_t i = 0; i < per_class * classes; ++i) {
    rows.emplace_back("id" + std::to_string(i), "c" + std::to_string(i % classes));
  }
  return LabelTable::from_named(rows);
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream(path) << body;
}

TEST(Ingestion, RoundTripSmallSet) {
  const auto dir = testing::scratch_dir();
  EmbeddingSet set({"a", "b", "c"}, {1, 0, 0, 1, 1, 1}, 2);
  write_embeddings(set, dir / "e.flke");
  const EmbeddingSet back = load_embeddings(dir / "e.flke");
  EXPECT_EQ(back.dim(), 2u);
  EXPECT_EQ(back.size(), 3u);
  EXPECT_TRUE(bit_equal(set, back));
}

TEST(Ingestion, RoundTripMinimalSet) {
  const auto dir = testing::scratch_dir();
  EmbeddingSet set({"only"}, {0.0f}, 1);
  write_embeddings(set, dir / "e.flke");
  EXPECT_TRUE(bit_equal(set, load_embeddings(dir / "e.flke")));
}

TEST(Ingestion, RoundTripLargeRandomIsBitExact) {
  const auto dir = testing::scratch_dir();
  std::mt19937_64 rng(11);
  std::vector<std::string> ids;
  std::vector<float> values(10000 * 64);
  for (std::size_t i = 0; i < 10000; ++i) ids.push_back("row-" + std::to_string(i));
  for (auto& v : values) {
    // Arbitrary finite bit patterns, including subnormals and negative zero.
    std::uint32_t bits = static_cast<std::uint32_t>(rng());
    if (((bits >> 23) & 0xFF) == 0xFF) bits &= ~(1u << 30);
    v = std::bit_cast<float>(bits);
  }
  EmbeddingSet set(ids, values, 64);
  write_embeddings(set, dir / "big.flke");
  EXPECT_TRUE(bit_equal(set, load_embeddings(dir / "big.flke")));
}

TEST(Ingestion, RoundTripPropertyOverRandomShapes) {
  const auto dir = testing::scratch_dir();
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + rng() % 40;
    const std::size_t d = 1 + rng() % 17;
    auto set = oracle::random_embeddings(n, d, seed, 1e3);
    write_embeddings(set, dir / "p.flke");
    ASSERT_TRUE(bit_equal(set, load_embeddings(dir / "p.flke"))) << "seed " << seed;
  }
}

TEST(Ingestion, Utf8IdsSurvive) {
  const auto dir = testing::scratch_dir();
  EmbeddingSet set({"تهكم-1", "ليست-2", ""}, {1, 2, 3}, 1);
  write_embeddings(set, dir / "u.flke");
  EXPECT_EQ(load_embeddings(dir / "u.flke").ids(), set.ids());
}

TEST(Ingestion, HeaderLayoutIsLittleEndian) {
  const auto dir = testing::scratch_dir();
  write_embeddings(EmbeddingSet({"ab"}, {1.0f, -2.0f}, 2), dir / "h.flke");
  std::ifstream in(dir / "h.flke", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::vector<unsigned char> expected = {
      'F', 'L', 'K', 'E', 1, 0, 0, 0,           // magic, version
      1, 0, 0, 0, 0, 0, 0, 0,                   // n
      2, 0, 0, 0,                               // d
      2, 0, 0, 0, 'a', 'b',                     // id
      0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0};  // 1.0f, -2.0f
  EXPECT_EQ(bytes, expected);
}

TEST(Ingestion, EmptySetIsRejected) {
  const auto dir = testing::scratch_dir();
  std::ofstream out(dir / "empty.flke", std::ios::binary);
  const unsigned char header[] = {'F', 'L', 'K', 'E', 1, 0, 0, 0, 0, 0, 0, 0,
                                  0, 0, 0, 0, 4, 0, 0, 0};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.close();
  EXPECT_THROW(load_embeddings(dir / "empty.flke"), DataError);
}

TEST(Ingestion, BadMagicIsFormatError) {
  const auto dir = testing::scratch_dir();
  write_text(dir / "bad.flke", "NOPE0000000000000000");
  EXPECT_THROW(load_embeddings(dir / "bad.flke"), FormatError);
}

TEST(Ingestion, TruncatedFileIsFormatError) {
  const auto dir = testing::scratch_dir();
  write_embeddings(EmbeddingSet({"a", "b"}, {1, 2, 3, 4}, 2), dir / "t.flke");
  std::filesystem::resize_file(dir / "t.flke", std::filesystem::file_size(dir / "t.flke") - 3);
  EXPECT_THROW(load_embeddings(dir / "t.flke"), FormatError);
}

TEST(Ingestion, NonFiniteValueIsDataError) {
  EXPECT_THROW(EmbeddingSet({"a"}, {std::numeric_limits<float>::quiet_NaN()}, 1), DataError);
  const auto dir = testing::scratch_dir();
  // Patch an infinity into an otherwise valid file.
  write_embeddings(EmbeddingSet({"a"}, {1.0f}, 1), dir / "inf.flke");
  std::fstream f(dir / "inf.flke", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(-4, std::ios::end);
  const unsigned char inf[] = {0x00, 0x00, 0x80, 0x7F};
  f.write(reinterpret_cast<const char*>(inf), 4);
  f.close();
  EXPECT_THROW(load_embeddings(dir / "inf.flke"), DataError);
}

TEST(Ingestion, DuplicateIdIsDataError) {
  EXPECT_THROW(EmbeddingSet({"a", "a"}, {1, 2}, 1), DataError);
}

TEST(Ingestion, MissingFileIsIoError) {
  EXPECT_THROW(load_embeddings("/nonexistent/x.flke"), IoError);
  EXPECT_THROW(write_embeddings(EmbeddingSet({"a"}, {1}, 1), "/nonexistent/dir/x.flke"), IoError);
}

TEST(Labels, TwoRecordsSortClassNames) {
  const auto dir = testing::scratch_dir();
  write_text(dir / "l.jsonl", "{\"id\":\"a\",\"label\":\"pos\"}\n{\"id\":\"b\",\"label\":\"neg\"}\n");
  const LabelTable t = load_labels(dir / "l.jsonl");
  EXPECT_EQ(t.class_count(), 2u);
  EXPECT_EQ(t.class_names(), (std::vector<std::string>{"neg", "pos"}));
  EXPECT_EQ(t.label_of("a"), 1);
  EXPECT_EQ(t.label_of("b"), 0);
}

TEST(Labels, SingleClassIsAcceptedAtLoad) {
  const auto dir = testing::scratch_dir();
  write_text(dir / "l.jsonl", "{\"id\":\"a\",\"label\":\"x\"}\n\n{\"id\":\"b\",\"label\":\"x\"}\n");
  EXPECT_EQ(load_labels(dir / "l.jsonl").class_count(), 1u);
}

TEST(Labels, HundredLinesThreeClasses) {
  const auto dir = testing::scratch_dir();
  {
    std::ofstream out(dir / "l.jsonl");
    for (int i = 0; i < 100; ++i) {
      out << "{\"id\":\"r" << i << "\",\"label\":\"k" << i % 3 << "\"}\n";
    }
  }
  const LabelTable t = load_labels(dir / "l.jsonl");
  EXPECT_EQ(t.class_count(), 3u);
  EXPECT_EQ(t.size(), 100u);
  EXPECT_EQ(t.class_sizes(), (std::vector<std::size_t>{34, 33, 33}));
}

TEST(Labels, MissingFieldIsFormatError) {
  const auto dir = testing::scratch_dir();
  write_text(dir / "l.jsonl", "{\"id\":\"a\"}\n");
  EXPECT_THROW(load_labels(dir / "l.jsonl"), FormatError);
  write_text(dir / "m.jsonl", "not json\n");
  EXPECT_THROW(load_labels(dir / "m.jsonl"), FormatError);
}

TEST(Labels, DuplicateIdIsDataError) {
  const auto dir = testing::scratch_dir();
  write_text(dir / "l.jsonl", "{\"id\":\"a\",\"label\":\"x\"}\n{\"id\":\"a\",\"label\":\"y\"}\n");
  EXPECT_THROW(load_labels(dir / "l.jsonl"), DataError);
}

TEST(Labels, WriteThenLoad) {
  const auto dir = testing::scratch_dir();
  const LabelTable t = balanced_table(4, 3);
  write_labels(t, dir / "l.jsonl");
  const LabelTable back = load_labels(dir / "l.jsonl");
  EXPECT_EQ(back.class_names(), t.class_names());
  EXPECT_EQ(back.entries(), t.entries());
}

TEST(FewLabels, TotalCountHundredOverThreeBalancedClasses) {
  const LabelTable t = balanced_table(100, 3);
  const auto sample = subsample_few_labels(t, FewLabelMode::total_count, 100, 42);
  ASSERT_EQ(sample.ids.size(), 100u);
  std::map<int, int> per_class;
  for (const auto& id : sample.ids) ++per_class[*t.label_of(id)];
  for (auto& [label, n] : per_class) {
    EXPECT_GE(n, 33);
    EXPECT_LE(n, 34);
  }
  EXPECT_EQ(std::set<std::string>(sample.ids.begin(), sample.ids.end()).size(), 100u);
}

TEST(FewLabels, PerClassShots) {
  const LabelTable t = balanced_table(10, 4);
  EXPECT_EQ(subsample_few_labels(t, FewLabelMode::per_class_shots, 8, 1).ids.size(), 32u);
}

TEST(FewLabels, ShotsClampToClassSize) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (int i = 0; i < 5; ++i) rows.emplace_back("s" + std::to_string(i), "small");
  for (int i = 0; i < 30; ++i) rows.emplace_back("b" + std::to_string(i), "big");
  const LabelTable t = LabelTable::from_named(rows);
  const auto sample = subsample_few_labels(t, FewLabelMode::per_class_shots, 16, 3);
  std::map<std::string, int> per_class;
  for (const auto& id : sample.ids) ++per_class[t.class_names()[*t.label_of(id)]];
  EXPECT_EQ(per_class["small"], 5);
  EXPECT_EQ(per_class["big"], 16);
}

TEST(FewLabels, CountBeyondAvailableIsArgumentError) {
  const LabelTable t = balanced_table(3, 2);
  EXPECT_THROW(subsample_few_labels(t, FewLabelMode::total_count, 7, 0), ArgumentError);
  EXPECT_THROW(subsample_few_labels(t, FewLabelMode::total_count, 0, 0), ArgumentError);
}

TEST(FewLabels, DeterministicGivenSeed) {
  const LabelTable t = balanced_table(50, 3);
  const auto a = subsample_few_labels(t, FewLabelMode::total_count, 20, 9);
  const auto b = subsample_few_labels(t, FewLabelMode::total_count, 20, 9);
  const auto c = subsample_few_labels(t, FewLabelMode::total_count, 20, 10);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_NE(a.ids, c.ids);
}

TEST(FewLabels, FloorCanForceDeviationAboveOne) {
  // Shares 0.4, 0.4, 2.2: both small classes need one, leaving one for the big class.
  const std::vector<std::size_t> sizes = {2, 2, 11};
  EXPECT_EQ(proportional_quotas(sizes, 3), (std::vector<std::size_t>{1, 1, 1}));
}

TEST(FewLabels, StratificationPropertyOnRandomTables) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng() % 6;
    std::vector<std::pair<std::string, std::string>> rows;
    std::vector<std::size_t> sizes(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      sizes[c] = 1 + rng() % 60;
      for (std::size_t i = 0; i < sizes[c]; ++i) {
        rows.emplace_back("c" + std::to_string(c) + "_" + std::to_string(i), "k" + std::to_string(c));
      }
    }
    const LabelTable t = LabelTable::from_named(rows);
    const std::size_t total = rows.size();
    const std::size_t count = classes + rng() % (total - classes + 1);
    const auto sample = subsample_few_labels(t, FewLabelMode::total_count, count, trial);
    ASSERT_EQ(sample.ids.size(), count);
    std::vector<std::size_t> got(classes, 0);
    for (const auto& id : sample.ids) ++got[static_cast<std::size_t>(*t.label_of(id))];
    const auto table_sizes = t.class_sizes();
    // The at-least-one floor only binds when some class's share is below 1;
    // then a donor may have to drop under its floor.
    bool floor_binds = false;
    for (std::size_t c = 0; c < classes; ++c) {
      floor_binds |= static_cast<double>(count) * table_sizes[c] < static_cast<double>(total);
    }
    const double bound = floor_binds ? 2.0 - 1e-9 : 1.0 + 1e-9;
    for (std::size_t c = 0; c < classes; ++c) {
      const double share = static_cast<double>(count) * table_sizes[c] / static_cast<double>(total);
      EXPECT_LE(std::abs(static_cast<double>(got[c]) - share), bound)
          << "trial " << trial << " class " << c;
      EXPECT_GE(got[c], 1u) << "trial " << trial;
    }
  }
}

}  // namespace
}  // namespace flick
