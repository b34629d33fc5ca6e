#include <gtest/gtest.h>

#include "blotcheck/dataset.hpp"
#include "blotcheck/error.hpp"
#include "test_util.hpp"

using namespace blotcheck;

namespace {

PreparedDataset small_dataset() {
  std::mt19937_64 rng(1);
  PreparedDataset ds;
  ds.input_size = 8;
  ds.pairs.seed = 17;
  ds.pairs.fractions = {0.5, 0.25, 0.25};
  for (int f = 0; f < 3; ++f) {
    FigureEntry e;
    e.key = {"10.1/" + std::to_string(f), "1"};
    e.label = f == 0 ? FigureLabel::Duplicated : FigureLabel::Clean;
    e.split = f == 0 ? Split::Train : (f == 1 ? Split::Val : Split::Test);
    for (int k = 0; k < 3 - f % 2; ++k) {
      e.panel_boxes.push_back({k * 10, 0, 9, 9});
      e.panels.push_back({{e.key, k}, std::make_shared<const Tensor<float>>(testutil::random_panel_f(8, rng))});
    }
    const DuplicateSet dups = f == 0 ? DuplicateSet{{0, 2}} : DuplicateSet{};
    const auto pairs = label_pairs(enumerate_pairs(e.panels.size()), e.panels, dups);
    ds.pairs[e.split].insert(ds.pairs[e.split].end(), pairs.begin(), pairs.end());
    ds.figures.push_back(std::move(e));
  }
  return ds;
}

ErrorCode load_error(std::span<const std::uint8_t> bytes) {
  try {
    deserialize_dataset(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "dataset accepted";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Dataset, RoundTripPreservesEverything) {
  const auto ds = small_dataset();
  const auto bytes = serialize_dataset(ds);
  const auto back = deserialize_dataset(bytes);
  EXPECT_EQ(back.input_size, 8);
  EXPECT_EQ(back.pairs.seed, 17u);
  EXPECT_DOUBLE_EQ(back.pairs.fractions.train, 0.5);
  ASSERT_EQ(back.figures.size(), 3u);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_EQ(back.figures[f].key, ds.figures[f].key);
    EXPECT_EQ(back.figures[f].label, ds.figures[f].label);
    EXPECT_EQ(back.figures[f].split, ds.figures[f].split);
    EXPECT_EQ(back.figures[f].panel_boxes, ds.figures[f].panel_boxes);
    for (std::size_t k = 0; k < ds.figures[f].panels.size(); ++k) {
      EXPECT_TRUE(back.figures[f].panels[k].tensor() == ds.figures[f].panels[k].tensor());
    }
  }
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    ASSERT_EQ(back.pairs[s].size(), ds.pairs[s].size());
    for (std::size_t i = 0; i < ds.pairs[s].size(); ++i) {
      EXPECT_EQ(back.pairs[s][i].label, ds.pairs[s][i].label);
      EXPECT_EQ(back.pairs[s][i].figure_key(), ds.pairs[s][i].figure_key());
      EXPECT_TRUE(back.pairs[s][i].b.tensor() == ds.pairs[s][i].b.tensor());
    }
  }
  EXPECT_EQ(serialize_dataset(back), bytes);
}

TEST(Dataset, FiguresInSplit) {
  const auto ds = small_dataset();
  const auto val = ds.figures_in(Split::Val);
  ASSERT_EQ(val.size(), 1u);
  EXPECT_EQ(val[0]->key.doi, "10.1/1");
}

TEST(Dataset, CorruptionAndTruncation) {
  const auto bytes = serialize_dataset(small_dataset());
  auto bad = bytes;
  bad[bad.size() / 2] ^= 1;
  EXPECT_EQ(load_error(bad), ErrorCode::ChecksumMismatch);
  auto cut = bytes;
  cut.resize(cut.size() - 9);
  EXPECT_EQ(load_error(cut), ErrorCode::ChecksumMismatch);
  EXPECT_EQ(load_error(std::vector<std::uint8_t>{1, 2}), ErrorCode::ChecksumMismatch);
}

TEST(Dataset, FileRoundTrip) {
  testutil::TempDir dir("dataset");
  const auto ds = small_dataset();
  write_dataset(ds, dir / "d.bin");
  EXPECT_EQ(read_file_bytes(dir / "d.bin"), serialize_dataset(ds));
  EXPECT_EQ(read_dataset(dir / "d.bin").figures.size(), 3u);
}
