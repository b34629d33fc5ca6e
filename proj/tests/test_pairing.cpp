#include <gtest/gtest.h>

#include "blotcheck/error.hpp"
#include "blotcheck/pairing.hpp"

using namespace blotcheck;

namespace {

std::vector<NormalizedPanel> panels_of(const FigureKey& key, int n) {
  std::vector<NormalizedPanel> out;
  for (int k = 0; k < n; ++k) {
    out.push_back({{key, k}, std::make_shared<const Tensor<float>>(std::vector<Index>{1, 8, 8}, float(k))});
  }
  return out;
}

std::vector<PairSample> samples_for(int figures, int panels_each) {
  std::vector<PairSample> all;
  for (int f = 0; f < figures; ++f) {
    const auto panels = panels_of({"10.1/" + std::to_string(f), "1"}, panels_each);
    const DuplicateSet dups = f % 3 == 0 ? DuplicateSet{{0, 1}} : DuplicateSet{};
    const auto labeled = label_pairs(enumerate_pairs(panels.size()), panels, dups);
    all.insert(all.end(), labeled.begin(), labeled.end());
  }
  return all;
}

}  // namespace

TEST(Pairing, EnumerateCountsAndOrder) {
  for (std::size_t n = 0; n < 9; ++n) {
    EXPECT_EQ(enumerate_pairs(n).size(), n * (n > 0 ? n - 1 : 0) / 2);
  }
  const auto p = enumerate_pairs(3);
  EXPECT_EQ(p, (std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(Pairing, EnumerateRejectsMixedFigures) {
  auto panels = panels_of({"a", "1"}, 2);
  panels.push_back(panels_of({"b", "1"}, 1)[0]);
  EXPECT_THROW(enumerate_pairs(panels), Error);
}

TEST(Pairing, LabelsEitherOrientation) {
  const auto panels = panels_of({"a", "1"}, 4);
  const auto samples = label_pairs(enumerate_pairs(4), panels, {{3, 1}});
  int positives = 0;
  for (const auto& s : samples) {
    const bool dup = s.a.source.panel_index == 1 && s.b.source.panel_index == 3;
    EXPECT_EQ(s.label, dup ? 1 : 0);
    positives += s.label;
  }
  EXPECT_EQ(positives, 1);
}

TEST(Pairing, UnknownPanelIndex) {
  const auto panels = panels_of({"a", "1"}, 2);
  try {
    label_pairs(enumerate_pairs(2), panels, {{0, 5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownPanelIndex);
  }
}

TEST(Pairing, BalanceKeepsPositivesAndBoundsNegatives) {
  const auto all = samples_for(12, 4);  // 4 positives, 68 negatives
  const auto balanced = balance_pairs(all, 3, 9);
  long pos = 0;
  long neg = 0;
  for (const auto& s : balanced) (s.label ? pos : neg)++;
  EXPECT_EQ(pos, 4);
  EXPECT_EQ(neg, 12);
  EXPECT_EQ(balance_pairs(all, 0, 9).size(), all.size());
  EXPECT_EQ(balance_pairs(all, 3, 9).size(), balanced.size());
  const auto again = balance_pairs(all, 3, 9);
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].figure_key(), balanced[i].figure_key());
    EXPECT_EQ(again[i].a.source.panel_index, balanced[i].a.source.panel_index);
  }
  EXPECT_THROW(balance_pairs(all, 0.5, 9), Error);
}

TEST(Pairing, SplitsAreFigureDisjointAndCoverEverything) {
  const auto all = samples_for(20, 3);
  const auto split = split_by_figure(all, {0.7, 0.15, 0.15}, 4);
  EXPECT_EQ(split.train.size() + split.val.size() + split.test.size(), all.size());
  std::map<FigureKey, Split> owner;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (const auto& p : split[s]) {
      auto [it, inserted] = owner.emplace(p.figure_key(), s);
      EXPECT_EQ(it->second, s);
    }
  }
  EXPECT_EQ(owner.size(), 20u);
  // 20 figures: cuts at round(14) and round(17).
  long train_figs = std::count_if(owner.begin(), owner.end(), [](auto& kv) { return kv.second == Split::Train; });
  long val_figs = std::count_if(owner.begin(), owner.end(), [](auto& kv) { return kv.second == Split::Val; });
  EXPECT_EQ(train_figs, 14);
  EXPECT_EQ(val_figs, 3);
}

TEST(Pairing, SplitDependsOnlyOnSeed) {
  std::vector<FigureKey> keys;
  for (int i = 0; i < 30; ++i) keys.push_back({"d" + std::to_string(i), "1"});
  EXPECT_EQ(assign_figure_splits(keys, {}, 1), assign_figure_splits(keys, {}, 1));
  EXPECT_NE(assign_figure_splits(keys, {}, 1), assign_figure_splits(keys, {}, 2));
}

TEST(Pairing, SmallCorpusStillFillsEverySplit) {
  std::vector<FigureKey> keys{{"a", "1"}, {"b", "1"}, {"c", "1"}};
  const auto a = assign_figure_splits(keys, {}, 0);
  std::set<Split> used;
  for (const auto& [k, s] : a) used.insert(s);
  EXPECT_EQ(used.size(), 3u);
  try {
    assign_figure_splits(std::vector<FigureKey>{{"a", "1"}, {"b", "1"}}, {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewFigures);
  }
  EXPECT_THROW(assign_figure_splits(keys, {0.5, 0.2, 0.2}, 0), Error);
}
