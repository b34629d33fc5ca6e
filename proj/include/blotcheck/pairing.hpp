#ifndef BLOTCHECK_PAIRING_HPP
#define BLOTCHECK_PAIRING_HPP

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "blotcheck/segment.hpp"

namespace blotcheck {

/// Two panels of the same figure with a copy / not-copy label. a.panel_index < b.panel_index.
struct PairSample {
  NormalizedPanel a;
  NormalizedPanel b;
  int label = 0;

  const FigureKey& figure_key() const { return a.source.figure; }
};

enum class Split { Train, Val, Test };

std::string to_string(Split split);

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;

  std::array<double, 3> as_array() const { return {train, val, test}; }
};

struct DatasetSplit {
  std::vector<PairSample> train;
  std::vector<PairSample> val;
  std::vector<PairSample> test;
  std::uint64_t seed = 0;
  SplitFractions fractions;

  std::vector<PairSample>& operator[](Split s) { return s == Split::Train ? train : (s == Split::Val ? val : test); }
  const std::vector<PairSample>& operator[](Split s) const {
    return s == Split::Train ? train : (s == Split::Val ? val : test);
  }
};

/// All (k, k') with k < k' over n panels, lexicographic.
std::vector<std::pair<int, int>> enumerate_pairs(std::size_t n);
/// Throws InvalidArgument when the panels come from more than one figure.
std::vector<std::pair<int, int>> enumerate_pairs(std::span<const NormalizedPanel> panels);

using DuplicateSet = std::set<std::pair<int, int>>;

/// Label 1 iff {k, k'} is in `duplicates` (either orientation). Throws UnknownPanelIndex.
std::vector<PairSample> label_pairs(std::span<const std::pair<int, int>> pairs,
                                    std::span<const NormalizedPanel> panels, const DuplicateSet& duplicates);

/// Keeps every positive and a seeded uniform subset of at most floor(ratio * positives)
/// negatives, preserving input order. ratio == 0 or no positives returns the input unchanged.
std::vector<PairSample> balance_pairs(std::span<const PairSample> samples, double max_neg_per_pos, std::uint64_t seed);

/// Shuffles figures with `seed` and cuts at round(cumulative fraction * count). Every split with a
/// positive fraction receives at least one figure. Throws TooFewFigures.
std::map<FigureKey, Split> assign_figure_splits(std::span<const FigureKey> figures, const SplitFractions& fractions,
                                                std::uint64_t seed);

/// Figure-disjoint split of `samples`; figures are taken in first-appearance order.
DatasetSplit split_by_figure(std::span<const PairSample> samples, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace blotcheck

#endif  // BLOTCHECK_PAIRING_HPP
