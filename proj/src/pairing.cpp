#include "blotcheck/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "blotcheck/error.hpp"

namespace blotcheck {

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<std::pair<int, int>> enumerate_pairs(std::size_t n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n * (n > 0 ? n - 1 : 0) / 2);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t k2 = k + 1; k2 < n; ++k2) {
      pairs.emplace_back(static_cast<int>(k), static_cast<int>(k2));
    }
  }
  return pairs;
}

std::vector<std::pair<int, int>> enumerate_pairs(std::span<const NormalizedPanel> panels) {
  for (const auto& p : panels) {
    if (p.source.figure != panels.front().source.figure) {
      throw Error(ErrorCode::InvalidArgument, "pairs are only formed within one figure");
    }
  }
  return enumerate_pairs(panels.size());
}

std::vector<PairSample> label_pairs(std::span<const std::pair<int, int>> pairs,
                                    std::span<const NormalizedPanel> panels, const DuplicateSet& duplicates) {
  const int n = static_cast<int>(panels.size());
  DuplicateSet canonical;
  for (auto [a, b] : duplicates) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw Error(ErrorCode::UnknownPanelIndex,
                  "duplicate pair (" + std::to_string(a) + "," + std::to_string(b) + ") over " + std::to_string(n) +
                      " panels");
    }
    canonical.emplace(std::min(a, b), std::max(a, b));
  }
  std::vector<PairSample> out;
  out.reserve(pairs.size());
  for (auto [k, k2] : pairs) {
    if (k < 0 || k2 < 0 || k >= n || k2 >= n) {
      throw Error(ErrorCode::UnknownPanelIndex, "pair index outside panel list");
    }
    const auto lo = std::min(k, k2);
    const auto hi = std::max(k, k2);
    out.push_back({panels[lo], panels[hi], canonical.count({lo, hi}) ? 1 : 0});
  }
  return out;
}

std::vector<PairSample> balance_pairs(std::span<const PairSample> samples, double max_neg_per_pos, std::uint64_t seed) {
  if (max_neg_per_pos == 0) {
    return {samples.begin(), samples.end()};
  }
  if (max_neg_per_pos < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_neg_per_pos must be 0 (off) or >= 1");
  }
  std::vector<std::size_t> negatives;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label == 1) {
      ++positives;
    } else {
      negatives.push_back(i);
    }
  }
  if (positives == 0) {
    return {samples.begin(), samples.end()};
  }
  const auto budget = static_cast<std::size_t>(std::floor(max_neg_per_pos * static_cast<double>(positives)));
  std::vector<bool> keep(samples.size(), true);
  if (negatives.size() > budget) {
    std::mt19937_64 rng(seed);
    std::shuffle(negatives.begin(), negatives.end(), rng);
    for (std::size_t i = budget; i < negatives.size(); ++i) {
      keep[negatives[i]] = false;
    }
  }
  std::vector<PairSample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (keep[i]) {
      out.push_back(samples[i]);
    }
  }
  return out;
}

std::map<FigureKey, Split> assign_figure_splits(std::span<const FigureKey> figures, const SplitFractions& fractions,
                                                std::uint64_t seed) {
  const auto f = fractions.as_array();
  if (std::any_of(f.begin(), f.end(), [](double v) { return v < 0; }) ||
      std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to 1");
  }
  const int n = static_cast<int>(figures.size());
  const int used = static_cast<int>(std::count_if(f.begin(), f.end(), [](double v) { return v > 0; }));
  if (n < used) {
    throw Error(ErrorCode::TooFewFigures,
                std::to_string(n) + " figures cannot fill " + std::to_string(used) + " non-empty splits");
  }

  // Cut points from cumulative fractions, nudged so every used split is non-empty.
  std::array<int, 3> end{};
  double cumulative = 0;
  int remaining_used = used;
  int prev = 0;
  for (int s = 0; s < 3; ++s) {
    cumulative += f[s];
    int cut = s == 2 ? n : static_cast<int>(std::lround(cumulative * n));
    if (f[s] > 0) {
      --remaining_used;
      cut = std::max(cut, prev + 1);
      cut = std::min(cut, n - remaining_used);
    } else {
      cut = prev;
    }
    end[s] = cut;
    prev = cut;
  }
  end[2] = n;

  std::vector<int> order(figures.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::map<FigureKey, Split> out;
  for (int pos = 0; pos < n; ++pos) {
    const Split s = pos < end[0] ? Split::Train : (pos < end[1] ? Split::Val : Split::Test);
    out.emplace(figures[order[pos]], s);
  }
  return out;
}

DatasetSplit split_by_figure(std::span<const PairSample> samples, const SplitFractions& fractions, std::uint64_t seed) {
  std::vector<FigureKey> figures;
  std::set<FigureKey> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.figure_key()).second) {
      figures.push_back(s.figure_key());
    }
  }
  const auto assignment = assign_figure_splits(figures, fractions, seed);
  DatasetSplit split;
  split.seed = seed;
  split.fractions = fractions;
  for (const auto& s : samples) {
    split[assignment.at(s.figure_key())].push_back(s);
  }
  return split;
}

}  // namespace blotcheck
