#ifndef BLOTCHECK_CONFIG_HPP
#define BLOTCHECK_CONFIG_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "blotcheck/annotate.hpp"
#include "blotcheck/optim.hpp"
#include "blotcheck/pairing.hpp"
#include "blotcheck/roi.hpp"

namespace blotcheck {

struct PipelineConfig {
  RoiParams roi;
  AnnotationParams annotate;
  int input_size = 64;
  double max_neg_per_pos = 3.0;
  SplitFractions split;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  std::array<Index, kBranchDepth> channels{8, 16, 32, 64};
  Index kernel = 3;
  double threshold = 0.5;
  std::filesystem::path cache_dir = ".blotcheck-cache";
  std::optional<std::filesystem::path> ground_truth;
  int threads = 1;

  Architecture architecture() const {
    return {input_size, channels, kernel, train.merge_mode};
  }
};

/// Sets one dotted key (e.g. "roi.min_area"). Throws InvalidArgument for unknown keys or bad values.
void apply_config_key(PipelineConfig& config, const std::string& key, const std::string& value);

/// INI-style file: `key = value` lines, `#`/`;` comments, optional `[section]` headers that
/// prefix the keys below them. Unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text);

/// The flat key list a config file would contain, for echoing into logs and reports.
std::map<std::string, std::string> config_entries(const PipelineConfig& config);

}  // namespace blotcheck

#endif  // BLOTCHECK_CONFIG_HPP
