#ifndef BLOTCHECK_CORPUS_HPP
#define BLOTCHECK_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blotcheck/image.hpp"

namespace blotcheck {

enum class FigureLabel { Clean, Duplicated };

struct FigureKey {
  std::string doi;
  std::string figure_id;

  friend auto operator<=>(const FigureKey&, const FigureKey&) = default;
};

/// One manifest row: a pre-extracted figure of an article.
struct FigureRecord {
  std::string doi;
  std::string figure_id;
  std::string source;  ///< local path (relative to the manifest) or http(s) URL
  FigureLabel label = FigureLabel::Clean;
  std::optional<Rgb> annotation_color;

  FigureKey key() const { return {doi, figure_id}; }
};

/// Manifest CSV: header `doi,figure_id,source,label,annotation_color`.
/// Relative local sources are resolved against the manifest's directory.
std::vector<FigureRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<FigureRecord>& records, const std::filesystem::path& path);

bool is_url(const std::string& source);

/// Decodes the record's image. URL sources are cached under `cache_dir`, keyed by SHA-256 of the
/// source string; a cached file is never fetched again.
ImageBuffer fetch_figure(const FigureRecord& record, const std::filesystem::path& cache_dir);

std::string sha256_hex(const std::string& text);

/// Planted layout of one synthetic figure.
struct FigureTruth {
  std::string doi;
  std::string figure_id;
  std::vector<Rect> blocks;
  std::vector<std::pair<int, int>> duplicate_pairs;  ///< indices into `blocks`
};

/// Ground-truth sidecar (JSON array), keyed by figure.
using GroundTruth = std::map<FigureKey, FigureTruth>;

GroundTruth load_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::vector<FigureTruth>& truth, const std::filesystem::path& path);

struct SyntheticSpec {
  int n_figures = 10;
  double duplication_rate = 0.3;
  int min_blocks = 2;
  int max_blocks = 5;
  int min_block_size = 28;
  int max_block_size = 96;
  double noise_level = 8.0;
  /// Std of Gaussian noise added to a planted copy; 0 plants an exact copy.
  double duplicate_noise = 0.0;
  int width = 384;
  int height = 288;
  /// Draw a colored ring around both halves of every planted duplicate.
  bool annotate_duplicates = false;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument when a field is out of range.
void validate(const SyntheticSpec& spec);

inline constexpr const char* kManifestName = "manifest.csv";
inline constexpr const char* kGroundTruthName = "ground_truth.json";

/// Writes `spec.n_figures` PNG figures plus `manifest.csv` and `ground_truth.json` to `out_dir`.
/// Output bytes are a pure function of `spec`.
std::vector<FigureRecord> generate_synthetic_corpus(const SyntheticSpec& spec,
                                                    const std::filesystem::path& out_dir);

SyntheticSpec synthetic_spec_from_json(const std::string& json_text);

}  // namespace blotcheck

#endif  // BLOTCHECK_CORPUS_HPP
