#ifndef BLOTCHECK_DATASET_HPP
#define BLOTCHECK_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "blotcheck/pairing.hpp"

namespace blotcheck {

/// Per-figure provenance of a prepared dataset, including figures that yielded no pairs.
struct FigureEntry {
  FigureKey key;
  FigureLabel label = FigureLabel::Clean;
  Split split = Split::Train;
  std::vector<Rect> panel_boxes;
  std::vector<NormalizedPanel> panels;
};

struct PreparedDataset {
  int input_size = 64;
  std::vector<FigureEntry> figures;
  DatasetSplit pairs;

  /// Figures assigned to `split`, in dataset order.
  std::vector<const FigureEntry*> figures_in(Split split) const;
};

inline constexpr std::uint16_t kDatasetVersion = 1;

/// "BLDS" | u16 version | u32 header length | JSON header (figures, boxes, pair index lists)
/// | f32 panel tensors in figure/panel order | CRC32.
std::vector<std::uint8_t> serialize_dataset(const PreparedDataset& dataset);
PreparedDataset deserialize_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const PreparedDataset& dataset, const std::filesystem::path& path);
PreparedDataset read_dataset(const std::filesystem::path& path);

}  // namespace blotcheck

#endif  // BLOTCHECK_DATASET_HPP
