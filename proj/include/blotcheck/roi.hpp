#ifndef BLOTCHECK_ROI_HPP
#define BLOTCHECK_ROI_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "blotcheck/image.hpp"

namespace blotcheck {

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool operator()(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

enum class Connectivity { Four = 4, Eight = 8 };

struct Component {
  int id = 0;
  long pixel_count = 0;
  Rect bbox;
  double fill_ratio = 0.0;
};

/// Per-pixel labels (0 = background, otherwise Component::id) plus the component table.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<Component> components;

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Masked copy of a figure holding only the kept block regions.
struct RoiFigure {
  ImageBuffer image;
  std::vector<Component> kept;
};

struct RoiParams {
  long min_area = 400;
  double min_fill = 0.5;
  int min_side = 8;
  Connectivity connectivity = Connectivity::Eight;
  bool close_mask = true;
};

/// Luma round(0.299 R + 0.587 G + 0.114 B); gray input is returned unchanged.
ImageBuffer to_grayscale(const ImageBuffer& img);

std::array<long, 256> histogram(const ImageBuffer& gray);

/// Otsu threshold over the 256-bin histogram; ties resolve to the lowest threshold.
/// Class split is {v < t} vs {v >= t}. Throws ConstantImage.
std::uint8_t otsu_threshold(const std::array<long, 256>& hist);

struct Binarization {
  BinaryMask mask;
  std::uint8_t threshold = 0;
};

/// invert=true marks pixels darker than the threshold as foreground.
Binarization binarize_otsu(const ImageBuffer& gray, bool invert);

/// 3x3 dilation followed by 3x3 erosion; out-of-image pixels are ignored.
BinaryMask close3x3(const BinaryMask& mask);

/// Two-pass union-find labeling; ids are 1..n in row-major first-encounter order.
LabelImage label_components(const BinaryMask& mask, Connectivity connectivity);
std::vector<Component> connected_components(const BinaryMask& mask, Connectivity connectivity);

std::vector<Component> filter_blocks(std::span<const Component> components, long min_area, double min_fill,
                                     int min_side);

RoiFigure apply_mask(const ImageBuffer& img, std::span<const Component> kept);

/// grayscale -> inverted Otsu -> optional closing -> labeling -> block filter -> mask.
/// A constant image yields an empty ROI.
RoiFigure generate_roi(const ImageBuffer& img, const RoiParams& params = {});

}  // namespace blotcheck

#endif  // BLOTCHECK_ROI_HPP
