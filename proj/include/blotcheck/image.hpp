#ifndef BLOTCHECK_IMAGE_HPP
#define BLOTCHECK_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace blotcheck {

/// Axis-aligned pixel rectangle, half-open: columns [x, x+w), rows [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  long area() const { return static_cast<long>(w) * h; }
  bool contains(int px, int py) const { return px >= x && px < right() && py >= y && py < bottom(); }
  bool contains(const Rect& r) const {
    return r.x >= x && r.y >= y && r.right() <= right() && r.bottom() <= bottom();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

double iou(const Rect& a, const Rect& b);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Decoded raster image: 1 (gray) or 3 (RGB) interleaved u8 channels, row-major.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0);
  ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  Rgb rgb(int x, int y) const;
  void set_rgb(int x, int y, Rgb color);

  Rect bounds() const { return {0, 0, width_, height_}; }

  /// Pixel-exact copy of `r`; throws OutOfBounds when `r` leaves the image.
  ImageBuffer crop(const Rect& r) const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Decodes PNG or JPEG by signature. Throws DecodeFailed / EmptyImage.
ImageBuffer decode_image(std::span<const std::uint8_t> bytes);
ImageBuffer read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
void write_png(const ImageBuffer& img, const std::filesystem::path& path);

/// Baseline JPEG, used by tests and the synthetic corpus when asked for lossy output.
std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality = 90);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes to a temporary sibling, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace blotcheck

#endif  // BLOTCHECK_IMAGE_HPP
