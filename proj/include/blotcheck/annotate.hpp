#ifndef BLOTCHECK_ANNOTATE_HPP
#define BLOTCHECK_ANNOTATE_HPP

#include <optional>
#include <span>
#include <vector>

#include "blotcheck/image.hpp"

namespace blotcheck {

/// A reviewer-drawn colored rectangular ring around a duplicated region.
struct AnnotationBox {
  Rect rect;  ///< outer edge of the ring
  Rgb ring_color;
  int ring_thickness = 1;

  Rect interior() const {
    return {rect.x + ring_thickness, rect.y + ring_thickness, rect.w - 2 * ring_thickness,
            rect.h - 2 * ring_thickness};
  }
};

struct AnnotationParams {
  double min_saturation = 0.5;
  double min_value = 0.3;
  double min_border_occupancy = 0.8;
  double max_interior_occupancy = 0.1;
};

/// Finds saturated-color rectangular rings. Grayscale content never qualifies, so an empty
/// result marks an unannotated (clean) figure. Nested rings collapse to the outermost.
/// Throws NotColorImage for 1-channel input.
std::vector<AnnotationBox> detect_annotation_boxes(const ImageBuffer& img, const AnnotationParams& params = {});
std::vector<AnnotationBox> detect_annotation_boxes(const ImageBuffer& img, double min_saturation);

/// Interior of the ring, pixel-exact. Throws DegenerateInterior.
ImageBuffer strip_annotation_box(const ImageBuffer& img, const AnnotationBox& box);

struct LabeledRegions {
  std::vector<ImageBuffer> duplicated;
  bool is_duplicated_figure = false;
};

LabeledRegions label_regions(const ImageBuffer& img, std::span<const AnnotationBox> boxes);

/// Paints each ring band with `fill`, leaving interiors untouched.
ImageBuffer erase_annotation_rings(const ImageBuffer& img, std::span<const AnnotationBox> boxes,
                                   Rgb fill = {255, 255, 255});

/// Keeps boxes whose ring color is within `tolerance` (per channel) of `color`.
std::vector<AnnotationBox> boxes_with_color(std::span<const AnnotationBox> boxes, Rgb color, int tolerance = 40);

/// Draws a ring of `thickness` inside `outer`. Used by test fixtures and the synthetic corpus.
void draw_annotation_ring(ImageBuffer& img, const Rect& outer, int thickness, Rgb color);

}  // namespace blotcheck

#endif  // BLOTCHECK_ANNOTATE_HPP
