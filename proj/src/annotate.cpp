#include "blotcheck/annotate.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "blotcheck/error.hpp"
#include "blotcheck/roi.hpp"

namespace blotcheck {

namespace {

bool is_marker_pixel(Rgb p, const AnnotationParams& params) {
  const int mx = std::max({p.r, p.g, p.b});
  const int mn = std::min({p.r, p.g, p.b});
  if (mx == 0) {
    return false;
  }
  const double saturation = static_cast<double>(mx - mn) / mx;
  const double value = mx / 255.0;
  return saturation >= params.min_saturation && value >= params.min_value;
}

/// Most frequent vertical run length of component pixels hanging from the top edge.
int modal_top_run(const LabelImage& labels, const Component& c) {
  std::map<int, int> freq;
  const Rect r = c.bbox;
  for (int x = r.x; x < r.right(); ++x) {
    int run = 0;
    while (run < r.h && labels.at(x, r.y + run) == c.id) {
      ++run;
    }
    if (run > 0) {
      ++freq[run];
    }
  }
  int best = 1;
  int best_count = 0;
  for (const auto& [run, count] : freq) {
    if (count > best_count) {
      best = run;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

std::vector<AnnotationBox> detect_annotation_boxes(const ImageBuffer& img, const AnnotationParams& params) {
  if (img.channels() != 3) {
    throw Error(ErrorCode::NotColorImage, "annotation detection needs an RGB image");
  }
  BinaryMask marker(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      marker.set(x, y, is_marker_pixel(img.rgb(x, y), params));
    }
  }
  const auto labels = label_components(marker, Connectivity::Eight);

  std::vector<AnnotationBox> rings;
  for (const auto& c : labels.components) {
    const Rect r = c.bbox;
    if (r.w < 4 || r.h < 4) {
      continue;
    }
    long border_total = 0;
    long border_hit = 0;
    for (int x = r.x; x < r.right(); ++x) {
      for (int y : {r.y, r.bottom() - 1}) {
        ++border_total;
        border_hit += labels.at(x, y) == c.id;
      }
    }
    for (int y = r.y + 1; y < r.bottom() - 1; ++y) {
      for (int x : {r.x, r.right() - 1}) {
        ++border_total;
        border_hit += labels.at(x, y) == c.id;
      }
    }
    if (static_cast<double>(border_hit) < params.min_border_occupancy * static_cast<double>(border_total)) {
      continue;
    }
    AnnotationBox box{r, {}, modal_top_run(labels, c)};
    const Rect inner = box.interior();
    if (inner.w < 1 || inner.h < 1) {
      continue;  // filled blob, not a ring
    }
    long inner_hit = 0;
    for (int y = inner.y; y < inner.bottom(); ++y) {
      for (int x = inner.x; x < inner.right(); ++x) {
        inner_hit += marker(x, y);
      }
    }
    if (static_cast<double>(inner_hit) > params.max_interior_occupancy * static_cast<double>(inner.area())) {
      continue;
    }
    long sums[3] = {0, 0, 0};
    for (int y = r.y; y < r.bottom(); ++y) {
      for (int x = r.x; x < r.right(); ++x) {
        if (labels.at(x, y) == c.id) {
          const Rgb p = img.rgb(x, y);
          sums[0] += p.r;
          sums[1] += p.g;
          sums[2] += p.b;
        }
      }
    }
    const auto mean = [&](long s) { return static_cast<std::uint8_t>((s + c.pixel_count / 2) / c.pixel_count); };
    box.ring_color = {mean(sums[0]), mean(sums[1]), mean(sums[2])};
    rings.push_back(box);
  }

  std::vector<AnnotationBox> outermost;
  for (std::size_t i = 0; i < rings.size(); ++i) {
    const bool nested = std::any_of(rings.begin(), rings.end(), [&](const AnnotationBox& other) {
      return &other != &rings[i] && other.rect.contains(rings[i].rect) && !(other.rect == rings[i].rect);
    });
    if (!nested) {
      outermost.push_back(rings[i]);
    }
  }
  return outermost;
}

std::vector<AnnotationBox> detect_annotation_boxes(const ImageBuffer& img, double min_saturation) {
  AnnotationParams params;
  params.min_saturation = min_saturation;
  return detect_annotation_boxes(img, params);
}

ImageBuffer strip_annotation_box(const ImageBuffer& img, const AnnotationBox& box) {
  const Rect inner = box.interior();
  if (inner.w < 1 || inner.h < 1) {
    throw Error(ErrorCode::DegenerateInterior, "ring leaves no interior");
  }
  return img.crop(inner);
}

LabeledRegions label_regions(const ImageBuffer& img, std::span<const AnnotationBox> boxes) {
  LabeledRegions out;
  out.is_duplicated_figure = !boxes.empty();
  for (const auto& b : boxes) {
    out.duplicated.push_back(strip_annotation_box(img, b));
  }
  return out;
}

ImageBuffer erase_annotation_rings(const ImageBuffer& img, std::span<const AnnotationBox> boxes, Rgb fill) {
  ImageBuffer out = img;
  for (const auto& b : boxes) {
    draw_annotation_ring(out, b.rect, b.ring_thickness, fill);
  }
  return out;
}

std::vector<AnnotationBox> boxes_with_color(std::span<const AnnotationBox> boxes, Rgb color, int tolerance) {
  std::vector<AnnotationBox> out;
  for (const auto& b : boxes) {
    if (std::abs(b.ring_color.r - color.r) <= tolerance && std::abs(b.ring_color.g - color.g) <= tolerance &&
        std::abs(b.ring_color.b - color.b) <= tolerance) {
      out.push_back(b);
    }
  }
  return out;
}

void draw_annotation_ring(ImageBuffer& img, const Rect& outer, int thickness, Rgb color) {
  for (int y = std::max(0, outer.y); y < std::min(img.height(), outer.bottom()); ++y) {
    for (int x = std::max(0, outer.x); x < std::min(img.width(), outer.right()); ++x) {
      const bool band = x < outer.x + thickness || x >= outer.right() - thickness || y < outer.y + thickness ||
                        y >= outer.bottom() - thickness;
      if (band) {
        img.set_rgb(x, y, color);
      }
    }
  }
}

}  // namespace blotcheck
