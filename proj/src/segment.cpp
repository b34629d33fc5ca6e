#include "blotcheck/segment.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "blotcheck/error.hpp"

namespace blotcheck {

std::vector<Rect> find_panel_boxes(const RoiFigure& roi) {
  std::vector<Rect> boxes;
  for (const auto& c : roi.kept) {
    boxes.push_back(c.bbox);
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const Rect& a, const Rect& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
  return boxes;
}

std::vector<Panel> extract_panels(const RoiFigure& roi, std::span<const Rect> boxes, const FigureKey& figure) {
  std::vector<Panel> panels;
  panels.reserve(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    panels.push_back({{figure, static_cast<int>(k)}, boxes[k], roi.image.crop(boxes[k])});
  }
  return panels;
}

std::vector<double> resize_bilinear(const ImageBuffer& gray, int out_w, int out_h) {
  const int in_w = gray.width();
  const int in_h = gray.height();
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  const double sx = static_cast<double>(in_w) / out_w;
  const double sy = static_cast<double>(in_h) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      const double top = (1 - wx) * gray.at(x0, y0) + wx * gray.at(x1, y0);
      const double bottom = (1 - wx) * gray.at(x0, y1) + wx * gray.at(x1, y1);
      out[static_cast<std::size_t>(y) * out_w + x] = (1 - wy) * top + wy * bottom;
    }
  }
  return out;
}

NormalizedPanel normalize_panel(const Panel& panel, int size) {
  if (size < 8) {
    throw Error(ErrorCode::InvalidArgument, "network input size must be >= 8");
  }
  const auto gray = to_grayscale(panel.pixels);
  const auto resized = resize_bilinear(gray, size, size);
  Tensor<float> t({1, size, size});
  for (std::size_t i = 0; i < resized.size(); ++i) {
    t[static_cast<Index>(i)] = std::clamp(static_cast<float>(resized[i] / 255.0), 0.0f, 1.0f);
  }
  return {panel.source, std::make_shared<const Tensor<float>>(std::move(t))};
}

}  // namespace blotcheck
