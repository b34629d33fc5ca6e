#ifndef BLOTCHECK_SEGMENT_HPP
#define BLOTCHECK_SEGMENT_HPP

#include <memory>
#include <span>
#include <vector>

#include "blotcheck/corpus.hpp"
#include "blotcheck/roi.hpp"
#include "blotcheck/tensor.hpp"

namespace blotcheck {

struct PanelSource {
  FigureKey figure;
  int panel_index = 0;
};

/// Rectangular crop of an ROI figure.
struct Panel {
  PanelSource source;
  Rect bbox;
  ImageBuffer pixels;
};

/// Network-ready panel: (1, S, S) values in [0, 1]. The tensor is shared and immutable.
struct NormalizedPanel {
  PanelSource source;
  std::shared_ptr<const Tensor<float>> data;

  const Tensor<float>& tensor() const { return *data; }
};

/// Kept component boxes in reading order: by y, then x.
std::vector<Rect> find_panel_boxes(const RoiFigure& roi);

/// Throws OutOfBounds.
std::vector<Panel> extract_panels(const RoiFigure& roi, std::span<const Rect> boxes, const FigureKey& figure = {});

/// Bilinear resample with half-pixel centers (src = (dst + 0.5) * in/out - 0.5, clamped to the
/// edge). Returns doubles in the input's value range.
std::vector<double> resize_bilinear(const ImageBuffer& gray, int out_w, int out_h);

/// Grayscale, plain resize to size x size (aspect not kept), scaled by 1/255.
NormalizedPanel normalize_panel(const Panel& panel, int size);

}  // namespace blotcheck

#endif  // BLOTCHECK_SEGMENT_HPP
