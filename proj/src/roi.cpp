#include "blotcheck/roi.hpp"

#include <algorithm>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "blotcheck/error.hpp"

namespace blotcheck {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

ImageBuffer to_grayscale(const ImageBuffer& img) {
  if (img.channels() == 1) {
    return img;
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.width()) * img.height());
  const auto src = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Integer form of round(0.299 R + 0.587 G + 0.114 B).
    const int luma = 299 * src[3 * i] + 587 * src[3 * i + 1] + 114 * src[3 * i + 2];
    out[i] = static_cast<std::uint8_t>((luma + 500) / 1000);
  }
  return ImageBuffer(img.width(), img.height(), 1, std::move(out));
}

std::array<long, 256> histogram(const ImageBuffer& gray) {
  std::array<long, 256> hist{};
  for (auto v : gray.data()) {
    ++hist[v];
  }
  return hist;
}

std::uint8_t otsu_threshold(const std::array<long, 256>& hist) {
  using boost::multiprecision::int256_t;
  const long n = std::accumulate(hist.begin(), hist.end(), 0L);
  const auto nonzero = std::count_if(hist.begin(), hist.end(), [](long c) { return c > 0; });
  if (n == 0 || nonzero < 2) {
    throw Error(ErrorCode::ConstantImage, "histogram has a single populated bin");
  }
  long total_sum = 0;
  for (int v = 0; v < 256; ++v) {
    total_sum += v * hist[v];
  }
  // Between-class variance at t is (n*S0 - n0*S)^2 / (n^2 * n0 * n1); compared exactly as
  // cross-multiplied integers so ties are decided without rounding.
  int best_t = 0;
  int256_t best_num = 0;
  int256_t best_den = 1;
  long n0 = 0;
  long s0 = 0;
  for (int t = 1; t < 256; ++t) {
    n0 += hist[t - 1];
    s0 += static_cast<long>(t - 1) * hist[t - 1];
    const long n1 = n - n0;
    if (n0 == 0 || n1 == 0) {
      continue;
    }
    const int256_t d = int256_t(n) * s0 - int256_t(n0) * total_sum;
    const int256_t num = d * d;
    const int256_t den = int256_t(n0) * n1;
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return static_cast<std::uint8_t>(best_t);
}

Binarization binarize_otsu(const ImageBuffer& gray, bool invert) {
  if (gray.channels() != 1) {
    throw Error(ErrorCode::InvalidArgument, "binarize_otsu expects a 1-channel image");
  }
  const auto t = otsu_threshold(histogram(gray));
  BinaryMask mask(gray.width(), gray.height());
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      const bool dark = gray.at(x, y) < t;
      mask.set(x, y, invert ? dark : !dark);
    }
  }
  return {std::move(mask), t};
}

namespace {

template <bool Dilate>
BinaryMask morph3x3(const BinaryMask& in) {
  BinaryMask out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      bool v = !Dilate;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= in.width() || ny >= in.height()) {
            continue;
          }
          if constexpr (Dilate) {
            v = v || in(nx, ny);
          } else {
            v = v && in(nx, ny);
          }
        }
      }
      out.set(x, y, v);
    }
  }
  return out;
}

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

BinaryMask close3x3(const BinaryMask& mask) { return morph3x3<false>(morph3x3<true>(mask)); }

LabelImage label_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  LabelImage out;
  out.width = w;
  out.height = h;
  out.labels.assign(static_cast<std::size_t>(w) * h, 0);

  std::vector<int> parent{0};
  auto unite = [&](int a, int b) {
    a = find_root(parent, a);
    b = find_root(parent, b);
    if (a != b) {
      parent[std::max(a, b)] = std::min(a, b);
    }
  };

  // Already-visited neighbours in raster order.
  std::vector<std::pair<int, int>> offsets{{-1, 0}, {0, -1}};
  if (connectivity == Connectivity::Eight) {
    offsets.emplace_back(-1, -1);
    offsets.emplace_back(1, -1);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) {
        continue;
      }
      int label = 0;
      for (const auto& [dx, dy] : offsets) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w) {
          continue;
        }
        const int nl = out.labels[static_cast<std::size_t>(ny) * w + nx];
        if (nl == 0) {
          continue;
        }
        if (label == 0) {
          label = nl;
        } else {
          unite(label, nl);
        }
      }
      if (label == 0) {
        label = static_cast<int>(parent.size());
        parent.push_back(label);
      }
      out.labels[static_cast<std::size_t>(y) * w + x] = label;
    }
  }

  std::vector<int> final_id(parent.size(), 0);
  struct Extent {
    long count = 0;
    int x0, y0, x1, y1;
  };
  std::vector<Extent> extents;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto& l = out.labels[static_cast<std::size_t>(y) * w + x];
      if (l == 0) {
        continue;
      }
      const int root = find_root(parent, l);
      if (final_id[root] == 0) {
        extents.push_back({0, x, y, x, y});
        final_id[root] = static_cast<int>(extents.size());
      }
      l = final_id[root];
      auto& e = extents[l - 1];
      ++e.count;
      e.x0 = std::min(e.x0, x);
      e.x1 = std::max(e.x1, x);
      e.y0 = std::min(e.y0, y);
      e.y1 = std::max(e.y1, y);
    }
  }
  for (std::size_t i = 0; i < extents.size(); ++i) {
    const auto& e = extents[i];
    Component c;
    c.id = static_cast<int>(i + 1);
    c.pixel_count = e.count;
    c.bbox = {e.x0, e.y0, e.x1 - e.x0 + 1, e.y1 - e.y0 + 1};
    c.fill_ratio = static_cast<double>(e.count) / static_cast<double>(c.bbox.area());
    out.components.push_back(c);
  }
  return out;
}

std::vector<Component> connected_components(const BinaryMask& mask, Connectivity connectivity) {
  return label_components(mask, connectivity).components;
}

std::vector<Component> filter_blocks(std::span<const Component> components, long min_area, double min_fill,
                                     int min_side) {
  std::vector<Component> kept;
  std::copy_if(components.begin(), components.end(), std::back_inserter(kept), [&](const Component& c) {
    return c.pixel_count >= min_area && c.fill_ratio >= min_fill && std::min(c.bbox.w, c.bbox.h) >= min_side;
  });
  return kept;
}

RoiFigure apply_mask(const ImageBuffer& img, std::span<const Component> kept) {
  ImageBuffer out(img.width(), img.height(), img.channels(), 0);
  const int ch = img.channels();
  for (const auto& c : kept) {
    const Rect r = c.bbox;
    if (!img.bounds().contains(r)) {
      throw Error(ErrorCode::OutOfBounds, "component bbox outside image");
    }
    for (int y = r.y; y < r.bottom(); ++y) {
      for (int x = r.x; x < r.right(); ++x) {
        for (int k = 0; k < ch; ++k) {
          out.at(x, y, k) = img.at(x, y, k);
        }
      }
    }
  }
  return {std::move(out), {kept.begin(), kept.end()}};
}

RoiFigure generate_roi(const ImageBuffer& img, const RoiParams& params) {
  const auto gray = to_grayscale(img);
  Binarization bin;
  try {
    bin = binarize_otsu(gray, /*invert=*/true);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConstantImage) {
      throw;
    }
    return apply_mask(img, {});
  }
  const auto mask = params.close_mask ? close3x3(bin.mask) : bin.mask;
  const auto components = connected_components(mask, params.connectivity);
  const auto kept = filter_blocks(components, params.min_area, params.min_fill, params.min_side);
  return apply_mask(img, kept);
}

}  // namespace blotcheck
