#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "blotcheck/annotate.hpp"
#include "blotcheck/corpus.hpp"
#include "blotcheck/error.hpp"

namespace blotcheck {

namespace fs = std::filesystem;

namespace {

constexpr int kEdgeMargin = 8;
constexpr int kBlockGap = 16;
constexpr int kRingMargin = 3;
constexpr int kRingThickness = 2;
constexpr Rgb kRingColor{230, 30, 30};
constexpr std::uint8_t kPage = 242;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

Rect inflate(const Rect& r, int by) { return {r.x - by, r.y - by, r.w + 2 * by, r.h + 2 * by}; }

bool overlaps(const Rect& a, const Rect& b) {
  return a.x < b.right() && b.x < a.right() && a.y < b.bottom() && b.y < a.bottom();
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Gray western-blot-like texture: a mid-gray slab with dark horizontal bands across lanes.
std::vector<double> paint_blot(int w, int h, double noise_level, std::mt19937_64& rng) {
  std::vector<double> px(static_cast<std::size_t>(w) * h);
  const double base = uniform_real(rng, 80.0, 130.0);
  const int lanes = uniform_int(rng, 2, std::max(2, std::min(7, w / 10)));
  const double lane_w = static_cast<double>(w) / lanes;
  const int bands = uniform_int(rng, 1, std::max(1, std::min(4, h / 10)));

  struct Band {
    double center;
    double sigma;
    std::vector<double> depth;
  };
  std::vector<Band> band_list;
  for (int b = 0; b < bands; ++b) {
    Band band;
    band.center = uniform_real(rng, 0.15 * h, 0.85 * h);
    band.sigma = uniform_real(rng, 1.2, std::max(1.5, h / 10.0));
    for (int l = 0; l < lanes; ++l) {
      band.depth.push_back(uniform_real(rng, 0.0, 75.0));
    }
    band_list.push_back(std::move(band));
  }
  std::normal_distribution<double> noise(0.0, std::max(noise_level, 1e-9));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int lane = std::min(lanes - 1, static_cast<int>(x / lane_w));
      const double in_lane = (x - lane * lane_w) / lane_w;  // 0..1 across the lane
      const double taper = std::sin(M_PI * std::clamp(in_lane, 0.0, 1.0));
      double v = base;
      for (const auto& band : band_list) {
        const double dy = (y - band.center) / band.sigma;
        v -= band.depth[lane] * taper * std::exp(-0.5 * dy * dy);
      }
      if (noise_level > 0) {
        v += noise(rng);
      }
      px[static_cast<std::size_t>(y) * w + x] = v;
    }
  }
  return px;
}

void draw_gray(ImageBuffer& img, const Rect& r, const std::vector<double>& px) {
  for (int y = 0; y < r.h; ++y) {
    for (int x = 0; x < r.w; ++x) {
      const auto v = clamp_u8(px[static_cast<std::size_t>(y) * r.w + x]);
      img.set_rgb(r.x + x, r.y + y, {v, v, v});
    }
  }
}

std::optional<std::vector<Rect>> place_blocks(const std::vector<std::pair<int, int>>& sizes,
                                              const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::vector<Rect> placed;
  for (const auto& [w, h] : sizes) {
    const int max_x = spec.width - kEdgeMargin - w;
    const int max_y = spec.height - kEdgeMargin - h;
    if (max_x < kEdgeMargin || max_y < kEdgeMargin) {
      return std::nullopt;
    }
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      Rect r{uniform_int(rng, kEdgeMargin, max_x), uniform_int(rng, kEdgeMargin, max_y), w, h};
      ok = std::none_of(placed.begin(), placed.end(),
                        [&](const Rect& p) { return overlaps(inflate(p, kBlockGap), r); });
      if (ok) {
        placed.push_back(r);
      }
    }
    if (!ok) {
      return std::nullopt;
    }
  }
  return placed;
}

/// Small dark glyph clusters and hairlines standing in for labels, axes and tick marks.
void draw_clutter(ImageBuffer& img, const std::vector<Rect>& blocks, std::mt19937_64& rng) {
  std::vector<Rect> taken;
  for (const auto& b : blocks) {
    taken.push_back(inflate(b, kRingMargin + kRingThickness + 4));
  }
  const int words = uniform_int(rng, 3, 8);
  for (int wi = 0; wi < words; ++wi) {
    const int glyphs = uniform_int(rng, 2, 6);
    std::vector<Rect> glyph_rects;
    int cursor = 0;
    const int gh = uniform_int(rng, 4, 7);
    for (int g = 0; g < glyphs; ++g) {
      const int gw = uniform_int(rng, 3, 6);
      glyph_rects.push_back({cursor, 0, gw, gh});
      cursor += gw + uniform_int(rng, 3, 4);
    }
    const Rect word{0, 0, cursor, gh};
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int ox = uniform_int(rng, 2, img.width() - word.w - 2);
      const int oy = uniform_int(rng, 2, img.height() - word.h - 2);
      const Rect placed{ox, oy, word.w, word.h};
      if (std::any_of(taken.begin(), taken.end(), [&](const Rect& t) { return overlaps(t, inflate(placed, 3)); })) {
        continue;
      }
      taken.push_back(placed);
      for (const auto& g : glyph_rects) {
        for (int y = 0; y < g.h; ++y) {
          for (int x = 0; x < g.w; ++x) {
            const bool stroke = x == 0 || y == 0 || y == g.h - 1 || uniform_int(rng, 0, 2) == 0;
            if (stroke) {
              const auto v = static_cast<std::uint8_t>(uniform_int(rng, 20, 70));
              img.set_rgb(ox + g.x + x, oy + y, {v, v, v});
            }
          }
        }
      }
      break;
    }
  }
  const int lines = uniform_int(rng, 0, 2);
  for (int li = 0; li < lines; ++li) {
    const int len = uniform_int(rng, 40, std::max(41, img.width() / 3));
    const int thick = uniform_int(rng, 1, 2);
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int ox = uniform_int(rng, 2, img.width() - len - 2);
      const int oy = uniform_int(rng, 2, img.height() - thick - 2);
      const Rect placed{ox, oy, len, thick};
      if (std::any_of(taken.begin(), taken.end(), [&](const Rect& t) { return overlaps(t, inflate(placed, 3)); })) {
        continue;
      }
      taken.push_back(placed);
      for (int y = 0; y < thick; ++y) {
        for (int x = 0; x < len; ++x) {
          img.set_rgb(ox + x, oy + y, {40, 40, 40});
        }
      }
      break;
    }
  }
}

struct SyntheticFigure {
  ImageBuffer image;
  FigureTruth truth;
};

SyntheticFigure make_figure(const SyntheticSpec& spec, int index, bool duplicated) {
  std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1)));
  const int min_blocks = duplicated ? std::max(2, spec.min_blocks) : spec.min_blocks;
  const int n_blocks = uniform_int(rng, min_blocks, std::max(min_blocks, spec.max_blocks));

  double shrink = 1.0;
  std::vector<Rect> blocks;
  for (int tries = 0;; ++tries) {
    const int hi_w = std::max(spec.min_block_size, static_cast<int>(spec.max_block_size * shrink));
    const int hi_h = std::max(spec.min_block_size, static_cast<int>(spec.max_block_size * 0.75 * shrink));
    std::vector<std::pair<int, int>> sizes;
    for (int b = 0; b < n_blocks; ++b) {
      sizes.emplace_back(uniform_int(rng, spec.min_block_size, hi_w), uniform_int(rng, spec.min_block_size, hi_h));
    }
    if (duplicated) {
      sizes[1] = sizes[0];
    }
    if (auto placed = place_blocks(sizes, spec, rng)) {
      blocks = std::move(*placed);
      break;
    }
    if (tries > 50) {
      throw Error(ErrorCode::InvalidArgument, "canvas too small for the requested blocks");
    }
    shrink *= 0.9;
  }

  ImageBuffer img(spec.width, spec.height, 3, kPage);
  std::normal_distribution<double> page_noise(0.0, 1.5);
  for (auto& v : img.data()) {
    v = clamp_u8(kPage + page_noise(rng));
  }
  std::vector<std::vector<double>> content;
  for (const auto& r : blocks) {
    content.push_back(paint_blot(r.w, r.h, spec.noise_level, rng));
  }
  if (duplicated) {
    content[1] = content[0];
    if (spec.duplicate_noise > 0) {
      std::normal_distribution<double> dup_noise(0.0, spec.duplicate_noise);
      for (auto& v : content[1]) {
        // Quantize the source first so the copy perturbs the pixels a reader actually sees.
        v = static_cast<double>(clamp_u8(v)) + dup_noise(rng);
      }
    }
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    draw_gray(img, blocks[b], content[b]);
  }
  draw_clutter(img, blocks, rng);
  if (duplicated && spec.annotate_duplicates) {
    for (int b : {0, 1}) {
      draw_annotation_ring(img, inflate(blocks[b], kRingMargin + kRingThickness), kRingThickness, kRingColor);
    }
  }

  // Sidecar lists blocks in reading order, the same order panels are segmented in.
  std::vector<int> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::tie(blocks[a].y, blocks[a].x) < std::tie(blocks[b].y, blocks[b].x);
  });
  std::vector<int> rank(blocks.size());
  SyntheticFigure fig{std::move(img), {}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    rank[order[i]] = static_cast<int>(i);
    fig.truth.blocks.push_back(blocks[order[i]]);
  }
  if (duplicated) {
    fig.truth.duplicate_pairs.emplace_back(std::min(rank[0], rank[1]), std::max(rank[0], rank[1]));
  }
  return fig;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (spec.n_figures < 0) fail("n_figures must be non-negative");
  if (!(spec.duplication_rate >= 0.0 && spec.duplication_rate <= 1.0)) fail("duplication_rate must lie in [0,1]");
  if (spec.min_blocks < 1 || spec.max_blocks < spec.min_blocks) fail("blocks_per_figure range is empty");
  if (spec.min_block_size < 8 || spec.max_block_size < spec.min_block_size) fail("block_size range is empty");
  if (spec.noise_level < 0 || spec.duplicate_noise < 0) fail("noise levels must be non-negative");
  if (spec.width < 64 || spec.height < 64) fail("canvas must be at least 64x64");
}

std::vector<FigureRecord> generate_synthetic_corpus(const SyntheticSpec& spec, const fs::path& out_dir) {
  validate(spec);
  std::error_code ec;
  fs::create_directories(out_dir / "figures", ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "figures").string());
  }

  const int n_dup = static_cast<int>(std::lround(spec.duplication_rate * spec.n_figures));
  std::vector<int> order(spec.n_figures);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 assign(splitmix64(spec.seed));
  std::shuffle(order.begin(), order.end(), assign);
  std::vector<bool> duplicated(spec.n_figures, false);
  for (int i = 0; i < n_dup; ++i) {
    duplicated[order[i]] = true;
  }

  std::vector<FigureRecord> records;
  std::vector<FigureTruth> truth;
  for (int i = 0; i < spec.n_figures; ++i) {
    auto fig = make_figure(spec, i, duplicated[i]);
    char name[32];
    std::snprintf(name, sizeof(name), "fig_%05d.png", i);
    write_png(fig.image, out_dir / "figures" / name);

    FigureRecord rec;
    rec.doi = "10.5555/synthetic." + std::to_string(spec.seed) + "." + std::to_string(i);
    rec.figure_id = "1";
    rec.source = std::string("figures/") + name;
    rec.label = duplicated[i] ? FigureLabel::Duplicated : FigureLabel::Clean;
    if (duplicated[i] && spec.annotate_duplicates) {
      rec.annotation_color = kRingColor;
    }
    fig.truth.doi = rec.doi;
    fig.truth.figure_id = rec.figure_id;
    truth.push_back(std::move(fig.truth));
    records.push_back(std::move(rec));
  }
  write_manifest(records, out_dir / kManifestName);
  write_ground_truth(truth, out_dir / kGroundTruthName);

  for (auto& r : records) {
    r.source = (out_dir / r.source).lexically_normal().string();
  }
  return records;
}

SyntheticSpec synthetic_spec_from_json(const std::string& json_text) {
  const auto doc = nlohmann::json::parse(json_text);
  SyntheticSpec s;
  s.n_figures = doc.value("n_figures", s.n_figures);
  s.duplication_rate = doc.value("duplication_rate", s.duplication_rate);
  if (doc.contains("blocks_per_figure")) {
    s.min_blocks = doc["blocks_per_figure"].at(0).get<int>();
    s.max_blocks = doc["blocks_per_figure"].at(1).get<int>();
  }
  if (doc.contains("block_size")) {
    s.min_block_size = doc["block_size"].at(0).get<int>();
    s.max_block_size = doc["block_size"].at(1).get<int>();
  }
  s.noise_level = doc.value("noise_level", s.noise_level);
  s.duplicate_noise = doc.value("duplicate_noise", s.duplicate_noise);
  s.width = doc.value("width", s.width);
  s.height = doc.value("height", s.height);
  s.annotate_duplicates = doc.value("annotate_duplicates", s.annotate_duplicates);
  s.seed = doc.value("seed", s.seed);
  validate(s);
  return s;
}

}  // namespace blotcheck
