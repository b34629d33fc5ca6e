#include <gtest/gtest.h>

#include "blotcheck/annotate.hpp"
#include "blotcheck/error.hpp"
#include "test_util.hpp"

using namespace blotcheck;

namespace {

ImageBuffer gray_page(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageBuffer img(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(rng() % 256);
      img.set_rgb(x, y, {v, v, v});
    }
  }
  return img;
}

}  // namespace

TEST(Annotate, DetectsRingAndStripsInteriorExactly) {
  auto img = gray_page(80, 60, 1);
  const auto original = img;
  const Rect outer{10, 8, 30, 20};
  draw_annotation_ring(img, outer, 2, {230, 30, 30});

  const auto boxes = detect_annotation_boxes(img);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].rect, outer);
  EXPECT_EQ(boxes[0].ring_thickness, 2);
  EXPECT_EQ(boxes[0].ring_color, (Rgb{230, 30, 30}));
  EXPECT_EQ(strip_annotation_box(img, boxes[0]), original.crop({12, 10, 26, 16}));
}

TEST(Annotate, GrayFigureHasNoBoxes) {
  EXPECT_TRUE(detect_annotation_boxes(gray_page(50, 40, 2)).empty());
}

TEST(Annotate, RejectsSingleChannel) {
  try {
    detect_annotation_boxes(ImageBuffer(10, 10, 1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotColorImage);
  }
}

TEST(Annotate, FilledBlobIsNotARing) {
  ImageBuffer img(40, 40, 3, 255);
  for (int y = 5; y < 25; ++y) {
    for (int x = 5; x < 25; ++x) {
      img.set_rgb(x, y, {0, 0, 255});
    }
  }
  EXPECT_TRUE(detect_annotation_boxes(img).empty());
}

TEST(Annotate, NestedRingsCollapseToOutermost) {
  ImageBuffer img(60, 60, 3, 255);
  draw_annotation_ring(img, {5, 5, 50, 50}, 2, {0, 200, 0});
  draw_annotation_ring(img, {15, 15, 20, 20}, 1, {0, 0, 220});
  const auto boxes = detect_annotation_boxes(img);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].rect, (Rect{5, 5, 50, 50}));
}

TEST(Annotate, TwoRingsDifferentColors) {
  ImageBuffer img(100, 50, 3, 255);
  draw_annotation_ring(img, {5, 5, 30, 30}, 2, {230, 30, 30});
  draw_annotation_ring(img, {50, 5, 30, 30}, 3, {30, 30, 230});
  const auto boxes = detect_annotation_boxes(img);
  ASSERT_EQ(boxes.size(), 2u);
  EXPECT_EQ(boxes_with_color(boxes, {230, 30, 30}).size(), 1u);
  EXPECT_EQ(boxes_with_color(boxes, {0, 255, 0}).size(), 0u);
  const auto regions = label_regions(img, boxes);
  EXPECT_TRUE(regions.is_duplicated_figure);
  ASSERT_EQ(regions.duplicated.size(), 2u);
  EXPECT_EQ(regions.duplicated[1].width(), 24);
}

TEST(Annotate, SaturationThresholdIsConfigurable) {
  ImageBuffer img(40, 40, 3, 255);
  draw_annotation_ring(img, {5, 5, 20, 20}, 2, {200, 150, 150});  // saturation 0.25
  EXPECT_TRUE(detect_annotation_boxes(img).empty());
  EXPECT_EQ(detect_annotation_boxes(img, 0.2).size(), 1u);
}

TEST(Annotate, EraseLeavesInteriorAndPaintsBand) {
  auto img = gray_page(40, 40, 3);
  const auto original = img;
  draw_annotation_ring(img, {4, 4, 20, 20}, 2, {230, 30, 30});
  const auto boxes = detect_annotation_boxes(img);
  ASSERT_EQ(boxes.size(), 1u);
  const auto erased = erase_annotation_rings(img, boxes);
  EXPECT_EQ(erased.rgb(4, 4), (Rgb{255, 255, 255}));
  EXPECT_EQ(erased.rgb(5, 12), (Rgb{255, 255, 255}));
  EXPECT_EQ(erased.crop({6, 6, 16, 16}), original.crop({6, 6, 16, 16}));
  EXPECT_TRUE(detect_annotation_boxes(erased).empty());
}

TEST(Annotate, DegenerateInterior) {
  ImageBuffer img(10, 10, 3, 0);
  try {
    strip_annotation_box(img, {{0, 0, 4, 4}, {255, 0, 0}, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateInterior);
  }
}
