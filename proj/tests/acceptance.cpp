// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "blotcheck/annotate.hpp"
#include "blotcheck/checkpoint.hpp"
#include "blotcheck/corpus.hpp"
#include "blotcheck/error.hpp"
#include "blotcheck/gradcheck.hpp"
#include "blotcheck/runner.hpp"
#include "blotcheck/segment.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace blotcheck;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  ///< 0 = no limit
  std::function<Outcome()> run;
};

template <typename T>
bool bit_equal(const T& a, const T& b) {
  return std::memcmp(&a, &b, sizeof(T)) == 0;
}

Outcome loss_exactness() {
  const double single = bce_loss<double>(std::vector<double>{0.5}, std::vector<double>{1.0}).loss;
  const double batch = bce_loss<double>(std::vector<double>{0.9, 0.2}, std::vector<double>{1.0, 0.0}).loss;
  const bool ok = std::abs(single - 0.693147) <= 1e-6 && std::abs(batch - 0.164252) <= 1e-6;
  return {ok, fmt::format("single={:.7f} batch={:.7f}", single, batch)};
}

Outcome gradient_check() {
  double worst = 0;
  int failures = 0;
  long checked = 0;
  long extended = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    Architecture arch;
    arch.merge = seed % 2 ? MergeMode::SignedDiff : MergeMode::AbsDiff;
    const auto model = init_model<double>(arch, seed);
    const auto a = testutil::random_panel(arch.input_size, rng);
    const auto b = testutil::random_panel(arch.input_size, rng);
    GradCheckOptions opt;
    opt.seed = seed;
    opt.merge = arch.merge;
    const auto r = grad_check(model, a, b, static_cast<double>(seed % 3 == 0), opt);
    worst = std::max(worst, r.max_relative_error);
    failures += r.max_relative_error > 1e-4 || r.checked == 0;
    checked += r.checked;
    extended += r.extended;
  }
  return {failures == 0, fmt::format("max rel err {:.3e} over {} coordinates ({} with |g| < {:g} referenced in "
                                     "long double), {} failing seeds",
                                     worst, checked, extended, kExtendedBelow, failures)};
}

Outcome components() {
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = testutil::random_mask(32, 32, 0.15 + 0.6 * (i % 100) / 100.0, rng);
    for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
      const auto got = label_components(m, conn);
      if (!oracle::same_partition(got.labels, oracle::flood_fill_labels(m, static_cast<int>(conn)))) ++mismatches;
    }
  }
  return {mismatches == 0, fmt::format("{} mismatches over 2000 labelings", mismatches)};
}

Outcome otsu() {
  std::mt19937_64 rng(99);
  int tested = 0;
  int mismatches = 0;
  while (tested < 200) {
    const auto hist = histogram(oracle::random_gray(48, 48, rng));
    if (std::count_if(hist.begin(), hist.end(), [](long c) { return c > 0; }) < 2) continue;
    ++tested;
    mismatches += otsu_threshold(hist) != oracle::otsu_oracle(hist);
  }
  return {mismatches == 0, fmt::format("{} mismatches over {} images", mismatches, tested)};
}

/// Gray figure with dark blocks and 1-3 disjoint colored rings.
Outcome annotation_round_trip() {
  std::mt19937_64 rng(555);
  const std::vector<Rgb> palette{{230, 30, 30}, {30, 200, 40}, {40, 60, 235}, {240, 200, 20}, {220, 40, 220}};
  int exact = 0;
  const int total = 100;
  for (int f = 0; f < total; ++f) {
    ImageBuffer img(320, 240, 3);
    for (int y = 0; y < 240; ++y)
      for (int x = 0; x < 320; ++x) {
        const auto v = static_cast<std::uint8_t>(150 + rng() % 100);
        img.set_rgb(x, y, {v, v, v});
      }
    const auto original = img;
    const int n_rings = 1 + static_cast<int>(rng() % 3);
    std::vector<AnnotationBox> planted;
    for (int r = 0; r < n_rings; ++r) {
      // One ring per 100 px column band keeps rings disjoint.
      const int w = 30 + static_cast<int>(rng() % 60);
      const int h = 30 + static_cast<int>(rng() % 150);
      const Rect outer{r * 105 + static_cast<int>(rng() % (100 - w)), static_cast<int>(rng() % (235 - h)), w, h};
      const int thick = 1 + static_cast<int>(rng() % 4);
      const Rgb color = palette[rng() % palette.size()];
      draw_annotation_ring(img, outer, thick, color);
      planted.push_back({outer, color, thick});
    }
    bool ok = true;
    try {
      const auto found = detect_annotation_boxes(img);
      ok = found.size() == planted.size();
      for (const auto& p : planted) {
        const auto it = std::find_if(found.begin(), found.end(), [&](const AnnotationBox& b) { return b.rect == p.rect; });
        ok = ok && it != found.end() && strip_annotation_box(img, *it) == original.crop(p.interior());
      }
    } catch (const Error&) {
      ok = false;
    }
    exact += ok;
  }
  const double rate = static_cast<double>(exact) / total;
  return {rate >= 0.99, fmt::format("{}/{} figures byte-exact ({:.1f}%)", exact, total, 100 * rate)};
}

Outcome panel_recovery() {
  testutil::TempDir dir("accept_panels");
  SyntheticSpec spec;
  spec.n_figures = 100;
  spec.min_blocks = 2;
  spec.max_blocks = 5;
  spec.noise_level = 8;
  spec.seed = 6;
  const auto records = generate_synthetic_corpus(spec, dir.path());
  const auto truth = load_ground_truth(dir / kGroundTruthName);
  int missed = 0;
  int spurious = 0;
  double worst = 1.0;
  for (const auto& rec : records) {
    const auto boxes = find_panel_boxes(generate_roi(fetch_figure(rec, dir / "cache")));
    const auto& blocks = truth.at(rec.key()).blocks;
    std::vector<bool> used(boxes.size(), false);
    for (const auto& b : blocks) {
      double best = 0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (iou(b, boxes[i]) > best) {
          best = iou(b, boxes[i]);
          arg = i;
        }
      }
      worst = std::min(worst, best);
      if (best >= 0.9) {
        used[arg] = true;
      } else {
        ++missed;
      }
    }
    spurious += static_cast<int>(std::count(used.begin(), used.end(), false));
  }
  return {missed == 0 && spurious == 0,
          fmt::format("{} missed blocks, {} spurious panels, worst IoU {:.3f}", missed, spurious, worst)};
}

struct PipelineArtifacts {
  std::vector<std::uint8_t> dataset;
  std::vector<std::uint8_t> checkpoint;
  nlohmann::json report;
  Summary summary;
  int best_epoch = 0;
};

/// synth -> prepare -> train -> evaluate, single-threaded, everything written under `dir`.
PipelineArtifacts run_pipeline(const fs::path& dir) {
  SyntheticSpec spec;
  spec.n_figures = 500;
  spec.duplication_rate = 0.3;
  spec.duplicate_noise = 5.0;
  spec.seed = 7;
  generate_synthetic_corpus(spec, dir / "corpus");

  PipelineConfig cfg;
  cfg.threads = 1;
  cfg.cache_dir = dir / "cache";
  cfg.train.epochs = 20;
  cfg.train.batch_size = 32;
  const auto ds = prepare(dir / "corpus" / kManifestName, cfg);
  write_dataset(ds, dir / "dataset.bin");
  const auto trained = train(read_dataset(dir / "dataset.bin"), cfg.train, cfg.architecture(), cfg.threshold);
  save_model(trained.model, dir / "model.ckpt", cfg.train.seed);
  const auto rep = evaluate(load_model(dir / "model.ckpt"), ds, Split::Test, cfg.threshold);
  emit_report(rep, dir / "report");

  PipelineArtifacts out;
  out.dataset = read_file_bytes(dir / "dataset.bin");
  out.checkpoint = read_file_bytes(dir / "model.ckpt");
  std::ifstream in(dir / "report" / "report.json");
  out.report = nlohmann::json::parse(in);
  out.report.erase("created_utc");
  out.summary = *rep.summary;
  out.best_epoch = trained.best_epoch;
  return out;
}

std::optional<PipelineArtifacts> first_run;

Outcome end_to_end() {
  testutil::TempDir dir("accept_e2e");
  first_run = run_pipeline(dir.path());
  const auto& s = first_run->summary;
  const bool ok = s.pair_accuracy >= 0.90 && s.figure_accuracy >= 0.85;
  return {ok, fmt::format("test pair accuracy {:.4f} (>= 0.90), figure accuracy {:.4f} (>= 0.85), best epoch {}; "
                          "published pair accuracy {:.2f}% on a corpus not distributed with this tool",
                          s.pair_accuracy, s.figure_accuracy, first_run->best_epoch, kReferenceAccuracy)};
}

Outcome symmetry() {
  std::mt19937_64 rng(8);
  const auto model = init_model<float>(Architecture{}, 21);
  int asymmetric = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = testutil::random_panel_f(64, rng);
    const auto b = testutil::random_panel_f(64, rng);
    asymmetric += !bit_equal(siamese_forward(a, b, model, MergeMode::AbsDiff),
                             siamese_forward(b, a, model, MergeMode::AbsDiff));
  }
  return {asymmetric == 0, fmt::format("{} of 1000 pairs differ", asymmetric)};
}

Outcome determinism() {
  if (!first_run) {
    testutil::TempDir dir("accept_det_a");
    first_run = run_pipeline(dir.path());
  }
  testutil::TempDir dir("accept_det_b");
  const auto second = run_pipeline(dir.path());
  const bool ds = first_run->dataset == second.dataset;
  const bool ck = first_run->checkpoint == second.checkpoint;
  const bool rp = first_run->report == second.report;
  return {ds && ck && rp, fmt::format("dataset {}, checkpoint {}, report.json {}", ds ? "identical" : "DIFFERS",
                                      ck ? "identical" : "DIFFERS", rp ? "identical" : "DIFFERS")};
}

Outcome checkpoint_round_trip() {
  testutil::TempDir dir("accept_ckpt");
  Architecture arch;
  const auto model = init_model<float>(arch, 314);
  save_model(model, dir / "m.ckpt", 314);
  const auto back = load_model(dir / "m.ckpt");
  std::vector<const Tensor<float>*> pa;
  std::vector<const Tensor<float>*> pb;
  model.for_each_parameter([&](const Tensor<float>& t) { pa.push_back(&t); });
  back.for_each_parameter([&](const Tensor<float>& t) { pb.push_back(&t); });
  bool same = pa.size() == pb.size() && back.arch == arch;
  for (std::size_t i = 0; same && i < pa.size(); ++i) {
    same = pa[i]->shape() == pb[i]->shape() &&
           std::memcmp(pa[i]->data(), pb[i]->data(), sizeof(float) * pa[i]->size()) == 0;
  }
  auto bytes = read_file_bytes(dir / "m.ckpt");
  bytes[bytes.size() / 2] ^= 0x04;
  write_file_atomic(dir / "bad.ckpt", bytes);
  bool rejected = false;
  try {
    load_model(dir / "bad.ckpt");
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::ChecksumMismatch;
  }
  return {same && rejected, fmt::format("round trip {}, corrupted file {}", same ? "bitwise" : "DIFFERS",
                                        rejected ? "rejected by checksum" : "NOT rejected")};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria{
      {1, "loss exactness", 1, loss_exactness},
      {2, "gradient correctness", 60, gradient_check},
      {3, "connected components", 10, components},
      {4, "otsu threshold", 10, otsu},
      {5, "annotation round-trip", 30, annotation_round_trip},
      {6, "panel recovery", 60, panel_recovery},
      {7, "end-to-end detection", 600, end_to_end},
      {8, "AbsDiff symmetry", 10, symmetry},
      {9, "pipeline determinism", 1200, determinism},
      {10, "checkpoint round-trip", 1, checkpoint_round_trip},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.time_limit_s <= 0 || secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << fmt::format("{} [{}] {}: {} ({:.2f}s, limit {:.0f}s{})", pass ? "PASS" : "FAIL", c.id, c.name,
                             o.detail, secs, c.time_limit_s, in_time ? "" : ", TOO SLOW")
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
  return failed == 0 ? 0 : 1;
}
