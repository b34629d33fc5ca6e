#include "blotcheck/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "blotcheck/error.hpp"
#include "blotcheck/loss.hpp"
#include "blotcheck/optim.hpp"

namespace blotcheck {

namespace {

std::string describe(const FigureKey& key) { return key.doi + "/" + key.figure_id; }

std::optional<GroundTruth> resolve_ground_truth(const std::filesystem::path& manifest_path,
                                                const PipelineConfig& config) {
  if (config.ground_truth) {
    return load_ground_truth(*config.ground_truth);
  }
  const auto sidecar = manifest_path.parent_path() / kGroundTruthName;
  if (std::filesystem::exists(sidecar)) {
    spdlog::info("using ground truth {}", sidecar.string());
    return load_ground_truth(sidecar);
  }
  return std::nullopt;
}

ImageBuffer tensor_to_image(const Tensor<float>& t) {
  const int h = static_cast<int>(t.dim(1));
  const int w = static_cast<int>(t.dim(2));
  ImageBuffer img(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(t(0, y, x), 0.0f, 1.0f) * 255.0f));
    }
  }
  return img;
}

double pair_accuracy(std::span<const PairRecord> records) {
  long correct = 0;
  for (const auto& r : records) {
    correct += r.label && *r.label == r.verdict;
  }
  return records.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(records.size());
}

}  // namespace

DuplicateSet duplicates_from_truth(const FigureTruth& truth, std::span<const Rect> panel_boxes) {
  std::vector<int> panel_of(truth.blocks.size(), -1);
  for (std::size_t i = 0; i < truth.blocks.size(); ++i) {
    double best = 0.5;
    for (std::size_t k = 0; k < panel_boxes.size(); ++k) {
      const double v = iou(truth.blocks[i], panel_boxes[k]);
      if (v >= best && (panel_of[i] < 0 || v > best)) {
        best = v;
        panel_of[i] = static_cast<int>(k);
      }
    }
  }
  DuplicateSet out;
  for (auto [i, j] : truth.duplicate_pairs) {
    if (i < 0 || j < 0 || i >= static_cast<int>(panel_of.size()) || j >= static_cast<int>(panel_of.size())) {
      throw Error(ErrorCode::UnknownPanelIndex, "ground-truth duplicate refers to a missing block");
    }
    const int a = panel_of[i];
    const int b = panel_of[j];
    if (a >= 0 && b >= 0 && a != b) {
      out.emplace(std::min(a, b), std::max(a, b));
    }
  }
  return out;
}

DuplicateSet duplicates_from_annotations(std::span<const AnnotationBox> boxes, std::span<const Rect> panel_boxes) {
  // Ring index holding each panel's center, or -1.
  std::vector<int> ring_of(panel_boxes.size(), -1);
  for (std::size_t k = 0; k < panel_boxes.size(); ++k) {
    const auto& p = panel_boxes[k];
    const int cx = p.x + p.w / 2;
    const int cy = p.y + p.h / 2;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      if (boxes[b].interior().contains(cx, cy)) {
        ring_of[k] = static_cast<int>(b);
        break;
      }
    }
  }
  auto same_color = [](Rgb a, Rgb b) {
    return std::abs(a.r - b.r) <= 40 && std::abs(a.g - b.g) <= 40 && std::abs(a.b - b.b) <= 40;
  };
  DuplicateSet out;
  for (std::size_t k = 0; k < panel_boxes.size(); ++k) {
    for (std::size_t k2 = k + 1; k2 < panel_boxes.size(); ++k2) {
      const int r1 = ring_of[k];
      const int r2 = ring_of[k2];
      if (r1 >= 0 && r2 >= 0 && r1 != r2 && same_color(boxes[r1].ring_color, boxes[r2].ring_color)) {
        out.emplace(static_cast<int>(k), static_cast<int>(k2));
      }
    }
  }
  return out;
}

ProcessedFigure process_figure(const FigureRecord& record, const PipelineConfig& config, const GroundTruth* truth,
                               bool keep_crops) {
  ProcessedFigure out;
  out.record = record;
  ImageBuffer img = fetch_figure(record, config.cache_dir);

  std::vector<AnnotationBox> rings;
  if (img.channels() >= 3) {
    rings = detect_annotation_boxes(img, config.annotate);
    if (record.annotation_color) {
      rings = boxes_with_color(rings, *record.annotation_color);
    }
    if (!rings.empty()) {
      img = erase_annotation_rings(img, rings);
    }
  }

  const RoiFigure roi = generate_roi(img, config.roi);
  out.panel_boxes = find_panel_boxes(roi);
  auto crops = extract_panels(roi, out.panel_boxes, record.key());
  out.panels.reserve(crops.size());
  for (const auto& c : crops) {
    out.panels.push_back(normalize_panel(c, config.input_size));
  }
  if (keep_crops) {
    out.crops = std::move(crops);
  }

  const auto it = truth ? truth->find(record.key()) : GroundTruth::const_iterator{};
  if (truth && it != truth->end()) {
    out.duplicates = duplicates_from_truth(it->second, out.panel_boxes);
  } else if (!rings.empty()) {
    out.duplicates = duplicates_from_annotations(rings, out.panel_boxes);
  } else if (record.label == FigureLabel::Clean) {
    out.duplicates = DuplicateSet{};
  }
  return out;
}

std::vector<ProcessedFigure> process_figures(std::span<const FigureRecord> records, const PipelineConfig& config,
                                             const GroundTruth* truth, bool keep_crops) {
  std::vector<ProcessedFigure> results(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        results[i] = process_figure(records[i], config, truth, keep_crops);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(records.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!errors[i]) continue;
    const std::string where = describe(records[i].key()) + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::IoError, where + e.what());
    }
  }
  return results;
}

PreparedDataset prepare(std::span<const FigureRecord> records, const PipelineConfig& config,
                        const GroundTruth* truth) {
  const auto processed = process_figures(records, config, truth);
  PreparedDataset ds;
  ds.input_size = config.input_size;
  std::vector<DuplicateSet> duplicates;
  for (const auto& p : processed) {
    if (!p.duplicates) {
      spdlog::warn("{}: labeled duplicated but no ground truth or annotation rings; skipped",
                   describe(p.record.key()));
      continue;
    }
    ds.figures.push_back({p.record.key(), p.record.label, Split::Train, p.panel_boxes, p.panels});
    duplicates.push_back(*p.duplicates);
  }

  std::vector<FigureKey> keys;
  for (const auto& f : ds.figures) {
    keys.push_back(f.key);
  }
  const auto assignment = assign_figure_splits(keys, config.split, config.split_seed);
  ds.pairs.seed = config.split_seed;
  ds.pairs.fractions = config.split;
  for (std::size_t i = 0; i < ds.figures.size(); ++i) {
    auto& f = ds.figures[i];
    f.split = assignment.at(f.key);
    const auto pairs = enumerate_pairs(f.panels.size());
    auto labeled = label_pairs(pairs, f.panels, duplicates[i]);
    auto& dst = ds.pairs[f.split];
    dst.insert(dst.end(), labeled.begin(), labeled.end());
  }
  ds.pairs.train = balance_pairs(ds.pairs.train, config.max_neg_per_pos, config.split_seed);

  spdlog::info("prepared {} figures: {} train / {} val / {} test pairs", ds.figures.size(), ds.pairs.train.size(),
               ds.pairs.val.size(), ds.pairs.test.size());
  return ds;
}

PreparedDataset prepare(const std::filesystem::path& manifest_path, const PipelineConfig& config) {
  const auto records = load_manifest(manifest_path);
  const auto truth = resolve_ground_truth(manifest_path, config);
  return prepare(records, config, truth ? &*truth : nullptr);
}

TrainResult train(const PreparedDataset& dataset, const TrainConfig& config, Architecture arch, double threshold) {
  validate(config);
  arch.input_size = dataset.input_size;
  arch.merge = config.merge_mode;
  const auto& samples = dataset.pairs.train;
  if (samples.empty()) {
    throw Error(ErrorCode::EmptySplit, "train split has no pairs");
  }
  const auto positives = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label == 1; });
  if (positives == 0 || positives == static_cast<long>(samples.size())) {
    throw Error(ErrorCode::SingleClassTrainingSet, "train split holds a single class");
  }

  TrainResult result{init_model<float>(arch, config.seed), {}, 0};
  if (config.epochs == 0) {
    return result;
  }
  const auto& val = dataset.pairs.val.empty() ? samples : dataset.pairs.val;
  if (dataset.pairs.val.empty()) {
    spdlog::warn("val split empty; selecting the checkpoint on train pairs");
  }

  SiameseModel<float> model = result.model;
  auto state = OptimizerState<float>::for_model(model);
  auto grads = SiameseModel<float>::zeros(arch);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  double best_accuracy = -1;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<PairForward<float>> passes;
      std::vector<float> probs;
      std::vector<float> labels;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = samples[order[i]];
        passes.push_back(siamese_forward_traced(s.a.tensor(), s.b.tensor(), model, arch.merge));
        probs.push_back(passes.back().probability);
        labels.push_back(static_cast<float>(s.label));
      }
      const auto loss = bce_loss<float>(probs, labels);
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(end - start);
      grads.set_zero();
      for (std::size_t i = 0; i < passes.size(); ++i) {
        siamese_backward(passes[i], loss.grads[i], arch.merge, model, grads);
      }
      optimizer_step(model, grads, config, state);
    }

    const auto records = predict_pairs(model, val, threshold);
    std::vector<double> p;
    std::vector<double> y;
    for (const auto& r : records) {
      p.push_back(r.probability);
      y.push_back(*r.label);
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(samples.size()), bce_loss<double>(p, y).loss,
                     pair_accuracy(records)};
    spdlog::info("epoch {:2d}  train_loss {:.4f}  val_loss {:.4f}  val_acc {:.4f}", epoch, stats.train_loss,
                 stats.val_loss, stats.val_accuracy);
    result.history.push_back(stats);
    if (stats.val_accuracy > best_accuracy) {
      best_accuracy = stats.val_accuracy;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

std::vector<PairRecord> predict_pairs(const SiameseModel<float>& model, std::span<const PairSample> samples,
                                      double threshold) {
  std::map<const Tensor<float>*, Tensor<float>> features;
  auto feature = [&](const NormalizedPanel& p) -> const Tensor<float>& {
    auto it = features.find(p.data.get());
    if (it == features.end()) {
      it = features.emplace(p.data.get(), branch_forward(p.tensor(), model)).first;
    }
    return it->second;
  };
  std::vector<PairRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto& fa = feature(s.a);
    const auto& fb = feature(s.b);
    const float prob = sigmoid(head_logit(merge_features(fa, fb, model.arch.merge), model.head));
    out.push_back({s.figure_key(), s.a.source.panel_index, s.b.source.panel_index, static_cast<double>(prob),
                   prob >= threshold ? 1 : 0, s.label});
  }
  return out;
}

std::vector<FigureVerdict> aggregate_figures(
    std::span<const PairRecord> pairs, std::span<const std::pair<FigureKey, std::optional<FigureLabel>>> figures) {
  std::vector<FigureVerdict> out;
  std::map<FigureKey, std::size_t> index;
  for (const auto& [key, label] : figures) {
    index.emplace(key, out.size());
    out.push_back({key, 0, 0.0, 0, label});
  }
  for (const auto& p : pairs) {
    const auto it = index.find(p.figure);
    if (it == index.end()) {
      throw Error(ErrorCode::InvalidArgument, "pair of unlisted figure " + describe(p.figure));
    }
    auto& f = out[it->second];
    f.max_probability = std::max(f.max_probability, p.probability);
    f.flagged_pairs += p.verdict;
    f.verdict = f.verdict || p.verdict;
  }
  return out;
}

Summary summarize(std::span<const PairRecord> pairs, std::span<const FigureVerdict> figures) {
  Summary s;
  for (const auto& p : pairs) {
    if (!p.label) {
      throw Error(ErrorCode::InvalidArgument, "summary needs labeled pairs");
    }
    const bool y = *p.label == 1;
    const bool v = p.verdict == 1;
    s.tp += y && v;
    s.fp += !y && v;
    s.tn += !y && !v;
    s.fn += y && !v;
  }
  const long total = s.tp + s.fp + s.tn + s.fn;
  s.pair_accuracy = total ? static_cast<double>(s.tp + s.tn) / static_cast<double>(total) : 0.0;
  s.precision = s.tp + s.fp ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
  s.recall = s.tp + s.fn ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
  long labeled = 0;
  long correct = 0;
  for (const auto& f : figures) {
    if (!f.label) continue;
    ++labeled;
    correct += (*f.label == FigureLabel::Duplicated) == (f.verdict == 1);
  }
  s.figure_accuracy = labeled ? static_cast<double>(correct) / static_cast<double>(labeled) : 0.0;
  return s;
}

DetectionReport evaluate(const SiameseModel<float>& model, const PreparedDataset& dataset, Split split,
                         double threshold, bool with_images) {
  const auto& samples = dataset.pairs[split];
  if (samples.empty()) {
    throw Error(ErrorCode::EmptySplit, to_string(split) + " split has no pairs");
  }
  DetectionReport report;
  report.per_pair = predict_pairs(model, samples, threshold);
  std::vector<std::pair<FigureKey, std::optional<FigureLabel>>> figures;
  for (const auto* f : dataset.figures_in(split)) {
    figures.emplace_back(f->key, f->label);
  }
  report.per_figure = aggregate_figures(report.per_pair, figures);
  report.summary = summarize(report.per_pair, report.per_figure);
  if (with_images) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!report.per_pair[i].verdict) continue;
      for (const auto* p : {&samples[i].a, &samples[i].b}) {
        report.panel_images.try_emplace({p->source.figure, p->source.panel_index}, tensor_to_image(p->tensor()));
      }
    }
  }
  return report;
}

DetectionReport detect(const SiameseModel<float>& model, const std::filesystem::path& manifest_path,
                       const PipelineConfig& config) {
  const auto records = load_manifest(manifest_path);
  const auto truth = resolve_ground_truth(manifest_path, config);
  auto processed = process_figures(records, config, truth ? &*truth : nullptr, true);

  DetectionReport report;
  std::vector<PairSample> samples;
  std::vector<std::pair<FigureKey, std::optional<FigureLabel>>> figures;
  bool fully_labeled = true;
  for (const auto& p : processed) {
    const auto labeled = label_pairs(enumerate_pairs(p.panels.size()), p.panels, p.duplicates.value_or(DuplicateSet{}));
    samples.insert(samples.end(), labeled.begin(), labeled.end());
    std::optional<FigureLabel> label;
    if (p.duplicates) {
      label = p.record.label;
    } else {
      fully_labeled = false;
    }
    figures.emplace_back(p.record.key(), label);
  }
  report.per_pair = predict_pairs(model, samples, config.threshold);
  if (!fully_labeled) {
    for (auto& r : report.per_pair) {
      r.label.reset();
    }
  }
  report.per_figure = aggregate_figures(report.per_pair, figures);
  if (fully_labeled) {
    report.summary = summarize(report.per_pair, report.per_figure);
  }

  std::map<FigureKey, const ProcessedFigure*> by_key;
  for (const auto& p : processed) {
    by_key.emplace(p.record.key(), &p);
  }
  for (const auto& r : report.per_pair) {
    if (!r.verdict) continue;
    const auto* fig = by_key.at(r.figure);
    for (int k : {r.k, r.k2}) {
      report.panel_images.try_emplace({r.figure, k}, fig->crops.at(static_cast<std::size_t>(k)).pixels);
    }
  }
  return report;
}

}  // namespace blotcheck
