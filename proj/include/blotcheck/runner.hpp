#ifndef BLOTCHECK_RUNNER_HPP
#define BLOTCHECK_RUNNER_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blotcheck/config.hpp"
#include "blotcheck/dataset.hpp"
#include "blotcheck/siamese.hpp"

namespace blotcheck {

/// One figure after fetch, annotation removal, ROI and segmentation.
struct ProcessedFigure {
  FigureRecord record;
  std::vector<Rect> panel_boxes;
  std::vector<NormalizedPanel> panels;
  std::vector<Panel> crops;  ///< only filled when requested
  /// Known duplicate panel pairs; nullopt when the figure carries no usable labels.
  std::optional<DuplicateSet> duplicates;
};

/// Duplicate panel pairs from planted blocks: each block maps to the panel of best IoU (>= 0.5).
DuplicateSet duplicates_from_truth(const FigureTruth& truth, std::span<const Rect> panel_boxes);

/// Duplicate panel pairs from reviewer rings: two panels are copies when their centers lie in
/// the interiors of two different rings of the same color.
DuplicateSet duplicates_from_annotations(std::span<const AnnotationBox> boxes, std::span<const Rect> panel_boxes);

ProcessedFigure process_figure(const FigureRecord& record, const PipelineConfig& config,
                               const GroundTruth* truth = nullptr, bool keep_crops = false);

/// Runs process_figure over the manifest on `config.threads` workers; results keep manifest
/// order. A failure is rethrown with the figure's doi/figure_id prepended.
std::vector<ProcessedFigure> process_figures(std::span<const FigureRecord> records, const PipelineConfig& config,
                                             const GroundTruth* truth = nullptr, bool keep_crops = false);

/// Figures are split by figure; only the train split is negative-balanced.
PreparedDataset prepare(std::span<const FigureRecord> records, const PipelineConfig& config,
                        const GroundTruth* truth = nullptr);
/// Uses `config.ground_truth`, else `ground_truth.json` next to the manifest when present.
PreparedDataset prepare(const std::filesystem::path& manifest_path, const PipelineConfig& config);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

struct TrainResult {
  SiameseModel<float> model;
  std::vector<EpochStats> history;
  int best_epoch = 0;  ///< 0 when no epoch ran
};

/// Seeded shuffled minibatch BCE training. Keeps the epoch with the best val pair accuracy
/// (ties go to the earlier epoch); falls back to the train split when val is empty.
/// Throws SingleClassTrainingSet, EmptySplit.
TrainResult train(const PreparedDataset& dataset, const TrainConfig& config, Architecture arch,
                  double threshold = 0.5);

struct PairRecord {
  FigureKey figure;
  int k = 0;
  int k2 = 0;
  double probability = 0;
  int verdict = 0;
  std::optional<int> label;
};

struct FigureVerdict {
  FigureKey figure;
  int verdict = 0;
  double max_probability = 0;
  int flagged_pairs = 0;
  std::optional<FigureLabel> label;
};

struct Summary {
  double pair_accuracy = 0;
  double figure_accuracy = 0;
  double precision = 0;
  double recall = 0;
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
};

struct PanelKey {
  FigureKey figure;
  int panel_index = 0;

  friend auto operator<=>(const PanelKey&, const PanelKey&) = default;
};

struct DetectionReport {
  std::vector<PairRecord> per_pair;
  std::vector<FigureVerdict> per_figure;
  std::optional<Summary> summary;
  /// Crops of panels in flagged pairs, exported next to report.html.
  std::map<PanelKey, ImageBuffer> panel_images;
};

/// Verdict is probability >= threshold. Panel features are computed once per panel.
std::vector<PairRecord> predict_pairs(const SiameseModel<float>& model, std::span<const PairSample> samples,
                                      double threshold);

/// OR over each figure's pair verdicts; max_probability is 0 for figures with no pairs.
/// Figures are reported in `figures` order.
std::vector<FigureVerdict> aggregate_figures(std::span<const PairRecord> pairs,
                                             std::span<const std::pair<FigureKey, std::optional<FigureLabel>>> figures);

/// Metrics recomputed from the records alone. Precision is 0 when nothing is flagged.
Summary summarize(std::span<const PairRecord> pairs, std::span<const FigureVerdict> figures);

/// Pair and figure metrics over one split of a prepared dataset. Throws EmptySplit.
DetectionReport evaluate(const SiameseModel<float>& model, const PreparedDataset& dataset, Split split,
                         double threshold = 0.5, bool with_images = true);

/// Full pipeline on a manifest. A summary is attached when every figure has labels.
DetectionReport detect(const SiameseModel<float>& model, const std::filesystem::path& manifest_path,
                       const PipelineConfig& config);

nlohmann::json report_json(const DetectionReport& report, const std::string& created_utc);
std::string report_html(const DetectionReport& report);

/// Writes report.json, report.html and panels/*.png into `out_dir`. Throws IoError.
void emit_report(const DetectionReport& report, const std::filesystem::path& out_dir);

inline constexpr double kReferenceAccuracy = 90.86;

}  // namespace blotcheck

#endif  // BLOTCHECK_RUNNER_HPP
