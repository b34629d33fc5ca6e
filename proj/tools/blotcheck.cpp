#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "blotcheck/checkpoint.hpp"
#include "blotcheck/config.hpp"
#include "blotcheck/corpus.hpp"
#include "blotcheck/error.hpp"
#include "blotcheck/runner.hpp"

namespace fs = std::filesystem;
using namespace blotcheck;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string log_level = "info";
};

PipelineConfig config_from(const std::string& path, const Globals& g) {
  PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_config(path);
  if (g.seed) {
    cfg.split_seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  cfg.threads = g.threads;
  cfg.train.threads = g.threads;
  return cfg;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_summary(const Summary& s, const std::string& split) {
  std::printf("%s pairs: accuracy %.4f  precision %.4f  recall %.4f  (tp %ld fp %ld tn %ld fn %ld)\n", split.c_str(),
              s.pair_accuracy, s.precision, s.recall, s.tp, s.fp, s.tn, s.fn);
  std::printf("%s figures: accuracy %.4f\n", split.c_str(), s.figure_accuracy);
  std::printf("reference: published pair accuracy %.2f%% on a corpus not distributed with this tool\n",
              kReferenceAccuracy);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blotcheck: duplicated panel detection for scientific figures"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Overrides split and training seeds");
  app.add_option("--threads", g.threads, "Worker threads for per-figure stages")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  std::string manifest, cache = ".blotcheck-cache", spec, out, config, data, model;
  std::string split = "test";

  auto* ingest = app.add_subcommand("ingest", "Fetch and decode every manifest figure, filling the cache");
  ingest->add_option("--manifest", manifest)->required();
  ingest->add_option("--cache", cache);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--spec", spec, "JSON spec")->required();
  synth->add_option("--out", out)->required();

  auto* prep = app.add_subcommand("prepare", "Build the pair dataset");
  prep->add_option("--manifest", manifest)->required();
  prep->add_option("--config", config);
  prep->add_option("--out", out)->required();

  auto* tr = app.add_subcommand("train", "Train the pair classifier");
  tr->add_option("--data", data)->required();
  tr->add_option("--config", config);
  tr->add_option("--out", out)->required();

  auto* ev = app.add_subcommand("eval", "Score a dataset split");
  ev->add_option("--data", data)->required();
  ev->add_option("--model", model)->required();
  ev->add_option("--config", config);
  ev->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--out", out, "Also write report.json/report.html here");

  auto* det = app.add_subcommand("detect", "Run the full pipeline on a manifest");
  det->add_option("--manifest", manifest)->required();
  det->add_option("--model", model)->required();
  det->add_option("--config", config);
  det->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*ingest) {
      auto cfg = config_from("", g);
      cfg.cache_dir = cache;
      const auto records = load_manifest(manifest);
      for (const auto& r : records) {
        const auto img = fetch_figure(r, cfg.cache_dir);
        spdlog::info("{}/{}: {}x{}x{}", r.doi, r.figure_id, img.width(), img.height(), img.channels());
      }
      std::printf("ingested %zu figures\n", records.size());
    } else if (*synth) {
      auto s = synthetic_spec_from_json(read_text(spec));
      if (g.seed) s.seed = *g.seed;
      const auto records = generate_synthetic_corpus(s, out);
      std::printf("wrote %zu figures to %s\n", records.size(), out.c_str());
    } else if (*prep) {
      const auto cfg = config_from(config, g);
      const auto ds = prepare(fs::path(manifest), cfg);
      write_dataset(ds, out);
      std::printf("dataset: %zu figures, %zu/%zu/%zu train/val/test pairs -> %s\n", ds.figures.size(),
                  ds.pairs.train.size(), ds.pairs.val.size(), ds.pairs.test.size(), out.c_str());
    } else if (*tr) {
      const auto cfg = config_from(config, g);
      const auto ds = read_dataset(data);
      const auto result = train(ds, cfg.train, cfg.architecture(), cfg.threshold);
      save_model(result.model, out, cfg.train.seed);
      std::printf("best epoch %d of %zu -> %s\n", result.best_epoch, result.history.size(), out.c_str());
    } else if (*ev) {
      const auto cfg = config_from(config, g);
      const auto ds = read_dataset(data);
      const auto m = load_model(model);
      const Split s = split == "train" ? Split::Train : (split == "val" ? Split::Val : Split::Test);
      const auto report = evaluate(m, ds, s, cfg.threshold, !out.empty());
      print_summary(*report.summary, split);
      if (!out.empty()) emit_report(report, out);
    } else if (*det) {
      const auto cfg = config_from(config, g);
      const auto m = load_model(model);
      const auto report = detect(m, manifest, cfg);
      emit_report(report, out);
      long flagged = 0;
      for (const auto& f : report.per_figure) flagged += f.verdict;
      std::printf("%ld of %zu figures flagged -> %s\n", flagged, report.per_figure.size(), out.c_str());
      if (report.summary) print_summary(*report.summary, "detect");
    }
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), to_string(e.code()));
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
