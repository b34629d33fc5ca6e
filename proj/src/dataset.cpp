#include "blotcheck/dataset.hpp"

#include <map>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "blotcheck/error.hpp"

namespace blotcheck {

namespace {

constexpr char kMagic[4] = {'B', 'L', 'D', 'S'};
constexpr Split kSplits[] = {Split::Train, Split::Val, Split::Test};

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorCode::FormatError, "unknown split '" + s + "'");
}

}  // namespace

std::vector<const FigureEntry*> PreparedDataset::figures_in(Split split) const {
  std::vector<const FigureEntry*> out;
  for (const auto& f : figures) {
    if (f.split == split) {
      out.push_back(&f);
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize_dataset(const PreparedDataset& dataset) {
  std::map<FigureKey, std::size_t> figure_index;
  nlohmann::json figures = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.figures.size(); ++i) {
    const auto& f = dataset.figures[i];
    if (f.panels.size() != f.panel_boxes.size()) {
      throw Error(ErrorCode::ShapeMismatch, "figure panels and boxes disagree");
    }
    figure_index.emplace(f.key, i);
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : f.panel_boxes) {
      boxes.push_back({b.x, b.y, b.w, b.h});
    }
    figures.push_back({{"doi", f.key.doi},
                       {"figure_id", f.key.figure_id},
                       {"label", f.label == FigureLabel::Duplicated ? "duplicated" : "clean"},
                       {"split", to_string(f.split)},
                       {"boxes", boxes}});
  }
  nlohmann::json pairs = nlohmann::json::object();
  for (Split s : kSplits) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : dataset.pairs[s]) {
      const auto it = figure_index.find(p.figure_key());
      if (it == figure_index.end()) {
        throw Error(ErrorCode::FormatError, "pair references a figure missing from the dataset");
      }
      list.push_back({it->second, p.a.source.panel_index, p.b.source.panel_index, p.label});
    }
    pairs[to_string(s)] = list;
  }
  const auto& fr = dataset.pairs.fractions;
  const nlohmann::json header = {{"input_size", dataset.input_size},
                                 {"split_seed", dataset.pairs.seed},
                                 {"fractions", {fr.train, fr.val, fr.test}},
                                 {"figures", figures},
                                 {"pairs", pairs}};
  const std::string header_text = header.dump();

  io::ByteWriter w;
  w.text(std::string_view(kMagic, 4));
  w.uint<std::uint16_t>(kDatasetVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(header_text.size()));
  w.text(header_text);
  const Index plane = static_cast<Index>(dataset.input_size) * dataset.input_size;
  for (const auto& f : dataset.figures) {
    for (const auto& p : f.panels) {
      if (p.tensor().size() != plane) {
        throw Error(ErrorCode::ShapeMismatch, "panel tensor size disagrees with input_size");
      }
      w.f32s(p.tensor().data(), static_cast<std::size_t>(plane));
    }
  }
  w.crc();
  return std::move(w.buffer());
}

PreparedDataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  const auto payload = io::checked_payload(bytes, 10);
  io::ByteReader r(payload);
  if (r.text(4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::FormatError, "not a dataset file (bad magic)");
  }
  const auto version = r.uint<std::uint16_t>();
  if (version != kDatasetVersion) {
    throw Error(ErrorCode::VersionMismatch, "dataset version " + std::to_string(version));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.text(r.uint<std::uint32_t>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("dataset header: ") + e.what());
  }
  PreparedDataset ds;
  ds.input_size = header.at("input_size").get<int>();
  ds.pairs.seed = header.at("split_seed").get<std::uint64_t>();
  const auto fr = header.at("fractions");
  ds.pairs.fractions = {fr.at(0).get<double>(), fr.at(1).get<double>(), fr.at(2).get<double>()};
  const Index side = ds.input_size;
  for (const auto& jf : header.at("figures")) {
    FigureEntry f;
    f.key = {jf.at("doi").get<std::string>(), jf.at("figure_id").get<std::string>()};
    f.label = jf.at("label").get<std::string>() == "duplicated" ? FigureLabel::Duplicated : FigureLabel::Clean;
    f.split = split_from_string(jf.at("split").get<std::string>());
    for (const auto& b : jf.at("boxes")) {
      f.panel_boxes.push_back({b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()});
    }
    for (std::size_t k = 0; k < f.panel_boxes.size(); ++k) {
      Tensor<float> t({1, side, side});
      r.f32s(t.data(), static_cast<std::size_t>(t.size()));
      f.panels.push_back({{f.key, static_cast<int>(k)}, std::make_shared<const Tensor<float>>(std::move(t))});
    }
    ds.figures.push_back(std::move(f));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::FormatError, "trailing bytes after panel data");
  }
  for (Split s : kSplits) {
    for (const auto& jp : header.at("pairs").at(to_string(s))) {
      const auto& fig = ds.figures.at(jp.at(0).get<std::size_t>());
      const auto k = jp.at(1).get<std::size_t>();
      const auto k2 = jp.at(2).get<std::size_t>();
      if (k >= fig.panels.size() || k2 >= fig.panels.size()) {
        throw Error(ErrorCode::UnknownPanelIndex, "pair panel index outside figure");
      }
      ds.pairs[s].push_back({fig.panels[k], fig.panels[k2], jp.at(3).get<int>()});
    }
  }
  return ds;
}

void write_dataset(const PreparedDataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(dataset));
}

PreparedDataset read_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file_bytes(path)); }

}  // namespace blotcheck
