#include "blotcheck/config.hpp"

#include <fstream>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/fmt/fmt.h>

#include "blotcheck/error.hpp"

namespace blotcheck {

namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  try {
    return boost::lexical_cast<T>(value);
  } catch (const boost::bad_lexical_cast&) {
    throw Error(ErrorCode::InvalidArgument, "bad value '" + value + "' for " + key);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw Error(ErrorCode::InvalidArgument, "bad boolean '" + value + "' for " + key);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_value<double>(key, boost::algorithm::trim_copy(item)));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    s += (i ? "," : "") + parts[i];
  }
  return s;
}

// Shortest form that parses back to the same value.
template <typename T>
std::string str(const T& v) {
  return fmt::format("{}", v);
}

}  // namespace

void apply_config_key(PipelineConfig& c, const std::string& key, const std::string& raw) {
  std::string value = raw;
  const auto b = value.find_first_not_of(" \t\"");
  const auto e = value.find_last_not_of(" \t\"");
  value = b == std::string::npos ? std::string() : value.substr(b, e - b + 1);

  if (key == "roi.min_area") c.roi.min_area = parse_value<long>(key, value);
  else if (key == "roi.min_fill") c.roi.min_fill = parse_value<double>(key, value);
  else if (key == "roi.min_side") c.roi.min_side = parse_value<int>(key, value);
  else if (key == "roi.connectivity") {
    const int v = parse_value<int>(key, value);
    if (v != 4 && v != 8) throw Error(ErrorCode::InvalidArgument, "roi.connectivity must be 4 or 8");
    c.roi.connectivity = v == 4 ? Connectivity::Four : Connectivity::Eight;
  } else if (key == "roi.close") c.roi.close_mask = parse_bool(key, value);
  else if (key == "annotate.min_saturation") c.annotate.min_saturation = parse_value<double>(key, value);
  else if (key == "annotate.min_value") c.annotate.min_value = parse_value<double>(key, value);
  else if (key == "segment.input_size") c.input_size = parse_value<int>(key, value);
  else if (key == "pairs.max_neg_per_pos") c.max_neg_per_pos = parse_value<double>(key, value);
  else if (key == "split.fractions") {
    const auto f = parse_list(key, value);
    if (f.size() != 3) throw Error(ErrorCode::InvalidArgument, "split.fractions needs three values");
    c.split = {f[0], f[1], f[2]};
  } else if (key == "split.seed") c.split_seed = parse_value<std::uint64_t>(key, value);
  else if (key == "train.learning_rate") c.train.learning_rate = parse_value<double>(key, value);
  else if (key == "train.epochs") c.train.epochs = parse_value<int>(key, value);
  else if (key == "train.batch_size") c.train.batch_size = parse_value<int>(key, value);
  else if (key == "train.seed") c.train.seed = parse_value<std::uint64_t>(key, value);
  else if (key == "train.optimizer") c.train.optimizer = optimizer_from_string(value);
  else if (key == "train.beta1") c.train.beta1 = parse_value<double>(key, value);
  else if (key == "train.beta2") c.train.beta2 = parse_value<double>(key, value);
  else if (key == "train.epsilon") c.train.epsilon = parse_value<double>(key, value);
  else if (key == "train.merge_mode") c.train.merge_mode = merge_mode_from_string(value);
  else if (key == "net.channels") {
    const auto ch = parse_list(key, value);
    if (ch.size() != kBranchDepth) throw Error(ErrorCode::InvalidArgument, "net.channels needs four values");
    for (std::size_t i = 0; i < kBranchDepth; ++i) c.channels[i] = static_cast<Index>(ch[i]);
  } else if (key == "net.kernel") c.kernel = parse_value<Index>(key, value);
  else if (key == "detect.threshold") c.threshold = parse_value<double>(key, value);
  else if (key == "corpus.cache_dir") c.cache_dir = value;
  else if (key == "corpus.ground_truth") c.ground_truth = value;
  else throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
}

PipelineConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  PipelineConfig config;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      apply_config_key(config, name, node.data());
      continue;
    }
    for (const auto& [child, leaf] : node) {
      apply_config_key(config, name + "." + child, leaf.data());
    }
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::map<std::string, std::string> config_entries(const PipelineConfig& c) {
  std::map<std::string, std::string> m;
  m["roi.min_area"] = str(c.roi.min_area);
  m["roi.min_fill"] = str(c.roi.min_fill);
  m["roi.min_side"] = str(c.roi.min_side);
  m["roi.connectivity"] = str(static_cast<int>(c.roi.connectivity));
  m["roi.close"] = c.roi.close_mask ? "true" : "false";
  m["annotate.min_saturation"] = str(c.annotate.min_saturation);
  m["annotate.min_value"] = str(c.annotate.min_value);
  m["segment.input_size"] = str(c.input_size);
  m["pairs.max_neg_per_pos"] = str(c.max_neg_per_pos);
  m["split.fractions"] = join({str(c.split.train), str(c.split.val), str(c.split.test)});
  m["split.seed"] = str(c.split_seed);
  m["train.learning_rate"] = str(c.train.learning_rate);
  m["train.epochs"] = str(c.train.epochs);
  m["train.batch_size"] = str(c.train.batch_size);
  m["train.seed"] = str(c.train.seed);
  m["train.optimizer"] = to_string(c.train.optimizer);
  m["train.merge_mode"] = to_string(c.train.merge_mode);
  m["net.channels"] = join({str(c.channels[0]), str(c.channels[1]), str(c.channels[2]), str(c.channels[3])});
  m["net.kernel"] = str(c.kernel);
  m["detect.threshold"] = str(c.threshold);
  m["corpus.cache_dir"] = c.cache_dir.string();
  return m;
}

}  // namespace blotcheck
