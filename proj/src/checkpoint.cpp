#include "blotcheck/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "blotcheck/image.hpp"
#include "blotcheck/optim.hpp"

namespace blotcheck {

std::string to_string(MergeMode mode) { return mode == MergeMode::AbsDiff ? "abs_diff" : "signed_diff"; }

MergeMode merge_mode_from_string(const std::string& text) {
  if (text == "abs_diff" || text == "absdiff" || text == "AbsDiff") return MergeMode::AbsDiff;
  if (text == "signed_diff" || text == "signeddiff" || text == "SignedDiff") return MergeMode::SignedDiff;
  throw Error(ErrorCode::InvalidArgument, "unknown merge mode '" + text + "'");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& text) {
  if (text == "sgd" || text == "SGD") return OptimizerKind::SGD;
  if (text == "adam" || text == "Adam") return OptimizerKind::Adam;
  throw Error(ErrorCode::InvalidArgument, "unknown optimizer '" + text + "'");
}

void validate(const TrainConfig& config) {
  if (!(config.learning_rate > 0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be > 0");
  if (config.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (config.epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0");
  if (config.threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");
}

namespace {

constexpr char kMagic[4] = {'B', 'L', 'C', 'K'};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  const auto& m = checkpoint.model;
  nlohmann::json header = {
      {"input_size", m.arch.input_size},
      {"channels", m.arch.channels},
      {"kernel", m.arch.kernel},
      {"merge_mode", to_string(m.arch.merge)},
      {"training_seed", checkpoint.training_seed},
      {"parameter_count", m.parameter_count()},
  };
  const std::string header_text = header.dump();

  io::ByteWriter w;
  w.text(std::string_view(kMagic, 4));
  w.uint<std::uint16_t>(kCheckpointVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(header_text.size()));
  w.text(header_text);
  m.for_each_parameter([&](const Tensor<float>& t) { w.f32s(t.data(), static_cast<std::size_t>(t.size())); });
  w.crc();
  return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  const auto payload = io::checked_payload(bytes, 10);
  io::ByteReader r(payload);
  if (r.text(4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::FormatError, "not a checkpoint (bad magic)");
  }
  const auto version = r.uint<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = r.uint<std::uint32_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.text(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("checkpoint header: ") + e.what());
  }
  Architecture arch;
  arch.input_size = header.at("input_size").get<Index>();
  arch.channels = header.at("channels").get<std::array<Index, kBranchDepth>>();
  arch.kernel = header.at("kernel").get<Index>();
  arch.merge = merge_mode_from_string(header.at("merge_mode").get<std::string>());

  Checkpoint cp{SiameseModel<float>::zeros(arch), header.value("training_seed", std::uint64_t{0})};
  if (header.at("parameter_count").get<Index>() != cp.model.parameter_count()) {
    throw Error(ErrorCode::FormatError, "parameter count disagrees with architecture");
  }
  cp.model.for_each_parameter([&](Tensor<float>& t) { r.f32s(t.data(), static_cast<std::size_t>(t.size())); });
  if (r.remaining() != 0) {
    throw Error(ErrorCode::FormatError, "trailing bytes after parameters");
  }
  return cp;
}

void save_model(const SiameseModel<float>& model, const std::filesystem::path& path, std::uint64_t training_seed) {
  write_file_atomic(path, serialize_checkpoint({model, training_seed}));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

SiameseModel<float> load_model(const std::filesystem::path& path) { return load_checkpoint(path).model; }

}  // namespace blotcheck
