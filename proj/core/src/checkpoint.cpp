#include <cstring>

#include "binary_io.hpp"
#include "fovs/forecaster.hpp"

namespace fovs {
namespace {

constexpr char kMagic[4] = {'F', 'V', 'S', 'M'};

void put_config(detail::ByteWriter& w, const ModelConfig& c) {
  w.put(static_cast<std::uint32_t>(c.resolution));
  w.put(static_cast<std::uint32_t>(c.past_frames));
  w.put(static_cast<std::uint32_t>(c.feature_dim));
  w.put(static_cast<std::uint32_t>(c.encoder_widths.size()));
  for (int v : c.encoder_widths) w.put(static_cast<std::uint32_t>(v));
  w.put(static_cast<std::uint32_t>(c.layers));
  w.put(static_cast<std::uint32_t>(c.heads));
  w.put(static_cast<std::uint8_t>(c.single_task_level ? 1 : 0));
  w.put(static_cast<std::uint8_t>(c.single_task_level ? static_cast<std::uint8_t>(*c.single_task_level) : 0));
  w.put(static_cast<std::uint8_t>(c.use_global_embedding ? 1 : 0));
  w.put(static_cast<std::uint8_t>(c.use_history ? 1 : 0));
  w.put(static_cast<std::uint8_t>(c.loss));
  w.put(c.seed);
}

ModelConfig get_config(detail::ByteReader& r, const std::string& where) {
  ModelConfig c;
  c.resolution = static_cast<int>(r.get<std::uint32_t>());
  c.past_frames = static_cast<int>(r.get<std::uint32_t>());
  c.feature_dim = static_cast<int>(r.get<std::uint32_t>());
  const auto widths = r.get<std::uint32_t>();
  if (widths == 0 || widths > 64) throw FormatError(where + ": implausible encoder width count");
  c.encoder_widths.clear();
  for (std::uint32_t i = 0; i < widths; ++i) c.encoder_widths.push_back(static_cast<int>(r.get<std::uint32_t>()));
  c.layers = static_cast<int>(r.get<std::uint32_t>());
  c.heads = static_cast<int>(r.get<std::uint32_t>());
  const bool single = r.get<std::uint8_t>() != 0;
  const auto level = r.get<std::uint8_t>();
  if (single) {
    if (level >= kNumLevels) throw FormatError(where + ": bad single-task level");
    c.single_task_level = static_cast<SpanLevel>(level);
  }
  c.use_global_embedding = r.get<std::uint8_t>() != 0;
  c.use_history = r.get<std::uint8_t>() != 0;
  const auto loss = r.get<std::uint8_t>();
  if (loss > 1) throw FormatError(where + ": bad loss kind");
  c.loss = static_cast<LossKind>(loss);
  c.seed = r.get<std::uint64_t>();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": invalid model config: " + e.what());
  }
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Forecaster& model) {
  detail::ByteWriter w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(kCheckpointVersion);
  put_config(w, model.config());
  const auto& params = model.parameters();
  w.put(static_cast<std::uint32_t>(params.blocks().size()));
  for (std::size_t i = 0; i < params.blocks().size(); ++i) {
    const auto& b = params.block(i);
    w.put_string(b.name);
    w.put(static_cast<std::uint8_t>(b.shape.size()));
    for (int d : b.shape) w.put(static_cast<std::uint32_t>(d));
    for (double v : params.view(i)) w.put(static_cast<float>(v));
  }
  detail::write_file_bytes(path, w.bytes());
}

Forecaster load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  const std::string where = path.string();
  detail::ByteReader r(bytes.data(), bytes.size(), where);
  char magic[4];
  r.get_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw FormatError(where + ": bad checkpoint magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  Forecaster model(get_config(r, where));
  auto& params = model.parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != params.blocks().size()) throw FormatError(where + ": parameter block count mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    const auto& b = params.block(i);
    const auto name = r.get_string();
    if (name != b.name) throw FormatError(where + ": expected block '" + b.name + "', found '" + name + "'");
    const auto dims = r.get<std::uint8_t>();
    std::vector<int> shape;
    for (std::uint8_t d = 0; d < dims; ++d) shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
    if (shape != b.shape) throw FormatError(where + ": shape mismatch for block '" + name + "'");
    for (double& v : params.view(i)) v = static_cast<double>(r.get<float>());
  }
  if (r.remaining() != 0) throw FormatError(where + ": trailing bytes after last block");
  return model;
}

}  // namespace fovs
