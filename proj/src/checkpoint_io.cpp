#include "semprobe/checkpoint_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semprobe/errors.hpp"

namespace semprobe {

namespace {

constexpr char kMagic[4] = {'L', 'L', 'N', 'S'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  put_u32(out, bits);
}

double get_f32(const std::string& in, std::size_t pos) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, pos)));
}

struct TensorRef {
  std::string name;
  std::size_t rows;
  std::size_t cols;  // 0 for vectors
};

nlohmann::json net_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers())
    layers.push_back({{"activation", activation_name(l.activation)},
                      {"in", l.in_dim()},
                      {"out", l.out_dim()}});
  return {{"leaky_slope", net.leaky_slope()}, {"layers", layers}};
}

template <typename T>
T field(const nlohmann::json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"model", model_kind_name(c.kind)},
          {"input_dim", c.input_dim},
          {"latent_dim", c.latent_dim},
          {"hidden", c.hidden},
          {"beta", c.beta},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"learning_rate", c.learning_rate}};
}

TrainConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ConfigInvalid, "training config must be a JSON object");
  TrainConfig c;
  c.kind = model_kind_from_name(field<std::string>(doc, "model", std::string(model_kind_name(c.kind))));
  c.input_dim = field(doc, "input_dim", c.input_dim);
  c.latent_dim = field(doc, "latent_dim", c.latent_dim);
  c.hidden = field(doc, "hidden", c.hidden);
  c.beta = field(doc, "beta", c.beta);
  c.epochs = field(doc, "epochs", c.epochs);
  c.batch_size = field(doc, "batch_size", c.batch_size);
  c.seed = field(doc, "seed", c.seed);
  c.learning_rate = field(doc, "learning_rate", c.learning_rate);
  c.validate();
  return c;
}

std::string serialize_checkpoint(const ModelCheckpoint& ckpt) {
  ckpt.validate();
  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  auto emit = [&](const std::string& name, std::span<const double> values,
                  std::vector<std::size_t> shape) {
    manifest.push_back({{"name", name}, {"shape", shape}, {"offset", payload.size()}});
    for (double v : values) put_f32(payload, v);
  };
  auto emit_net = [&](const std::string& prefix, const DenseNet& net) {
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      const auto& layer = net.layers()[l];
      const std::string base = prefix + "." + std::to_string(l);
      emit(base + ".weight", layer.weights.flat(), {layer.out_dim(), layer.in_dim()});
      emit(base + ".bias", layer.bias, {layer.out_dim()});
    }
  };
  emit_net("encoder", ckpt.encoder);
  emit_net("decoder", ckpt.decoder);

  const nlohmann::json meta = {{"format_version", ModelCheckpoint::kFormatVersion},
                               {"epoch", ckpt.epoch},
                               {"config", config_to_json(ckpt.config)},
                               {"encoder", net_json(ckpt.encoder)},
                               {"decoder", net_json(ckpt.decoder)},
                               {"tensors", manifest}};
  const std::string meta_text = meta.dump();

  std::string out(kMagic, 4);
  put_u32(out, ModelCheckpoint::kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  out += payload;
  return out;
}

ModelCheckpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::BadMagic, "not a checkpoint file (bad magic)");
  if (bytes.size() < 12) throw Error(ErrorCode::CorruptTensor, "checkpoint header truncated");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != ModelCheckpoint::kFormatVersion)
    throw Error(ErrorCode::VersionUnsupported,
                "checkpoint version " + std::to_string(version) + " is not supported");
  const std::uint32_t meta_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(meta_len))
    throw Error(ErrorCode::CorruptTensor, "checkpoint metadata truncated");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(12, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptTensor, std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  const std::size_t data_start = 12 + meta_len;
  const std::size_t data_len = bytes.size() - data_start;

  ModelCheckpoint ckpt;
  try {
    ckpt.config = config_from_json(meta.at("config"));
    ckpt.epoch = meta.at("epoch").get<std::size_t>();

    const auto& tensors = meta.at("tensors");
    std::size_t next_tensor = 0;
    std::size_t expected_offset = 0;
    auto read_tensor = [&](const std::string& name, std::span<double> dst,
                           const std::vector<std::size_t>& shape) {
      if (next_tensor >= tensors.size())
        throw Error(ErrorCode::CorruptTensor, "manifest is missing tensor " + name);
      const auto& entry = tensors.at(next_tensor++);
      const auto offset = entry.at("offset").get<std::size_t>();
      if (entry.at("name").get<std::string>() != name ||
          entry.at("shape").get<std::vector<std::size_t>>() != shape || offset != expected_offset)
        throw Error(ErrorCode::CorruptTensor, "manifest entry for " + name + " is inconsistent");
      const std::size_t nbytes = dst.size() * 4;
      if (offset + nbytes > data_len)
        throw Error(ErrorCode::CorruptTensor, "tensor " + name + " extends past end of file");
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = get_f32(bytes, data_start + offset + 4 * i);
      expected_offset = offset + nbytes;
    };
    auto read_net = [&](const std::string& prefix) {
      const auto& desc = meta.at(prefix);
      std::vector<DenseLayer> layers;
      const auto& layer_desc = desc.at("layers");
      for (std::size_t l = 0; l < layer_desc.size(); ++l) {
        DenseLayer layer;
        const auto in = layer_desc[l].at("in").get<std::size_t>();
        const auto out = layer_desc[l].at("out").get<std::size_t>();
        layer.activation = activation_from_name(layer_desc[l].at("activation").get<std::string>());
        layer.weights = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        const std::string base = prefix + "." + std::to_string(l);
        read_tensor(base + ".weight", layer.weights.flat(), {out, in});
        read_tensor(base + ".bias", layer.bias, {out});
        layers.push_back(std::move(layer));
      }
      return DenseNet(std::move(layers), desc.at("leaky_slope").get<double>());
    };
    ckpt.encoder = read_net("encoder");
    ckpt.decoder = read_net("decoder");
    if (next_tensor != tensors.size() || expected_offset != data_len)
      throw Error(ErrorCode::CorruptTensor, "checkpoint has trailing or unlisted tensor data");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptTensor, std::string("checkpoint metadata malformed: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw Error(ErrorCode::CorruptTensor, e.what());
    throw;
  }
  ckpt.validate();
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint: " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace semprobe
