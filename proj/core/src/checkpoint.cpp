#include "prbcast/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "prbcast/errors.hpp"

namespace prbcast {

namespace {

constexpr char kMagic[4] = {'P', 'R', 'B', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ParseError("checkpoint '" + path.string() + "': truncated file");
  }
  return v;
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(c.kind);
  j["context_length"] = c.context_length;
  j["horizon"] = c.horizon;
  j["hidden_size"] = c.hidden_size;
  j["num_layers"] = c.num_layers;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["batches_per_epoch"] = c.batches_per_epoch;
  j["learning_rate"] = c.learning_rate;
  j["num_sample_paths"] = c.num_sample_paths;
  j["season_length"] = c.season_length;
  j["num_heads"] = c.num_heads;
  j["model_dim"] = c.model_dim;
  j["seed"] = c.seed;
  j["use_positional_encoding"] = c.use_positional_encoding;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.context_length = j.at("context_length").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.batches_per_epoch = j.at("batches_per_epoch").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.num_sample_paths = j.at("num_sample_paths").get<int>();
  c.season_length = j.at("season_length").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.use_positional_encoding = j.at("use_positional_encoding").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint '" + path.string() + "' for writing");

  nlohmann::ordered_json header;
  header["config"] = config_to_json(model.config);
  header["final_loss"] = model.final_loss;
  header["loss_curve"] = model.loss_curve;
  const std::string header_str = header.dump();

  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  write_pod(out, static_cast<std::uint32_t>(model.params.size()));
  for (const ad::Param& p : model.params) {
    write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) write_pod(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
  }
  if (!out) throw ConfigError("failed writing checkpoint '" + path.string() + "'");
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");

  char magic[4];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint '" + path.string() + "': bad magic");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw ParseError("checkpoint '" + path.string() + "': unsupported version " +
                     std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in, path);
  std::string header_str(header_len, '\0');
  if (!in.read(header_str.data(), static_cast<std::streamsize>(header_len))) {
    throw ParseError("checkpoint '" + path.string() + "': truncated header");
  }

  TrainedModel model;
  try {
    const auto header = nlohmann::json::parse(header_str);
    model.config = config_from_json(header.at("config"));
    model.final_loss = header.at("final_loss").get<double>();
    model.loss_curve = header.at("loss_curve").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + path.string() + "': bad header JSON: " + e.what());
  }

  const auto count = read_pod<std::uint32_t>(in, path);
  model.params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw ParseError("checkpoint '" + path.string() + "': truncated parameter name");
    }
    const auto rank = read_pod<std::uint32_t>(in, path);
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(in, path));
      numel *= d;
    }
    std::vector<double> data(numel);
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(numel * sizeof(double)))) {
      throw ParseError("checkpoint '" + path.string() + "': truncated tensor data");
    }
    model.params.push_back({std::move(name), ad::Tensor(std::move(shape), std::move(data))});
  }
  return model;
}

}  // namespace prbcast
