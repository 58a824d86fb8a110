#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "eyessl/errors.hpp"
#include "eyessl/network.hpp"

namespace eyessl {
namespace {

constexpr std::array<char, 8> kMagic{'E', 'Y', 'S', 'S', 'L', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainConfig& cfg) {
  const ModelSpec& s = model.spec();
  nlohmann::json meta = {
      {"spec",
       {{"depth", s.depth},
        {"base_channels", s.base_channels},
        {"num_classes", s.num_classes},
        {"height", s.height},
        {"width", s.width}}},
      {"config_hash", config_hash(cfg)},
      {"config", serialize_config(cfg)},
      {"num_params", model.num_params()},
  };
  const std::string text = meta.dump();
  const auto size = static_cast<std::uint32_t>(text.size());

  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError(tmp.string(), "cannot open for writing");
    out.write(kMagic.data(), kMagic.size());
    out.write(reinterpret_cast<const char*>(&size), sizeof(size));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(model.params().data()),
              static_cast<std::streamsize>(model.num_params() * sizeof(float)));
    if (!out) throw IoError(tmp.string(), "write failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError(path.string(), "not a checkpoint file");
  std::uint32_t size = 0;
  in.read(reinterpret_cast<char*>(&size), sizeof(size));
  std::string text(size, '\0');
  in.read(text.data(), size);
  if (!in) throw IoError(path.string(), "truncated checkpoint header");

  Checkpoint ck;
  try {
    const auto meta = nlohmann::json::parse(text);
    const auto& s = meta.at("spec");
    ck.spec = {s.at("depth").get<int>(), s.at("base_channels").get<int>(),
               s.at("num_classes").get<int>(), s.at("height").get<int>(), s.at("width").get<int>()};
    ck.config_hash = meta.at("config_hash").get<std::string>();
    ck.config_text = meta.at("config").get<std::string>();
    ck.params.resize(meta.at("num_params").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), std::string("bad checkpoint metadata: ") + e.what());
  }
  in.read(reinterpret_cast<char*>(ck.params.data()),
          static_cast<std::streamsize>(ck.params.size() * sizeof(float)));
  if (!in) throw IoError(path.string(), "truncated parameter block");
  return ck;
}

Model load_checkpoint(const std::filesystem::path& path, const std::optional<TrainConfig>& expected) {
  Checkpoint ck = read_checkpoint(path);
  if (config_hash(parse_config(ck.config_text)) != ck.config_hash) {
    throw ValidationError(path.string() + ": embedded config does not match its stored hash");
  }
  if (expected && config_hash(*expected) != ck.config_hash) {
    throw ValidationError(path.string() + ": checkpoint was trained with config " + ck.config_hash +
                          ", expected " + config_hash(*expected));
  }
  Model model(ck.spec);
  if (model.num_params() != ck.params.size()) {
    throw ValidationError(path.string() + ": parameter count does not match the model spec");
  }
  std::copy(ck.params.begin(), ck.params.end(), model.params().begin());
  return model;
}

}  // namespace eyessl
