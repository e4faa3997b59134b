#include <torch/torch.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "vhist/nn/model_state.hpp"

namespace vhist {

namespace {

constexpr const char* kMagic = "VHISTCKPT 1";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

std::string config_text(const CycleGANConfig& c) {
  std::string out;
  for (const auto& [k, v] : c.to_map()) out += k + " = " + v + "\n";
  return out;
}

torch::Tensor as_f32(const torch::Tensor& t) { return t.detach().to(torch::kFloat32).contiguous(); }

}  // namespace

namespace nn {

std::string content_id(const TranslationModel::State& state) {
  Fnv1a f;
  const std::string cfg = config_text(state.config);
  f.add(cfg.data(), cfg.size());
  for (const auto& [name, t] : state.named_tensors()) {
    f.add(name.data(), name.size());
    const torch::Tensor c = as_f32(t);
    f.add(c.data_ptr<float>(), static_cast<std::size_t>(c.numel()) * sizeof(float));
  }
  return f.hex();
}

}  // namespace nn

void TranslationModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint '" + path.string() + "'");
  const auto tensors = state_->named_tensors();
  os << kMagic << "\n[config]\n" << config_text(state_->config) << "[meta]\n"
     << "epoch = " << state_->epoch << "\n"
     << "seed = " << state_->config.seed << "\n"
     << "id = " << id() << "\n"
     << "parent = " << state_->parent << "\n"
     << "[weights]\ncount = " << tensors.size() << "\n";
  for (const auto& [name, t] : tensors) {
    const torch::Tensor c = as_f32(t);
    const auto name_len = static_cast<std::uint32_t>(name.size());
    const auto ndim = static_cast<std::uint32_t>(c.dim());
    os.write(reinterpret_cast<const char*>(&name_len), 4);
    os.write(name.data(), name_len);
    os.write(reinterpret_cast<const char*>(&ndim), 4);
    for (std::int64_t d : c.sizes()) os.write(reinterpret_cast<const char*>(&d), 8);
    os.write(reinterpret_cast<const char*>(c.data_ptr<float>()),
             static_cast<std::streamsize>(c.numel() * sizeof(float)));
  }
  if (!os) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

TranslationModel TranslationModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string where = "checkpoint '" + path.string() + "'";
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw IoError(where + " has an unknown format or version");

  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string current;
  while (std::getline(is, line)) {
    if (line == "[weights]") break;
    if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos || current.empty()) throw IoError(where + ": malformed line '" + line + "'");
    sections[current][line.substr(0, eq)] = line.substr(eq + 3);
  }
  if (line != "[weights]") throw IoError(where + " is truncated before the weights");

  CycleGANConfig config;
  try {
    config = CycleGANConfig::from_map(sections["config"]);
  } catch (const ConfigError& e) {
    throw CheckpointIncompatible(where + ": " + e.what());
  }
  auto state = std::make_unique<State>(config);
  try {
    state->epoch = std::stoi(sections["meta"].at("epoch"));
    state->parent = sections["meta"].at("parent");
  } catch (const std::exception&) {
    throw IoError(where + " has an incomplete [meta] section");
  }

  if (!std::getline(is, line) || line.rfind("count = ", 0) != 0) throw IoError(where + ": missing weight count");
  const std::size_t count = std::stoul(line.substr(8));
  auto tensors = state->named_tensors();
  std::map<std::string, torch::Tensor> by_name(tensors.begin(), tensors.end());
  if (count != tensors.size()) {
    throw CheckpointIncompatible(where + " holds " + std::to_string(count) + " tensors, architecture expects " +
                                 std::to_string(tensors.size()));
  }
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0, ndim = 0;
    is.read(reinterpret_cast<char*>(&name_len), 4);
    if (!is || name_len > 4096) throw IoError(where + " is truncated or corrupt");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    is.read(reinterpret_cast<char*>(&ndim), 4);
    if (!is || ndim > 8) throw IoError(where + " is truncated or corrupt");
    std::vector<std::int64_t> shape(ndim);
    for (auto& d : shape) is.read(reinterpret_cast<char*>(&d), 8);
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointIncompatible(where + ": unexpected tensor '" + name + "'");
    if (!it->second.sizes().equals(shape)) {
      throw CheckpointIncompatible(where + ": tensor '" + name + "' has the wrong shape");
    }
    torch::Tensor buf = torch::empty(shape, torch::kFloat32);
    is.read(reinterpret_cast<char*>(buf.data_ptr<float>()), static_cast<std::streamsize>(buf.numel() * 4));
    if (!is) throw IoError(where + " is truncated");
    it->second.copy_(buf);
  }
  TranslationModel model(std::move(state));
  const auto stored = sections["meta"].find("id");
  if (stored != sections["meta"].end() && stored->second != model.id()) {
    throw IoError(where + " failed its content check (stored id " + stored->second + ")");
  }
  return model;
}

}  // namespace vhist
