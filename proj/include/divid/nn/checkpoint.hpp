#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/data/tensor_io.hpp"
#include "divid/nn/layers.hpp"

namespace divid::nn {

namespace fs = std::filesystem;

// Checkpoint directory layout:
//   params.dvtn   concatenated DVTN records, one per parameter, in index order
//   params.index  one line per parameter: `<name> <byte offset> <shape, e.g. 3x3x16>`
//   config.json   model/training configuration snapshot (includes the producing config digest)

inline constexpr const char* kParamsFile = "params.dvtn";
inline constexpr const char* kIndexFile = "params.index";
inline constexpr const char* kConfigFile = "config.json";

template <typename T>
void save_checkpoint(const fs::path& dir, const std::vector<Param<T>*>& params, const nlohmann::json& config) {
  fs::create_directories(dir);
  std::ofstream bin(dir / kParamsFile, std::ios::binary | std::ios::trunc);
  std::ofstream idx(dir / kIndexFile, std::ios::trunc);
  if (!bin || !idx) throw DataError("cannot write checkpoint in " + dir.string());
  std::size_t offset = 0;
  for (const auto* p : params) {
    const auto bytes = data::encode_tensor(p->value);
    bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    idx << p->name << ' ' << offset << ' ' << shape_str(p->value.shape()).substr(1, std::string::npos) << '\n';
    offset += bytes.size();
  }
  std::ofstream cfg(dir / kConfigFile, std::ios::trunc);
  cfg << config.dump(2) << '\n';
}

inline nlohmann::json read_checkpoint_config(const fs::path& dir) {
  std::ifstream in(dir / kConfigFile);
  if (!in) throw DataError("no checkpoint config at " + (dir / kConfigFile).string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint config: " + std::string(e.what()));
  }
}

// Loads parameters by name; every requested parameter must be present with a matching shape.
template <typename T>
void load_checkpoint(const fs::path& dir, const std::vector<Param<T>*>& params) {
  std::ifstream idx(dir / kIndexFile);
  std::ifstream bin(dir / kParamsFile, std::ios::binary);
  if (!idx || !bin) throw DataError("incomplete checkpoint in " + dir.string());
  std::map<std::string, std::size_t> offsets;
  std::string line;
  while (std::getline(idx, line)) {
    std::istringstream ls(line);
    std::string name;
    std::size_t off = 0;
    if (ls >> name >> off) offsets[name] = off;
  }
  for (auto* p : params) {
    auto it = offsets.find(p->name);
    if (it == offsets.end()) throw DataError("checkpoint " + dir.string() + " lacks parameter " + p->name);
    bin.clear();
    bin.seekg(static_cast<std::streamoff>(it->second));
    auto t = data::read_record(bin, (dir / kParamsFile).string()).template as<T>();
    if (t.shape() != p->value.shape()) {
      throw DataError("parameter " + p->name + " has shape " + shape_str(t.shape()) + ", expected " +
                      shape_str(p->value.shape()));
    }
    p->value = std::move(t);
    p->grad = BasicTensor<T>(p->value.shape());
  }
}

}  // namespace divid::nn
