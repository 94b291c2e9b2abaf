#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "protoseq/io.hpp"
#include "protoseq/model.hpp"

namespace protoseq {

// Checkpoint format shared by the generator and the filter scorer: one JSON
// header line (version, dtype, metadata, tensor names/shapes) followed by the
// raw little-endian values in header order.
inline void save_named_tensors(const std::string& path,
                               const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                               const json& meta) {
  json header;
  header["format"] = "protoseq-ckpt";
  header["version"] = 1;
  header["dtype"] = sizeof(real_t) == 8 ? "f64" : "f32";
  header["meta"] = meta;
  json names = json::array();
  for (const auto& [name, t] : tensors) {
    names.push_back({{"name", name}, {"rows", t->rows}, {"cols", t->cols}});
  }
  header["tensors"] = std::move(names);
  atomic_write(path, [&](std::ostream& os) {
    os << header.dump() << "\n";
    for (const auto& [name, t] : tensors) {
      os.write(reinterpret_cast<const char*>(t->data.data()),
               static_cast<std::streamsize>(t->data.size() * sizeof(real_t)));
    }
  });
}

struct LoadedTensors {
  json meta;
  std::map<std::string, Tensor> tensors;
};

inline LoadedTensors load_named_tensors(const std::string& path) {
  require_input(path);
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: " + path);
  std::string header_line;
  std::getline(in, header_line);
  json header = json::parse(header_line);
  require(header.value("format", "") == "protoseq-ckpt", "not a checkpoint file: " + path);
  require(header.value("version", 0) == 1, "unsupported checkpoint version");
  std::string dtype = sizeof(real_t) == 8 ? "f64" : "f32";
  require(header.value("dtype", "") == dtype, "checkpoint dtype mismatch (build precision differs)");
  LoadedTensors out;
  out.meta = header.value("meta", json::object());
  for (const auto& spec : header.at("tensors")) {
    int rows = spec.at("rows").get<int>(), cols = spec.at("cols").get<int>();
    Tensor t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(real_t)));
    require(in.good(), "checkpoint truncated: " + path);
    out.tensors.emplace(spec.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

inline void save_model(const std::string& path, const ModelParams& params, const ModelConfig& cfg,
                       const json& extra_meta = json::object()) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  params.visit([&](const std::string& name, const Tensor& t) { tensors.emplace_back(name, &t); });
  json meta = extra_meta;
  meta["model_config"] = cfg.to_json();
  save_named_tensors(path, tensors, meta);
}

struct LoadedModel {
  ModelConfig config;
  ModelParams params;
  json meta;
};

inline LoadedModel load_model(const std::string& path) {
  LoadedTensors raw = load_named_tensors(path);
  LoadedModel out;
  out.meta = raw.meta;
  out.config = ModelConfig::from_json(raw.meta.at("model_config"));
  RandomSource rng(0);
  out.params = ModelParams::init(out.config, rng);
  out.params.visit([&](const std::string& name, Tensor& t) {
    auto it = raw.tensors.find(name);
    require(it != raw.tensors.end(), "checkpoint missing tensor: " + name);
    require(it->second.same_shape(t), "checkpoint shape mismatch for " + name);
    t = it->second;
  });
  return out;
}

}  // namespace protoseq
