#pragma once
// Checkpoint file: "RLST1\n", one line of UTF-8 JSON metadata (config echo,
// counters, seeds, vocabularies, parameter manifest), then raw little-endian
// fp32 parameter arrays in manifest order followed by the optimizer moments
// in the same order. Readers verify the magic and the manifest-computed
// total length.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlst/config.hpp"
#include "rlst/network.hpp"
#include "rlst/optim.hpp"
#include "rlst/trainer.hpp"
#include "rlst/vocab.hpp"

namespace rlst {

inline constexpr const char* kCheckpointMagic = "RLST1";

struct CheckpointMeta {
  RunConfig config;
  int64_t n = 0;  // minibatch counter
  int64_t epoch = 0;
  uint64_t seed = 0;
  int64_t adam_step = 0;
  double bar_m = 0.0;
  double bar_e = 0.0;
  double val_bleu = -1.0;
  std::vector<std::string> src_tokens;
  std::vector<std::string> trg_tokens;
};

namespace detail {

inline void write_f32(std::ofstream& f, const std::vector<float>& v) {
  f.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
}

template <typename T>
std::vector<float> to_f32(const std::vector<T>& v) {
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = float(v[i]);
  return out;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const RLSTNet<T>& net, const AdamState<T>& adam,
                     const CheckpointMeta& meta) {
  nlohmann::json manifest = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& p : net.params) {
    nlohmann::json shape = nlohmann::json::array();
    shape.push_back(p.shape.d0);
    if (p.shape.d1 > 0) shape.push_back(p.shape.d1);
    manifest.push_back({{"name", p.name}, {"shape", shape}, {"offset", offset}});
    offset += int64_t(p.data.size());
  }

  nlohmann::json j{{"config", meta.config.to_json()},
                   {"n", meta.n},
                   {"epoch", meta.epoch},
                   {"seed", meta.seed},
                   {"adam_step", meta.adam_step},
                   {"bar_m", meta.bar_m},
                   {"bar_e", meta.bar_e},
                   {"val_bleu", meta.val_bleu},
                   {"src_vocab", meta.src_tokens},
                   {"trg_vocab", meta.trg_tokens},
                   {"params", manifest},
                   {"total_values", offset}};

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  f << kCheckpointMagic << '\n' << j.dump() << '\n';
  for (const auto& p : net.params) detail::write_f32(f, detail::to_f32(p.data));
  for (size_t i = 0; i < net.params.size(); ++i) {
    detail::write_f32(f, detail::to_f32(adam.m[i]));
    detail::write_f32(f, detail::to_f32(adam.v[i]));
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
  std::string magic, meta_line;
  std::getline(f, magic);
  if (magic != kCheckpointMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::getline(f, meta_line);
  nlohmann::json j = nlohmann::json::parse(meta_line, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("checkpoint: malformed metadata in " + path);
  return j;
}

template <typename T>
struct LoadedCheckpoint {
  RLSTNet<T> net;
  AdamState<T> adam;
  CheckpointMeta meta;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  nlohmann::json j = read_checkpoint_meta(path);

  LoadedCheckpoint<T> out;
  out.meta.config = RunConfig::from_json(j.at("config"));
  out.meta.n = j.at("n").get<int64_t>();
  out.meta.epoch = j.at("epoch").get<int64_t>();
  out.meta.seed = j.at("seed").get<uint64_t>();
  out.meta.adam_step = j.at("adam_step").get<int64_t>();
  out.meta.bar_m = j.at("bar_m").get<double>();
  out.meta.bar_e = j.at("bar_e").get<double>();
  out.meta.val_bleu = j.value("val_bleu", -1.0);
  out.meta.src_tokens = j.at("src_vocab").get<std::vector<std::string>>();
  out.meta.trg_tokens = j.at("trg_vocab").get<std::vector<std::string>>();

  RLSTNetConfig ncfg;
  ncfg.src_vocab_size = int32_t(out.meta.src_tokens.size());
  ncfg.trg_vocab_size = int32_t(out.meta.trg_tokens.size());
  ncfg.emb_dim = out.meta.config.emb_dim;
  ncfg.hidden_dim = out.meta.config.hidden_dim;
  ncfg.num_gru_layers = out.meta.config.gru_layers;
  ncfg.leaky_slope = out.meta.config.leaky_slope;
  ncfg.dropout_in = out.meta.config.dropout_in;
  ncfg.dropout_out = out.meta.config.dropout_out;
  out.net = init_network<T>(ncfg, 0);
  out.adam = AdamState<T>::init(out.net.params);

  const auto& manifest = j.at("params");
  if (manifest.size() != out.net.params.size())
    throw std::runtime_error("checkpoint: manifest size mismatch in " + path);
  const int64_t total = j.at("total_values").get<int64_t>();

  std::ifstream f(path, std::ios::binary);
  std::string line;
  std::getline(f, line);  // magic
  std::getline(f, line);  // metadata
  const std::streampos blob_start = f.tellg();
  f.seekg(0, std::ios::end);
  const int64_t blob_bytes = int64_t(f.tellg() - blob_start);
  if (blob_bytes != total * 3 * int64_t(sizeof(float)))
    throw std::runtime_error("checkpoint: length does not match manifest in " + path);
  f.seekg(blob_start);

  auto read_into = [&](std::vector<T>& dst, size_t want) {
    std::vector<float> buf(want);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(want * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: truncated read in " + path);
    dst.resize(want);
    for (size_t i = 0; i < want; ++i) dst[i] = T(buf[i]);
  };

  int64_t expect_offset = 0;
  for (size_t i = 0; i < out.net.params.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != out.net.params[i].name)
      throw std::runtime_error("checkpoint: parameter order mismatch at " +
                               out.net.params[i].name);
    if (entry.at("offset").get<int64_t>() != expect_offset)
      throw std::runtime_error("checkpoint: bad offset for " + out.net.params[i].name);
    expect_offset += int64_t(out.net.params[i].data.size());
    read_into(out.net.params[i].data, out.net.params[i].data.size());
  }
  for (size_t i = 0; i < out.net.params.size(); ++i) {
    read_into(out.adam.m[i], out.net.params[i].data.size());
    read_into(out.adam.v[i], out.net.params[i].data.size());
  }
  out.adam.step = out.meta.adam_step;
  return out;
}

}  // namespace rlst
