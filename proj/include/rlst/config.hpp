#pragma once
// Run configuration: every hyperparameter with its published default, a flat
// "key = value" file format, and command-line overrides.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rlst {

struct RunConfig {
  // decision process / learning
  double gamma = 0.9;
  double epsilon = 0.3;
  double m_penalty = 3.0;
  double rho = 0.99;
  double eta_min = 0.02;
  double eta_max = 0.2;
  double teacher_forcing = 1.0;
  double lr = 0.0003;
  double weight_decay = 1e-5;
  double clip_norm = 10.0;
  int batch_size = 128;
  int64_t total_minibatches = 0;  // 0: epochs * ceil(|train| / batch_size)
  int epochs = 30;
  uint64_t seed = 1;

  // approximator
  int emb_dim = 256;
  int hidden_dim = 512;
  int gru_layers = 4;
  double dropout_in = 0.2;
  double dropout_out = 0.5;
  double leaky_slope = 0.01;
  std::string precision = "fp64";  // fp64 | fp32

  // data: either a synthetic task or corpus files
  std::string task;  // copy | reverse | double | dedup-runs; empty = files
  int alphabet = 16;
  int len_min = 2;
  int len_max = 12;
  int samples = 20000;
  std::string train_file, valid_file, test_file;
  std::string src_vocab_file, trg_vocab_file;
  int min_freq = 3;

  // run control
  std::string out_dir = "runs/default";
  int threads = 2;
  double early_stop_bleu = 2.0;  // > 1 disables early stopping
  std::string bleu_smoothing = "off";  // off | add-one

  void validate() const;  // throws std::invalid_argument naming the key
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  std::string describe() const;  // resolved "key = value" lines
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

// Missing path (empty string) means defaults only. Overrides win over file
// values; unknown keys are rejected; RLST_SEED supplies the seed when
// neither source sets it.
RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides);

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace rlst
