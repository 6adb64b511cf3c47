#include "rlst/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rlst {

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config: " + key + ": " + why);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) bad_key(key, "not a number: '" + v + "'");
    return d;
  } catch (const std::invalid_argument&) {
    bad_key(key, "not a number: '" + v + "'");
  } catch (const std::out_of_range&) {
    bad_key(key, "out of range: '" + v + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int64_t n = std::stoll(v, &used);
    if (used != v.size()) bad_key(key, "not an integer: '" + v + "'");
    return n;
  } catch (const std::invalid_argument&) {
    bad_key(key, "not an integer: '" + v + "'");
  } catch (const std::out_of_range&) {
    bad_key(key, "out of range: '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    uint64_t n = std::stoull(v, &used);
    if (used != v.size()) bad_key(key, "not an integer: '" + v + "'");
    return n;
  } catch (const std::invalid_argument&) {
    bad_key(key, "not an integer: '" + v + "'");
  } catch (const std::out_of_range&) {
    bad_key(key, "out of range: '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void set_config_key(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "gamma") c.gamma = parse_double(key, value);
  else if (key == "epsilon") c.epsilon = parse_double(key, value);
  else if (key == "m_penalty") c.m_penalty = parse_double(key, value);
  else if (key == "rho") c.rho = parse_double(key, value);
  else if (key == "eta_min") c.eta_min = parse_double(key, value);
  else if (key == "eta_max") c.eta_max = parse_double(key, value);
  else if (key == "teacher_forcing") c.teacher_forcing = parse_double(key, value);
  else if (key == "lr") c.lr = parse_double(key, value);
  else if (key == "weight_decay") c.weight_decay = parse_double(key, value);
  else if (key == "clip_norm") c.clip_norm = parse_double(key, value);
  else if (key == "batch_size") c.batch_size = int(parse_int(key, value));
  else if (key == "total_minibatches") c.total_minibatches = parse_int(key, value);
  else if (key == "epochs") c.epochs = int(parse_int(key, value));
  else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "emb_dim") c.emb_dim = int(parse_int(key, value));
  else if (key == "hidden_dim") c.hidden_dim = int(parse_int(key, value));
  else if (key == "gru_layers") c.gru_layers = int(parse_int(key, value));
  else if (key == "dropout_in") c.dropout_in = parse_double(key, value);
  else if (key == "dropout_out") c.dropout_out = parse_double(key, value);
  else if (key == "leaky_slope") c.leaky_slope = parse_double(key, value);
  else if (key == "precision") c.precision = value;
  else if (key == "task") c.task = value;
  else if (key == "alphabet") c.alphabet = int(parse_int(key, value));
  else if (key == "len_min") c.len_min = int(parse_int(key, value));
  else if (key == "len_max") c.len_max = int(parse_int(key, value));
  else if (key == "samples") c.samples = int(parse_int(key, value));
  else if (key == "train_file") c.train_file = value;
  else if (key == "valid_file") c.valid_file = value;
  else if (key == "test_file") c.test_file = value;
  else if (key == "src_vocab_file") c.src_vocab_file = value;
  else if (key == "trg_vocab_file") c.trg_vocab_file = value;
  else if (key == "min_freq") c.min_freq = int(parse_int(key, value));
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "threads") c.threads = int(parse_int(key, value));
  else if (key == "early_stop_bleu") c.early_stop_bleu = parse_double(key, value);
  else if (key == "bleu_smoothing") c.bleu_smoothing = value;
  else bad_key(key, "unknown key");
}

void RunConfig::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!(gamma > 0.0 && gamma < 1.0)) bad_key("gamma", "must be in (0, 1)");
  if (!in01(epsilon)) bad_key("epsilon", "must be in [0, 1]");
  if (!(m_penalty > 0.0)) bad_key("m_penalty", "must be > 0");
  if (!(rho > 0.0 && rho < 1.0)) bad_key("rho", "must be in (0, 1)");
  if (!(eta_min <= eta_max)) bad_key("eta_min", "must be <= eta_max");
  if (!in01(teacher_forcing)) bad_key("teacher_forcing", "must be in [0, 1]");
  if (!(lr > 0.0)) bad_key("lr", "must be > 0");
  if (weight_decay < 0.0) bad_key("weight_decay", "must be >= 0");
  if (!(clip_norm > 0.0)) bad_key("clip_norm", "must be > 0");
  if (batch_size < 1) bad_key("batch_size", "must be >= 1");
  if (total_minibatches < 0) bad_key("total_minibatches", "must be >= 0");
  if (epochs < 1) bad_key("epochs", "must be >= 1");
  if (emb_dim < 1) bad_key("emb_dim", "must be >= 1");
  if (hidden_dim < 1) bad_key("hidden_dim", "must be >= 1");
  if (gru_layers < 1) bad_key("gru_layers", "must be >= 1");
  if (!(dropout_in >= 0.0 && dropout_in < 1.0)) bad_key("dropout_in", "must be in [0, 1)");
  if (!(dropout_out >= 0.0 && dropout_out < 1.0)) bad_key("dropout_out", "must be in [0, 1)");
  if (precision != "fp64" && precision != "fp32") bad_key("precision", "must be fp64 or fp32");
  if (min_freq < 1) bad_key("min_freq", "must be >= 1");
  if (threads < 1) bad_key("threads", "must be >= 1");
  if (bleu_smoothing != "off" && bleu_smoothing != "add-one")
    bad_key("bleu_smoothing", "must be off or add-one");
  if (!task.empty()) {
    if (len_min < 1 || len_max < len_min) bad_key("len_min", "bad length range");
    if (alphabet < 2) bad_key("alphabet", "must be >= 2");
    if (samples < 10) bad_key("samples", "must be >= 10");
  }
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{{"gamma", gamma},
                        {"epsilon", epsilon},
                        {"m_penalty", m_penalty},
                        {"rho", rho},
                        {"eta_min", eta_min},
                        {"eta_max", eta_max},
                        {"teacher_forcing", teacher_forcing},
                        {"lr", lr},
                        {"weight_decay", weight_decay},
                        {"clip_norm", clip_norm},
                        {"batch_size", batch_size},
                        {"total_minibatches", total_minibatches},
                        {"epochs", epochs},
                        {"seed", seed},
                        {"emb_dim", emb_dim},
                        {"hidden_dim", hidden_dim},
                        {"gru_layers", gru_layers},
                        {"dropout_in", dropout_in},
                        {"dropout_out", dropout_out},
                        {"leaky_slope", leaky_slope},
                        {"precision", precision},
                        {"task", task},
                        {"alphabet", alphabet},
                        {"len_min", len_min},
                        {"len_max", len_max},
                        {"samples", samples},
                        {"train_file", train_file},
                        {"valid_file", valid_file},
                        {"test_file", test_file},
                        {"src_vocab_file", src_vocab_file},
                        {"trg_vocab_file", trg_vocab_file},
                        {"min_freq", min_freq},
                        {"out_dir", out_dir},
                        {"threads", threads},
                        {"early_stop_bleu", early_stop_bleu},
                        {"bleu_smoothing", bleu_smoothing}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.m_penalty = j.value("m_penalty", c.m_penalty);
  c.rho = j.value("rho", c.rho);
  c.eta_min = j.value("eta_min", c.eta_min);
  c.eta_max = j.value("eta_max", c.eta_max);
  c.teacher_forcing = j.value("teacher_forcing", c.teacher_forcing);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.total_minibatches = j.value("total_minibatches", c.total_minibatches);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.emb_dim = j.value("emb_dim", c.emb_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.gru_layers = j.value("gru_layers", c.gru_layers);
  c.dropout_in = j.value("dropout_in", c.dropout_in);
  c.dropout_out = j.value("dropout_out", c.dropout_out);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.precision = j.value("precision", c.precision);
  c.task = j.value("task", c.task);
  c.alphabet = j.value("alphabet", c.alphabet);
  c.len_min = j.value("len_min", c.len_min);
  c.len_max = j.value("len_max", c.len_max);
  c.samples = j.value("samples", c.samples);
  c.train_file = j.value("train_file", c.train_file);
  c.valid_file = j.value("valid_file", c.valid_file);
  c.test_file = j.value("test_file", c.test_file);
  c.src_vocab_file = j.value("src_vocab_file", c.src_vocab_file);
  c.trg_vocab_file = j.value("trg_vocab_file", c.trg_vocab_file);
  c.min_freq = j.value("min_freq", c.min_freq);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.threads = j.value("threads", c.threads);
  c.early_stop_bleu = j.value("early_stop_bleu", c.early_stop_bleu);
  c.bleu_smoothing = j.value("bleu_smoothing", c.bleu_smoothing);
  return c;
}

std::string RunConfig::describe() const {
  std::ostringstream ss;
  const nlohmann::json j = to_json();
  for (const auto& [k, v] : j.items()) {
    ss << k << " = ";
    if (v.is_string())
      ss << v.get<std::string>();
    else
      ss << v.dump();
    ss << '\n';
  }
  return ss.str();
}

RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides) {
  RunConfig cfg;
  bool seed_set = false;

  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot read " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                    ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      set_config_key(cfg, key, value);
      if (key == "seed") seed_set = true;
    }
  }

  for (const auto& [key, value] : overrides) {
    set_config_key(cfg, key, value);
    if (key == "seed") seed_set = true;
  }

  if (!seed_set) {
    if (const char* env = std::getenv("RLST_SEED")) cfg.seed = parse_u64("RLST_SEED", env);
  }

  cfg.validate();
  return cfg;
}

}  // namespace rlst
