#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rlst/run.hpp"

using namespace rlst;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run(const std::string& out_dir) {
  RunConfig cfg;
  cfg.task = "copy";
  cfg.alphabet = 6;
  cfg.len_min = 2;
  cfg.len_max = 5;
  cfg.samples = 300;
  cfg.batch_size = 32;
  cfg.emb_dim = 8;
  cfg.hidden_dim = 16;
  cfg.gru_layers = 1;
  cfg.dropout_in = 0.0;
  cfg.dropout_out = 0.0;
  cfg.lr = 0.005;
  cfg.epochs = 3;
  cfg.seed = 11;
  cfg.min_freq = 1;
  cfg.threads = 2;
  cfg.out_dir = out_dir;
  cfg.precision = "fp32";
  cfg.bleu_smoothing = "add-one";
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("train_run writes checkpoints, metrics, and selects the best epoch") {
  auto dir = (fs::temp_directory_path() / "rlst_run_a").string();
  fs::remove_all(dir);
  auto cfg = tiny_run(dir);
  auto summary = train_run<float>(cfg, /*quiet=*/true);

  CHECK(summary.epochs_run == 3);
  CHECK(fs::exists(fs::path(dir) / "epoch_0001.rlst"));
  CHECK(fs::exists(fs::path(dir) / "epoch_0003.rlst"));
  CHECK(fs::exists(summary.best_checkpoint));
  CHECK(fs::exists(summary.metrics_path));

  // csv: config echo comments, header, one row per minibatch, val_bleu only
  // on the last row of each epoch
  std::ifstream csv(summary.metrics_path);
  std::string line;
  int comments = 0, rows = 0, vals = 0;
  bool header_seen = false;
  std::vector<std::string> data_lines;
  while (std::getline(csv, line)) {
    if (line.rfind("# ", 0) == 0) {
      ++comments;
      continue;
    }
    if (!header_seen) {
      CHECK(line == kMetricsHeader);
      header_seen = true;
      continue;
    }
    ++rows;
    data_lines.push_back(line);
    if (line.back() != ',') ++vals;
  }
  const int batches_per_epoch = (240 + 31) / 32;  // 300 * 0.8 train pairs
  CHECK(comments > 30);
  CHECK(rows == 3 * batches_per_epoch);
  CHECK(vals == 3);

  // the best checkpoint's recorded validation score dominates the csv column
  auto best = load_checkpoint<float>(summary.best_checkpoint);
  for (const auto& l : data_lines) {
    auto pos = l.rfind(',');
    if (pos + 1 == l.size()) continue;
    double v = std::stod(l.substr(pos + 1));
    CHECK(best.meta.val_bleu >= v - 1e-9);
  }
  CHECK(best.meta.val_bleu == doctest::Approx(summary.best_val_bleu));

  // reloaded checkpoint evaluates identically to the summary's test pass
  Dataset ds = prepare_dataset(cfg);
  auto rep = evaluate(best.net, ds.test, {}, BleuSmoothing::kAddOne, cfg.threads);
  CHECK(rep.bleu == doctest::Approx(summary.test_bleu).epsilon(1e-12));
  CHECK(rep.token_acc == doctest::Approx(summary.test_token_acc).epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_CASE("two runs with one seed produce identical bytes; seeds differ") {
  auto dir_a = (fs::temp_directory_path() / "rlst_run_b1").string();
  auto dir_b = (fs::temp_directory_path() / "rlst_run_b2").string();
  auto dir_c = (fs::temp_directory_path() / "rlst_run_b3").string();
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);

  auto cfg_a = tiny_run(dir_a);
  cfg_a.epochs = 2;
  auto cfg_b = cfg_a;
  cfg_b.out_dir = dir_b;
  auto cfg_c = cfg_a;
  cfg_c.out_dir = dir_c;
  cfg_c.seed = 12;

  train_run<float>(cfg_a, true);
  train_run<float>(cfg_b, true);
  train_run<float>(cfg_c, true);

  auto a_csv = slurp((fs::path(dir_a) / "metrics.csv").string());
  auto b_csv = slurp((fs::path(dir_b) / "metrics.csv").string());
  // the out_dir is echoed into the csv header; mask that one line
  auto mask = [](std::string s, const std::string& dir) {
    size_t pos = s.find(dir);
    while (pos != std::string::npos) {
      s.replace(pos, dir.size(), "<out>");
      pos = s.find(dir);
    }
    return s;
  };
  CHECK(mask(a_csv, dir_a) == mask(b_csv, dir_b));
  CHECK(mask(a_csv, dir_a) != mask(slurp((fs::path(dir_c) / "metrics.csv").string()), dir_c));

  auto a_ck = slurp((fs::path(dir_a) / "epoch_0002.rlst").string());
  auto b_ck = slurp((fs::path(dir_b) / "epoch_0002.rlst").string());
  CHECK(mask(a_ck, dir_a) == mask(b_ck, dir_b));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST_CASE("file-corpus path: explicit valid/test files are honored") {
  auto dir = (fs::temp_directory_path() / "rlst_run_files").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto write_corpus = [&](const std::string& name, int n, int offset) {
    std::ofstream f(fs::path(dir) / name);
    for (int i = 0; i < n; ++i) {
      f << "w" << (offset + i) % 7 << " w" << (offset + i + 1) % 7 << "\tw" << (offset + i) % 7
        << " w" << (offset + i + 1) % 7 << "\n";
    }
  };
  write_corpus("train.tsv", 7, 0);
  write_corpus("valid.tsv", 3, 2);
  write_corpus("test.tsv", 3, 4);

  RunConfig cfg = tiny_run((fs::path(dir) / "out").string());
  cfg.task = "";
  cfg.train_file = (fs::path(dir) / "train.tsv").string();
  cfg.valid_file = (fs::path(dir) / "valid.tsv").string();
  cfg.test_file = (fs::path(dir) / "test.tsv").string();
  cfg.batch_size = 4;
  cfg.epochs = 1;

  auto summary = train_run<float>(cfg, true);
  CHECK(summary.epochs_run == 1);
  CHECK(fs::exists(summary.best_checkpoint));
  fs::remove_all(dir);
}
