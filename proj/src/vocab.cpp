#include "rlst/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rlst {

namespace {
const char* kReservedNames[kNumReserved] = {"<pad>", "<null>", "<eos>", "<unk>"};
}

Vocabulary::Vocabulary() {
  for (int32_t i = 0; i < kNumReserved; ++i) {
    tokens_.push_back(kReservedNames[i]);
    ids_.emplace(kReservedNames[i], i);
  }
}

int32_t Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int32_t id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range (size " +
                            std::to_string(size()) + ")");
  return tokens_[size_t(id)];
}

int32_t Vocabulary::add(const std::string& token) {
  if (ids_.count(token))
    throw std::invalid_argument("vocabulary: duplicate token '" + token + "'");
  int32_t id = size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

std::vector<int32_t> Vocabulary::encode(const std::string& sentence) const {
  std::vector<int32_t> out;
  for (const auto& tok : split_ws(sentence)) out.push_back(id_of(tok));
  out.push_back(kEosId);
  return out;
}

std::string Vocabulary::decode(const std::vector<int32_t>& ids) const {
  std::string out;
  for (int32_t id : ids) {
    if (id == kEosId || id == kPadId) continue;
    if (!out.empty()) out += ' ';
    out += token_of(id);
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("vocabulary: cannot write " + path);
  for (int32_t i = 0; i < size(); ++i) f << tokens_[size_t(i)] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("vocabulary: cannot read " + path);
  Vocabulary v;
  std::string line;
  int32_t expect = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("vocabulary: malformed line in " + path + ": " + line);
    std::string tok = line.substr(0, tab);
    int32_t id = std::stoi(line.substr(tab + 1));
    if (id != expect)
      throw std::runtime_error("vocabulary: non-contiguous id " + std::to_string(id) + " in " + path);
    if (id >= kNumReserved) v.add(tok);
    ++expect;
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (int32_t(i) < kNumReserved) continue;  // reserved names are fixed
    v.add(tokens[i]);
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& sentences, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  if (sentences.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, int64_t> counts;
  for (const auto& s : sentences)
    for (const auto& tok : split_ws(s)) ++counts[tok];

  std::vector<std::pair<std::string, int64_t>> kept;
  for (const auto& [tok, c] : counts)
    if (c >= min_freq) kept.emplace_back(tok, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [tok, c] : kept) v.add(tok);
  return v;
}

}  // namespace rlst
