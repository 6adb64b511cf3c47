#pragma once
// Token <-> id mapping with reserved PAD/NULL/EOS/UNK ids.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace rlst {

inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kNullId = 1;
inline constexpr int32_t kEosId = 2;
inline constexpr int32_t kUnkId = 3;
inline constexpr int32_t kNumReserved = 4;

class Vocabulary {
 public:
  Vocabulary();

  int32_t id_of(const std::string& token) const;  // UNK for unseen tokens
  const std::string& token_of(int32_t id) const;  // throws on out-of-range
  int32_t size() const { return int32_t(tokens_.size()); }
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  // Appends a non-reserved entry; rejects duplicates and reserved names.
  int32_t add(const std::string& token);

  std::vector<int32_t> encode(const std::string& sentence) const;  // appends EOS
  std::string decode(const std::vector<int32_t>& ids) const;       // drops EOS/PAD

  // "token<TAB>id" lines, reserved entries first; reload is bit-exact.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  const std::vector<std::string>& tokens() const { return tokens_; }
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> ids_;
};

std::vector<std::string> split_ws(const std::string& line);

// Tokens with count < min_freq map to UNK; the rest get ids 4.. in
// descending frequency, ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::string>& sentences, int min_freq);

}  // namespace rlst
