#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lgcn {

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Word and character id maps. Id 0 is padding and id 1 is unknown in both.
class Vocabulary {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kUnk = 1;

  Vocabulary();
  /// Ids are assigned from 2 in the given order; characters are collected
  /// from the tokens and numbered in ascending byte order.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::int64_t id(std::string_view token) const;
  const std::string& token(std::int64_t id) const;
  std::int64_t char_id(char c) const;
  std::size_t size() const { return tokens_.size(); }
  std::size_t char_count() const { return char_ids_.size() + 2; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line; line i holds id i (the first two lines are the
  /// pad and unk placeholders).
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::int64_t, std::less<>> ids_;
  std::map<char, std::int64_t> char_ids_;
};

/// Counts tokens over the corpus and keeps those seen at least `min_count`
/// times, ordered by descending count then ascending token.
Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count = 1);

}  // namespace lgcn
