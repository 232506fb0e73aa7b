#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lgcn/layers.hpp"
#include "lgcn/vocab.hpp"

namespace lgcn {

/// Word ids and per-word character ids for one question or answer option.
struct TokenizedText {
  std::vector<std::int64_t> word_ids;  // kappa entries, 0 = pad
  std::vector<std::int64_t> char_ids;  // kappa * chars_per_word, row-major
  std::size_t chars_per_word = 16;
  std::size_t length = 0;  // number of non-pad words

  std::size_t max_words() const { return word_ids.size(); }
};

/// Maps token ids to a TokenizedText padded to `max_words` (or to its own
/// length when max_words is 0). Longer inputs are truncated with a warning
/// on stderr; words are padded or truncated to `chars_per_word`.
TokenizedText tokenize_ids(const std::vector<std::int64_t>& ids, const Vocabulary& vocab, std::size_t max_words,
                           std::size_t chars_per_word, std::size_t word_cap = 32);
TokenizedText tokenize_text(const std::string& text, const Vocabulary& vocab, std::size_t max_words,
                            std::size_t chars_per_word, std::size_t word_cap = 32);

struct QuestionDims {
  std::size_t word_dim = 300;
  std::size_t char_dim = 16;      // d_c
  std::size_t char_kernels = 64;  // d_char
  std::size_t char_width = 5;
  std::size_t chars_per_word = 16;
  std::size_t hidden = 64;  // per direction
};

struct QuestionEncoder {
  EmbeddingTable words;
  EmbeddingTable chars;
  Conv2d char_conv;
  Highway highway;
  BiLstm rnn;

  static QuestionEncoder create(ParamStore& params, const std::string& name, std::size_t word_vocab,
                                std::size_t char_vocab, const QuestionDims& dims, Rng& rng);
  std::size_t embed_dim() const { return highway.dim(); }
  std::size_t feature_dim() const { return rnn.out_dim(); }
};

struct QuestionFeatures {
  Tensor features;         // [kappa x 2h]
  std::vector<bool> mask;  // true for real words
  std::size_t length = 0;
};

/// Word embedding and character CNN output concatenated, then the highway
/// network. Returns [kappa x (d_w + d_char)].
Tensor embed_question(const TokenizedText& text, const QuestionEncoder& encoder);

/// Bi-LSTM over the embedded words; rows from `length` on are zero.
QuestionFeatures encode_question(const Tensor& embedded, const BiLstm& rnn, std::size_t length);

QuestionFeatures encode_text(const TokenizedText& text, const QuestionEncoder& encoder);

/// Reads "token v1 ... vD" lines and overwrites matching word rows.
/// Returns the number of rows loaded.
std::size_t load_pretrained_embeddings(EmbeddingTable& table, const Vocabulary& vocab,
                                       const std::filesystem::path& path);

}  // namespace lgcn
