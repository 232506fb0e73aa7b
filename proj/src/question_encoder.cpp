#include "lgcn/question_encoder.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "lgcn/ops.hpp"

namespace lgcn {

TokenizedText tokenize_ids(const std::vector<std::int64_t>& ids, const Vocabulary& vocab, std::size_t max_words,
                           std::size_t chars_per_word, std::size_t word_cap) {
  if (ids.empty()) throw ContractError("tokenized text needs at least one word");
  std::size_t length = ids.size();
  if (length > word_cap) {
    std::cerr << "warning: truncating text of " << length << " words to " << word_cap << '\n';
    length = word_cap;
  }
  if (max_words == 0) max_words = length;
  if (length > max_words) length = max_words;

  TokenizedText text;
  text.chars_per_word = chars_per_word;
  text.length = length;
  text.word_ids.assign(max_words, Vocabulary::kPad);
  text.char_ids.assign(max_words * chars_per_word, Vocabulary::kPad);
  for (std::size_t w = 0; w < length; ++w) {
    text.word_ids[w] = ids[w];
    const std::string& token = vocab.token(ids[w]);
    if (ids[w] == Vocabulary::kUnk) {
      text.char_ids[w * chars_per_word] = Vocabulary::kUnk;
      continue;
    }
    for (std::size_t c = 0; c < chars_per_word && c < token.size(); ++c) {
      text.char_ids[w * chars_per_word + c] = vocab.char_id(token[c]);
    }
  }
  return text;
}

TokenizedText tokenize_text(const std::string& text, const Vocabulary& vocab, std::size_t max_words,
                            std::size_t chars_per_word, std::size_t word_cap) {
  std::vector<std::int64_t> ids;
  for (const auto& token : tokenize(text)) ids.push_back(vocab.id(token));
  TokenizedText out = tokenize_ids(ids, vocab, max_words, chars_per_word, word_cap);
  // Unknown words keep their spelling for the character channel.
  const auto tokens = tokenize(text);
  for (std::size_t w = 0; w < out.length; ++w) {
    if (out.word_ids[w] != Vocabulary::kUnk) continue;
    for (std::size_t c = 0; c < chars_per_word; ++c) {
      out.char_ids[w * chars_per_word + c] = c < tokens[w].size() ? vocab.char_id(tokens[w][c]) : Vocabulary::kPad;
    }
  }
  return out;
}

QuestionEncoder QuestionEncoder::create(ParamStore& params, const std::string& name, std::size_t word_vocab,
                                        std::size_t char_vocab, const QuestionDims& dims, Rng& rng) {
  QuestionEncoder enc;
  enc.words = EmbeddingTable::create(params, name + ".word_emb", word_vocab, dims.word_dim, rng);
  enc.chars = EmbeddingTable::create(params, name + ".char_emb", char_vocab, dims.char_dim, rng);
  enc.char_conv = Conv2d::create(params, name + ".char_cnn", dims.char_width, dims.char_dim, dims.char_kernels, rng);
  const std::size_t embed = dims.word_dim + dims.char_kernels;
  enc.highway = Highway::create(params, name + ".highway", embed, rng);
  enc.rnn = BiLstm::create(params, name + ".bilstm", embed, dims.hidden, rng);
  return enc;
}

Tensor embed_question(const TokenizedText& text, const QuestionEncoder& encoder) {
  const std::size_t words = text.max_words();
  if (text.char_ids.size() != words * text.chars_per_word) {
    throw DimensionError("tokenized text: " + std::to_string(text.char_ids.size()) + " char ids for " +
                         std::to_string(words) + " words of " + std::to_string(text.chars_per_word));
  }
  Tensor word_rows = embedding_lookup(encoder.words, text.word_ids);
  Tensor char_rows = embedding_lookup(encoder.chars, text.char_ids);
  Tensor char_emb = reshape(char_rows, {words, text.chars_per_word, encoder.chars.dim()});
  Tensor char_feat = char_cnn(encoder.char_conv, char_emb);
  return highway_forward(encoder.highway, concat_last({word_rows, char_feat}));
}

QuestionFeatures encode_question(const Tensor& embedded, const BiLstm& rnn, std::size_t length) {
  if (length == 0) throw ContractError("encode_question: empty question");
  QuestionFeatures out;
  out.features = bilstm_forward(rnn, embedded, length);
  out.length = length;
  out.mask.assign(embedded.dim(0), false);
  for (std::size_t i = 0; i < length; ++i) out.mask[i] = true;
  return out;
}

QuestionFeatures encode_text(const TokenizedText& text, const QuestionEncoder& encoder) {
  return encode_question(embed_question(text, encoder), encoder.rnn, text.length);
}

std::size_t load_pretrained_embeddings(EmbeddingTable& table, const Vocabulary& vocab,
                                       const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read embeddings " + path.string());
  auto values = table.rows.mutable_data();
  const std::size_t dim = table.dim();
  std::size_t loaded = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> row;
    double v = 0.0;
    while (fields >> v) row.push_back(v);
    if (row.size() != dim) {
      throw DimensionError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                           " values, got " + std::to_string(row.size()));
    }
    const std::int64_t id = vocab.id(token);
    if (id <= Vocabulary::kUnk || id >= static_cast<std::int64_t>(table.vocab())) continue;
    std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(id * dim));
    ++loaded;
  }
  return loaded;
}

}  // namespace lgcn
