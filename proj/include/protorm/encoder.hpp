#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protorm/vec.hpp"

namespace protorm {

// Per-token embedding vectors of one text, before alignment.
struct TokenEmbeddingSequence {
  std::size_t embed_dim = 0;
  std::vector<Vector> vectors;

  std::size_t token_count() const { return vectors.size(); }
};

// Fixed token budget for the prompt and answer halves of a pair embedding.
struct AlignSpec {
  std::size_t max_prompt_tokens = 64;
  std::size_t max_answer_tokens = 64;
};

enum class Truncation { tail, head };

struct EncoderConfig {
  std::size_t embed_dim = 16;
  AlignSpec align;
  std::uint64_t seed = 0;
  Truncation truncate = Truncation::tail;

  std::size_t prompt_dim() const { return align.max_prompt_tokens * embed_dim; }
  std::size_t answer_dim() const { return align.max_answer_tokens * embed_dim; }
  std::size_t combined_dim() const { return prompt_dim() + answer_dim(); }

  void validate() const;
};

// Aligned (prompt, answer) embedding. The prompt block occupies the first
// prompt_dim entries of `combined`, the answer block the rest.
struct EncodedPair {
  Vector combined;
  std::size_t prompt_dim = 0;

  std::span<const double> prompt_part() const {
    return std::span<const double>(combined).first(prompt_dim);
  }
  std::span<const double> answer_part() const {
    return std::span<const double>(combined).subspan(prompt_dim);
  }
};

std::vector<std::string_view> split_whitespace(std::string_view text);

// Unit-norm feature vector of one token, built by summing seeded hash
// projections of its boundary-marked character trigrams and the whole token.
Vector encode_token(std::string_view token, std::size_t embed_dim,
                    std::uint64_t seed);

TokenEmbeddingSequence encode_text(std::string_view text, std::size_t embed_dim,
                                   std::uint64_t seed);

// Drops tokens beyond max_tokens: `tail` keeps the first max_tokens, `head`
// keeps the last max_tokens.
TokenEmbeddingSequence truncate(TokenEmbeddingSequence seq,
                                std::size_t max_tokens, Truncation policy);

// Flattens the sequence into target_tokens * embed_dim entries, zero padded.
// Throws TruncationError if the sequence is longer than target_tokens.
Vector align(const TokenEmbeddingSequence& seq, std::size_t target_tokens);

EncodedPair encode_pair(std::string_view prompt, std::string_view answer,
                        const EncoderConfig& config);

}  // namespace protorm
