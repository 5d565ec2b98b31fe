#include "protorm/encoder.hpp"

#include <cmath>
#include <string>

#include "protorm/error.hpp"
#include "protorm/rng.hpp"

namespace protorm {
namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void add_feature(std::string_view feature, std::uint64_t seed, Vector& out) {
  const std::uint64_t h = fnv1a(feature, mix_seed(0xcbf29ce484222325ULL, seed));
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::uint64_t bits = mix_seed(h, j);
    // uniform in [-1, 1)
    out[j] += static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
  }
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

void EncoderConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
  if (align.max_prompt_tokens == 0 || align.max_answer_tokens == 0) {
    throw ConfigError("max_prompt_tokens and max_answer_tokens must be positive");
  }
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

Vector encode_token(std::string_view token, std::size_t embed_dim,
                    std::uint64_t seed) {
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
  Vector v(embed_dim, 0.0);
  const std::string marked = "<" + std::string(token) + ">";
  add_feature(marked, seed, v);
  for (std::size_t i = 0; i + 3 <= marked.size(); ++i) {
    add_feature(std::string_view(marked).substr(i, 3), seed, v);
  }
  const double norm = std::sqrt(squared_norm(v));
  if (norm == 0.0) {
    v.assign(embed_dim, 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

TokenEmbeddingSequence encode_text(std::string_view text, std::size_t embed_dim,
                                   std::uint64_t seed) {
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
  TokenEmbeddingSequence seq;
  seq.embed_dim = embed_dim;
  for (std::string_view token : split_whitespace(text)) {
    seq.vectors.push_back(encode_token(token, embed_dim, seed));
  }
  return seq;
}

TokenEmbeddingSequence truncate(TokenEmbeddingSequence seq,
                                std::size_t max_tokens, Truncation policy) {
  if (seq.token_count() <= max_tokens) return seq;
  if (policy == Truncation::tail) {
    seq.vectors.resize(max_tokens);
  } else {
    seq.vectors.erase(seq.vectors.begin(),
                      seq.vectors.end() - static_cast<std::ptrdiff_t>(max_tokens));
  }
  return seq;
}

Vector align(const TokenEmbeddingSequence& seq, std::size_t target_tokens) {
  if (seq.token_count() > target_tokens) {
    throw TruncationError("sequence of " + std::to_string(seq.token_count()) +
                          " tokens exceeds alignment target of " +
                          std::to_string(target_tokens));
  }
  Vector out(target_tokens * seq.embed_dim, 0.0);
  std::size_t pos = 0;
  for (const Vector& v : seq.vectors) {
    if (v.size() != seq.embed_dim) {
      throw DimensionError("token vector has inconsistent dimensionality");
    }
    for (double x : v) out[pos++] = x;
  }
  return out;
}

EncodedPair encode_pair(std::string_view prompt, std::string_view answer,
                        const EncoderConfig& config) {
  config.validate();
  const auto prompt_seq =
      truncate(encode_text(prompt, config.embed_dim, config.seed),
               config.align.max_prompt_tokens, config.truncate);
  const auto answer_seq =
      truncate(encode_text(answer, config.embed_dim, config.seed),
               config.align.max_answer_tokens, config.truncate);

  EncodedPair pair;
  pair.prompt_dim = config.prompt_dim();
  pair.combined = align(prompt_seq, config.align.max_prompt_tokens);
  const Vector answer_part = align(answer_seq, config.align.max_answer_tokens);
  pair.combined.insert(pair.combined.end(), answer_part.begin(),
                       answer_part.end());
  return pair;
}

}  // namespace protorm
