#include <doctest.h>

#include <cmath>
#include <string>

#include "protorm/encoder.hpp"
#include "protorm/error.hpp"
#include "protorm/vec.hpp"

using namespace protorm;

TEST_CASE("encode_text is deterministic") {
  const auto a = encode_text("the quick brown fox", 16, 3);
  const auto b = encode_text("the quick brown fox", 16, 3);
  REQUIRE(a.token_count() == 4);
  for (std::size_t i = 0; i < a.token_count(); ++i) CHECK(a.vectors[i] == b.vectors[i]);
}

TEST_CASE("empty text has no tokens") {
  CHECK(encode_text("", 8, 0).token_count() == 0);
  CHECK(encode_text("  \t\n ", 8, 0).token_count() == 0);
}

TEST_CASE("token vectors have unit norm over a 100 token corpus") {
  std::string corpus;
  for (int i = 0; i < 100; ++i) corpus += "tok" + std::to_string(i * 37 % 1000) + "x ";
  for (std::size_t dim : {1u, 2u, 8u, 16u, 64u}) {
    const auto seq = encode_text(corpus, dim, 11);
    REQUIRE(seq.token_count() == 100);
    for (const Vector& v : seq.vectors) {
      CHECK(v.size() == dim);
      CHECK(std::abs(std::sqrt(squared_norm(v)) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("encoder seed changes the features") {
  CHECK(encode_token("word", 16, 0) != encode_token("word", 16, 1));
  CHECK(encode_token("word", 16, 0) != encode_token("ward", 16, 0));
}

TEST_CASE("align pads with zeros") {
  TokenEmbeddingSequence seq{2, {Vector{3.0, 4.0}}};
  CHECK(align(seq, 3) == Vector{3, 4, 0, 0, 0, 0});

  TokenEmbeddingSequence full{2, {Vector{1, 2}, Vector{3, 4}}};
  CHECK(align(full, 2) == Vector{1, 2, 3, 4});

  TokenEmbeddingSequence empty{2, {}};
  CHECK(align(empty, 4) == Vector(8, 0.0));
}

TEST_CASE("align rejects long sequences") {
  TokenEmbeddingSequence seq{1, {Vector{1}, Vector{2}, Vector{3}}};
  CHECK_THROWS_AS(align(seq, 2), TruncationError);
}

TEST_CASE("align is idempotent") {
  const auto seq = encode_text("a bb ccc", 4, 0);
  const Vector once = align(seq, 5);
  TokenEmbeddingSequence as_tokens{4, {}};
  for (std::size_t t = 0; t < 5; ++t) {
    as_tokens.vectors.emplace_back(once.begin() + t * 4, once.begin() + (t + 1) * 4);
  }
  CHECK(align(as_tokens, 5) == once);
  for (std::size_t i = 3 * 4; i < once.size(); ++i) CHECK(once[i] == 0.0);
}

TEST_CASE("truncation policies") {
  const auto seq = encode_text("a b c d", 4, 0);
  const auto tail = truncate(seq, 2, Truncation::tail);
  const auto head = truncate(seq, 2, Truncation::head);
  CHECK(tail.vectors[0] == seq.vectors[0]);
  CHECK(tail.vectors[1] == seq.vectors[1]);
  CHECK(head.vectors[0] == seq.vectors[2]);
  CHECK(head.vectors[1] == seq.vectors[3]);
  CHECK(truncate(seq, 10, Truncation::tail).token_count() == 4);
}

TEST_CASE("encode_pair layout") {
  EncoderConfig cfg;
  cfg.embed_dim = 4;
  cfg.align = {3, 5};
  const auto empty = encode_pair("", "", cfg);
  CHECK(empty.combined == Vector(32, 0.0));

  const auto a = encode_pair("shared prompt", "first answer", cfg);
  const auto b = encode_pair("shared prompt", "another longer answer here", cfg);
  CHECK(a.combined.size() == cfg.combined_dim());
  CHECK(b.combined.size() == cfg.combined_dim());
  CHECK(std::equal(a.prompt_part().begin(), a.prompt_part().end(),
                   b.prompt_part().begin()));
  CHECK(a.answer_part()[0] != b.answer_part()[4]);
  // answer beyond its two tokens is zero
  for (std::size_t i = 2 * 4; i < a.answer_part().size(); ++i) {
    CHECK(a.answer_part()[i] == 0.0);
  }
}

TEST_CASE("encode_pair truncates over-long text by policy") {
  EncoderConfig cfg;
  cfg.embed_dim = 2;
  cfg.align = {1, 2};
  const auto tail = encode_pair("p q", "a b c", cfg);
  const auto a = encode_token("a", 2, 0);
  CHECK(tail.answer_part()[0] == a[0]);
  cfg.truncate = Truncation::head;
  const auto head = encode_pair("p q", "a b c", cfg);
  const auto c = encode_token("c", 2, 0);
  CHECK(head.answer_part()[2] == c[0]);
}
