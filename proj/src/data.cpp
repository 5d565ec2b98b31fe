#include "protorm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "protorm/encoder.hpp"
#include "protorm/error.hpp"
#include "protorm/rng.hpp"
#include "protorm/vec.hpp"

namespace protorm {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kSubsampleSalt = 0x5ab5;
constexpr std::uint64_t kSplitSalt = 0x5b117;

std::uint64_t fnv1a_append(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  return idx;
}

std::size_t floor_count(double x) {
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

std::string make_word(Rng& rng) {
  static constexpr std::string_view kConsonants = "bcdfghjklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  const std::size_t syllables = 2 + rng.index(3);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kConsonants[rng.index(kConsonants.size())];
    w += kVowels[rng.index(kVowels.size())];
  }
  return w;
}

std::vector<std::size_t> sample_tokens(std::span<const double> cumulative,
                                       std::size_t count, Rng& rng) {
  std::vector<std::size_t> tokens(count);
  const double total = cumulative.back();
  for (std::size_t& t : tokens) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    t = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                              cumulative.size() - 1);
  }
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& vocab,
                        const std::vector<std::size_t>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += vocab[tokens[i]];
  }
  return out;
}

}  // namespace

Dataset::Dataset(std::string source_name, std::vector<PreferenceExample> examples)
    : source_name_(std::move(source_name)), examples_(std::move(examples)) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const PreferenceExample& ex : examples_) {
    h = fnv1a_append(h, ex.prompt);
    h = fnv1a_append(h, "\x1f");
    h = fnv1a_append(h, ex.chosen);
    h = fnv1a_append(h, "\x1f");
    h = fnv1a_append(h, ex.rejected);
    h = fnv1a_append(h, "\x1e");
  }
  fingerprint_ = hex64(h);
}

Dataset load_jsonl(const std::filesystem::path& path, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset " + path.string());
  LoadReport local;
  std::vector<PreferenceExample> examples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto record = nlohmann::json::parse(line, nullptr, false);
    const auto text_field = [&](const char* key) -> const std::string* {
      if (!record.is_object()) return nullptr;
      const auto it = record.find(key);
      if (it == record.end() || !it->is_string()) return nullptr;
      return it->get_ptr<const std::string*>();
    };
    const std::string* prompt = text_field("prompt");
    const std::string* chosen = text_field("chosen");
    const std::string* rejected = text_field("rejected");
    if (record.is_discarded() || !prompt || !chosen || !rejected ||
        prompt->empty()) {
      ++local.malformed;
      continue;
    }
    if (*chosen == *rejected) {
      ++local.duplicates;
      continue;
    }
    examples.push_back(PreferenceExample{*prompt, *chosen, *rejected});
  }
  local.loaded = examples.size();
  if (report) *report = local;
  if (examples.empty()) {
    throw DataError("zero valid records in " + path.string());
  }
  return Dataset(path.filename().string(), std::move(examples));
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const PreferenceExample& ex : dataset.examples()) {
    ordered_json record;
    record["prompt"] = ex.prompt;
    record["chosen"] = ex.chosen;
    record["rejected"] = ex.rejected;
    out << record.dump() << '\n';
  }
}

Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("fraction must lie in (0, 1]");
  }
  const std::size_t n = floor_count(fraction * static_cast<double>(dataset.size()));
  if (n == 0) {
    throw ConfigError("fraction selects no examples from " +
                      std::to_string(dataset.size()));
  }
  const auto order = permutation(dataset.size(), mix_seed(seed, kSubsampleSalt));
  std::vector<PreferenceExample> picked;
  picked.reserve(n);
  for (std::size_t i = 0; i < n; ++i) picked.push_back(dataset[order[i]]);
  return Dataset(dataset.source_name(), std::move(picked));
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset,
                                                   double validation_fraction,
                                                   std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  const std::size_t n_val =
      floor_count(validation_fraction * static_cast<double>(dataset.size()));
  if (n_val == 0 || n_val >= dataset.size()) {
    throw DataError("dataset of " + std::to_string(dataset.size()) +
                    " pairs is too small to split");
  }
  auto order = permutation(dataset.size(), mix_seed(seed, kSplitSalt));
  std::vector<bool> in_val(dataset.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) in_val[order[i]] = true;
  std::vector<PreferenceExample> train;
  std::vector<PreferenceExample> val;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_val[i] ? val : train).push_back(dataset[i]);
  }
  return {Dataset(dataset.source_name(), std::move(train)),
          Dataset(dataset.source_name(), std::move(val))};
}

double SynthConfig::flip_probability() const {
  return std::clamp(quality_noise, 0.0, 0.5);
}

void SynthConfig::validate() const {
  if (num_examples == 0) throw ConfigError("num_examples must be positive");
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (tokens_per_text == 0) throw ConfigError("tokens_per_text must be positive");
  if (!(quality_noise >= 0.0)) throw ConfigError("quality_noise must be >= 0");
  if (!(quality_tilt >= 0.0)) throw ConfigError("quality_tilt must be >= 0");
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
}

SyntheticData synthesize(const SynthConfig& config) {
  config.validate();
  SyntheticData out;
  Rng vocab_rng(mix_seed(config.seed, 1));
  std::set<std::string> seen;
  while (out.vocabulary.size() < config.vocab_size) {
    std::string w = make_word(vocab_rng);
    if (seen.insert(w).second) out.vocabulary.push_back(std::move(w));
  }

  Rng dir_rng(mix_seed(config.seed, 2));
  Vector u(config.embed_dim);
  for (double& x : u) x = dir_rng.normal();
  const double un = std::sqrt(squared_norm(u));
  for (double& x : u) x /= un;
  for (const std::string& w : out.vocabulary) {
    out.word_quality.push_back(
        dot(u, encode_token(w, config.embed_dim, config.encoder_seed)));
  }

  const std::size_t v = config.vocab_size;
  std::vector<double> uniform_cdf(v);
  for (std::size_t i = 0; i < v; ++i) uniform_cdf[i] = static_cast<double>(i + 1);

  Rng rng(mix_seed(config.seed, 3));
  std::vector<double> cdf(v);
  const auto draw_answer = [&](std::vector<std::size_t>& tokens, double& quality) {
    const double level = 2.0 * rng.uniform() - 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
      acc += std::exp(config.quality_tilt * level * out.word_quality[i]);
      cdf[i] = acc;
    }
    tokens = sample_tokens(cdf, config.tokens_per_text, rng);
    quality = 0.0;
    for (std::size_t t : tokens) quality += out.word_quality[t];
  };

  std::vector<PreferenceExample> examples;
  for (std::size_t id = 0; id < config.num_examples; ++id) {
    const auto prompt_tokens = sample_tokens(uniform_cdf, config.tokens_per_text, rng);
    std::vector<std::size_t> a, b;
    double qa = 0.0, qb = 0.0;
    draw_answer(a, qa);
    do {
      draw_answer(b, qb);
    } while (qa == qb || a == b);
    const bool a_better = qa > qb;
    const bool flipped = rng.uniform() < config.flip_probability();
    std::string better = join_tokens(out.vocabulary, a_better ? a : b);
    std::string worse = join_tokens(out.vocabulary, a_better ? b : a);
    if (flipped) std::swap(better, worse);
    examples.push_back(PreferenceExample{join_tokens(out.vocabulary, prompt_tokens),
                                         std::move(better), std::move(worse)});
    out.oracle.push_back(OracleEntry{id, std::abs(qa - qb), flipped});
  }
  out.dataset = Dataset("synthetic-" + std::to_string(config.seed),
                        std::move(examples));
  return out;
}

double synthetic_quality(const SyntheticData& data, const std::string& text) {
  std::map<std::string_view, double> lookup;
  for (std::size_t i = 0; i < data.vocabulary.size(); ++i) {
    lookup.emplace(data.vocabulary[i], data.word_quality[i]);
  }
  double q = 0.0;
  for (std::string_view token : split_whitespace(text)) {
    const auto it = lookup.find(token);
    if (it != lookup.end()) q += it->second;
  }
  return q;
}

void save_oracle_jsonl(std::span<const OracleEntry> oracle,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const OracleEntry& e : oracle) {
    ordered_json record;
    record["id"] = e.id;
    record["gap"] = e.gap;
    record["flipped"] = e.flipped;
    out << record.dump() << '\n';
  }
}

double oracle_accuracy(std::span<const OracleEntry> oracle) {
  if (oracle.empty()) throw DataError("empty oracle");
  std::size_t kept = 0;
  for (const OracleEntry& e : oracle) kept += e.flipped ? 0 : 1;
  return static_cast<double>(kept) / static_cast<double>(oracle.size());
}

}  // namespace protorm
