#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace protorm {

struct PreferenceExample {
  std::string prompt;
  std::string chosen;
  std::string rejected;

  bool operator==(const PreferenceExample&) const = default;
};

// Immutable, ordered collection of preference pairs with a content hash.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string source_name, std::vector<PreferenceExample> examples);

  const std::vector<PreferenceExample>& examples() const { return examples_; }
  const PreferenceExample& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const std::string& source_name() const { return source_name_; }
  // 16 hex digits of a 64-bit FNV-1a hash over the ordered records.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::string source_name_;
  std::vector<PreferenceExample> examples_;
  std::string fingerprint_;
};

struct LoadReport {
  std::size_t loaded = 0;
  std::size_t malformed = 0;
  std::size_t duplicates = 0;  // chosen == rejected, skipped
};

// Reads {"prompt", "chosen", "rejected"} records, one JSON object per line.
// Malformed lines are skipped and counted; blank lines are ignored.
Dataset load_jsonl(const std::filesystem::path& path, LoadReport* report = nullptr);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// Seed-shuffled prefix of floor(fraction * N) examples. For a fixed seed the
// subsets grow by inclusion as the fraction grows.
Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed);

// (train, validation) with floor(validation_fraction * N) validation pairs;
// both keep the original relative order.
std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset,
                                                   double validation_fraction,
                                                   std::uint64_t seed);

// Synthetic preference data with a known linear quality rule.
//
// Every vocabulary word w has a quality weight q(w) = <u, phi(w)>, where phi is
// the frozen token encoder at (embed_dim, encoder_seed) and u is a seeded unit
// direction. An answer's quality is the sum of q over its tokens. Each answer
// draws a latent level z ~ U(-1, 1) and samples its tokens with probability
// proportional to exp(quality_tilt * z * q(w)). The higher-quality answer of a
// pair is labeled chosen, then the labels are swapped with probability
// min(quality_noise, 0.5).
struct SynthConfig {
  std::size_t num_examples = 1000;
  std::size_t vocab_size = 200;
  std::size_t tokens_per_text = 20;
  double quality_noise = 0.1;
  double quality_tilt = 4.0;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 16;
  std::uint64_t encoder_seed = 0;

  double flip_probability() const;
  void validate() const;
};

struct OracleEntry {
  std::size_t id = 0;
  double gap = 0.0;  // uncorrupted quality gap, always > 0
  bool flipped = false;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<OracleEntry> oracle;
  std::vector<std::string> vocabulary;
  std::vector<double> word_quality;
};

SyntheticData synthesize(const SynthConfig& config);

// Sum of word qualities over the whitespace tokens of `text`.
double synthetic_quality(const SyntheticData& data, const std::string& text);

void save_oracle_jsonl(std::span<const OracleEntry> oracle,
                       const std::filesystem::path& path);

// Fraction of unflipped pairs: the accuracy of the true quality rule.
double oracle_accuracy(std::span<const OracleEntry> oracle);

}  // namespace protorm
