#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protorm/data.hpp"
#include "protorm/encoder.hpp"
#include "protorm/kernels.hpp"
#include "protorm/loss.hpp"
#include "protorm/prototypes.hpp"
#include "protorm/scoring.hpp"

namespace protorm {

enum class Mode { proto, baseline };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct TrainConfig {
  std::size_t batch_size = 8;
  double learning_rate = 0.1;
  std::size_t max_epochs = 5;
  // Epochs without a validation improvement before stopping; 0 never stops.
  std::size_t early_stop_patience = 2;
  std::uint64_t seed = 0;
  Mode mode = Mode::proto;
  double momentum = 0.0;
  double validation_fraction = 0.2;
  std::size_t k0_per_class = 4;
  // Pairs averaged into each initial prototype; 0 splits the whole class
  // evenly across its k0_per_class prototypes.
  std::size_t n_per_proto = 2;
  double sigma_init = 1.0;
  double cap_multiplier = 3.0;
  // Run the OpenMP kernels; the serial ones give identical results.
  bool parallel = true;

  void validate() const;
};

// Everything a run depends on besides the data.
struct TrainSetup {
  EncoderConfig encoder;
  TrainConfig train;
  ImpParams imp;
  LossConfig loss;
  DropoutConfig dropout;

  void validate() const;
};

struct TrainState {
  EncoderConfig encoder;
  Mode mode = Mode::proto;
  std::optional<PrototypeStore> store;  // empty in baseline mode
  LinearHead head;
  std::size_t epoch = 0;
  double best_validation_accuracy = 0.0;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;

  const PrototypeStore* store_ptr() const { return store ? &*store : nullptr; }
};

struct MetricsRecord {
  std::string kind = "epoch";  // "epoch" or "final"
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
  std::size_t prototype_count = 0;
  double mean_prototype_distance = 0.0;
  std::size_t spawned = 0;
};

struct TrainResult {
  TrainState state;  // best epoch, score-normalized
  std::vector<MetricsRecord> metrics;
};

// Called after every epoch with the state as it stands; `improved` marks a new
// best validation accuracy.
using EpochCallback =
    std::function<void(const MetricsRecord&, const TrainState&, bool improved)>;

std::vector<EncodedExample> encode_dataset(const Dataset& dataset,
                                           const EncoderConfig& config);

// Prototypes built from the chosen and rejected answers of `examples`.
PrototypeStore initial_store(std::span<const EncodedExample> examples,
                             const TrainConfig& config);

// Splits `dataset` by the configured seed and validation fraction, then trains.
TrainResult train(const Dataset& dataset, const TrainSetup& setup,
                  const EpochCallback& on_epoch = {});

TrainResult train_split(const Dataset& train_set, const Dataset& validation_set,
                        const TrainSetup& setup,
                        const EpochCallback& on_epoch = {});

// train() with the mode forced to baseline.
TrainResult train_baseline(const Dataset& dataset, TrainSetup setup,
                           const EpochCallback& on_epoch = {});

std::vector<ScorePair> score_examples(const TrainState& state,
                                      std::span<const EncodedExample> examples,
                                      bool parallel = true);

// Pairwise accuracy under the inference scoring path.
double evaluate(const TrainState& state, std::span<const EncodedExample> examples);
double evaluate(const TrainState& state, const Dataset& dataset);

// Inference-path embeddings of every chosen and rejected answer, the reference
// set used for score normalization.
std::vector<Vector> reference_embeddings(const TrainState& state,
                                         std::span<const EncodedExample> examples);

}  // namespace protorm
