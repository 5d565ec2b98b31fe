#pragma once

// Per-example forward/backward and scoring kernels. Every kernel has a serial
// reference and an OpenMP version; both produce per-example results that are
// reduced in example order, so the two agree bit for bit.

#include <cstddef>
#include <span>
#include <vector>

#include "protorm/loss.hpp"
#include "protorm/prototypes.hpp"
#include "protorm/scoring.hpp"
#include "protorm/vec.hpp"

namespace protorm {

// Combined (prompt, answer) embeddings of one preference pair.
struct EncodedExample {
  Vector chosen;
  Vector rejected;
};

// Prototype ids taking part in refinement for one minibatch.
struct Survivors {
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> rejected;
};

struct BatchResult {
  double total_loss = 0.0;
  double mean_reward_loss = 0.0;
  double diversity_loss = 0.0;
  // Training-path scores: each answer refined with its own class.
  std::vector<ScorePair> scores;
  GradientSet gradient;
};

using Batch = std::span<const EncodedExample* const>;

BatchResult proto_batch_serial(Batch batch, const PrototypeStore& store,
                               const LinearHead& head, const Survivors& survivors,
                               const LossConfig& config);
BatchResult proto_batch_parallel(Batch batch, const PrototypeStore& store,
                                 const LinearHead& head,
                                 const Survivors& survivors,
                                 const LossConfig& config);

// Same head and reward loss on raw embeddings; no prototypes, no diversity.
BatchResult baseline_batch_serial(Batch batch, const LinearHead& head);
BatchResult baseline_batch_parallel(Batch batch, const LinearHead& head);

// Exact gradients of the total loss for a proto-mode minibatch.
GradientSet backward(Batch batch, const PrototypeStore& store,
                     const LinearHead& head, const Survivors& survivors,
                     const LossConfig& config);

// Embedding the head sees at inference time: pooled refinement over all
// prototypes when a store is given, the raw embedding otherwise.
Vector inference_embedding(std::span<const double> e, const PrototypeStore* store);

double inference_score(std::span<const double> e, const PrototypeStore* store,
                       const LinearHead& head);

std::vector<ScorePair> score_pairs_serial(std::span<const EncodedExample> examples,
                                          const PrototypeStore* store,
                                          const LinearHead& head);
std::vector<ScorePair> score_pairs_parallel(
    std::span<const EncodedExample> examples, const PrototypeStore* store,
    const LinearHead& head);

}  // namespace protorm
