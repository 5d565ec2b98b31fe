#include "protorm/kernels.hpp"

#include <string>

#include "protorm/error.hpp"

namespace protorm {
namespace {

// Forward quantities of one answer refined against one class.
struct SideForward {
  Vector weights;  // aligned with the survivor ids
  Vector refined;
  double score = 0.0;
};

SideForward forward_side(std::span<const double> e, const PrototypeStore& store,
                         PreferenceClass label, std::span<const std::size_t> ids,
                         const LinearHead& head) {
  SideForward f;
  f.weights = membership(e, store, label, ids);
  f.refined = refine_embedding(f.weights, ids, store);
  f.score = score(f.refined, head);
  return f;
}

// Gradient of one example, restricted to the prototypes it touches.
struct ExampleContribution {
  double reward_loss = 0.0;
  ScorePair scores;
  Vector d_weights;
  double d_bias = 0.0;
  std::vector<Vector> d_chosen;    // aligned with survivors.chosen
  std::vector<Vector> d_rejected;  // aligned with survivors.rejected
};

// Backpropagates upstream gradient `gs` (dL/ds) of one side through
// score <- head <- refined embedding <- softmax membership <- distances.
void backward_side(std::span<const double> e, const SideForward& f,
                   std::span<const std::size_t> ids, const PrototypeStore& store,
                   const LinearHead& head, double gs, ExampleContribution& out,
                   std::vector<Vector>& d_protos) {
  axpy(gs, f.refined, out.d_weights);
  out.d_bias += gs;
  const double s0 = f.score - head.bias;
  d_protos.assign(ids.size(), Vector(store.dim(), 0.0));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& p = store.at(ids[k]).vector;
    const double wk = f.weights[k];
    const double pull = 2.0 * gs * wk * (dot(head.weights, p) - s0);
    Vector& d = d_protos[k];
    for (std::size_t j = 0; j < d.size(); ++j) {
      d[j] = gs * wk * head.weights[j] + pull * (e[j] - p[j]);
    }
  }
}

ExampleContribution proto_example(const EncodedExample& ex,
                                  const PrototypeStore& store,
                                  const LinearHead& head,
                                  const Survivors& survivors, double batch_size) {
  const SideForward plus = forward_side(ex.chosen, store, PreferenceClass::chosen,
                                        survivors.chosen, head);
  const SideForward minus = forward_side(
      ex.rejected, store, PreferenceClass::rejected, survivors.rejected, head);

  ExampleContribution c;
  c.scores = ScorePair{plus.score, minus.score};
  c.reward_loss = reward_loss(plus.score, minus.score);
  const double g = reward_loss_slope(plus.score - minus.score) / batch_size;
  c.d_weights.assign(store.dim(), 0.0);
  backward_side(ex.chosen, plus, survivors.chosen, store, head, g, c, c.d_chosen);
  backward_side(ex.rejected, minus, survivors.rejected, store, head, -g, c,
                c.d_rejected);
  return c;
}

ExampleContribution baseline_example(const EncodedExample& ex,
                                     const LinearHead& head, double batch_size) {
  ExampleContribution c;
  c.scores = ScorePair{score(ex.chosen, head), score(ex.rejected, head)};
  c.reward_loss = reward_loss(c.scores.s_chosen, c.scores.s_rejected);
  const double g =
      reward_loss_slope(c.scores.s_chosen - c.scores.s_rejected) / batch_size;
  c.d_weights.assign(head.weights.size(), 0.0);
  axpy(g, ex.chosen, c.d_weights);
  axpy(-g, ex.rejected, c.d_weights);
  c.d_bias = 0.0;  // the bias cancels in the margin
  return c;
}

void check_batch(Batch batch, std::size_t dim) {
  if (batch.empty()) throw DataError("empty minibatch");
  for (const EncodedExample* ex : batch) {
    if (ex->chosen.size() != dim || ex->rejected.size() != dim) {
      throw DimensionError("example embedding has " +
                           std::to_string(ex->chosen.size()) +
                           " entries, model expects " + std::to_string(dim));
    }
  }
}

void check_head(const LinearHead& head, std::size_t dim) {
  if (head.weights.size() != dim) {
    throw DimensionError("head has " + std::to_string(head.weights.size()) +
                         " weights, model expects " + std::to_string(dim));
  }
}

void check_survivors(const Survivors& survivors, const PrototypeStore& store) {
  if (survivors.chosen.empty() || survivors.rejected.empty()) {
    throw InvariantError("each class needs at least one surviving prototype");
  }
  for (std::size_t id : survivors.chosen) {
    if (id >= store.size() || store.at(id).label != PreferenceClass::chosen) {
      throw InvariantError("chosen survivor set holds a foreign prototype");
    }
  }
  for (std::size_t id : survivors.rejected) {
    if (id >= store.size() || store.at(id).label != PreferenceClass::rejected) {
      throw InvariantError("rejected survivor set holds a foreign prototype");
    }
  }
}

BatchResult reduce(std::span<const ExampleContribution> parts,
                   std::size_t prototype_count, std::size_t dim,
                   const Survivors* survivors) {
  BatchResult r;
  r.gradient = GradientSet::zeros(prototype_count, dim);
  std::vector<double> losses;
  losses.reserve(parts.size());
  for (const ExampleContribution& c : parts) {
    losses.push_back(c.reward_loss);
    r.scores.push_back(c.scores);
    axpy(1.0, c.d_weights, r.gradient.d_weights);
    r.gradient.d_bias += c.d_bias;
    if (survivors == nullptr) continue;
    for (std::size_t k = 0; k < survivors->chosen.size(); ++k) {
      axpy(1.0, c.d_chosen[k], r.gradient.prototypes[survivors->chosen[k]]);
    }
    for (std::size_t k = 0; k < survivors->rejected.size(); ++k) {
      axpy(1.0, c.d_rejected[k], r.gradient.prototypes[survivors->rejected[k]]);
    }
  }
  double mean = 0.0;
  for (double l : losses) mean += l;
  r.mean_reward_loss = mean / static_cast<double>(losses.size());
  return r;
}

void finish_proto(BatchResult& r, const PrototypeStore& store,
                  const LossConfig& config) {
  r.diversity_loss = diversity_loss(store, config);
  r.total_loss = r.mean_reward_loss + config.rho_div * r.diversity_loss;
  add_diversity_gradient(store, config, r.gradient);
  // sigma enters only the discrete spawn threshold, so it has no gradient
  r.gradient.d_sigma = 0.0;
}

}  // namespace

BatchResult proto_batch_serial(Batch batch, const PrototypeStore& store,
                               const LinearHead& head, const Survivors& survivors,
                               const LossConfig& config) {
  check_batch(batch, store.dim());
  check_survivors(survivors, store);
  check_head(head, store.dim());
  const double n = static_cast<double>(batch.size());
  std::vector<ExampleContribution> parts;
  parts.reserve(batch.size());
  for (const EncodedExample* ex : batch) {
    parts.push_back(proto_example(*ex, store, head, survivors, n));
  }
  BatchResult r = reduce(parts, store.size(), store.dim(), &survivors);
  finish_proto(r, store, config);
  return r;
}

BatchResult proto_batch_parallel(Batch batch, const PrototypeStore& store,
                                 const LinearHead& head,
                                 const Survivors& survivors,
                                 const LossConfig& config) {
  check_batch(batch, store.dim());
  check_survivors(survivors, store);
  check_head(head, store.dim());
  const double n = static_cast<double>(batch.size());
  std::vector<ExampleContribution> parts(batch.size());
  const auto count = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    parts[i] = proto_example(*batch[i], store, head, survivors, n);
  }
  BatchResult r = reduce(parts, store.size(), store.dim(), &survivors);
  finish_proto(r, store, config);
  return r;
}

BatchResult baseline_batch_serial(Batch batch, const LinearHead& head) {
  check_batch(batch, head.weights.size());
  const double n = static_cast<double>(batch.size());
  std::vector<ExampleContribution> parts;
  parts.reserve(batch.size());
  for (const EncodedExample* ex : batch) {
    parts.push_back(baseline_example(*ex, head, n));
  }
  BatchResult r = reduce(parts, 0, head.weights.size(), nullptr);
  r.total_loss = r.mean_reward_loss;
  return r;
}

BatchResult baseline_batch_parallel(Batch batch, const LinearHead& head) {
  check_batch(batch, head.weights.size());
  const double n = static_cast<double>(batch.size());
  std::vector<ExampleContribution> parts(batch.size());
  const auto count = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    parts[i] = baseline_example(*batch[i], head, n);
  }
  BatchResult r = reduce(parts, 0, head.weights.size(), nullptr);
  r.total_loss = r.mean_reward_loss;
  return r;
}

GradientSet backward(Batch batch, const PrototypeStore& store,
                     const LinearHead& head, const Survivors& survivors,
                     const LossConfig& config) {
  return proto_batch_parallel(batch, store, head, survivors, config).gradient;
}

Vector inference_embedding(std::span<const double> e, const PrototypeStore* store) {
  if (store == nullptr) return Vector(e.begin(), e.end());
  return refine_pooled(e, *store);
}

double inference_score(std::span<const double> e, const PrototypeStore* store,
                       const LinearHead& head) {
  if (store == nullptr) return score(e, head);
  return score(refine_pooled(e, *store), head);
}

std::vector<ScorePair> score_pairs_serial(std::span<const EncodedExample> examples,
                                          const PrototypeStore* store,
                                          const LinearHead& head) {
  std::vector<ScorePair> out;
  out.reserve(examples.size());
  for (const EncodedExample& ex : examples) {
    out.push_back(ScorePair{inference_score(ex.chosen, store, head),
                            inference_score(ex.rejected, store, head)});
  }
  return out;
}

std::vector<ScorePair> score_pairs_parallel(
    std::span<const EncodedExample> examples, const PrototypeStore* store,
    const LinearHead& head) {
  const std::size_t dim = store ? store->dim() : head.weights.size();
  check_head(head, dim);
  for (const EncodedExample& ex : examples) {
    if (ex.chosen.size() != dim || ex.rejected.size() != dim) {
      throw DimensionError("example embedding has " + std::to_string(ex.chosen.size()) +
                           " entries, model expects " + std::to_string(dim));
    }
  }
  std::vector<ScorePair> out(examples.size());
  const auto count = static_cast<std::ptrdiff_t>(examples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[i] = ScorePair{inference_score(examples[i].chosen, store, head),
                       inference_score(examples[i].rejected, store, head)};
  }
  return out;
}

}  // namespace protorm
