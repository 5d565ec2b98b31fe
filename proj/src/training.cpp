#include "protorm/training.hpp"

#include <algorithm>
#include <cmath>

#include "protorm/error.hpp"
#include "protorm/rng.hpp"

namespace protorm {
namespace {

constexpr std::uint64_t kInitSalt = 0x1417;
constexpr std::uint64_t kOrderSalt = 0x0dde5;
constexpr std::uint64_t kDropoutSalt = 0xd409;

struct Velocity {
  std::vector<Vector> prototypes;
  Vector weights;
  double bias = 0.0;
  double sigma = 0.0;
};

// v = momentum * v + g; param -= lr * v.
void step(std::span<double> param, std::span<const double> grad,
          std::span<double> velocity, double lr, double momentum) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

void apply_gradient(TrainState& state, const GradientSet& grad, Velocity& vel,
                    const TrainConfig& cfg) {
  const double lr = cfg.learning_rate;
  const double mu = cfg.momentum;
  step(state.head.weights, grad.d_weights, vel.weights, lr, mu);
  step(std::span<double>(&state.head.bias, 1),
       std::span<const double>(&grad.d_bias, 1), std::span<double>(&vel.bias, 1),
       lr, mu);
  if (!state.store) return;
  PrototypeStore& store = *state.store;
  for (std::size_t k = 0; k < grad.prototypes.size(); ++k) {
    step(store.mutable_vector(k), grad.prototypes[k], vel.prototypes[k], lr, mu);
  }
  double sigma = store.sigma();
  step(std::span<double>(&sigma, 1), std::span<const double>(&grad.d_sigma, 1),
       std::span<double>(&vel.sigma, 1), lr, mu);
  store.set_sigma(sigma);
}

}  // namespace

std::string_view to_string(Mode mode) {
  return mode == Mode::proto ? "proto" : "baseline";
}

Mode parse_mode(std::string_view text) {
  if (text == "proto") return Mode::proto;
  if (text == "baseline") return Mode::baseline;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (k0_per_class == 0) throw ConfigError("k0_per_class must be positive");
  if (!(sigma_init > 0.0)) throw ConfigError("sigma_init must be positive");
  if (!(cap_multiplier >= 1.0)) throw ConfigError("cap_multiplier must be >= 1");
}

void TrainSetup::validate() const {
  encoder.validate();
  train.validate();
  imp.validate();
  loss.validate();
  dropout.validate();
}

PrototypeStore initial_store(std::span<const EncodedExample> examples,
                             const TrainConfig& cfg) {
  std::vector<LabeledEmbedding> labeled;
  labeled.reserve(2 * examples.size());
  for (const EncodedExample& ex : examples) {
    labeled.push_back({ex.chosen, PreferenceClass::chosen});
    labeled.push_back({ex.rejected, PreferenceClass::rejected});
  }
  std::size_t n = cfg.n_per_proto;
  if (n == 0) n = std::max<std::size_t>(1, examples.size() / cfg.k0_per_class);
  Rng rng(mix_seed(cfg.seed, kInitSalt));
  return init_prototypes(labeled, n, cfg.k0_per_class, cfg.sigma_init,
                         cfg.cap_multiplier, rng);
}

std::vector<EncodedExample> encode_dataset(const Dataset& dataset,
                                           const EncoderConfig& config) {
  std::vector<EncodedExample> out;
  out.reserve(dataset.size());
  for (const PreferenceExample& ex : dataset.examples()) {
    out.push_back(EncodedExample{encode_pair(ex.prompt, ex.chosen, config).combined,
                                 encode_pair(ex.prompt, ex.rejected, config).combined});
  }
  return out;
}

std::vector<ScorePair> score_examples(const TrainState& state,
                                      std::span<const EncodedExample> examples,
                                      bool parallel) {
  return parallel ? score_pairs_parallel(examples, state.store_ptr(), state.head)
                  : score_pairs_serial(examples, state.store_ptr(), state.head);
}

double evaluate(const TrainState& state, std::span<const EncodedExample> examples) {
  if (examples.empty()) throw DataError("cannot evaluate on an empty dataset");
  const auto scores = score_examples(state, examples);
  return accuracy(scores);
}

double evaluate(const TrainState& state, const Dataset& dataset) {
  const auto encoded = encode_dataset(dataset, state.encoder);
  return evaluate(state, encoded);
}

std::vector<Vector> reference_embeddings(const TrainState& state,
                                         std::span<const EncodedExample> examples) {
  std::vector<Vector> out;
  out.reserve(2 * examples.size());
  for (const EncodedExample& ex : examples) {
    out.push_back(inference_embedding(ex.chosen, state.store_ptr()));
    out.push_back(inference_embedding(ex.rejected, state.store_ptr()));
  }
  return out;
}

TrainResult train_split(const Dataset& train_set, const Dataset& validation_set,
                        const TrainSetup& setup, const EpochCallback& on_epoch) {
  setup.validate();
  if (train_set.empty()) throw DataError("empty training set");
  if (validation_set.empty()) throw DataError("empty validation set");
  const TrainConfig& cfg = setup.train;

  const auto train_data = encode_dataset(train_set, setup.encoder);
  const auto val_data = encode_dataset(validation_set, setup.encoder);
  const std::size_t dim = setup.encoder.combined_dim();

  TrainState state;
  state.encoder = setup.encoder;
  state.mode = cfg.mode;
  state.head = LinearHead::zeros(dim);
  state.seed = cfg.seed;
  state.validation_fraction = cfg.validation_fraction;
  if (cfg.mode == Mode::proto) state.store = initial_store(train_data, cfg);

  Velocity vel;
  vel.weights.assign(dim, 0.0);

  Rng order_rng(mix_seed(cfg.seed, kOrderSalt));
  Rng dropout_rng(mix_seed(cfg.seed, kDropoutSalt));
  std::vector<std::size_t> order(train_data.size());

  TrainResult result;
  TrainState best = state;
  double best_acc = -1.0;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t spawned = 0;
    std::vector<const EncodedExample*> batch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_data[order[i]]);

      BatchResult r;
      if (state.store) {
        PrototypeStore& store = *state.store;
        const double lambda = imp_threshold(setup.imp, store.sigma(), store.dim());
        Survivors survivors{
            select_survivors(store, PreferenceClass::chosen, setup.dropout, dropout_rng),
            select_survivors(store, PreferenceClass::rejected, setup.dropout,
                             dropout_rng)};
        r = cfg.parallel
                ? proto_batch_parallel(batch, store, state.head, survivors, setup.loss)
                : proto_batch_serial(batch, store, state.head, survivors, setup.loss);
        for (const EncodedExample* ex : batch) {
          spawned += maybe_spawn(ex->chosen, PreferenceClass::chosen, store, lambda);
          spawned += maybe_spawn(ex->rejected, PreferenceClass::rejected, store, lambda);
        }
        vel.prototypes.resize(store.size(), Vector(dim, 0.0));
      } else {
        r = cfg.parallel ? baseline_batch_parallel(batch, state.head)
                         : baseline_batch_serial(batch, state.head);
      }
      apply_gradient(state, r.gradient, vel, cfg);
      loss_sum += r.total_loss;
      ++batches;
    }

    state.epoch = epoch;
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.validation_accuracy = evaluate(state, val_data);
    rec.spawned = spawned;
    if (state.store) {
      rec.prototype_count = state.store->size();
      rec.mean_prototype_distance =
          mean_prototype_distance(*state.store, setup.loss.diversity_scope);
    }
    const bool improved = rec.validation_accuracy > best_acc;
    if (improved) {
      best_acc = rec.validation_accuracy;
      state.best_validation_accuracy = best_acc;
      best = state;
      stale = 0;
    } else {
      ++stale;
    }
    result.metrics.push_back(rec);
    if (on_epoch) on_epoch(rec, state, improved);
    if (cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience) break;
  }

  best.best_validation_accuracy = best_acc;
  best.head = normalize_scores(best.head, reference_embeddings(best, train_data));

  MetricsRecord final_rec;
  final_rec.kind = "final";
  final_rec.epoch = best.epoch;
  final_rec.validation_accuracy = evaluate(best, val_data);
  if (best.store) {
    final_rec.prototype_count = best.store->size();
    final_rec.mean_prototype_distance =
        mean_prototype_distance(*best.store, setup.loss.diversity_scope);
  }
  result.metrics.push_back(final_rec);
  result.state = std::move(best);
  return result;
}

TrainResult train(const Dataset& dataset, const TrainSetup& setup,
                  const EpochCallback& on_epoch) {
  setup.validate();
  auto [train_set, validation_set] = split_train_validation(
      dataset, setup.train.validation_fraction, setup.train.seed);
  return train_split(train_set, validation_set, setup, on_epoch);
}

TrainResult train_baseline(const Dataset& dataset, TrainSetup setup,
                           const EpochCallback& on_epoch) {
  setup.train.mode = Mode::baseline;
  return train(dataset, setup, on_epoch);
}

}  // namespace protorm
