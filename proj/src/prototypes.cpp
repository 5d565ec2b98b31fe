#include "protorm/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "protorm/error.hpp"

namespace protorm {
namespace {

std::size_t floor_count(double x) {
  // absorbs representation error such as 0.7 * 10 = 6.999...
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

void check_dim(std::size_t got, std::size_t want) {
  if (got != want) {
    throw DimensionError("dimension mismatch: got " + std::to_string(got) +
                         ", expected " + std::to_string(want));
  }
}

}  // namespace

std::string_view to_string(PreferenceClass label) {
  return label == PreferenceClass::chosen ? "chosen" : "rejected";
}

PreferenceClass parse_preference_class(std::string_view text) {
  if (text == "chosen") return PreferenceClass::chosen;
  if (text == "rejected") return PreferenceClass::rejected;
  throw DataError("unknown preference class '" + std::string(text) + "'");
}

PrototypeStore::PrototypeStore(std::size_t dim, double sigma,
                               double cap_multiplier,
                               std::vector<Prototype> prototypes,
                               std::optional<std::size_t> initial_count)
    : dim_(dim),
      sigma_(sigma),
      cap_multiplier_(cap_multiplier),
      initial_count_(initial_count.value_or(prototypes.size())),
      cap_(0),
      prototypes_(std::move(prototypes)) {
  if (dim_ == 0) throw ConfigError("prototype dimensionality must be positive");
  if (!(sigma_ > 0.0)) throw ConfigError("sigma must be positive");
  if (!(cap_multiplier_ >= 1.0)) throw ConfigError("cap_multiplier must be >= 1");
  if (initial_count_ == 0) throw InitializationError("prototype store is empty");
  cap_ = floor_count(cap_multiplier_ * static_cast<double>(initial_count_));
  for (std::size_t i = 0; i < prototypes_.size(); ++i) {
    if (prototypes_[i].id != i) {
      throw DataError("prototype ids must equal their position");
    }
    check_dim(prototypes_[i].vector.size(), dim_);
  }
  if (count(PreferenceClass::chosen) == 0 ||
      count(PreferenceClass::rejected) == 0) {
    throw InitializationError("each class needs at least one prototype");
  }
  if (prototypes_.size() > cap_) {
    throw DataError("prototype count exceeds cap");
  }
}

void PrototypeStore::set_sigma(double sigma) {
  sigma_ = std::max(sigma, kMinSigma);
}

std::size_t PrototypeStore::count(PreferenceClass label) const {
  return static_cast<std::size_t>(
      std::count_if(prototypes_.begin(), prototypes_.end(),
                    [label](const Prototype& p) { return p.label == label; }));
}

std::vector<std::size_t> PrototypeStore::ids_of(PreferenceClass label) const {
  std::vector<std::size_t> ids;
  for (const Prototype& p : prototypes_) {
    if (p.label == label) ids.push_back(p.id);
  }
  return ids;
}

std::vector<std::size_t> PrototypeStore::all_ids() const {
  std::vector<std::size_t> ids(prototypes_.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return ids;
}

bool PrototypeStore::append(Vector vector, PreferenceClass label) {
  check_dim(vector.size(), dim_);
  if (prototypes_.size() >= cap_) return false;
  prototypes_.push_back(Prototype{prototypes_.size(), label, std::move(vector)});
  return true;
}

PrototypeStore init_prototypes(std::span<const LabeledEmbedding> examples,
                               std::size_t n_per_proto,
                               std::size_t k0_per_class, double sigma,
                               double cap_multiplier, Rng& rng) {
  if (n_per_proto == 0 || k0_per_class == 0) {
    throw ConfigError("n_per_proto and k0_per_class must be positive");
  }
  if (examples.empty()) throw InitializationError("no labeled embeddings");
  const std::size_t dim = examples.front().embedding.size();

  std::vector<Prototype> prototypes;
  for (PreferenceClass label :
       {PreferenceClass::chosen, PreferenceClass::rejected}) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      check_dim(examples[i].embedding.size(), dim);
      if (examples[i].label == label) pool.push_back(i);
    }
    const std::size_t needed = n_per_proto * k0_per_class;
    if (pool.size() < needed) {
      throw InitializationError(
          "class '" + std::string(to_string(label)) + "' has " +
          std::to_string(pool.size()) + " samples, " + std::to_string(needed) +
          " needed");
    }
    rng.shuffle(std::span<std::size_t>(pool));
    for (std::size_t k = 0; k < k0_per_class; ++k) {
      Vector mean(dim, 0.0);
      for (std::size_t j = 0; j < n_per_proto; ++j) {
        axpy(1.0, examples[pool[k * n_per_proto + j]].embedding, mean);
      }
      for (double& x : mean) x /= static_cast<double>(n_per_proto);
      prototypes.push_back(Prototype{prototypes.size(), label, std::move(mean)});
    }
  }
  return PrototypeStore(dim, sigma, cap_multiplier, std::move(prototypes));
}

double distance(std::span<const double> e, std::span<const double> p) {
  check_dim(e.size(), p.size());
  return squared_distance(e, p);
}

double distance(std::span<const double> e, const Prototype& p) {
  return distance(e, std::span<const double>(p.vector));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  check_dim(a.size(), b.size());
  const double na = std::sqrt(squared_norm(a));
  const double nb = std::sqrt(squared_norm(b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::string_view to_string(DropoutMode mode) {
  switch (mode) {
    case DropoutMode::cosine: return "cosine";
    case DropoutMode::random: return "random";
    case DropoutMode::none: return "none";
  }
  return "none";
}

DropoutMode parse_dropout_mode(std::string_view text) {
  if (text == "cosine") return DropoutMode::cosine;
  if (text == "random") return DropoutMode::random;
  if (text == "none") return DropoutMode::none;
  throw ConfigError("unknown dropout mode '" + std::string(text) + "'");
}

void DropoutConfig::validate() const {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw ConfigError("keep_ratio must lie in (0, 1]");
  }
}

std::size_t survivor_target(double keep_ratio, std::size_t class_size) {
  return std::max<std::size_t>(
      1, floor_count(keep_ratio * static_cast<double>(class_size)));
}

std::vector<std::size_t> select_survivors(const PrototypeStore& store,
                                          PreferenceClass label,
                                          const DropoutConfig& config,
                                          Rng& rng) {
  std::vector<std::size_t> ids = store.ids_of(label);
  if (!config.enabled || config.mode == DropoutMode::none) return ids;
  const std::size_t target = survivor_target(config.keep_ratio, ids.size());
  if (target >= ids.size()) return ids;

  if (config.mode == DropoutMode::random) {
    rng.shuffle(std::span<std::size_t>(ids));
    ids.resize(target);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  const std::size_t k = ids.size();
  std::vector<double> cos(k * k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      cos[a * k + b] = cosine_similarity(store.at(ids[a]).vector,
                                         store.at(ids[b]).vector);
    }
  }
  std::vector<bool> alive(k, true);
  for (std::size_t remaining = k; remaining > target; --remaining) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t drop = k;
    for (std::size_t a = 0; a < k; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < k; ++b) {
        if (alive[b] && cos[a * k + b] > best) {
          best = cos[a * k + b];
          drop = b;  // ids ascend, so b holds the higher id
        }
      }
    }
    alive[drop] = false;
  }
  std::vector<std::size_t> survivors;
  for (std::size_t a = 0; a < k; ++a) {
    if (alive[a]) survivors.push_back(ids[a]);
  }
  return survivors;
}

Vector softmax_membership(std::span<const double> e, const PrototypeStore& store,
                          std::span<const std::size_t> ids) {
  if (ids.empty()) throw InvariantError("membership over an empty prototype set");
  check_dim(e.size(), store.dim());
  Vector w(ids.size());
  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    w[k] = squared_distance(e, store.at(ids[k]).vector);
    min_d = std::min(min_d, w[k]);
  }
  double total = 0.0;
  for (double& x : w) {
    x = std::exp(-(x - min_d));
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

Vector membership(std::span<const double> e, const PrototypeStore& store,
                  PreferenceClass label, std::span<const std::size_t> survivors) {
  for (std::size_t id : survivors) {
    if (store.at(id).label != label) {
      throw InvariantError("survivor set mixes prototype classes");
    }
  }
  return softmax_membership(e, store, survivors);
}

Vector refine_embedding(std::span<const double> weights,
                        std::span<const std::size_t> survivors,
                        const PrototypeStore& store) {
  if (weights.size() != survivors.size()) {
    throw DimensionError("weights and survivors differ in length");
  }
  Vector out(store.dim(), 0.0);
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    axpy(weights[k], store.at(survivors[k]).vector, out);
  }
  return out;
}

Vector refine_pooled(std::span<const double> e, const PrototypeStore& store) {
  const auto ids = store.all_ids();
  const Vector w = softmax_membership(e, store, ids);
  return refine_embedding(w, ids, store);
}

void ImpParams::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(rho_base > 0.0)) throw ConfigError("rho_base must be positive");
}

double imp_threshold(const ImpParams& params, double sigma, std::size_t dim) {
  if (params.lambda_override) return *params.lambda_override;
  params.validate();
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  const double half_dim = static_cast<double>(dim) / 2.0;
  return 2.0 * sigma *
         (std::log(params.alpha) - half_dim * std::log1p(params.rho_base / sigma));
}

bool maybe_spawn(std::span<const double> e, PreferenceClass label,
                 PrototypeStore& store, double lambda) {
  check_dim(e.size(), store.dim());
  if (store.size() >= store.cap()) return false;
  double min_d = std::numeric_limits<double>::infinity();
  for (const Prototype& p : store.prototypes()) {
    if (p.label == label) min_d = std::min(min_d, squared_distance(e, p.vector));
  }
  if (!(min_d > lambda)) return false;
  return store.append(Vector(e.begin(), e.end()), label);
}

bool maybe_spawn(std::span<const double> e, PreferenceClass label,
                 PrototypeStore& store, const ImpParams& params) {
  return maybe_spawn(e, label, store,
                     imp_threshold(params, store.sigma(), store.dim()));
}

}  // namespace protorm
