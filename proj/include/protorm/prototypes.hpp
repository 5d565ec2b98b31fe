#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "protorm/rng.hpp"
#include "protorm/vec.hpp"

namespace protorm {

enum class PreferenceClass : std::uint8_t { chosen = 0, rejected = 1 };

std::string_view to_string(PreferenceClass label);
PreferenceClass parse_preference_class(std::string_view text);

struct Prototype {
  std::size_t id = 0;
  PreferenceClass label = PreferenceClass::chosen;
  Vector vector;
};

// Two-class prototype set with a shared variance sigma and a growth cap of
// floor(cap_multiplier * initial_count) prototypes. Prototype ids equal their
// insertion position and are never reused; prototypes are never removed, and
// their class labels cannot change after creation.
class PrototypeStore {
 public:
  static constexpr double kMinSigma = 1e-6;

  PrototypeStore(std::size_t dim, double sigma, double cap_multiplier,
                 std::vector<Prototype> prototypes,
                 std::optional<std::size_t> initial_count = std::nullopt);

  std::size_t dim() const { return dim_; }
  double sigma() const { return sigma_; }
  // Clamps to kMinSigma so sigma stays positive under gradient updates.
  void set_sigma(double sigma);

  std::size_t initial_count() const { return initial_count_; }
  double cap_multiplier() const { return cap_multiplier_; }
  std::size_t cap() const { return cap_; }

  std::size_t size() const { return prototypes_.size(); }
  std::span<const Prototype> prototypes() const { return prototypes_; }
  const Prototype& at(std::size_t id) const { return prototypes_.at(id); }
  std::span<double> mutable_vector(std::size_t id) {
    return prototypes_.at(id).vector;
  }

  std::size_t count(PreferenceClass label) const;
  std::vector<std::size_t> ids_of(PreferenceClass label) const;
  std::vector<std::size_t> all_ids() const;

  // Appends a prototype unless the store is at its cap. Returns whether the
  // prototype was added.
  bool append(Vector vector, PreferenceClass label);

 private:
  std::size_t dim_;
  double sigma_;
  double cap_multiplier_;
  std::size_t initial_count_;
  std::size_t cap_;
  std::vector<Prototype> prototypes_;
};

struct LabeledEmbedding {
  std::span<const double> embedding;
  PreferenceClass label;
};

// Builds k0_per_class prototypes per class, each the mean of n_per_proto
// distinct same-class embeddings drawn at random.
PrototypeStore init_prototypes(std::span<const LabeledEmbedding> examples,
                               std::size_t n_per_proto,
                               std::size_t k0_per_class, double sigma,
                               double cap_multiplier, Rng& rng);

// Squared Euclidean distance.
double distance(std::span<const double> e, std::span<const double> p);
double distance(std::span<const double> e, const Prototype& p);

// Cosine similarity; zero when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

enum class DropoutMode { cosine, random, none };

std::string_view to_string(DropoutMode mode);
DropoutMode parse_dropout_mode(std::string_view text);

struct DropoutConfig {
  double keep_ratio = 0.8;
  bool enabled = true;
  DropoutMode mode = DropoutMode::cosine;

  void validate() const;
};

// max(1, floor(keep_ratio * class_size))
std::size_t survivor_target(double keep_ratio, std::size_t class_size);

// Ids (ascending) of the class prototypes that take part in refinement for
// one minibatch. Cosine mode repeatedly finds the most cosine-similar pair of
// remaining prototypes and drops its higher-id member.
std::vector<std::size_t> select_survivors(const PrototypeStore& store,
                                          PreferenceClass label,
                                          const DropoutConfig& config, Rng& rng);

// Softmax of negative squared distances over `ids`, max-subtracted.
Vector softmax_membership(std::span<const double> e, const PrototypeStore& store,
                          std::span<const std::size_t> ids);

// Membership over same-class survivors; rejects survivors of another class.
Vector membership(std::span<const double> e, const PrototypeStore& store,
                  PreferenceClass label, std::span<const std::size_t> survivors);

// Weighted average of the survivor prototypes.
Vector refine_embedding(std::span<const double> weights,
                        std::span<const std::size_t> survivors,
                        const PrototypeStore& store);

// Label-free refinement used when the annotation is unknown: membership over
// every prototype of both classes.
Vector refine_pooled(std::span<const double> e, const PrototypeStore& store);

struct ImpParams {
  double alpha = 0.1;
  double rho_base = 5.0;
  std::optional<double> lambda_override;

  void validate() const;
};

// Spawn threshold 2*sigma*log(alpha / (1 + rho_base/sigma)^(dim/2)), evaluated
// in log space so large dims do not overflow.
double imp_threshold(const ImpParams& params, double sigma, std::size_t dim);

// Appends e as a new prototype of `label` when its smallest squared distance to
// a same-class prototype exceeds lambda and the store is below its cap.
bool maybe_spawn(std::span<const double> e, PreferenceClass label,
                 PrototypeStore& store, double lambda);
bool maybe_spawn(std::span<const double> e, PreferenceClass label,
                 PrototypeStore& store, const ImpParams& params);

}  // namespace protorm
