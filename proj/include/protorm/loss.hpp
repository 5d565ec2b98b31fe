#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "protorm/prototypes.hpp"
#include "protorm/vec.hpp"

namespace protorm {

enum class DiversityScope { global, per_class };

std::string_view to_string(DiversityScope scope);
DiversityScope parse_diversity_scope(std::string_view text);

struct LossConfig {
  double tau = 1.0;     // target mean prototype distance
  double rho_div = 0.1; // weight of the diversity term
  DiversityScope diversity_scope = DiversityScope::global;

  void validate() const;
};

// -log(logistic(s_plus - s_minus)), as a stable softplus.
double reward_loss(double s_plus, double s_minus);

// d reward_loss / d (s_plus - s_minus) = -logistic(-(s_plus - s_minus)).
double reward_loss_slope(double margin);

// Mean Euclidean (not squared) distance over unordered prototype pairs. The
// global scope pools both classes; per_class only pairs same-class prototypes.
double mean_prototype_distance(const PrototypeStore& store,
                               DiversityScope scope = DiversityScope::global);

// log(1 + |mean_prototype_distance - tau|)
double diversity_loss(const PrototypeStore& store, const LossConfig& config);

// Mean of the reward losses plus rho_div times the diversity loss.
double total_loss(std::span<const double> reward_losses, double diversity,
                  const LossConfig& config);

struct GradientSet {
  std::vector<Vector> prototypes;
  double d_sigma = 0.0;
  Vector d_weights;
  double d_bias = 0.0;

  static GradientSet zeros(std::size_t prototype_count, std::size_t dim);
};

// Adds rho_div * d(diversity_loss)/d(prototype) into grad.prototypes.
void add_diversity_gradient(const PrototypeStore& store, const LossConfig& config,
                            GradientSet& grad);

}  // namespace protorm
