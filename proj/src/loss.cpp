#include "protorm/loss.hpp"

#include <cmath>
#include <string>

#include "protorm/error.hpp"

namespace protorm {
namespace {

bool counts_pair(const PrototypeStore& store, std::size_t a, std::size_t b,
                 DiversityScope scope) {
  return scope == DiversityScope::global || store.at(a).label == store.at(b).label;
}

}  // namespace

std::string_view to_string(DiversityScope scope) {
  return scope == DiversityScope::global ? "global" : "per_class";
}

DiversityScope parse_diversity_scope(std::string_view text) {
  if (text == "global") return DiversityScope::global;
  if (text == "per_class") return DiversityScope::per_class;
  throw ConfigError("unknown diversity_scope '" + std::string(text) + "'");
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(rho_div >= 0.0)) throw ConfigError("rho_div must be non-negative");
}

double reward_loss(double s_plus, double s_minus) {
  const double x = -(s_plus - s_minus);
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double reward_loss_slope(double margin) {
  if (margin >= 0.0) {
    const double z = std::exp(-margin);
    return -z / (1.0 + z);
  }
  return -1.0 / (1.0 + std::exp(margin));
}

double mean_prototype_distance(const PrototypeStore& store, DiversityScope scope) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < store.size(); ++a) {
    for (std::size_t b = a + 1; b < store.size(); ++b) {
      if (!counts_pair(store, a, b, scope)) continue;
      sum += std::sqrt(squared_distance(store.at(a).vector, store.at(b).vector));
      ++pairs;
    }
  }
  if (pairs == 0) {
    throw DataError("mean prototype distance needs at least two prototypes");
  }
  return sum / static_cast<double>(pairs);
}

double diversity_loss(const PrototypeStore& store, const LossConfig& config) {
  const double euc = mean_prototype_distance(store, config.diversity_scope);
  return std::log1p(std::abs(euc - config.tau));
}

double total_loss(std::span<const double> reward_losses, double diversity,
                  const LossConfig& config) {
  double mean = 0.0;
  if (!reward_losses.empty()) {
    for (double l : reward_losses) mean += l;
    mean /= static_cast<double>(reward_losses.size());
  }
  return mean + config.rho_div * diversity;
}

GradientSet GradientSet::zeros(std::size_t prototype_count, std::size_t dim) {
  GradientSet g;
  g.prototypes.assign(prototype_count, Vector(dim, 0.0));
  g.d_weights.assign(dim, 0.0);
  return g;
}

void add_diversity_gradient(const PrototypeStore& store, const LossConfig& config,
                            GradientSet& grad) {
  if (config.rho_div == 0.0) return;
  const DiversityScope scope = config.diversity_scope;
  const double euc = mean_prototype_distance(store, scope);
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < store.size(); ++a) {
    for (std::size_t b = a + 1; b < store.size(); ++b) {
      if (counts_pair(store, a, b, scope)) ++pairs;
    }
  }
  const double psi = std::abs(euc - config.tau);
  const double sign = euc >= config.tau ? 1.0 : -1.0;
  const double scale = config.rho_div * sign / (1.0 + psi) /
                       static_cast<double>(pairs);

  const std::size_t dim = store.dim();
  Vector diff(dim);
  for (std::size_t a = 0; a < store.size(); ++a) {
    for (std::size_t b = a + 1; b < store.size(); ++b) {
      if (!counts_pair(store, a, b, scope)) continue;
      const auto& pa = store.at(a).vector;
      const auto& pb = store.at(b).vector;
      for (std::size_t j = 0; j < dim; ++j) diff[j] = pa[j] - pb[j];
      const double d = std::sqrt(squared_norm(diff));
      // coincident prototypes: the norm has no gradient there, take zero
      if (d == 0.0) continue;
      axpy(scale / d, diff, grad.prototypes[a]);
      axpy(-scale / d, diff, grad.prototypes[b]);
    }
  }
}

}  // namespace protorm
