#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "protorm/prototypes.hpp"
#include "protorm/vec.hpp"

namespace protorm {

struct LinearHead {
  Vector weights;
  double bias = 0.0;

  static LinearHead zeros(std::size_t dim) { return LinearHead{Vector(dim, 0.0), 0.0}; }
};

double score(std::span<const double> embedding, const LinearHead& head);

// Labels for the (first, second) answers of a pair. The strictly higher score
// is labeled chosen; an exact tie labels the first answer rejected.
std::pair<PreferenceClass, PreferenceClass> predict_annotation(double s_first,
                                                               double s_second);

struct ScorePair {
  double s_chosen = 0.0;
  double s_rejected = 0.0;

  // Ties never count as wins.
  bool correct() const { return s_chosen > s_rejected; }
};

// Fraction of pairs with s_chosen > s_rejected.
double accuracy(std::span<const ScorePair> pairs);

// Shifts the bias so the mean score over `reference` is zero.
LinearHead normalize_scores(const LinearHead& head,
                            std::span<const Vector> reference);

}  // namespace protorm
