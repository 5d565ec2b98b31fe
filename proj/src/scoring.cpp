#include "protorm/scoring.hpp"

#include <string>

#include "protorm/error.hpp"

namespace protorm {

double score(std::span<const double> embedding, const LinearHead& head) {
  if (embedding.size() != head.weights.size()) {
    throw DimensionError("embedding has " + std::to_string(embedding.size()) +
                         " entries, head expects " +
                         std::to_string(head.weights.size()));
  }
  return dot(head.weights, embedding) + head.bias;
}

std::pair<PreferenceClass, PreferenceClass> predict_annotation(double s_first,
                                                               double s_second) {
  if (s_first > s_second) {
    return {PreferenceClass::chosen, PreferenceClass::rejected};
  }
  return {PreferenceClass::rejected, PreferenceClass::chosen};
}

double accuracy(std::span<const ScorePair> pairs) {
  if (pairs.empty()) throw DataError("accuracy of an empty set");
  std::size_t wins = 0;
  for (const ScorePair& p : pairs) wins += p.correct() ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(pairs.size());
}

LinearHead normalize_scores(const LinearHead& head,
                            std::span<const Vector> reference) {
  if (reference.empty()) {
    throw DataError("normalization needs a non-empty reference set");
  }
  double sum = 0.0;
  for (const Vector& e : reference) sum += score(e, head);
  LinearHead out = head;
  out.bias -= sum / static_cast<double>(reference.size());
  return out;
}

}  // namespace protorm
