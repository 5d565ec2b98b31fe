#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "protorm/error.hpp"
#include "protorm/loss.hpp"
#include "protorm/scoring.hpp"

using namespace protorm;

namespace {

constexpr auto C = PreferenceClass::chosen;
constexpr auto R = PreferenceClass::rejected;

PrototypeStore store_of(const std::vector<Vector>& vs) {
  std::vector<Prototype> ps;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    ps.push_back(Prototype{i, i % 2 == 0 ? C : R, vs[i]});
  }
  return PrototypeStore(vs.front().size(), 1.0, 3.0, std::move(ps));
}

}  // namespace

TEST_CASE("score examples") {
  CHECK(score(Vector{7, 8}, LinearHead{Vector{0, 0}, 2.5}) == 2.5);
  CHECK(score(Vector{7, 8, 9}, LinearHead{Vector{0, 1, 0}, 0}) == 8.0);
  CHECK(score(Vector{3, 4}, LinearHead{Vector{1, 2}, -1}) == 10.0);
  CHECK_THROWS_AS(score(Vector{1}, LinearHead{Vector{1, 2}, 0}), DimensionError);
}

TEST_CASE("predict_annotation and ties") {
  CHECK(predict_annotation(1.0, 0.0) == std::pair{C, R});
  CHECK(predict_annotation(0.0, 1.0) == std::pair{R, C});
  CHECK(predict_annotation(0.5, 0.5) == std::pair{R, C});
  CHECK_FALSE(ScorePair{0.5, 0.5}.correct());
  const std::vector<ScorePair> pairs{{1, 0}, {0, 1}, {2, 2}, {3, 1}};
  CHECK(accuracy(pairs) == 0.5);
  CHECK_THROWS_AS(accuracy(std::span<const ScorePair>{}), DataError);
}

TEST_CASE("shift equivariance") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const double a = rng.normal(), b = rng.normal(), c = 10 * rng.normal();
    CHECK(predict_annotation(a, b) == predict_annotation(a + c, b + c));
  }
  LinearHead h{Vector{1, 2}, 0.5};
  LinearHead shifted = h;
  shifted.bias += 3.0;
  CHECK(score(Vector{1, 1}, shifted) == score(Vector{1, 1}, h) + 3.0);
}

TEST_CASE("normalize_scores") {
  const LinearHead h{Vector{1}, 0.0};
  CHECK(normalize_scores(h, std::vector<Vector>{{-1}, {1}}).bias == 0.0);
  CHECK(normalize_scores(h, std::vector<Vector>{{5}}).bias == -5.0);
  const auto n = normalize_scores(h, std::vector<Vector>{{1}, {3}});
  CHECK(n.bias == -2.0);
  CHECK(score(Vector{1}, n) == -1.0);
  CHECK(score(Vector{3}, n) == 1.0);
  CHECK_THROWS_AS(normalize_scores(h, std::vector<Vector>{}), DataError);

  Rng rng(8);
  std::vector<Vector> ref;
  LinearHead big{Vector(32), 17.0};
  for (double& w : big.weights) w = rng.normal();
  for (int i = 0; i < 300; ++i) {
    Vector v(32);
    for (double& x : v) x = 3.0 * rng.normal();
    ref.push_back(v);
  }
  const auto nb = normalize_scores(big, ref);
  double mean = 0.0;
  for (const auto& v : ref) mean += score(v, nb);
  CHECK(std::abs(mean / 300.0) < 1e-9);
}

TEST_CASE("reward loss") {
  CHECK(std::abs(reward_loss(0.3, 0.3) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(reward_loss(1.0, 0.0) - std::log1p(std::exp(-1.0))) < 1e-12);
  CHECK(reward_loss(1.0, 0.0) == doctest::Approx(0.313262).epsilon(1e-6));
  CHECK(reward_loss(800.0, 0.0) == 0.0);
  CHECK(reward_loss(0.0, 800.0) == doctest::Approx(800.0));
  double previous = 1e300;
  for (double m = -30; m <= 30; m += 0.25) {
    const double l = reward_loss(m, 0.0);
    CHECK(l < previous);
    CHECK(l >= 0.0);
    previous = l;
  }
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const double a = 3 * rng.normal(), b = 3 * rng.normal();
    CHECK(reward_loss(a, b) + reward_loss(b, a) > 2 * std::log(2.0));
  }
  CHECK(reward_loss_slope(0.0) == -0.5);
}

TEST_CASE("mean prototype distance") {
  CHECK(mean_prototype_distance(store_of({{1, 1}, {1, 1}, {1, 1}})) == 0.0);
  CHECK(mean_prototype_distance(store_of({{0, 0}, {3, 4}})) == 5.0);
  CHECK(std::abs(mean_prototype_distance(store_of({{0, 0}, {1, 0}, {0, 1}})) -
                 (2.0 + std::sqrt(2.0)) / 3.0) < 1e-12);
  // per_class pairs (0,2) and (1,3) only
  const auto s = store_of({{0, 0}, {0, 0}, {3, 4}, {6, 8}});
  CHECK(mean_prototype_distance(s, DiversityScope::per_class) == 7.5);
}

TEST_CASE("diversity loss") {
  const auto tri = store_of({{0, 0}, {3, 4}});
  CHECK(diversity_loss(tri, LossConfig{5.0, 0.1, DiversityScope::global}) == 0.0);
  CHECK(std::abs(diversity_loss(tri, LossConfig{5.0 + std::exp(1.0) - 1.0, 0.1,
                                                DiversityScope::global}) - 1.0) < 1e-12);
  CHECK(std::abs(diversity_loss(store_of({{2, 2}, {2, 2}}), LossConfig{}) - std::log(2.0)) <
        1e-12);
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto s = store_of({{rng.normal(), rng.normal()}, {rng.normal(), rng.normal()},
                             {rng.normal(), rng.normal()}});
    CHECK(diversity_loss(s, LossConfig{0.1 + rng.uniform() * 3, 0.1,
                                       DiversityScope::global}) >= 0.0);
  }
}

TEST_CASE("total loss") {
  const std::vector<double> l{0.4, 0.6};
  CHECK(total_loss(l, 7.0, LossConfig{1.0, 0.0, DiversityScope::global}) == 0.5);
  CHECK(total_loss(l, 0.2, LossConfig{1.0, 0.1, DiversityScope::global}) ==
        doctest::Approx(0.52).epsilon(1e-12));
  const std::vector<double> zero{std::log(2.0), std::log(2.0)};
  CHECK(total_loss(zero, 3.0, LossConfig{1.0, 0.0, DiversityScope::global}) ==
        doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(LossConfig({0.0, 0.1, DiversityScope::global}).validate(), ConfigError);
  CHECK_THROWS_AS(LossConfig({1.0, -0.1, DiversityScope::global}).validate(), ConfigError);
}

TEST_CASE("analytic gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = oracle::check_gradient(oracle::random_instance(seed));
    CHECK(r.parameters <= 200);
    CHECK(r.max_error < 1e-4);
  }
}

TEST_CASE("head gradient at a zero margin") {
  auto in = oracle::random_instance(77, 4, 1, 1);
  in.rho_div = 0.0;
  // mirror prototypes and identical answers give a zero margin
  in.protos[1] = in.protos[0];
  in.examples[0].second = in.examples[0].first;
  const auto v = oracle::to_library(in);
  const auto g = backward(v.batch, v.store, v.head, v.survivors, v.loss);
  const Vector& ep = in.protos[0];
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(std::abs(g.d_weights[j] - (-0.5) * (ep[j] - ep[j])) < 1e-15);
  }
  // unequal answers: -0.5 (e'+ - e'-) with one prototype per class
  auto in2 = oracle::random_instance(78, 4, 1, 1);
  in2.rho_div = 0.0;
  in2.weights.assign(4, 0.0);
  in2.bias = 0.0;
  const auto v2 = oracle::to_library(in2);
  const auto g2 = backward(v2.batch, v2.store, v2.head, v2.survivors, v2.loss);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(g2.d_weights[j] ==
          doctest::Approx(-0.5 * (in2.protos[0][j] - in2.protos[1][j])).epsilon(1e-12));
  }
}

TEST_CASE("gradient vanishes at a symmetric stationary point") {
  // Both classes share one prototype set, the four pairs come in mirrored
  // couples and the head is zero: every reward term cancels.
  auto in = oracle::random_instance(31, 4, 2, 4);
  in.protos[2] = in.protos[0];
  in.protos[3] = in.protos[1];
  in.examples[1] = {in.examples[0].second, in.examples[0].first};
  in.examples[3] = {in.examples[2].second, in.examples[2].first};
  in.weights.assign(4, 0.0);
  in.rho_div = 0.0;
  const auto start = in;
  for (int it = 0; it < 100; ++it) {
    const auto g = oracle::analytic_gradient(in);
    for (std::size_t i = 0; i < g.size(); ++i) in.param(i) -= 0.5 * g[i];
  }
  const auto g = oracle::analytic_gradient(in);
  double norm = 0.0;
  for (double x : g) norm += x * x;
  CHECK(std::sqrt(norm) < 1e-12);
  CHECK(in.protos == start.protos);
  CHECK(oracle::check_gradient(in).max_error < 1e-4);
}

TEST_CASE("bias shift leaves the loss unchanged without diversity") {
  auto in = oracle::random_instance(12);
  in.rho_div = 0.0;
  const double a = oracle::total_loss(in);
  in.bias += 5.0;
  CHECK(std::abs(oracle::total_loss(in) - a) < 1e-12);
  CHECK(oracle::analytic_gradient(in)[in.parameter_count() - 2] == 0.0);
}
