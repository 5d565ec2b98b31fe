#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracle.hpp"
#include "protorm/error.hpp"
#include "protorm/prototypes.hpp"

using namespace protorm;

namespace {

PrototypeStore make_store(const std::vector<std::pair<Vector, PreferenceClass>>& items,
                          double cap_multiplier = 3.0, double sigma = 1.0) {
  std::vector<Prototype> ps;
  for (const auto& [v, label] : items) ps.push_back(Prototype{ps.size(), label, v});
  return PrototypeStore(items.front().first.size(), sigma, cap_multiplier, std::move(ps));
}

constexpr auto C = PreferenceClass::chosen;
constexpr auto R = PreferenceClass::rejected;

}  // namespace

TEST_CASE("distance examples") {
  CHECK(distance(Vector{1, 2, 3}, Vector{1, 2, 3}) == 0.0);
  CHECK(distance(Vector{1, 0}, Vector{0, 1}) == 2.0);
  CHECK(distance(Vector{3, 4}, Vector{0, 0}) == 25.0);
  CHECK_THROWS_AS(distance(Vector{1}, Vector{1, 2}), DimensionError);
}

TEST_CASE("store invariants") {
  CHECK_THROWS_AS(make_store({{Vector{1}, C}}), InitializationError);
  auto store = make_store({{Vector{0}, C}, {Vector{1}, R}}, 1.5);
  CHECK(store.cap() == 3);
  CHECK(store.append(Vector{2}, C));
  CHECK_FALSE(store.append(Vector{3}, C));
  CHECK(store.size() == 3);
  store.set_sigma(-4.0);
  CHECK(store.sigma() == PrototypeStore::kMinSigma);
}

TEST_CASE("init_prototypes averages same-class samples") {
  std::vector<Vector> chosen{{1, 1}, {3, 3}, {5, 5}, {7, 7}};
  std::vector<Vector> rejected{{-1, 0}, {-2, 0}};
  std::vector<LabeledEmbedding> ex;
  for (const auto& v : chosen) ex.push_back({v, C});
  for (const auto& v : rejected) ex.push_back({v, R});

  Rng rng(5);
  const auto one = init_prototypes(ex, 1, 2, 1.0, 3.0, rng);
  CHECK(one.size() == 4);
  CHECK(one.count(C) == 2);
  for (const auto& p : one.prototypes()) {
    const auto& pool = p.label == C ? chosen : rejected;
    CHECK(std::find(pool.begin(), pool.end(), p.vector) != pool.end());
  }
  CHECK(one.at(0).vector != one.at(1).vector);

  Rng rng2(5);
  const auto two = init_prototypes(ex, 2, 1, 1.0, 3.0, rng2);
  CHECK(two.at(1).vector == Vector{-1.5, 0});
  CHECK(two.initial_count() == 2);
  CHECK(two.cap() == 6);

  Rng rng3(0);
  try {
    init_prototypes(ex, 2, 2, 1.0, 3.0, rng3);
    FAIL("expected an initialization error");
  } catch (const InitializationError& e) {
    CHECK(std::string(e.what()).find("rejected") != std::string::npos);
  }
}

TEST_CASE("mean of a sample and its negation is zero") {
  Vector v{0.3, -2.0, 5.0};
  Vector w{-0.3, 2.0, -5.0};
  std::vector<LabeledEmbedding> ex{{v, C}, {w, C}, {v, R}, {v, R}};
  Rng rng(1);
  const auto store = init_prototypes(ex, 2, 1, 1.0, 3.0, rng);
  CHECK(store.at(0).vector == Vector{0, 0, 0});
}

TEST_CASE("survivor targets") {
  CHECK(survivor_target(1.0, 5) == 5);
  CHECK(survivor_target(0.8, 5) == 4);
  CHECK(survivor_target(0.5, 1) == 1);
  CHECK(survivor_target(0.1, 3) == 1);
  CHECK(survivor_target(0.7, 10) == 7);
}

TEST_CASE("cosine dropout drops one of the most similar pair") {
  const auto store = make_store({{Vector{1, 0}, C},
                                 {Vector{0.999, 0.045}, C},
                                 {Vector{0, 1}, C},
                                 {Vector{1, 1}, R}});
  Rng rng(0);
  DropoutConfig cfg{2.0 / 3.0, true, DropoutMode::cosine};
  const auto s = select_survivors(store, C, cfg, rng);
  REQUIRE(s.size() == 2);
  CHECK(std::count(s.begin(), s.end(), 2u) == 1);
  CHECK(s == std::vector<std::size_t>{0, 2});

  cfg.keep_ratio = 1.0;
  CHECK(select_survivors(store, C, cfg, rng).size() == 3);
  CHECK(select_survivors(store, R, DropoutConfig{0.1, true, DropoutMode::cosine}, rng) ==
        std::vector<std::size_t>{3});
  CHECK(select_survivors(store, C, DropoutConfig{0.4, false, DropoutMode::cosine}, rng)
            .size() == 3);
  CHECK(select_survivors(store, C, DropoutConfig{0.4, true, DropoutMode::none}, rng)
            .size() == 3);
}

TEST_CASE("random dropout keeps the target count") {
  std::vector<std::pair<Vector, PreferenceClass>> items;
  for (int i = 0; i < 10; ++i) items.push_back({Vector{double(i), 1}, C});
  items.push_back({Vector{0, 0}, R});
  const auto store = make_store(items);
  Rng rng(9);
  std::set<std::vector<std::size_t>> seen;
  for (int t = 0; t < 20; ++t) {
    const auto s = select_survivors(store, C, DropoutConfig{0.5, true, DropoutMode::random}, rng);
    CHECK(s.size() == 5);
    CHECK(std::is_sorted(s.begin(), s.end()));
    seen.insert(s);
  }
  CHECK(seen.size() > 1);
}

TEST_CASE("cosine dropout matches the brute-force oracle") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.index(6);
    std::vector<std::vector<double>> vecs;
    std::vector<std::pair<Vector, PreferenceClass>> items;
    for (std::size_t i = 0; i < k; ++i) {
      Vector v{rng.normal(), rng.normal(), rng.normal()};
      vecs.push_back(v);
      items.push_back({v, C});
    }
    items.push_back({Vector{1, 0, 0}, R});
    const auto store = make_store(items);
    const double r = 0.05 + 0.95 * rng.uniform();
    Rng unused(0);
    const auto got = select_survivors(store, C, DropoutConfig{r, true, DropoutMode::cosine}, unused);
    std::vector<std::size_t> ids(k);
    for (std::size_t i = 0; i < k; ++i) ids[i] = i;
    CHECK(got == oracle::brute_force_survivors(vecs, ids, survivor_target(r, k)));
  }
}

TEST_CASE("membership examples") {
  const auto store = make_store({{Vector{0, 0}, C}, {Vector{2, 0}, C}, {Vector{9, 9}, R}});
  const std::vector<std::size_t> one{0};
  CHECK(membership(Vector{5, 5}, store, C, one) == Vector{1.0});
  const std::vector<std::size_t> both{0, 1};
  const auto w = membership(Vector{1, 0}, store, C, both);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));

  // squared distances 0 and ln 3
  const double d = std::sqrt(std::log(3.0));
  const auto s2 = make_store({{Vector{0}, C}, {Vector{d}, C}, {Vector{5}, R}});
  const auto w2 = membership(Vector{0}, s2, C, both);
  CHECK(std::abs(w2[0] - 0.75) < 1e-12);
  CHECK(std::abs(w2[1] - 0.25) < 1e-12);

  const std::vector<std::size_t> mixed{0, 2};
  CHECK_THROWS_AS(membership(Vector{0, 0}, store, C, mixed), InvariantError);
}

TEST_CASE("membership survives huge distances") {
  const auto store = make_store({{Vector{1e6}, C}, {Vector{1e6 + 1}, C}, {Vector{0}, R}});
  const std::vector<std::size_t> ids{0, 1};
  const auto w = membership(Vector{0}, store, C, ids);
  CHECK(std::isfinite(w[0]));
  CHECK(w[0] + w[1] == doctest::Approx(1.0));
  CHECK(w[0] == 1.0);
}

TEST_CASE("refine examples") {
  const auto store = make_store({{Vector{0, 0}, C}, {Vector{4, 0}, C}, {Vector{1, 1}, R}});
  const std::vector<std::size_t> ids{0, 1};
  CHECK(refine_embedding(Vector{1.0}, std::vector<std::size_t>{1}, store) == Vector{4, 0});
  CHECK(refine_embedding(Vector{0.5, 0.5}, ids, store) == Vector{2, 0});
  CHECK(refine_embedding(Vector{0.75, 0.25}, ids, store) == Vector{1, 0});
}

TEST_CASE("membership grows as e approaches a prototype") {
  // e moves on the unit circle around p1, so only its distance to p0 changes
  const auto store = make_store({{Vector{2, 0}, C}, {Vector{0, 0}, C}, {Vector{0, 0}, R}});
  const std::vector<std::size_t> ids{0, 1};
  double previous = 0.0;
  for (int i = 8; i >= 0; --i) {
    const double theta = i * 0.35;
    const auto w = membership(Vector{std::cos(theta), std::sin(theta)}, store, C, ids);
    CHECK(w[0] > previous);
    previous = w[0];
  }
}

TEST_CASE("imp threshold") {
  ImpParams p;
  CHECK(std::abs(imp_threshold(p, 1.0, 2) - 2.0 * std::log(0.1 / 6.0)) < 1e-12);
  CHECK(imp_threshold(p, 1.0, 2) == doctest::Approx(-8.188).epsilon(1e-4));
  ImpParams one{1.0, 1e-12, std::nullopt};
  CHECK(std::abs(imp_threshold(one, 0.7, 4)) < 1e-9);
  ImpParams over{0.1, 5.0, 3.0};
  CHECK(imp_threshold(over, 1.0, 100) == 3.0);
  // large dimensions stay finite
  CHECK(std::isfinite(imp_threshold(p, 1.0, 1'000'000)));
  CHECK_THROWS_AS(ImpParams({0.0, 5.0, std::nullopt}).validate(), ConfigError);
}

TEST_CASE("maybe_spawn") {
  auto store = make_store({{Vector{0, 0}, C}, {Vector{5, 5}, R}}, 2.0);
  CHECK_FALSE(maybe_spawn(Vector{0, 0}, C, store, 0.0));
  // the rejected prototype at distance 0 is ignored for a chosen sample
  CHECK(maybe_spawn(Vector{5, 5}, C, store, 1.0));
  CHECK(store.size() == 3);
  CHECK(store.at(2).label == C);
  CHECK(maybe_spawn(Vector{0, 0}, R, store, -1.0));
  CHECK(store.size() == store.cap());
  CHECK_FALSE(maybe_spawn(Vector{100, 100}, C, store, -1.0));
  CHECK(store.size() == 4);
}

TEST_CASE("spawn is monotone in lambda") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vector e{rng.normal(), rng.normal()};
    const double l1 = 4.0 * rng.normal();
    const double l2 = l1 - rng.uniform();
    auto s1 = make_store({{Vector{0, 0}, C}, {Vector{1, 1}, R}});
    auto s2 = s1;
    if (maybe_spawn(e, C, s1, l1)) CHECK(maybe_spawn(e, C, s2, l2));
  }
}
