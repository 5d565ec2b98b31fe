// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <vector>

#include "protorm/kernels.hpp"
#include "protorm/rng.hpp"

namespace {

using namespace protorm;

constexpr std::size_t kDim = 2048;

struct Fixture {
  std::vector<EncodedExample> examples;
  std::vector<const EncodedExample*> batch;
  PrototypeStore store;
  LinearHead head;
  Survivors survivors;

  static Vector random_vector(Rng& rng) {
    Vector v(kDim);
    for (double& x : v) x = rng.normal() * 0.1;
    return v;
  }

  static PrototypeStore make_store(Rng& rng, std::size_t per_class) {
    std::vector<Prototype> ps;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
      ps.push_back(Prototype{i, i < per_class ? PreferenceClass::chosen
                                              : PreferenceClass::rejected,
                             random_vector(rng)});
    }
    return PrototypeStore(kDim, 1.0, 3.0, std::move(ps));
  }

  Fixture(std::size_t n, std::size_t per_class)
      : store([&] {
          Rng rng(7);
          return make_store(rng, per_class);
        }()) {
    Rng rng(11);
    for (std::size_t i = 0; i < n; ++i) {
      examples.push_back({random_vector(rng), random_vector(rng)});
    }
    for (const auto& ex : examples) batch.push_back(&ex);
    head.weights = random_vector(rng);
    survivors = {store.ids_of(PreferenceClass::chosen),
                 store.ids_of(PreferenceClass::rejected)};
  }
};

void BM_ProtoBatchSerial(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    auto r = proto_batch_serial(f.batch, f.store, f.head, f.survivors, LossConfig{});
    benchmark::DoNotOptimize(r.total_loss);
  }
}

void BM_ProtoBatchParallel(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    auto r = proto_batch_parallel(f.batch, f.store, f.head, f.survivors, LossConfig{});
    benchmark::DoNotOptimize(r.total_loss);
  }
}

void BM_ScorePairsSerial(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    auto r = score_pairs_serial(f.examples, &f.store, f.head);
    benchmark::DoNotOptimize(r.data());
  }
}

void BM_ScorePairsParallel(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    auto r = score_pairs_parallel(f.examples, &f.store, f.head);
    benchmark::DoNotOptimize(r.data());
  }
}

}  // namespace

BENCHMARK(BM_ProtoBatchSerial)->Arg(8)->Arg(64);
BENCHMARK(BM_ProtoBatchParallel)->Arg(8)->Arg(64);
BENCHMARK(BM_ScorePairsSerial)->Arg(250)->Arg(1000);
BENCHMARK(BM_ScorePairsParallel)->Arg(250)->Arg(1000);

BENCHMARK_MAIN();
