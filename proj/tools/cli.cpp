#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "protorm/checkpoint.hpp"
#include "protorm/config.hpp"
#include "protorm/data.hpp"
#include "protorm/error.hpp"
#include "protorm/loss.hpp"
#include "protorm/training.hpp"

namespace protorm::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

enum class Kind { real, uint, text, real_list, uint_list };

struct Flag {
  const char* name;
  const char* key;
  Kind kind;
  const char* help;
};

const std::vector<Flag>& config_flags() {
  static const std::vector<Flag> flags = {
      {"--data", "data", Kind::text, "Dataset (JSON Lines)"},
      {"--mode", "mode", Kind::text, "proto or baseline"},
      {"--fraction", "fraction", Kind::real, "Fraction of the training split to use"},
      {"--seed", "seed", Kind::uint, "Random seed"},
      {"--out", "out", Kind::text, "Output path"},
      {"--checkpoint", "checkpoint", Kind::text, "Checkpoint path"},
      {"--epochs", "max_epochs", Kind::uint, "Maximum epochs"},
      {"--lr", "learning_rate", Kind::real, "Learning rate"},
      {"--keep-ratio", "keep_ratio", Kind::real, "Dropout keep ratio"},
      {"--lambda-override", "lambda_override", Kind::real, "Fixed spawn threshold"},
      {"--tau", "tau", Kind::real, "Target mean prototype distance"},
      {"--rho-div", "rho_div", Kind::real, "Diversity loss weight"},
      {"--cap-multiplier", "cap_multiplier", Kind::real, "Prototype cap multiplier"},
      {"--k0", "k0_per_class", Kind::uint, "Initial prototypes per class"},
      {"--n-per-proto", "n_per_proto", Kind::uint, "Pairs per initial prototype (0: all)"},
      {"--batch-size", "batch_size", Kind::uint, "Minibatch size"},
      {"--patience", "early_stop_patience", Kind::uint, "Early stopping patience (0: off)"},
      {"--momentum", "momentum", Kind::real, "Gradient descent momentum"},
      {"--validation-fraction", "validation_fraction", Kind::real, "Validation share"},
      {"--sigma-init", "sigma_init", Kind::real, "Initial sigma"},
      {"--dropout-mode", "dropout_mode", Kind::text, "cosine, random or none"},
      {"--diversity-scope", "diversity_scope", Kind::text, "global or per_class"},
      {"--embed-dim", "embed_dim", Kind::uint, "Token embedding size"},
      {"--max-prompt-tokens", "max_prompt_tokens", Kind::uint, "Prompt token budget"},
      {"--max-answer-tokens", "max_answer_tokens", Kind::uint, "Answer token budget"},
      {"--encoder-seed", "encoder_seed", Kind::uint, "Encoder hash seed"},
      {"--truncate", "truncate", Kind::text, "tail or head"},
      {"--seeds", "seeds", Kind::uint_list, "Comma-separated seeds"},
      {"--fractions", "fractions", Kind::real_list, "Comma-separated fractions"},
      {"--num-examples", "num_examples", Kind::uint, "Synthetic pairs"},
      {"--vocab-size", "vocab_size", Kind::uint, "Synthetic vocabulary size"},
      {"--tokens-per-text", "tokens_per_text", Kind::uint, "Tokens per synthetic text"},
      {"--quality-noise", "quality_noise", Kind::real, "Label flip probability"},
      {"--quality-tilt", "quality_tilt", Kind::real, "Quality spread of synthetic answers"},
  };
  return flags;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    if (end > start) parts.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

nlohmann::json parse_value(const Flag& flag, const std::string& text) {
  const auto fail = [&]() -> nlohmann::json {
    throw ConfigError(std::string(flag.name) + ": invalid value '" + text + "'");
  };
  const auto real = [&](const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail();
    return v;
  };
  const auto uint = [&](const std::string& s) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail();
    return v;
  };
  switch (flag.kind) {
    case Kind::real: return real(text);
    case Kind::uint: return uint(text);
    case Kind::text: return text;
    case Kind::real_list: {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& p : split_commas(text)) a.push_back(real(p));
      return a;
    }
    case Kind::uint_list: {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& p : split_commas(text)) a.push_back(uint(p));
      return a;
    }
  }
  return fail();
}

std::string number(double v) { return nlohmann::json(v).dump(); }

struct Parsed {
  std::map<std::string, std::string> values;
  std::string config_path;
  bool serial = false;
};

void add_config_flags(CLI::App* cmd, Parsed& parsed) {
  cmd->add_option("--config", parsed.config_path, "JSON config file");
  cmd->add_flag("--serial", parsed.serial, "Use the serial kernels");
  for (const Flag& f : config_flags()) {
    cmd->add_option(f.name, parsed.values[f.key], f.help)->allow_extra_args(false);
  }
}

RunConfig build_config(CLI::App* cmd, const Parsed& parsed) {
  RunConfig cfg;
  if (!parsed.config_path.empty()) cfg.apply_file(parsed.config_path);
  nlohmann::json overrides = nlohmann::json::object();
  for (const Flag& f : config_flags()) {
    if (cmd->get_option(f.name)->count() > 0) {
      overrides[f.key] = parse_value(f, parsed.values.at(f.key));
    }
  }
  if (parsed.serial) overrides["parallel"] = false;
  cfg.apply(overrides);
  cfg.synth.seed = cfg.setup.train.seed;
  cfg.synth.embed_dim = cfg.setup.encoder.embed_dim;
  cfg.synth.encoder_seed = cfg.setup.encoder.seed;
  cfg.validate();
  return cfg;
}

Dataset load_dataset(const RunConfig& cfg, std::ostream& err) {
  if (cfg.data.empty()) throw ConfigError("--data is required");
  if (!fs::exists(cfg.data)) throw DataError("dataset not found: " + cfg.data);
  LoadReport report;
  Dataset ds = load_jsonl(cfg.data, &report);
  if (report.malformed > 0 || report.duplicates > 0) {
    err << "warning: " << cfg.data << ": skipped " << report.malformed
        << " malformed and " << report.duplicates << " duplicate-answer lines\n";
  }
  return ds;
}

// Training and validation sets for one seed. Only the training side is
// subsampled, so every fraction is scored on the same validation pairs.
std::pair<Dataset, Dataset> prepare_split(const Dataset& ds, const TrainSetup& setup,
                                          double fraction) {
  auto [train_set, val_set] =
      split_train_validation(ds, setup.train.validation_fraction, setup.train.seed);
  if (fraction < 1.0) train_set = subsample(train_set, fraction, setup.train.seed);
  return {std::move(train_set), std::move(val_set)};
}

ojson record_json(const MetricsRecord& r) {
  ojson j;
  j["record"] = r.kind;
  j["epoch"] = r.epoch;
  if (r.kind == "epoch") j["train_loss"] = r.train_loss;
  j["validation_accuracy"] = r.validation_accuracy;
  j["prototype_count"] = r.prototype_count;
  j["mean_prototype_distance"] = r.mean_prototype_distance;
  if (r.kind == "epoch") j["spawned"] = r.spawned;
  return j;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(cfg, err);
  const auto [train_set, val_set] = prepare_split(ds, cfg.setup, cfg.fraction);
  const std::string metrics_path = cfg.out.empty() ? "protorm-metrics.jsonl" : cfg.out;
  const std::string ckpt_path = cfg.checkpoint.empty() ? "protorm.ckpt" : cfg.checkpoint;

  std::ofstream metrics(metrics_path, std::ios::binary);
  if (!metrics) throw DataError("cannot write metrics log " + metrics_path);
  ojson header;
  header["record"] = "config";
  header["config"] = cfg.to_json();
  header["dataset"] = ds.source_name();
  header["fingerprint"] = ds.fingerprint();
  header["train_pairs"] = train_set.size();
  header["validation_pairs"] = val_set.size();
  metrics << header.dump() << '\n';

  const auto on_epoch = [&](const MetricsRecord& rec, const TrainState& state,
                            bool improved) {
    metrics << record_json(rec).dump() << '\n';
    metrics.flush();
    if (improved) save_checkpoint(state, ckpt_path + ".best");
  };
  const TrainResult result = train_split(train_set, val_set, cfg.setup, on_epoch);
  metrics << record_json(result.metrics.back()).dump() << '\n';
  if (!metrics) throw DataError("failed writing metrics log " + metrics_path);
  save_checkpoint(result.state, ckpt_path);

  out << "final validation accuracy " << number(result.metrics.back().validation_accuracy)
      << '\n';
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& split, std::ostream& out,
             std::ostream& err) {
  if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const TrainState state = load_checkpoint(cfg.checkpoint);
  const EncoderConfig& enc = cfg.setup.encoder;
  const auto clash = [&](const char* key, std::size_t a, std::size_t b) {
    if (cfg.is_explicit(key) && a != b) {
      throw DimensionError(std::string(key) + " differs from the checkpoint");
    }
  };
  clash("embed_dim", enc.embed_dim, state.encoder.embed_dim);
  clash("max_prompt_tokens", enc.align.max_prompt_tokens,
        state.encoder.align.max_prompt_tokens);
  clash("max_answer_tokens", enc.align.max_answer_tokens,
        state.encoder.align.max_answer_tokens);
  clash("encoder_seed", enc.seed, state.encoder.seed);

  const Dataset ds = load_dataset(cfg, err);
  Dataset target = ds;
  if (split != "all") {
    auto [train_set, val_set] =
        split_train_validation(ds, state.validation_fraction, state.seed);
    target = split == "train" ? std::move(train_set) : std::move(val_set);
  }
  const double acc = evaluate(state, target);
  out << "accuracy " << number(acc) << '\n';
  ojson summary;
  summary["record"] = "eval";
  summary["mode"] = to_string(state.mode);
  summary["split"] = split;
  summary["pairs"] = target.size();
  summary["accuracy"] = acc;
  summary["fingerprint"] = ds.fingerprint();
  out << summary.dump() << '\n';
  return kOk;
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(cfg, err);
  struct Row {
    double fraction;
    std::size_t train_pairs = 0;
    std::vector<double> proto, baseline;
  };
  std::vector<Row> rows;
  for (double f : cfg.fractions) rows.push_back(Row{f, 0, {}, {}});

  ojson cells = ojson::array();
  for (std::uint64_t seed : cfg.seeds) {
    for (Row& row : rows) {
      TrainSetup setup = cfg.setup;
      setup.train.seed = seed;
      const auto [train_set, val_set] = prepare_split(ds, setup, row.fraction);
      row.train_pairs = train_set.size();
      setup.train.mode = Mode::proto;
      const double p = train_split(train_set, val_set, setup).metrics.back().validation_accuracy;
      setup.train.mode = Mode::baseline;
      const double b = train_split(train_set, val_set, setup).metrics.back().validation_accuracy;
      row.proto.push_back(p);
      row.baseline.push_back(b);
      ojson cell;
      cell["seed"] = seed;
      cell["fraction"] = row.fraction;
      cell["train_pairs"] = train_set.size();
      cell["proto"] = p;
      cell["baseline"] = b;
      cells.push_back(cell);
    }
  }

  out << "fraction  train  proto            baseline         delta\n";
  ojson table = ojson::array();
  for (const Row& row : rows) {
    const Stats p = stats(row.proto);
    const Stats b = stats(row.baseline);
    std::vector<double> deltas(row.proto.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) deltas[i] = row.proto[i] - row.baseline[i];
    const Stats d = stats(deltas);
    char line[160];
    std::snprintf(line, sizeof(line), "%7s%%  %5zu  %s ± %s  %s ± %s  %s%s\n",
                  fixed(row.fraction * 100.0, 0).c_str(), row.train_pairs,
                  fixed(p.mean, 4).c_str(), fixed(p.std, 4).c_str(),
                  fixed(b.mean, 4).c_str(), fixed(b.std, 4).c_str(),
                  d.mean >= 0 ? "+" : "", fixed(d.mean, 4).c_str());
    out << line;
    ojson r;
    r["fraction"] = row.fraction;
    r["train_pairs"] = row.train_pairs;
    r["proto_mean"] = p.mean;
    r["proto_std"] = p.std;
    r["baseline_mean"] = b.mean;
    r["baseline_std"] = b.std;
    r["delta_mean"] = d.mean;
    table.push_back(r);
  }
  if (!cfg.out.empty()) {
    ojson doc;
    doc["config"] = cfg.to_json();
    doc["fingerprint"] = ds.fingerprint();
    doc["rows"] = table;
    doc["cells"] = cells;
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw DataError("cannot write " + cfg.out);
    f << doc.dump(2) << '\n';
  }
  return kOk;
}

int cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  const fs::path path = cfg.out.empty() ? fs::path("synthetic.jsonl") : fs::path(cfg.out);
  const SyntheticData data = synthesize(cfg.synth);
  save_jsonl(data.dataset, path);
  fs::path oracle = path;
  oracle.replace_extension();
  oracle += ".oracle.jsonl";
  save_oracle_jsonl(data.oracle, oracle);
  out << "wrote " << data.dataset.size() << " pairs to " << path.string() << '\n';
  out << "oracle " << oracle.string() << " (accuracy of the true rule "
      << number(oracle_accuracy(data.oracle)) << ")\n";
  out << "fingerprint " << data.dataset.fingerprint() << '\n';
  return kOk;
}

int cmd_inspect(const RunConfig& cfg, std::size_t top, std::ostream& out,
                std::ostream& err) {
  std::optional<PrototypeStore> store;
  if (!cfg.checkpoint.empty()) {
    const TrainState state = load_checkpoint(cfg.checkpoint);
    out << "mode " << to_string(state.mode) << '\n';
    store = state.store;
  } else {
    const Dataset ds = load_dataset(cfg, err);
    const auto [train_set, val_set] = prepare_split(ds, cfg.setup, cfg.fraction);
    out << "mode proto (fresh initialization)\n";
    store = initial_store(encode_dataset(train_set, cfg.setup.encoder), cfg.setup.train);
  }
  if (!store) {
    out << "prototypes 0\n";
    return kOk;
  }
  out << "prototypes " << store->size() << '\n';
  out << "chosen " << store->count(PreferenceClass::chosen) << '\n';
  out << "rejected " << store->count(PreferenceClass::rejected) << '\n';
  out << "initial " << store->initial_count() << '\n';
  out << "cap " << store->cap() << '\n';
  out << "sigma " << number(store->sigma()) << '\n';
  out << "mean_distance " << number(mean_prototype_distance(*store)) << '\n';

  struct Pair {
    double cos;
    std::size_t a, b;
  };
  std::vector<Pair> pairs;
  const auto ps = store->prototypes();
  for (std::size_t a = 0; a < ps.size(); ++a) {
    for (std::size_t b = a + 1; b < ps.size(); ++b) {
      pairs.push_back({cosine_similarity(ps[a].vector, ps[b].vector), a, b});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& x, const Pair& y) { return x.cos > y.cos; });
  out << "top_similar_pairs\n";
  for (std::size_t i = 0; i < std::min(top, pairs.size()); ++i) {
    out << "  " << pairs[i].a << ' ' << to_string(ps[pairs[i].a].label) << "  "
        << pairs[i].b << ' ' << to_string(ps[pairs[i].b].label) << "  "
        << fixed(pairs[i].cos, 6) << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype-based pairwise reward model"};
  app.require_subcommand(1);
  Parsed parsed;
  std::string split = "all";
  std::size_t top = 5;

  CLI::App* train_cmd = app.add_subcommand("train", "Train a reward model");
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a dataset with a checkpoint");
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Prototype model against baseline over fractions");
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset");
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Describe a prototype store");
  for (CLI::App* cmd : {train_cmd, eval_cmd, compare_cmd, gen_cmd, inspect_cmd}) {
    add_config_flags(cmd, parsed);
  }
  eval_cmd->add_option("--split", split, "all, train or validation")
      ->check(CLI::IsMember({"all", "train", "validation"}));
  inspect_cmd->add_option("--top", top, "Most similar pairs to list");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kUsageError;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const RunConfig cfg = build_config(cmd, parsed);
    if (cmd == train_cmd) return cmd_train(cfg, out, err);
    if (cmd == eval_cmd) return cmd_eval(cfg, split, out, err);
    if (cmd == compare_cmd) return cmd_compare(cfg, out, err);
    if (cmd == gen_cmd) return cmd_gen_data(cfg, out);
    return cmd_inspect(cfg, top, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace protorm::cli
