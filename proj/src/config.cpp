#include "protorm/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <utility>

#include "protorm/error.hpp"

namespace protorm {
namespace {

using json = nlohmann::json;

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t as_uint(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError("'" + key + "' must be a non-negative integer");
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("'" + key + "' must be true or false");
  return v.get<bool>();
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"data", [](RunConfig& c, const json& v, const std::string& k) { c.data = as_string(v, k); }},
      {"checkpoint", [](RunConfig& c, const json& v, const std::string& k) { c.checkpoint = as_string(v, k); }},
      {"out", [](RunConfig& c, const json& v, const std::string& k) { c.out = as_string(v, k); }},
      {"fraction", [](RunConfig& c, const json& v, const std::string& k) { c.fraction = as_real(v, k); }},
      {"fractions", [](RunConfig& c, const json& v, const std::string& k) {
         if (!v.is_array()) throw ConfigError("'" + k + "' must be an array");
         c.fractions.clear();
         for (const json& x : v) c.fractions.push_back(as_real(x, k));
       }},
      {"seeds", [](RunConfig& c, const json& v, const std::string& k) {
         if (!v.is_array()) throw ConfigError("'" + k + "' must be an array");
         c.seeds.clear();
         for (const json& x : v) c.seeds.push_back(as_uint(x, k));
       }},
      {"embed_dim", [](RunConfig& c, const json& v, const std::string& k) { c.setup.encoder.embed_dim = as_uint(v, k); }},
      {"max_prompt_tokens", [](RunConfig& c, const json& v, const std::string& k) { c.setup.encoder.align.max_prompt_tokens = as_uint(v, k); }},
      {"max_answer_tokens", [](RunConfig& c, const json& v, const std::string& k) { c.setup.encoder.align.max_answer_tokens = as_uint(v, k); }},
      {"encoder_seed", [](RunConfig& c, const json& v, const std::string& k) { c.setup.encoder.seed = as_uint(v, k); }},
      {"truncate", [](RunConfig& c, const json& v, const std::string& k) {
         const std::string s = as_string(v, k);
         if (s == "tail") c.setup.encoder.truncate = Truncation::tail;
         else if (s == "head") c.setup.encoder.truncate = Truncation::head;
         else throw ConfigError("'truncate' must be tail or head");
       }},
      {"mode", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.mode = parse_mode(as_string(v, k)); }},
      {"seed", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.seed = as_uint(v, k); }},
      {"batch_size", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.batch_size = as_uint(v, k); }},
      {"learning_rate", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.learning_rate = as_real(v, k); }},
      {"max_epochs", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.max_epochs = as_uint(v, k); }},
      {"early_stop_patience", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.early_stop_patience = as_uint(v, k); }},
      {"momentum", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.momentum = as_real(v, k); }},
      {"validation_fraction", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.validation_fraction = as_real(v, k); }},
      {"k0_per_class", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.k0_per_class = as_uint(v, k); }},
      {"n_per_proto", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.n_per_proto = as_uint(v, k); }},
      {"sigma_init", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.sigma_init = as_real(v, k); }},
      {"cap_multiplier", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.cap_multiplier = as_real(v, k); }},
      {"parallel", [](RunConfig& c, const json& v, const std::string& k) { c.setup.train.parallel = as_bool(v, k); }},
      {"alpha", [](RunConfig& c, const json& v, const std::string& k) { c.setup.imp.alpha = as_real(v, k); }},
      {"rho_base", [](RunConfig& c, const json& v, const std::string& k) { c.setup.imp.rho_base = as_real(v, k); }},
      {"lambda_override", [](RunConfig& c, const json& v, const std::string& k) {
         if (v.is_null()) c.setup.imp.lambda_override.reset();
         else c.setup.imp.lambda_override = as_real(v, k);
       }},
      {"tau", [](RunConfig& c, const json& v, const std::string& k) { c.setup.loss.tau = as_real(v, k); }},
      {"rho_div", [](RunConfig& c, const json& v, const std::string& k) { c.setup.loss.rho_div = as_real(v, k); }},
      {"diversity_scope", [](RunConfig& c, const json& v, const std::string& k) { c.setup.loss.diversity_scope = parse_diversity_scope(as_string(v, k)); }},
      {"keep_ratio", [](RunConfig& c, const json& v, const std::string& k) { c.setup.dropout.keep_ratio = as_real(v, k); }},
      {"dropout_enabled", [](RunConfig& c, const json& v, const std::string& k) { c.setup.dropout.enabled = as_bool(v, k); }},
      {"dropout_mode", [](RunConfig& c, const json& v, const std::string& k) { c.setup.dropout.mode = parse_dropout_mode(as_string(v, k)); }},
      {"num_examples", [](RunConfig& c, const json& v, const std::string& k) { c.synth.num_examples = as_uint(v, k); }},
      {"vocab_size", [](RunConfig& c, const json& v, const std::string& k) { c.synth.vocab_size = as_uint(v, k); }},
      {"tokens_per_text", [](RunConfig& c, const json& v, const std::string& k) { c.synth.tokens_per_text = as_uint(v, k); }},
      {"quality_noise", [](RunConfig& c, const json& v, const std::string& k) { c.synth.quality_noise = as_real(v, k); }},
      {"quality_tilt", [](RunConfig& c, const json& v, const std::string& k) { c.synth.quality_tilt = as_real(v, k); }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [key, setter] : setters()) out.push_back(key);
    return out;
  }();
  return keys;
}

void RunConfig::apply(const json& object) {
  if (!object.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : object.items()) {
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const auto& entry) { return entry.first == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(*this, value, key);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    explicit_keys.insert(key);
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  const json object = json::parse(in, nullptr, false);
  if (object.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  apply(object);
}

void RunConfig::validate() const {
  setup.validate();
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  if (fractions.empty()) throw ConfigError("fractions must not be empty");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in (0, 1]");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["data"] = data;
  j["checkpoint"] = checkpoint;
  j["out"] = out;
  j["fraction"] = fraction;
  j["fractions"] = fractions;
  j["seeds"] = seeds;
  j["embed_dim"] = setup.encoder.embed_dim;
  j["max_prompt_tokens"] = setup.encoder.align.max_prompt_tokens;
  j["max_answer_tokens"] = setup.encoder.align.max_answer_tokens;
  j["encoder_seed"] = setup.encoder.seed;
  j["truncate"] = setup.encoder.truncate == Truncation::tail ? "tail" : "head";
  j["mode"] = to_string(setup.train.mode);
  j["seed"] = setup.train.seed;
  j["batch_size"] = setup.train.batch_size;
  j["learning_rate"] = setup.train.learning_rate;
  j["max_epochs"] = setup.train.max_epochs;
  j["early_stop_patience"] = setup.train.early_stop_patience;
  j["momentum"] = setup.train.momentum;
  j["validation_fraction"] = setup.train.validation_fraction;
  j["k0_per_class"] = setup.train.k0_per_class;
  j["n_per_proto"] = setup.train.n_per_proto;
  j["sigma_init"] = setup.train.sigma_init;
  j["cap_multiplier"] = setup.train.cap_multiplier;
  j["parallel"] = setup.train.parallel;
  j["alpha"] = setup.imp.alpha;
  j["rho_base"] = setup.imp.rho_base;
  j["lambda_override"] = setup.imp.lambda_override
                             ? nlohmann::ordered_json(*setup.imp.lambda_override)
                             : nlohmann::ordered_json(nullptr);
  j["tau"] = setup.loss.tau;
  j["rho_div"] = setup.loss.rho_div;
  j["diversity_scope"] = to_string(setup.loss.diversity_scope);
  j["keep_ratio"] = setup.dropout.keep_ratio;
  j["dropout_enabled"] = setup.dropout.enabled;
  j["dropout_mode"] = to_string(setup.dropout.mode);
  j["num_examples"] = synth.num_examples;
  j["vocab_size"] = synth.vocab_size;
  j["tokens_per_text"] = synth.tokens_per_text;
  j["quality_noise"] = synth.quality_noise;
  j["quality_tilt"] = synth.quality_tilt;
  return j;
}

}  // namespace protorm
