#include "protorm/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "protorm/error.hpp"

namespace protorm {
namespace {

std::string hex(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

class Writer {
 public:
  template <typename T>
  void field(std::string_view key, const T& value) {
    out_ << key << ' ' << value << '\n';
  }
  void real(std::string_view key, double value) { field(key, hex(value)); }
  void reals(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out_ << (i ? " " : "") << hex(values[i]);
    }
    out_ << '\n';
  }
  std::ostringstream& stream() { return out_; }

 private:
  std::ostringstream out_;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::vector<std::string_view> line() {
    if (pos_ >= text_.size()) fail("unexpected end of checkpoint");
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    std::string_view l = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_no_;
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < l.size()) {
      while (i < l.size() && l[i] == ' ') ++i;
      const std::size_t j = l.find(' ', i);
      const std::size_t stop = j == std::string_view::npos ? l.size() : j;
      if (stop > i) tokens.push_back(l.substr(i, stop - i));
      i = stop;
    }
    return tokens;
  }

  std::string_view value(std::string_view key) {
    const auto tokens = line();
    if (tokens.size() != 2 || tokens[0] != key) fail("expected '" + std::string(key) + "'");
    return tokens[1];
  }

  std::size_t count(std::string_view key) { return to_count(value(key)); }
  double real(std::string_view key) { return to_real(value(key)); }

  std::size_t to_count(std::string_view s) {
    std::size_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad integer");
    return v;
  }

  double to_real(std::string_view s) {
    double v = 0.0;
    const auto r =
        std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad real");
    return v;
  }

  Vector reals(std::size_t n) {
    const auto tokens = line();
    if (tokens.size() != n) fail("expected " + std::to_string(n) + " values");
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = to_real(tokens[i]);
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError("checkpoint line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const TrainState& state) {
  Writer w;
  w.stream() << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  w.field("mode", to_string(state.mode));
  w.field("embed_dim", state.encoder.embed_dim);
  w.field("max_prompt_tokens", state.encoder.align.max_prompt_tokens);
  w.field("max_answer_tokens", state.encoder.align.max_answer_tokens);
  w.field("encoder_seed", state.encoder.seed);
  w.field("truncate", state.encoder.truncate == Truncation::tail ? "tail" : "head");
  w.field("seed", state.seed);
  w.real("validation_fraction", state.validation_fraction);
  w.field("epoch", state.epoch);
  w.real("best_validation_accuracy", state.best_validation_accuracy);
  w.field("dim", state.head.weights.size());
  if (const PrototypeStore* store = state.store_ptr()) {
    w.real("sigma", store->sigma());
    w.field("k0", store->initial_count());
    w.real("cap_multiplier", store->cap_multiplier());
    w.field("cap", store->cap());
    w.field("prototypes", store->size());
    for (const Prototype& p : store->prototypes()) {
      w.stream() << p.id << ' ' << to_string(p.label) << ' ';
      w.reals(p.vector);
    }
  } else {
    w.field("prototypes", 0);
  }
  w.real("bias", state.head.bias);
  w.stream() << "weights ";
  w.reals(state.head.weights);
  w.stream() << "end\n";
  return w.stream().str();
}

TrainState parse_checkpoint(std::string_view text) {
  Reader r(text);
  const auto magic = r.line();
  if (magic.size() != 2 || magic[0] != kCheckpointMagic) r.fail("bad magic string");
  if (magic[1] != std::to_string(kCheckpointVersion)) {
    r.fail("unsupported version " + std::string(magic[1]));
  }
  TrainState s;
  try {
    s.mode = parse_mode(r.value("mode"));
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  s.encoder.embed_dim = r.count("embed_dim");
  s.encoder.align.max_prompt_tokens = r.count("max_prompt_tokens");
  s.encoder.align.max_answer_tokens = r.count("max_answer_tokens");
  s.encoder.seed = r.count("encoder_seed");
  const auto trunc = r.value("truncate");
  if (trunc != "tail" && trunc != "head") r.fail("bad truncate policy");
  s.encoder.truncate = trunc == "tail" ? Truncation::tail : Truncation::head;
  s.seed = r.count("seed");
  s.validation_fraction = r.real("validation_fraction");
  s.epoch = r.count("epoch");
  s.best_validation_accuracy = r.real("best_validation_accuracy");
  const std::size_t dim = r.count("dim");
  try {
    s.encoder.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  if (dim != s.encoder.combined_dim()) r.fail("dim does not match encoder");

  if (s.mode == Mode::proto) {
    const double sigma = r.real("sigma");
    const std::size_t k0 = r.count("k0");
    const double cap_multiplier = r.real("cap_multiplier");
    const std::size_t cap = r.count("cap");
    const std::size_t n = r.count("prototypes");
    std::vector<Prototype> prototypes;
    for (std::size_t i = 0; i < n; ++i) {
      auto tokens = r.line();
      if (tokens.size() != dim + 2) r.fail("bad prototype record");
      Prototype p;
      p.id = r.to_count(tokens[0]);
      try {
        p.label = parse_preference_class(tokens[1]);
      } catch (const Error& e) {
        r.fail(e.what());
      }
      p.vector.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) p.vector[j] = r.to_real(tokens[j + 2]);
      prototypes.push_back(std::move(p));
    }
    try {
      s.store.emplace(dim, sigma, cap_multiplier, std::move(prototypes), k0);
    } catch (const Error& e) {
      r.fail(e.what());
    }
    if (s.store->cap() != cap) r.fail("cap does not match k0 and cap_multiplier");
  } else if (r.count("prototypes") != 0) {
    r.fail("baseline checkpoint with prototypes");
  }

  s.head.bias = r.real("bias");
  auto tokens = r.line();
  if (tokens.size() != dim + 1 || tokens[0] != "weights") r.fail("bad weights record");
  s.head.weights.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) s.head.weights[j] = r.to_real(tokens[j + 1]);
  const auto end = r.line();
  if (end.size() != 1 || end[0] != "end") r.fail("missing end marker");
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(state);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_checkpoint(buf.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace protorm
