#include "tgcmc/app/runspec.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tgcmc/error.hpp"

namespace tgcmc::app {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
T get_as(const nlohmann::json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has a value of the wrong type");
  }
}

std::size_t get_count(const nlohmann::json& value, const std::string& key) {
  if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return value.get<std::size_t>();
}

template <typename F>
auto parse_enum(const nlohmann::json& value, const std::string& key, F parse) {
  const auto text = get_as<std::string>(value, key);
  try {
    return parse(text);
  } catch (const Error& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

void RunSpec::validate() const {
  if (mode == SequenceMode::kStatic && model.recurrent != RecurrentKind::kNone) {
    throw ConfigError("mode=static takes cell=none");
  }
  if (mode != SequenceMode::kStatic && model.recurrent == RecurrentKind::kNone) {
    throw ConfigError("mode=" + std::string(to_string(mode)) + " needs cell=gru or cell=lstm");
  }
  if (mode != SequenceMode::kStatic && model.steps < 1) throw ConfigError("steps must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0) || !(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("split fractions must lie in (0, 1)");
  }
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  train.validate();
}

const std::vector<std::string>& runspec_keys() {
  static const std::vector<std::string> keys{
      "dataset",      "dataset_format", "dataset_label",  "test_fraction", "val_fraction",
      "mode",         "cell",           "steps",          "d_hidden",      "d_output",
      "accum",        "dropout",        "norm",           "recurrent_hidden",
      "ordinal_sharing", "basis_count", "epochs",         "learning_rate", "adam_beta1",
      "adam_beta2",   "adam_eps",       "ema_decay",      "eval_every",    "seeds",
      "out",          "jobs"};
  return keys;
}

RunSpec apply_runspec_json(RunSpec s, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto& keys = runspec_keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "dataset") s.dataset = get_as<std::string>(v, key);
    else if (key == "dataset_format") s.format = parse_enum(v, key, parse_dataset_format);
    else if (key == "dataset_label") s.dataset_label = get_as<std::string>(v, key);
    else if (key == "test_fraction") s.test_fraction = get_as<double>(v, key);
    else if (key == "val_fraction") s.val_fraction = get_as<double>(v, key);
    else if (key == "mode") s.mode = parse_enum(v, key, parse_sequence_mode);
    else if (key == "cell") s.model.recurrent = parse_enum(v, key, parse_recurrent_kind);
    else if (key == "steps") s.model.steps = get_count(v, key);
    else if (key == "d_hidden") s.model.d_hidden = get_count(v, key);
    else if (key == "d_output") s.model.d_output = get_count(v, key);
    else if (key == "accum") s.model.accum = parse_enum(v, key, parse_accumulation);
    else if (key == "dropout") s.model.dropout = get_as<double>(v, key);
    else if (key == "norm") s.model.norm = parse_enum(v, key, parse_norm_scheme);
    else if (key == "recurrent_hidden") s.model.recurrent_hidden = get_count(v, key);
    else if (key == "ordinal_sharing") s.model.ordinal_sharing = get_as<bool>(v, key);
    else if (key == "basis_count") s.model.basis_count = get_count(v, key);
    else if (key == "epochs") s.train.epochs = get_count(v, key);
    else if (key == "learning_rate") s.train.learning_rate = get_as<double>(v, key);
    else if (key == "adam_beta1") s.train.adam_beta1 = get_as<double>(v, key);
    else if (key == "adam_beta2") s.train.adam_beta2 = get_as<double>(v, key);
    else if (key == "adam_eps") s.train.adam_eps = get_as<double>(v, key);
    else if (key == "ema_decay") s.train.ema_decay = get_as<double>(v, key);
    else if (key == "eval_every") s.train.eval_every = get_count(v, key);
    else if (key == "seeds") s.seeds = get_as<std::vector<std::uint64_t>>(v, key);
    else if (key == "out") s.out = get_as<std::string>(v, key);
    else if (key == "jobs") s.jobs = get_count(v, key);
  }
  return s;
}

RunSpec load_runspec(const std::filesystem::path& path, RunSpec base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return apply_runspec_json(std::move(base), j);
}

nlohmann::ordered_json runspec_to_json(const RunSpec& s) {
  return {{"dataset", s.dataset},
          {"dataset_format", std::string(to_string(s.format))},
          {"dataset_label", s.dataset_label},
          {"test_fraction", s.test_fraction},
          {"val_fraction", s.val_fraction},
          {"mode", std::string(to_string(s.mode))},
          {"cell", std::string(to_string(s.model.recurrent))},
          {"steps", s.model.steps},
          {"d_hidden", s.model.d_hidden},
          {"d_output", s.model.d_output},
          {"accum", std::string(to_string(s.model.accum))},
          {"dropout", s.model.dropout},
          {"norm", std::string(to_string(s.model.norm))},
          {"recurrent_hidden", s.model.recurrent_hidden},
          {"ordinal_sharing", s.model.ordinal_sharing},
          {"basis_count", s.model.basis_count},
          {"epochs", s.train.epochs},
          {"learning_rate", s.train.learning_rate},
          {"adam_beta1", s.train.adam_beta1},
          {"adam_beta2", s.train.adam_beta2},
          {"adam_eps", s.train.adam_eps},
          {"ema_decay", s.train.ema_decay},
          {"eval_every", s.train.eval_every},
          {"seeds", s.seeds},
          {"out", s.out},
          {"jobs", s.jobs}};
}

std::string run_fingerprint(const RunSpec& spec, const std::string& dataset_checksum,
                            std::uint64_t seed) {
  auto j = runspec_to_json(spec);
  j.erase("dataset");
  j.erase("dataset_label");
  j.erase("seeds");
  j.erase("out");
  j.erase("jobs");
  j["dataset_checksum"] = dataset_checksum;
  j["seed"] = seed;
  std::ostringstream os;
  os << std::hex << fnv1a(j.dump());
  return os.str();
}

}  // namespace tgcmc::app
