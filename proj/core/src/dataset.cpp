#include "tgcmc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "tgcmc/error.hpp"

namespace tgcmc {
namespace {

std::int64_t parse_int(std::string_view field, std::size_t line_no) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError(line_no, "expected integer, got '" + std::string(field) + "'");
  }
  return value;
}

std::vector<RawRating> parse_delimited(std::istream& in, std::string_view sep) {
  std::vector<RawRating> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
    if (rest.empty()) continue;

    std::string_view fields[4];
    std::size_t n = 0;
    while (true) {
      const auto pos = rest.find(sep);
      if (n == 4) {
        throw ParseError(line_no, "more than 4 fields");
      }
      if (pos == std::string_view::npos) {
        fields[n++] = rest;
        break;
      }
      fields[n++] = rest.substr(0, pos);
      rest.remove_prefix(pos + sep.size());
    }
    if (n != 4) {
      throw ParseError(line_no, "expected 4 fields, got " + std::to_string(n));
    }

    RawRating r;
    r.user_raw = parse_int(fields[0], line_no);
    r.item_raw = parse_int(fields[1], line_no);
    const std::int64_t rating = parse_int(fields[2], line_no);
    r.timestamp = parse_int(fields[3], line_no);
    if (rating < 1 || rating > 5) {
      throw DomainError("line " + std::to_string(line_no) + ": rating " +
                        std::to_string(rating) + " outside 1..5");
    }
    if (r.timestamp < 0) {
      throw DomainError("line " + std::to_string(line_no) + ": negative timestamp");
    }
    r.rating = static_cast<int>(rating);
    out.push_back(r);
  }
  return out;
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "ml100k") return DatasetFormat::kMl100k;
  if (name == "ml1m") return DatasetFormat::kMl1m;
  throw ConfigError("unknown dataset format '" + std::string(name) +
                    "' (expected ml100k or ml1m)");
}

std::string_view to_string(DatasetFormat format) {
  return format == DatasetFormat::kMl100k ? "ml100k" : "ml1m";
}

std::vector<RawRating> parse_ml100k(std::istream& in) { return parse_delimited(in, "\t"); }

std::vector<RawRating> parse_ml1m(std::istream& in) { return parse_delimited(in, "::"); }

std::vector<RawRating> parse_ratings(std::istream& in, DatasetFormat format) {
  return format == DatasetFormat::kMl100k ? parse_ml100k(in) : parse_ml1m(in);
}

RatingsDataset build_dataset(const std::vector<RawRating>& raw) {
  if (raw.empty()) throw DomainError("cannot build a dataset from zero ratings");

  RatingsDataset ds;
  for (const auto& r : raw) {
    if (ds.user_map.try_emplace(r.user_raw, static_cast<std::uint32_t>(ds.user_ids.size())).second) {
      ds.user_ids.push_back(r.user_raw);
    }
    if (ds.item_map.try_emplace(r.item_raw, static_cast<std::uint32_t>(ds.item_ids.size())).second) {
      ds.item_ids.push_back(r.item_raw);
    }
  }
  ds.n_users = ds.user_ids.size();
  ds.n_items = ds.item_ids.size();

  std::vector<int> levels;
  for (const auto& r : raw) levels.push_back(r.rating);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  ds.rating_levels = levels;

  // Latest record wins for repeated (user, item) pairs.
  std::unordered_map<std::uint64_t, std::size_t> latest;
  latest.reserve(raw.size());
  for (std::size_t pos = 0; pos < raw.size(); ++pos) {
    const auto u = ds.user_map.at(raw[pos].user_raw);
    const auto v = ds.item_map.at(raw[pos].item_raw);
    const std::uint64_t key = (std::uint64_t{u} << 32) | v;
    auto [it, inserted] = latest.try_emplace(key, pos);
    if (!inserted && raw[pos].timestamp >= raw[it->second].timestamp) it->second = pos;
  }

  std::vector<std::size_t> order;
  order.reserve(latest.size());
  for (const auto& [key, pos] : latest) order.push_back(pos);
  std::sort(order.begin(), order.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return raw[a].timestamp < raw[b].timestamp;
  });

  ds.ratings.reserve(order.size());
  for (const auto pos : order) {
    const auto& r = raw[pos];
    const auto level = std::lower_bound(levels.begin(), levels.end(), r.rating) - levels.begin();
    ds.ratings.push_back(Rating{ds.user_map.at(r.user_raw), ds.item_map.at(r.item_raw),
                                static_cast<std::uint32_t>(level), r.timestamp});
  }
  return ds;
}

TemporalSplit temporal_split(const RatingsDataset& ds, double test_frac, double val_frac) {
  if (!(test_frac > 0.0 && test_frac < 1.0) || !(val_frac > 0.0 && val_frac < 1.0)) {
    throw DomainError("split fractions must lie strictly between 0 and 1");
  }
  const std::size_t n = ds.size();
  // The epsilon absorbs representation error such as 0.2 * 10 = 2.0000000000000004.
  const auto floor_of = [](double x) {
    return static_cast<std::size_t>(std::floor(x + 1e-9));
  };
  const std::size_t n_test = floor_of(test_frac * static_cast<double>(n));
  const std::size_t remainder = n - n_test;
  const std::size_t n_val = floor_of(val_frac * static_cast<double>(remainder));
  const std::size_t n_train = remainder - n_val;
  if (n_test == 0 || n_val == 0 || n_train == 0) {
    throw DomainError("split of " + std::to_string(n) + " ratings leaves an empty part (train=" +
                      std::to_string(n_train) + ", val=" + std::to_string(n_val) +
                      ", test=" + std::to_string(n_test) + ")");
  }
  TemporalSplit split;
  split.train = {0, n_train};
  split.val = {n_train, n_train + n_val};
  split.test = {n_train + n_val, n};
  split.test_fraction = test_frac;
  split.val_fraction = val_frac;
  return split;
}

std::string dataset_checksum(const RatingsDataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>(v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& r : ds.ratings) {
    mix(ds.user_ids[r.user]);
    mix(ds.item_ids[r.item]);
    mix(ds.rating_value(r));
    mix(r.timestamp);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SplitManifest make_manifest(const RatingsDataset& ds, const TemporalSplit& split,
                            std::string dataset_path, DatasetFormat format) {
  SplitManifest m;
  m.dataset_path = std::move(dataset_path);
  m.dataset_format = std::string(to_string(format));
  m.checksum = dataset_checksum(ds);
  m.n_ratings = ds.size();
  m.n_users = ds.n_users;
  m.n_items = ds.n_items;
  m.split = split;
  return m;
}

std::string manifest_to_json(const SplitManifest& m) {
  const auto range = [](const IndexRange& r) {
    return nlohmann::ordered_json{{"begin", r.begin}, {"end", r.end}, {"size", r.size()}};
  };
  nlohmann::ordered_json j;
  j["dataset"] = {{"path", m.dataset_path}, {"format", m.dataset_format}, {"checksum", m.checksum}};
  j["n_ratings"] = m.n_ratings;
  j["n_users"] = m.n_users;
  j["n_items"] = m.n_items;
  j["fractions"] = {{"test", m.split.test_fraction}, {"val", m.split.val_fraction}};
  j["train"] = range(m.split.train);
  j["val"] = range(m.split.val);
  j["test"] = range(m.split.test);
  return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(std::string_view text) {
  SplitManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.dataset_path = j.at("dataset").at("path").get<std::string>();
    m.dataset_format = j.at("dataset").at("format").get<std::string>();
    m.checksum = j.at("dataset").at("checksum").get<std::string>();
    m.n_ratings = j.at("n_ratings").get<std::size_t>();
    m.n_users = j.at("n_users").get<std::size_t>();
    m.n_items = j.at("n_items").get<std::size_t>();
    m.split.test_fraction = j.at("fractions").at("test").get<double>();
    m.split.val_fraction = j.at("fractions").at("val").get<double>();
    const auto range = [&j](const char* key) {
      return IndexRange{j.at(key).at("begin").get<std::size_t>(),
                        j.at(key).at("end").get<std::size_t>()};
    };
    m.split.train = range("train");
    m.split.val = range("val");
    m.split.test = range("test");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("invalid split manifest: ") + e.what());
  }
  return m;
}

RatingsDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path.string() + "'");
  return build_dataset(parse_ratings(in, format));
}

}  // namespace tgcmc
