#ifndef TGCMC_DATASET_HPP_
#define TGCMC_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tgcmc {

// One line of a MovieLens ratings file, ids as they appear in the file.
struct RawRating {
  std::int64_t user_raw = 0;
  std::int64_t item_raw = 0;
  int rating = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const RawRating&, const RawRating&) = default;
};

enum class DatasetFormat { kMl100k, kMl1m };

DatasetFormat parse_dataset_format(std::string_view name);
std::string_view to_string(DatasetFormat format);

// `u.data`: user \t item \t rating \t timestamp.
std::vector<RawRating> parse_ml100k(std::istream& in);
// `ratings.dat`: UserID::MovieID::Rating::Timestamp.
std::vector<RawRating> parse_ml1m(std::istream& in);
std::vector<RawRating> parse_ratings(std::istream& in, DatasetFormat format);

// A rating after dense re-indexing. `level` indexes RatingsDataset::rating_levels.
struct Rating {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint32_t level = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

struct RatingsDataset {
  // Sorted ascending by (timestamp, original file position).
  std::vector<Rating> ratings;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  // Distinct rating values, ascending.
  std::vector<int> rating_levels;
  std::unordered_map<std::int64_t, std::uint32_t> user_map;
  std::unordered_map<std::int64_t, std::uint32_t> item_map;
  // Inverse maps: dense index -> raw id.
  std::vector<std::int64_t> user_ids;
  std::vector<std::int64_t> item_ids;

  std::size_t size() const { return ratings.size(); }
  int rating_value(const Rating& r) const { return rating_levels[r.level]; }
};

// Dense ids are assigned in order of first appearance in `raw`. Duplicate
// (user, item) pairs keep the record with the latest timestamp (ties: the
// later file position).
RatingsDataset build_dataset(const std::vector<RawRating>& raw);

// Half-open range [begin, end) of indices into RatingsDataset::ratings.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// Chronological partition: train, then validation, then test.
struct TemporalSplit {
  IndexRange train;
  IndexRange val;
  IndexRange test;
  double test_fraction = 0.2;
  double val_fraction = 0.2;
};

TemporalSplit temporal_split(const RatingsDataset& ds, double test_frac = 0.20,
                             double val_frac = 0.20);

// Reproducibility record for a split.
struct SplitManifest {
  std::string dataset_path;
  std::string dataset_format;
  std::string checksum;  // FNV-1a 64 of the canonical sorted ratings, hex
  std::size_t n_ratings = 0;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  TemporalSplit split;
};

std::string dataset_checksum(const RatingsDataset& ds);
SplitManifest make_manifest(const RatingsDataset& ds, const TemporalSplit& split,
                            std::string dataset_path, DatasetFormat format);
std::string manifest_to_json(const SplitManifest& manifest);
SplitManifest manifest_from_json(std::string_view text);

// Reads and parses a ratings file from disk. Throws Error when unreadable.
RatingsDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

}  // namespace tgcmc

#endif  // TGCMC_DATASET_HPP_
