#ifndef TGCMC_CHECKPOINT_HPP_
#define TGCMC_CHECKPOINT_HPP_

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "tgcmc/model.hpp"

namespace tgcmc {

// Trained model state. `ema` holds the exponentially averaged shadow copy
// of every parameter; `meta` is free-form run information.
struct Checkpoint {
  ModelConfig config;
  ModelParameters params;
  ModelParameters ema;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

// Binary layout (all integers and values little-endian):
//
//   8 bytes   magic "TGCMCKPT"
//   u32       format version (1)
//   u64       header length H, then H bytes of JSON {"model": ..., "meta": ...}
//   u64       tensor count N, then N records:
//               u32 name length L, L bytes of name ("params/<name>" or "ema/<name>")
//               u32 rank K, K x u64 dimensions
//               prod(dims) x f64 values, row-major
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tgcmc

#endif  // TGCMC_CHECKPOINT_HPP_
