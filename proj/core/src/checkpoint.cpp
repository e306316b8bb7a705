#include "tgcmc/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tgcmc/error.hpp"

namespace tgcmc {
namespace {

constexpr char kMagic[8] = {'T', 'G', 'C', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    value = to_little(value);
    out_.append(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_bytes(std::string_view s) { out_.append(s); }
  void put_string32(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(value);
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ParseError(0, "truncated checkpoint");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void put_tensors(Writer& w, std::string_view prefix, const ModelParameters& params) {
  for (const auto& [name, t] : params) {
    w.put_string32(std::string(prefix) + name);
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (const auto d : t.shape()) w.put(static_cast<std::uint64_t>(d));
    for (const double v : t.values()) w.put(v);
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(std::string_view(kMagic, sizeof(kMagic)));
  w.put(kVersion);
  nlohmann::ordered_json header;
  header["model"] = to_json(ckpt.config);
  header["meta"] = ckpt.meta;
  const std::string text = header.dump();
  w.put(static_cast<std::uint64_t>(text.size()));
  w.put_bytes(text);
  w.put(static_cast<std::uint64_t>(ckpt.params.size() + ckpt.ema.size()));
  put_tensors(w, "params/", ckpt.params);
  put_tensors(w, "ema/", ckpt.ema);
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw ParseError(0, "not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw ParseError(0, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto header_len = r.get<std::uint64_t>();
  try {
    const auto header = nlohmann::ordered_json::parse(r.get_bytes(header_len));
    ckpt.config = model_config_from_json(nlohmann::json::parse(header.at("model").dump()));
    ckpt.meta = header.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    const std::string name(r.get_bytes(name_len));
    const auto rank = r.get<std::uint32_t>();
    diff::Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>();
      if (d != 0 && n > r.remaining() / sizeof(double) / d) throw ParseError(0, "truncated checkpoint");
      n *= d;
    }
    std::vector<double> values(n);
    for (auto& v : values) v = r.get<double>();
    Tensor t(std::move(shape), std::move(values));
    if (name.starts_with("params/")) {
      ckpt.params.add(name.substr(7), std::move(t));
    } else if (name.starts_with("ema/")) {
      ckpt.ema.add(name.substr(4), std::move(t));
    } else {
      throw ParseError(0, "unknown checkpoint tensor '" + name + "'");
    }
  }
  if (!r.done()) throw ParseError(0, "trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace tgcmc
