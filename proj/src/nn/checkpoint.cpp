#include "compass/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <unordered_map>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"

namespace compass::nn {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw InvalidArgument("checkpoint: truncated data");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors& entries) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    t.validate();
    if (name.size() > 0xFFFF) throw InvalidArgument("checkpoint: name too long");
    if (t.shape.size() > 0xFF) throw InvalidArgument("checkpoint: rank too large");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.values) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

NamedTensors decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string(kMagic, 4)) throw InvalidArgument("checkpoint: bad magic");
  if (auto version = in.get<std::uint32_t>(); version != kVersion)
    throw InvalidArgument("checkpoint: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  NamedTensors entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = in.get<std::uint16_t>();
    std::string name = in.take(len);
    Tensor t;
    const auto rank = in.get<std::uint8_t>();
    for (std::uint8_t r = 0; r < rank; ++r) t.shape.push_back(in.get<std::uint32_t>());
    t.values.resize(t.count());
    for (auto& v : t.values) v = static_cast<double>(std::bit_cast<float>(in.get<std::uint32_t>()));
    entries.emplace_back(std::move(name), std::move(t));
  }
  if (!in.done()) throw InvalidArgument("checkpoint: trailing bytes");
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterRefs& params) {
  check_unique_names(params);
  NamedTensors entries;
  for (auto* p : params) entries.emplace_back(p->name, p->to_tensor());
  write_file(path, encode_checkpoint(entries));
}

void load_checkpoint(const std::filesystem::path& path, const ParameterRefs& params) {
  if (!std::filesystem::exists(path)) throw DependencyError("missing checkpoint " + path.string());
  const NamedTensors entries = decode_checkpoint(read_file(path));
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : entries) by_name[name] = &t;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end())
      throw InvalidArgument("checkpoint " + path.string() + " has no entry '" + p->name + "'");
    p->assign(*it->second);
  }
}

void round_to_f32(const ParameterRefs& params) {
  for (auto* p : params)
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      p->value.data()[i] = static_cast<double>(static_cast<float>(p->value.data()[i]));
}

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

void write_manifest(const std::filesystem::path& checkpoint, const nlohmann::json& manifest) {
  write_file(manifest_path(checkpoint), manifest.dump(2) + "\n");
}

nlohmann::json read_manifest(const std::filesystem::path& checkpoint) {
  const auto path = manifest_path(checkpoint);
  if (!std::filesystem::exists(path)) throw DependencyError("missing manifest " + path.string());
  return nlohmann::json::parse(read_file(path));
}

}  // namespace compass::nn
