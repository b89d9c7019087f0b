#include "mpcrrl/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace mpcrrl::nn {

namespace {

constexpr char kMagic[] = "MPCRRL-CKPT-1\n";

void write_u64(std::ostream& out, std::uint64_t x) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return x;
}

}  // namespace

void save_checkpoint(const ParamSet& params, const std::string& path) {
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(double);
  }
  const std::string manifest_str = nlohmann::json{{"tensors", manifest}}.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic) - 1);
  write_u64(out, manifest_str.size());
  out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
  for (const auto& [name, t] : params) {
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw FormatError("save_checkpoint: write failed for " + path);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_checkpoint: cannot open " + path);

  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw FormatError("load_checkpoint: bad magic in " + path);

  const std::uint64_t manifest_len = read_u64(in);
  std::string manifest_str(manifest_len, '\0');
  in.read(manifest_str.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw FormatError("load_checkpoint: truncated manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_checkpoint: manifest parse error: ") + e.what());
  }

  const std::streampos blob_start = in.tellg();
  ParamSet params;
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    Tensor t(shape);
    in.seekg(blob_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw FormatError("load_checkpoint: truncated blob for tensor " + name);
    params.add(name, std::move(t));
  }
  return params;
}

ParamSet load_checkpoint_like(const std::string& path, const ParamSet& expected) {
  ParamSet loaded = load_checkpoint(path);
  for (const auto& [name, t] : expected) {
    if (!loaded.has(name))
      throw FormatError("load_checkpoint: missing tensor " + name + " in " + path);
    const Tensor& got = loaded.get(name);
    if (got.shape() != t.shape())
      throw FormatError("load_checkpoint: tensor " + name + " has shape " +
                        shape_string(got.shape()) + ", expected " + shape_string(t.shape()));
  }
  if (loaded.size() != expected.size())
    throw FormatError("load_checkpoint: unexpected extra tensors in " + path);
  return loaded;
}

}  // namespace mpcrrl::nn
