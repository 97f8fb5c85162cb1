#include "advrl/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "advrl/errors.hpp"

namespace advrl::io {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'R', 'L', 'C', 'K', 'P'};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(T) > in.size()) throw LoadError(path + ": truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void Checkpoint::add(std::string name, std::vector<std::size_t> shape, std::vector<double> values) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != values.size()) throw ShapeError("checkpoint block '" + name + "' size does not match its shape");
  blocks.push_back({std::move(name), std::move(shape), std::move(values)});
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return true;
  }
  return false;
}

const Checkpoint::Block& Checkpoint::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw LoadError("checkpoint has no block '" + name + "'");
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["meta"] = ckpt.meta;
  manifest["blocks"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& b : ckpt.blocks) {
    manifest["blocks"].push_back({{"name", b.name}, {"shape", b.shape}, {"offset", offset}});
    offset += b.values.size();
  }
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  put<std::uint64_t>(out, offset);
  for (const auto& b : ckpt.blocks) {
    out.append(reinterpret_cast<const char*>(b.values.data()), b.values.size() * sizeof(double));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw LoadError("failed writing '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open checkpoint '" + path + "'");
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw LoadError(path + ": not a checkpoint file");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(in, pos, path);
  if (version > Checkpoint::kVersion || version == 0) {
    throw LoadError(path + ": checkpoint format version " + std::to_string(version) + " is not supported (max " +
                    std::to_string(Checkpoint::kVersion) + ")");
  }
  const auto len = take<std::uint64_t>(in, pos, path);
  if (pos + len > in.size()) throw LoadError(path + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": corrupt manifest: " + e.what());
  }
  pos += len;
  const auto count = take<std::uint64_t>(in, pos, path);
  if (pos + count * sizeof(double) != in.size()) throw LoadError(path + ": data section size mismatch");
  const char* data = in.data() + pos;

  Checkpoint ckpt;
  ckpt.meta = manifest.at("meta");
  for (const auto& b : manifest.at("blocks")) {
    const auto shape = b.at("shape").get<std::vector<std::size_t>>();
    const auto offset = b.at("offset").get<std::uint64_t>();
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (offset + n > count) throw LoadError(path + ": block outside the data section");
    std::vector<double> values(n);
    std::memcpy(values.data(), data + offset * sizeof(double), n * sizeof(double));
    ckpt.blocks.push_back({b.at("name").get<std::string>(), shape, std::move(values)});
  }
  return ckpt;
}

void add_mlp(Checkpoint& ckpt, const std::string& prefix, const diff::MlpParams& params) {
  nlohmann::json acts = nlohmann::json::array();
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    const std::string base = prefix + "." + std::to_string(i);
    ckpt.add(base + ".weight", l.weight.shape(), l.weight.data());
    ckpt.add(base + ".bias", l.bias.shape(), l.bias.data());
    acts.push_back(diff::to_string(l.activation));
  }
  ckpt.meta[prefix] = {{"activations", acts}};
}

diff::MlpParams read_mlp(const Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.meta.contains(prefix)) throw LoadError("checkpoint has no network '" + prefix + "'");
  diff::MlpParams p;
  const auto& acts = ckpt.meta.at(prefix).at("activations");
  for (std::size_t i = 0; i < acts.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    const auto& w = ckpt.block(base + ".weight");
    const auto& b = ckpt.block(base + ".bias");
    if (w.shape.size() != 2 || b.shape.size() != 1) throw LoadError(base + ": unexpected tensor rank");
    diff::Layer l;
    l.weight = diff::Tensor::matrix(w.shape[0], w.shape[1], w.values);
    l.bias = diff::Tensor::vector(b.values);
    l.activation = diff::activation_from_string(acts[i].get<std::string>());
    p.layers.push_back(std::move(l));
  }
  try {
    p.validate();
  } catch (const ShapeError& e) {
    throw LoadError(prefix + ": " + e.what());
  }
  return p;
}

}  // namespace advrl::io
