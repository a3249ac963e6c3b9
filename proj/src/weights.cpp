#include "mpe/weights.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

namespace mpe {

static_assert(std::endian::native == std::endian::little,
              "weight payload is read in place as little-endian float32");

namespace {

constexpr std::string_view kMagic = "MPE-SCORER-WEIGHTS";
constexpr int kFormatVersion = 1;

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  return fmt::format("[{}]", fmt::join(shape, ", "));
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

const Tensor& ScorerWeights::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw WeightFormatError(fmt::format("missing tensor '{}'", name));
  return it->second;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_tensors(const ScorerMeta& m) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  out.push_back({"embed", {m.vocab_size, m.d_model}});
  for (std::size_t l = 0; l < m.n_attn_layers; ++l) {
    for (const char* p : {"wq", "wk", "wv", "wo"})
      out.push_back({fmt::format("attn.{}.{}", l, p), {m.d_model, m.d_model}});
    for (const char* p : {"bq", "bk", "bv", "bo"})
      out.push_back({fmt::format("attn.{}.{}", l, p), {m.d_model}});
  }
  out.push_back({"enc.in.w", {2 * m.d_model, m.ffn_dim}});
  out.push_back({"enc.in.b", {m.ffn_dim}});
  for (std::size_t k = 0; k < m.n_ffn_blocks; ++k) {
    out.push_back({fmt::format("enc.{}.w1", k), {m.ffn_dim, m.ffn_dim}});
    out.push_back({fmt::format("enc.{}.b1", k), {m.ffn_dim}});
    out.push_back({fmt::format("enc.{}.w2", k), {m.ffn_dim, m.ffn_dim}});
    out.push_back({fmt::format("enc.{}.b2", k), {m.ffn_dim}});
  }
  out.push_back({"head.w", {m.ffn_dim, 1}});
  out.push_back({"head.b", {1}});
  return out;
}

void ScorerWeights::validate() const {
  if (meta.d_model == 0 || meta.n_heads == 0 || meta.ffn_dim == 0)
    throw WeightFormatError("d_model, n_heads and ffn_dim must be positive");
  if (meta.d_model % meta.n_heads != 0)
    throw WeightFormatError(
        fmt::format("d_model {} is not divisible by n_heads {}", meta.d_model, meta.n_heads));
  for (const auto& [name, shape] : expected_tensors(meta)) {
    const Tensor& t = at(name);
    if (t.shape != shape)
      throw WeightFormatError(fmt::format("tensor '{}' has shape {}, expected {}", name,
                                          shape_str(t.shape), shape_str(shape)));
    if (t.data.size() != t.numel())
      throw WeightFormatError(fmt::format("tensor '{}' holds {} values for shape {}", name,
                                          t.data.size(), shape_str(t.shape)));
  }
}

void ScorerWeights::validate_for(const GraphicalModel& model) const {
  validate();
  if (meta.vocab_offsets.size() != model.num_vars())
    throw WeightFormatError(fmt::format("weights cover {} variables, model has {}",
                                        meta.vocab_offsets.size(), model.num_vars()));
  // Token ranges must be disjoint and inside the vocabulary.
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t v = 0; v < model.num_vars(); ++v) {
    const std::size_t lo = meta.vocab_offsets[v];
    const std::size_t hi = lo + model.cardinality(static_cast<VarIndex>(v));
    if (hi > meta.vocab_size)
      throw WeightFormatError(fmt::format("variable {} tokens [{}, {}) exceed vocabulary size {}", v,
                                          lo, hi, meta.vocab_size));
    ranges.emplace_back(lo, hi);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second)
      throw WeightFormatError("vocabulary offsets overlap: token mapping is not injective");
}

ScorerMeta meta_for_model(const GraphicalModel& model, std::size_t d_model, std::size_t n_heads,
                          std::size_t n_attn_layers, std::size_t n_ffn_blocks, std::size_t ffn_dim) {
  ScorerMeta m;
  m.d_model = d_model;
  m.n_heads = n_heads;
  m.n_attn_layers = n_attn_layers;
  m.n_ffn_blocks = n_ffn_blocks;
  m.ffn_dim = ffn_dim;
  std::size_t off = 0;
  for (std::size_t c : model.cardinalities()) {
    m.vocab_offsets.push_back(off);
    off += c;
  }
  m.vocab_size = off;
  return m;
}

ScorerWeights zero_weights(const ScorerMeta& meta) {
  ScorerWeights w;
  w.meta = meta;
  for (auto& [name, shape] : expected_tensors(meta)) {
    Tensor t;
    t.shape = shape;
    t.data.assign(t.numel(), 0.0f);
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

std::string encode_weights(const ScorerWeights& w) {
  std::string payload;
  std::string directory;
  for (const auto& [name, t] : w.tensors) {
    if (t.data.size() != t.numel())
      throw WeightFormatError(fmt::format("tensor '{}' data does not match its shape", name));
    directory += fmt::format("tensor {} {} {} {}\n", name, t.shape.size(), fmt::join(t.shape, " "),
                             payload.size());
    payload.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  const auto& m = w.meta;
  std::string out = fmt::format("{} {}\n", kMagic, kFormatVersion);
  out += fmt::format("d_model {}\nn_heads {}\nn_attn_layers {}\nn_ffn_blocks {}\nffn_dim {}\n",
                     m.d_model, m.n_heads, m.n_attn_layers, m.n_ffn_blocks, m.ffn_dim);
  out += fmt::format("vocab_size {}\n", m.vocab_size);
  out += fmt::format("vocab_offsets {}", m.vocab_offsets.size());
  for (std::size_t o : m.vocab_offsets) out += fmt::format(" {}", o);
  out += '\n';
  out += fmt::format("tensor_count {}\n", w.tensors.size());
  out += directory;
  out += fmt::format("payload_bytes {}\ncrc32 {:08x}\nend\n", payload.size(), crc32_of(payload));
  out += payload;
  return out;
}

ScorerWeights decode_weights(std::string_view bytes) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::istringstream {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos)
      throw WeightFormatError(fmt::format("truncated header at line {}", line_no + 1));
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    return std::istringstream(line);
  };
  auto expect_key = [&](std::istringstream& ls, std::string_view key) {
    std::string k;
    ls >> k;
    if (k != key)
      throw WeightFormatError(fmt::format("header line {}: expected '{}', got '{}'", line_no, key, k));
  };
  auto read_size = [&](std::string_view key) {
    auto ls = next_line();
    expect_key(ls, key);
    std::size_t v = 0;
    if (!(ls >> v)) throw WeightFormatError(fmt::format("header line {}: bad value for '{}'", line_no, key));
    return v;
  };

  {
    auto ls = next_line();
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != kMagic) throw WeightFormatError("not a scorer weight file (bad magic)");
    if (version != kFormatVersion)
      throw WeightFormatError(fmt::format("unsupported weight format version {}", version));
  }
  ScorerWeights w;
  auto& m = w.meta;
  m.d_model = read_size("d_model");
  m.n_heads = read_size("n_heads");
  m.n_attn_layers = read_size("n_attn_layers");
  m.n_ffn_blocks = read_size("n_ffn_blocks");
  m.ffn_dim = read_size("ffn_dim");
  m.vocab_size = read_size("vocab_size");
  {
    auto ls = next_line();
    expect_key(ls, "vocab_offsets");
    std::size_t n = 0;
    if (!(ls >> n)) throw WeightFormatError("bad vocab_offsets count");
    m.vocab_offsets.resize(n);
    for (auto& o : m.vocab_offsets)
      if (!(ls >> o)) throw WeightFormatError("vocab_offsets line is short");
  }
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset;
  };
  std::vector<Entry> entries(read_size("tensor_count"));
  for (auto& e : entries) {
    auto ls = next_line();
    expect_key(ls, "tensor");
    std::size_t ndim = 0;
    if (!(ls >> e.name >> ndim)) throw WeightFormatError(fmt::format("header line {}: bad tensor entry", line_no));
    e.shape.resize(ndim);
    for (auto& s : e.shape)
      if (!(ls >> s)) throw WeightFormatError(fmt::format("tensor '{}': bad shape", e.name));
    if (!(ls >> e.offset)) throw WeightFormatError(fmt::format("tensor '{}': missing offset", e.name));
  }
  const std::size_t payload_bytes = read_size("payload_bytes");
  std::uint32_t expected_crc = 0;
  {
    auto ls = next_line();
    expect_key(ls, "crc32");
    std::string hex;
    ls >> hex;
    try {
      expected_crc = static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
    } catch (const std::exception&) {
      throw WeightFormatError("bad crc32 field");
    }
  }
  {
    auto ls = next_line();
    expect_key(ls, "end");
  }

  const std::string_view payload = bytes.substr(pos);
  if (payload.size() < payload_bytes)
    throw WeightFormatError(fmt::format("truncated payload: {} of {} bytes", payload.size(), payload_bytes));
  if (payload.size() > payload_bytes)
    throw WeightFormatError("trailing bytes after payload");
  if (crc32_of(payload) != expected_crc) throw WeightFormatError("checksum mismatch: payload is corrupt");

  for (auto& e : entries) {
    Tensor t;
    t.shape = e.shape;
    const std::size_t nbytes = t.numel() * sizeof(float);
    if (e.offset % sizeof(float) != 0 || e.offset + nbytes > payload.size())
      throw WeightFormatError(fmt::format("tensor '{}' lies outside the payload", e.name));
    t.data.resize(t.numel());
    std::memcpy(t.data.data(), payload.data() + e.offset, nbytes);
    if (!w.tensors.emplace(e.name, std::move(t)).second)
      throw WeightFormatError(fmt::format("duplicate tensor '{}'", e.name));
  }
  w.validate();
  return w;
}

void save_weights(const ScorerWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  const std::string bytes = encode_weights(w);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ScorerWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_weights(ss.str());
}

}  // namespace mpe
