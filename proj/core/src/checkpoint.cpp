#include "tapret/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tapret {

namespace {

constexpr char kMagic[7] = {'T', 'A', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  write_u64(out, bits);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

}  // namespace

Checkpoint Checkpoint::snapshot(const TrainConfig& cfg, std::uint64_t epoch, const ModelParams& model) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.epoch = epoch;
  ckpt.seed = cfg.seed;
  for_each_param(model, [&](const std::string& name, const Tensor& t) {
    ckpt.params.emplace_back(name, t);
  });
  return ckpt;
}

ModelParams Checkpoint::to_model(int d_in) const {
  ModelParams model = init_model(d_in, config.hidden, config.D, config.D_p, config.pooling, config.seed);
  std::size_t matched = 0;
  for_each_param(model, [&](const std::string& name, Tensor& t) {
    for (const auto& [rec_name, rec] : params) {
      if (rec_name != name) continue;
      if (!rec.same_shape(t)) {
        throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " + rec.shape_str() +
                                 " but the config expects " + t.shape_str());
      }
      t = rec;
      ++matched;
      return;
    }
    throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
  });
  if (matched != params.size()) {
    throw std::runtime_error("checkpoint: file has " + std::to_string(params.size()) +
                             " parameters, model expects " + std::to_string(matched));
  }
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  out.put(static_cast<char>(kVersion));

  const std::string cfg = ckpt.config.to_text();
  write_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_u64(out, ckpt.epoch);
  write_u64(out, ckpt.seed);

  write_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) write_u64(out, static_cast<std::uint64_t>(d));
    for (std::size_t i = 0; i < t.numel(); ++i) write_f64(out, t[i]);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const int version = in.get();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const std::uint32_t cfg_len = read_u32(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  if (!in) throw std::runtime_error("checkpoint: truncated config block");
  ckpt.config = TrainConfig::from_text(cfg_text, path + " (embedded config)");
  ckpt.epoch = read_u64(in);
  ckpt.seed = read_u64(in);

  const std::uint32_t count = read_u32(in);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("checkpoint: truncated record name");
    const std::uint32_t ndim = read_u32(in);
    std::vector<std::size_t> shape(ndim);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<std::size_t>(read_u64(in));
      numel *= shape[d];
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < numel; ++i) t[i] = read_f64(in);
    ckpt.params.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace tapret
