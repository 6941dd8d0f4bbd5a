#pragma once
// Checkpoint file: magic "SIMTLAB1", a key=value text header (config, step,
// seed), a manifest of (path, shape, byte offset), then little-endian IEEE-754
// 32-bit arrays. Round-trips bit-exactly in float mode.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "simtlab/model.hpp"

namespace simtlab {

inline constexpr char kCheckpointMagic[8] = {'S', 'I', 'M', 'T', 'L', 'A', 'B', '1'};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t lo = read_u32(is);
  std::uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

inline void write_f32_array(std::ostream& os, const float* data, std::size_t n) {
  // assumes little-endian host (x86/arm64); asserted at load via magic round-trip tests
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

}  // namespace detail

struct CheckpointHeader {
  std::map<std::string, std::string> kv;

  void set_int(const std::string& k, long long v) { kv[k] = std::to_string(v); }
  long long get_int(const std::string& k, long long def = 0) const {
    auto it = kv.find(k);
    return it == kv.end() ? def : std::stoll(it->second);
  }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
  }

  static CheckpointHeader parse(const std::string& text) {
    CheckpointHeader h;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      std::string line = text.substr(pos, nl - pos);
      std::size_t eq = line.find('=');
      if (eq != std::string::npos) h.kv[line.substr(0, eq)] = line.substr(eq + 1);
      pos = nl + 1;
    }
    return h;
  }
};

inline CheckpointHeader header_for(const ModelConfig& cfg) {
  CheckpointHeader h;
  h.set_int("src_vocab", cfg.src_vocab);
  h.set_int("tgt_vocab", cfg.tgt_vocab);
  h.set_int("dim", cfg.dim);
  h.set_int("ffn_dim", cfg.ffn_dim);
  h.set_int("heads", cfg.heads);
  h.set_int("enc_layers", cfg.enc_layers);
  h.set_int("dec_layers", cfg.dec_layers);
  h.set_int("max_len", cfg.max_len);
  h.set_int("seed", static_cast<long long>(cfg.seed));
  return h;
}

inline ModelConfig config_from(const CheckpointHeader& h) {
  ModelConfig cfg;
  cfg.src_vocab = static_cast<int>(h.get_int("src_vocab"));
  cfg.tgt_vocab = static_cast<int>(h.get_int("tgt_vocab"));
  cfg.dim = static_cast<int>(h.get_int("dim"));
  cfg.ffn_dim = static_cast<int>(h.get_int("ffn_dim"));
  cfg.heads = static_cast<int>(h.get_int("heads"));
  cfg.enc_layers = static_cast<int>(h.get_int("enc_layers"));
  cfg.dec_layers = static_cast<int>(h.get_int("dec_layers"));
  cfg.max_len = static_cast<int>(h.get_int("max_len"));
  cfg.seed = static_cast<std::uint64_t>(h.get_int("seed", 1));
  return cfg;
}

// Named float32 arrays: model parameters plus optional optimizer moments
// (stored under "opt/m/..." and "opt/v/..." paths).
template <class Real>
void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const ParameterSet<Real>& params, const AdamState<Real>* opt = nullptr) {
  std::map<std::string, std::pair<std::vector<int>, const Real*>> entries;
  std::map<std::string, std::vector<Real>> moment_storage;
  for (const auto& [p, t] : params) entries[p] = {t.shape(), t.values().data()};
  if (opt) {
    for (const auto& [p, m] : opt->m) moment_storage["opt/m/" + p] = m;
    for (const auto& [p, v] : opt->v) moment_storage["opt/v/" + p] = v;
    for (const auto& [p, s] : moment_storage)
      entries[p] = {{static_cast<int>(s.size())}, s.data()};
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 8);
  CheckpointHeader h = header;
  if (opt) {
    h.set_int("adam_step", opt->step);
    h.kv["adam_lr"] = std::to_string(opt->lr);
  }
  std::string htext = h.serialize();
  detail::write_u32(os, static_cast<std::uint32_t>(htext.size()));
  os.write(htext.data(), static_cast<std::streamsize>(htext.size()));

  detail::write_u32(os, static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& [p, e] : entries) {
    detail::write_u32(os, static_cast<std::uint32_t>(p.size()));
    os.write(p.data(), static_cast<std::streamsize>(p.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(e.first.size()));
    std::size_t n = 1;
    for (int d : e.first) {
      detail::write_u32(os, static_cast<std::uint32_t>(d));
      n *= static_cast<std::size_t>(d);
    }
    detail::write_u64(os, offset);
    offset += n * 4;
  }
  for (const auto& [p, e] : entries) {
    std::size_t n = 1;
    for (int d : e.first) n *= static_cast<std::size_t>(d);
    if constexpr (std::is_same_v<Real, float>) {
      detail::write_f32_array(os, e.second, n);
    } else {
      std::vector<float> tmp(n);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = static_cast<float>(e.second[i]);
      detail::write_f32_array(os, tmp.data(), n);
    }
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

struct LoadedCheckpoint {
  CheckpointHeader header;
  std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> arrays;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint32_t hlen = detail::read_u32(is);
  std::string htext(hlen, '\0');
  is.read(htext.data(), hlen);
  LoadedCheckpoint out;
  out.header = CheckpointHeader::parse(htext);
  std::uint32_t n_entries = detail::read_u32(is);
  std::vector<std::pair<std::string, std::pair<std::vector<int>, std::uint64_t>>> manifest;
  for (std::uint32_t e = 0; e < n_entries; ++e) {
    std::uint32_t plen = detail::read_u32(is);
    std::string p(plen, '\0');
    is.read(p.data(), plen);
    std::uint32_t ndims = detail::read_u32(is);
    std::vector<int> shape(ndims);
    for (auto& d : shape) d = static_cast<int>(detail::read_u32(is));
    std::uint64_t off = detail::read_u64(is);
    manifest.emplace_back(std::move(p), std::make_pair(std::move(shape), off));
  }
  std::streampos data_start = is.tellg();
  for (auto& [p, se] : manifest) {
    std::size_t n = 1;
    for (int d : se.first) n *= static_cast<std::size_t>(d);
    std::vector<float> vals(n);
    is.seekg(data_start + static_cast<std::streamoff>(se.second));
    is.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(n * 4));
    if (!is) throw std::runtime_error("load_checkpoint: truncated data in " + path);
    out.arrays[p] = {se.first, std::move(vals)};
  }
  return out;
}

template <class Real>
void restore_model(Model<Real>& model, const LoadedCheckpoint& ck, AdamState<Real>* opt = nullptr) {
  for (auto& [p, t] : model.params()) {
    auto it = ck.arrays.find(p);
    if (it == ck.arrays.end()) throw std::runtime_error("restore_model: checkpoint missing " + p);
    if (it->second.second.size() != t.size())
      throw std::runtime_error("restore_model: shape mismatch for " + p);
    for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] = static_cast<Real>(it->second.second[i]);
  }
  if (opt) {
    opt->step = ck.header.get_int("adam_step", 0);
    auto lr_it = ck.header.kv.find("adam_lr");
    if (lr_it != ck.header.kv.end()) opt->lr = std::stod(lr_it->second);
    for (auto& [p, t] : model.params()) {
      auto m_it = ck.arrays.find("opt/m/" + p);
      auto v_it = ck.arrays.find("opt/v/" + p);
      if (m_it != ck.arrays.end()) {
        opt->m[p].assign(m_it->second.second.begin(), m_it->second.second.end());
        opt->v[p].assign(v_it->second.second.begin(), v_it->second.second.end());
      }
    }
  }
}

template <class Real>
Model<Real> load_model(const std::string& path, AdamState<Real>* opt = nullptr) {
  auto ck = load_checkpoint(path);
  Model<Real> model(config_from(ck.header));
  restore_model(model, ck, opt);
  return model;
}

}  // namespace simtlab
