#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "stempick/core.hpp"
#include "stempick/nn.hpp"

namespace stempick {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Single-file checkpoint: magic, length-prefixed text manifest, then one
// length-prefixed blob of little-endian 64-bit doubles per array, in manifest
// order. Round-trips are bit-exact.
constexpr char kCheckpointMagic[] = "SPCK1\n";

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  char buf[8];
  is.read(buf, 8);
  if (!is) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

inline void write_doubles(std::ostream& os, const double* p, std::uint64_t n) {
  write_u64(os, n);
  for (std::uint64_t i = 0; i < n; ++i)
    write_u64(os, std::bit_cast<std::uint64_t>(p[i]));
}

inline std::vector<double> read_doubles(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::vector<double> out(n);
  for (std::uint64_t i = 0; i < n; ++i)
    out[i] = std::bit_cast<double>(read_u64(is));
  return out;
}

}  // namespace detail

class CheckpointWriter {
 public:
  YAML::Node& meta() { return meta_; }

  void add(const std::string& name, const MatX& m) {
    entries_.push_back({name, m.rows(), m.cols(),
                        std::vector<double>(m.data(), m.data() + m.size())});
  }
  void add(const std::string& name, const VecX& v) {
    entries_.push_back({name, v.size(), 1,
                        std::vector<double>(v.data(), v.data() + v.size())});
  }
  void add(const std::string& name, const std::vector<double>& v) {
    entries_.push_back({name, static_cast<Eigen::Index>(v.size()), 1, v});
  }

  void write(const std::string& path) const {
    YAML::Node root;
    root["meta"] = meta_;
    YAML::Node arrays(YAML::NodeType::Sequence);
    for (const auto& e : entries_) {
      YAML::Node a;
      a["name"] = e.name;
      a["rows"] = static_cast<long long>(e.rows);
      a["cols"] = static_cast<long long>(e.cols);
      arrays.push_back(a);
    }
    root["arrays"] = arrays;
    YAML::Emitter em;
    em << root;
    const std::string manifest = em.c_str();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    detail::write_u64(os, manifest.size());
    os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    for (const auto& e : entries_)
      detail::write_doubles(os, e.data.data(), e.data.size());
    if (!os) throw CheckpointError("write failed: " + path);
  }

 private:
  struct Entry {
    std::string name;
    Eigen::Index rows, cols;
    std::vector<double> data;
  };
  YAML::Node meta_;
  std::vector<Entry> entries_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[sizeof(kCheckpointMagic) - 1];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
      throw CheckpointError("not a checkpoint file: " + path);
    const std::uint64_t mlen = detail::read_u64(is);
    std::string manifest(mlen, '\0');
    is.read(manifest.data(), static_cast<std::streamsize>(mlen));
    if (!is) throw CheckpointError("truncated manifest");
    root_ = YAML::Load(manifest);
    for (const auto& a : root_["arrays"]) {
      Entry e;
      e.rows = a["rows"].as<long long>();
      e.cols = a["cols"].as<long long>();
      e.data = detail::read_doubles(is);
      if (static_cast<Eigen::Index>(e.data.size()) != e.rows * e.cols)
        throw CheckpointError("array size does not match manifest");
      arrays_[a["name"].as<std::string>()] = std::move(e);
    }
  }

  YAML::Node meta() const { return root_["meta"]; }
  bool has(const std::string& name) const { return arrays_.count(name) > 0; }

  MatX matrix(const std::string& name) const {
    const Entry& e = entry(name);
    MatX m(e.rows, e.cols);
    std::copy(e.data.begin(), e.data.end(), m.data());
    return m;
  }
  VecX vector(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.cols != 1) throw CheckpointError("array is not a vector: " + name);
    VecX v(e.rows);
    std::copy(e.data.begin(), e.data.end(), v.data());
    return v;
  }

 private:
  struct Entry {
    Eigen::Index rows, cols;
    std::vector<double> data;
  };
  const Entry& entry(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw CheckpointError("missing array: " + name);
    return it->second;
  }
  YAML::Node root_;
  std::map<std::string, Entry> arrays_;
};

// ---------------------------------------------------------------------------
// Network and optimizer (de)serialization on top of the generic container.

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  throw ContractViolation("unknown activation");
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw CheckpointError("unknown activation name: " + s);
}

inline void save_network(CheckpointWriter& w, const std::string& prefix,
                         const Network& net) {
  YAML::Node arch;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    YAML::Node ln;
    ln["in"] = static_cast<long long>(l.w.cols());
    ln["out"] = static_cast<long long>(l.w.rows());
    ln["act"] = activation_name(l.act);
    arch.push_back(ln);
    w.add(prefix + "/L" + std::to_string(i) + "/w", l.w);
    w.add(prefix + "/L" + std::to_string(i) + "/b", l.b);
  }
  w.meta()["networks"][prefix] = arch;
}

inline Network load_network(const CheckpointReader& r, const std::string& prefix) {
  const YAML::Node arch = r.meta()["networks"][prefix];
  if (!arch) throw CheckpointError("missing network in manifest: " + prefix);
  Network net;
  for (size_t i = 0; i < arch.size(); ++i) {
    Layer l;
    l.w = r.matrix(prefix + "/L" + std::to_string(i) + "/w");
    l.b = r.vector(prefix + "/L" + std::to_string(i) + "/b");
    l.act = activation_from_name(arch[i]["act"].as<std::string>());
    if (l.w.rows() != arch[i]["out"].as<long long>() ||
        l.w.cols() != arch[i]["in"].as<long long>())
      throw CheckpointError("layer shape mismatch: " + prefix);
    net.layers.push_back(std::move(l));
  }
  return net;
}

inline void save_adam(CheckpointWriter& w, const std::string& prefix,
                      const AdamState& s) {
  w.meta()["optimizers"][prefix]["t"] = static_cast<long long>(s.t);
  for (size_t i = 0; i < s.mw.size(); ++i) {
    const std::string base = prefix + "/L" + std::to_string(i);
    w.add(base + "/mw", s.mw[i]);
    w.add(base + "/vw", s.vw[i]);
    w.add(base + "/mb", s.mb[i]);
    w.add(base + "/vb", s.vb[i]);
  }
}

inline AdamState load_adam(const CheckpointReader& r, const std::string& prefix,
                           const Network& net) {
  AdamState s = AdamState::zeros_like(net);
  const YAML::Node node = r.meta()["optimizers"][prefix];
  if (!node) throw CheckpointError("missing optimizer in manifest: " + prefix);
  s.t = node["t"].as<long long>();
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const std::string base = prefix + "/L" + std::to_string(i);
    s.mw[i] = r.matrix(base + "/mw");
    s.vw[i] = r.matrix(base + "/vw");
    s.mb[i] = r.vector(base + "/mb");
    s.vb[i] = r.vector(base + "/vb");
  }
  return s;
}

}  // namespace stempick
