#include "vpcd/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vpcd::checkpoint {
namespace {

constexpr char kMagic[4] = {'V', 'P', 'C', 'D'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::size_t end) : buf_(buf), end_(end) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > end_) throw std::runtime_error("checkpoint: truncated file");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    bytes(&v, 4);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v = 0;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (pos_ + n > end_) throw std::runtime_error("checkpoint: truncated file");
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::vector<char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

const std::string& meta_at(const Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw std::runtime_error("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const Tensor& Checkpoint::at(const std::string& name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
  return *t;
}

void Checkpoint::put(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  if (n != static_cast<std::int64_t>(data.size())) throw std::invalid_argument("checkpoint: shape/data mismatch");
  for (auto& t : tensors) {
    if (t.name == name) {
      t.shape = std::move(shape);
      t.data = std::move(data);
      return;
    }
  }
  tensors.push_back({name, std::move(shape), std::move(data)});
}

void Checkpoint::put(const std::string& name, const Plane& p) {
  std::vector<float> d(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) d[static_cast<std::size_t>(i)] = static_cast<float>(p.data()[i]);
  put(name, {p.rows(), p.cols()}, std::move(d));
}

void Checkpoint::put(const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<float> d;
  d.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) d.push_back(static_cast<float>(m(r, c)));
  put(name, {m.rows(), m.cols()}, std::move(d));
}

void Checkpoint::put(const std::string& name, const Eigen::VectorXd& v) {
  std::vector<float> d(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) d[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  put(name, {v.size()}, std::move(d));
}

std::int64_t Checkpoint::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& t : tensors)
    if (t.name.starts_with("proto/") || t.name.starts_with("net/")) n += static_cast<std::int64_t>(t.data.size());
  return n;
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.i64(d);
    w.bytes(t.data.data(), t.data.size() * sizeof(float));
  }
  const std::uint32_t sum = crc(w.buffer().data(), w.buffer().size());
  w.u32(sum);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write then rename so an interrupted save never leaves a torn file.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    f.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: not a checkpoint file: " + path.string());
  std::uint32_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  if (crc(buf.data(), buf.size() - 4) != stored)
    throw std::runtime_error("checkpoint: checksum mismatch in " + path.string());
  Reader r(buf, buf.size() - 4);
  char magic[4];
  r.bytes(magic, 4);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  const std::uint32_t nmeta = r.u32();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    c.meta[k] = r.str();
  }
  const std::uint32_t ntensors = r.u32();
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    Tensor t;
    t.name = r.str();
    const std::uint32_t rank = r.u32();
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.i64());
      if (t.shape.back() < 0) throw std::runtime_error("checkpoint: negative dimension");
      n *= t.shape.back();
    }
    t.data.resize(static_cast<std::size_t>(n));
    r.bytes(t.data.data(), t.data.size() * sizeof(float));
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return c;
}

Plane to_plane(const Tensor& t) {
  if (t.shape.size() != 2) throw std::runtime_error("checkpoint: '" + t.name + "' is not 2-D");
  Plane p(t.shape[0], t.shape[1]);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = t.data[static_cast<std::size_t>(i)];
  return p;
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) throw std::runtime_error("checkpoint: '" + t.name + "' is not 2-D");
  Eigen::MatrixXd m(t.shape[0], t.shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[k++];
  return m;
}

Eigen::VectorXd to_vector(const Tensor& t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.data.size()));
  for (std::size_t i = 0; i < t.data.size(); ++i) v(static_cast<Eigen::Index>(i)) = t.data[i];
  return v;
}

void put_prototypes(Checkpoint& ckpt, const PrototypeSet& prototypes) {
  std::vector<int> ids;
  for (const auto& p : prototypes) {
    ids.push_back(p.id);
    ckpt.put("proto/" + std::to_string(p.id) + "/appearance", p.appearance);
    ckpt.put("proto/" + std::to_string(p.id) + "/mask_logits", p.mask_logits);
  }
  ckpt.meta["prototype_ids"] = join(ids);
}

PrototypeSet get_prototypes(const Checkpoint& ckpt) {
  PrototypeSet out;
  for (int id : split(meta_at(ckpt, "prototype_ids"))) {
    Prototype p;
    p.id = id;
    p.appearance = to_plane(ckpt.at("proto/" + std::to_string(id) + "/appearance"));
    p.mask_logits = to_plane(ckpt.at("proto/" + std::to_string(id) + "/mask_logits"));
    if (p.appearance.rows() != p.mask_logits.rows() || p.appearance.cols() != p.mask_logits.cols())
      throw std::runtime_error("checkpoint: prototype " + std::to_string(id) + " shape mismatch");
    out.push_back(std::move(p));
  }
  return out;
}

void put_net(Checkpoint& ckpt, const VelocityNet& net) {
  ckpt.meta["net_history"] = std::to_string(net.history());
  ckpt.meta["net_hidden"] = join(net.hidden());
  std::ostringstream sc;
  sc.precision(17);
  sc << net.scale.velocity << ',' << net.scale.width << ',' << net.scale.height;
  ckpt.meta["net_scale"] = sc.str();
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    ckpt.put("net/W" + std::to_string(l), net.weights()[l]);
    ckpt.put("net/b" + std::to_string(l), net.biases()[l]);
  }
}

bool has_net(const Checkpoint& ckpt) { return ckpt.meta.contains("net_history"); }

VelocityNet get_net(const Checkpoint& ckpt) {
  VelocityNet net(std::stoi(meta_at(ckpt, "net_history")), split(meta_at(ckpt, "net_hidden")), 0);
  std::stringstream ss(meta_at(ckpt, "net_scale"));
  char comma = 0;
  ss >> net.scale.velocity >> comma >> net.scale.width >> comma >> net.scale.height;
  if (!ss) throw std::runtime_error("checkpoint: bad net_scale");
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    const Eigen::MatrixXd w = to_matrix(ckpt.at("net/W" + std::to_string(l)));
    const Eigen::VectorXd b = to_vector(ckpt.at("net/b" + std::to_string(l)));
    if (w.rows() != net.weights()[l].rows() || w.cols() != net.weights()[l].cols() ||
        b.size() != net.biases()[l].size())
      throw std::runtime_error("checkpoint: network layer " + std::to_string(l) + " shape mismatch");
    net.weights()[l] = w;
    net.biases()[l] = b;
  }
  return net;
}

}  // namespace vpcd::checkpoint
