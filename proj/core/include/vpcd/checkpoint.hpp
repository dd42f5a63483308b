#pragma once

// Versioned binary parameter container: magic "VPCD", u32 version, string
// metadata, named little-endian float32 tensors with shapes and a trailing
// CRC-32 over everything before it.

#include "vpcd/decompose.hpp"
#include "vpcd/velocity_net.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vpcd::checkpoint {

inline constexpr std::uint32_t kVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<Tensor> tensors;

  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  void put(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data);
  void put(const std::string& name, const Plane& p);
  void put(const std::string& name, const Eigen::MatrixXd& m);
  void put(const std::string& name, const Eigen::VectorXd& v);
  /// Learnable parameters: elements of the "proto/" and "net/" tensors.
  std::int64_t parameter_count() const;
};

void save(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws std::runtime_error on a bad magic, unsupported version, truncation
/// or checksum mismatch.
Checkpoint load(const std::filesystem::path& path);

Plane to_plane(const Tensor& t);
Eigen::MatrixXd to_matrix(const Tensor& t);
Eigen::VectorXd to_vector(const Tensor& t);

void put_prototypes(Checkpoint& ckpt, const PrototypeSet& prototypes);
PrototypeSet get_prototypes(const Checkpoint& ckpt);

void put_net(Checkpoint& ckpt, const VelocityNet& net);
VelocityNet get_net(const Checkpoint& ckpt);
bool has_net(const Checkpoint& ckpt);

}  // namespace vpcd::checkpoint
