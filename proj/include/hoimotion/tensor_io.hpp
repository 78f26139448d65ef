#pragma once

#include "hoimotion/common.hpp"
#include "hoimotion/nn/modules.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hoimo::io {

// Dense tensor persisted as a JSON sidecar plus raw little-endian payload:
// <prefix>.json holds {"dtype","shape","byte_order",...extras}, <prefix>.bin
// holds the contiguous values in row-major (C) order.
struct TensorFile {
  std::vector<Eigen::Index> shape;
  std::vector<double> data;  // decoded to double regardless of on-disk dtype
  std::map<std::string, std::string> extras;

  Eigen::Index size() const;
  // Views a rank-2 or rank-3 tensor as a stack of matrices (outer index = first dim).
  Mat as_matrix() const;                 // rank-2
  std::vector<Mat> as_matrix_seq() const;  // rank-3
};

// dtype "f32" (default interchange format) or "f64".
void save_tensor(const std::filesystem::path& prefix, const std::vector<Eigen::Index>& shape,
                 const std::vector<double>& data, const std::string& dtype = "f32",
                 const std::map<std::string, std::string>& extras = {});
TensorFile load_tensor(const std::filesystem::path& prefix);

void save_matrix(const std::filesystem::path& prefix, const Mat& m,
                 const std::string& dtype = "f32",
                 const std::map<std::string, std::string>& extras = {});
Mat load_matrix(const std::filesystem::path& prefix);

void save_matrix_seq(const std::filesystem::path& prefix, const std::vector<Mat>& frames,
                     const std::string& dtype = "f32",
                     const std::map<std::string, std::string>& extras = {});
std::vector<Mat> load_matrix_seq(const std::filesystem::path& prefix);

std::optional<std::string> tensor_extra(const std::filesystem::path& prefix,
                                        const std::string& key);

// Single-file checkpoint: 8-byte magic, u64 JSON manifest length, manifest
// {config_hash, step, tensors:[{name,rows,cols,offset}]}, then f64 blobs.
struct CheckpointMeta {
  std::string config_hash;
  long step = 0;
};

void save_checkpoint(const std::filesystem::path& path, const nn::ParamMap& params,
                     const CheckpointMeta& meta);
CheckpointMeta load_checkpoint(const std::filesystem::path& path, nn::ParamMap& params);
CheckpointMeta peek_checkpoint(const std::filesystem::path& path);

// Appends one compact JSON object per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool append = false);
  void write_line(const std::string& json_object);

 private:
  std::filesystem::path path_;
};

std::vector<std::string> read_jsonl(const std::filesystem::path& path);

}  // namespace hoimo::io
