#include "hoimotion/tensor_io.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace hoimo::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const char* data, size_t bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open for write: " + path.string());
  out.write(data, static_cast<std::streamsize>(bytes));
  if (!out) throw InvalidInput("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

Eigen::Index TensorFile::size() const {
  Eigen::Index n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Mat TensorFile::as_matrix() const {
  if (shape.size() != 2) throw InvalidInput("tensor is not rank-2");
  Mat m(shape[0], shape[1]);
  for (Eigen::Index i = 0; i < shape[0]; ++i)
    for (Eigen::Index j = 0; j < shape[1]; ++j) m(i, j) = data[i * shape[1] + j];
  return m;
}

std::vector<Mat> TensorFile::as_matrix_seq() const {
  if (shape.size() != 3) throw InvalidInput("tensor is not rank-3");
  std::vector<Mat> out;
  out.reserve(shape[0]);
  Eigen::Index plane = shape[1] * shape[2];
  for (Eigen::Index f = 0; f < shape[0]; ++f) {
    Mat m(shape[1], shape[2]);
    for (Eigen::Index i = 0; i < shape[1]; ++i)
      for (Eigen::Index j = 0; j < shape[2]; ++j) m(i, j) = data[f * plane + i * shape[2] + j];
    out.push_back(std::move(m));
  }
  return out;
}

void save_tensor(const fs::path& prefix, const std::vector<Eigen::Index>& shape,
                 const std::vector<double>& data, const std::string& dtype,
                 const std::map<std::string, std::string>& extras) {
  Eigen::Index n = 1;
  for (auto d : shape) n *= d;
  if (n != static_cast<Eigen::Index>(data.size()))
    throw InvalidInput("save_tensor: shape/data size mismatch");

  json header;
  header["dtype"] = dtype;
  header["shape"] = shape;
  header["byte_order"] = "little";
  for (const auto& [k, v] : extras) header[k] = v;

  std::string text = header.dump(2);
  write_file(fs::path(prefix.string() + ".json"), text.data(), text.size());

  if (dtype == "f32") {
    std::vector<float> buf(data.begin(), data.end());
    write_file(fs::path(prefix.string() + ".bin"),
               reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
  } else if (dtype == "f64") {
    write_file(fs::path(prefix.string() + ".bin"),
               reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  } else {
    throw InvalidInput("unsupported dtype: " + dtype);
  }
}

TensorFile load_tensor(const fs::path& prefix) {
  json header = json::parse(read_file(fs::path(prefix.string() + ".json")));
  TensorFile t;
  for (const auto& d : header.at("shape")) t.shape.push_back(d.get<Eigen::Index>());
  std::string dtype = header.at("dtype").get<std::string>();
  for (auto& [k, v] : header.items()) {
    if (k == "dtype" || k == "shape" || k == "byte_order") continue;
    t.extras[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  std::string raw = read_file(fs::path(prefix.string() + ".bin"));
  Eigen::Index n = t.size();
  t.data.resize(n);
  if (dtype == "f32") {
    if (raw.size() != static_cast<size_t>(n) * sizeof(float))
      throw InvalidInput("payload size mismatch: " + prefix.string());
    const float* p = reinterpret_cast<const float*>(raw.data());
    for (Eigen::Index i = 0; i < n; ++i) t.data[i] = p[i];
  } else if (dtype == "f64") {
    if (raw.size() != static_cast<size_t>(n) * sizeof(double))
      throw InvalidInput("payload size mismatch: " + prefix.string());
    const double* p = reinterpret_cast<const double*>(raw.data());
    for (Eigen::Index i = 0; i < n; ++i) t.data[i] = p[i];
  } else {
    throw InvalidInput("unsupported dtype: " + dtype);
  }
  return t;
}

void save_matrix(const fs::path& prefix, const Mat& m, const std::string& dtype,
                 const std::map<std::string, std::string>& extras) {
  std::vector<double> data(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data[i * m.cols() + j] = m(i, j);
  save_tensor(prefix, {m.rows(), m.cols()}, data, dtype, extras);
}

Mat load_matrix(const fs::path& prefix) { return load_tensor(prefix).as_matrix(); }

void save_matrix_seq(const fs::path& prefix, const std::vector<Mat>& frames,
                     const std::string& dtype,
                     const std::map<std::string, std::string>& extras) {
  if (frames.empty()) throw InvalidInput("save_matrix_seq: no frames");
  Eigen::Index rows = frames[0].rows(), cols = frames[0].cols();
  std::vector<double> data;
  data.reserve(frames.size() * rows * cols);
  for (const Mat& f : frames) {
    if (f.rows() != rows || f.cols() != cols)
      throw InvalidInput("save_matrix_seq: ragged frames");
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) data.push_back(f(i, j));
  }
  save_tensor(prefix, {static_cast<Eigen::Index>(frames.size()), rows, cols}, data, dtype,
              extras);
}

std::vector<Mat> load_matrix_seq(const fs::path& prefix) {
  return load_tensor(prefix).as_matrix_seq();
}

std::optional<std::string> tensor_extra(const fs::path& prefix, const std::string& key) {
  json header = json::parse(read_file(fs::path(prefix.string() + ".json")));
  if (!header.contains(key)) return std::nullopt;
  const auto& v = header.at(key);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

namespace {
constexpr char kCkptMagic[8] = {'H', 'O', 'I', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const fs::path& path, const nn::ParamMap& params,
                     const CheckpointMeta& meta) {
  json manifest;
  manifest["config_hash"] = meta.config_hash;
  manifest["step"] = meta.step;
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, v] : params.entries()) {
    json t;
    t["name"] = name;
    t["rows"] = v.rows();
    t["cols"] = v.cols();
    t["offset"] = offset;
    tensors.push_back(t);
    offset += static_cast<std::uint64_t>(v.value().size()) * sizeof(double);
  }
  manifest["tensors"] = tensors;
  std::string mtext = manifest.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open for write: " + path.string());
  out.write(kCkptMagic, 8);
  std::uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& [name, v] : params.entries()) {
    const Mat& m = v.value();
    // row-major on disk
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  }
  if (!out) throw InvalidInput("checkpoint write failed: " + path.string());
}

namespace {

json read_manifest(std::ifstream& in, const fs::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw InvalidInput("not a checkpoint file: " + path.string());
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw InvalidInput("truncated checkpoint: " + path.string());
  return json::parse(mtext);
}

}  // namespace

CheckpointMeta load_checkpoint(const fs::path& path, nn::ParamMap& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("missing checkpoint: " + path.string());
  json manifest = read_manifest(in, path);
  std::streampos blob_start = in.tellg();

  CheckpointMeta meta;
  meta.config_hash = manifest.value("config_hash", "");
  meta.step = manifest.value("step", 0L);

  for (const auto& t : manifest.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    Eigen::Index rows = t.at("rows").get<Eigen::Index>();
    Eigen::Index cols = t.at("cols").get<Eigen::Index>();
    if (!params.contains(name))
      throw InvalidInput("checkpoint tensor not in model: " + name);
    nn::Var& v = params.at(name);
    if (v.rows() != rows || v.cols() != cols)
      throw InvalidInput("checkpoint shape mismatch for " + name);
    in.seekg(blob_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    Mat m(rows, cols);
    std::vector<double> row(cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row[j];
    }
    if (!in) throw InvalidInput("truncated checkpoint blob: " + name);
    v.set_value(m);
  }
  return meta;
}

CheckpointMeta peek_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("missing checkpoint: " + path.string());
  json manifest = read_manifest(in, path);
  CheckpointMeta meta;
  meta.config_hash = manifest.value("config_hash", "");
  meta.step = manifest.value("step", 0L);
  return meta;
}

JsonlWriter::JsonlWriter(const fs::path& path, bool append) : path_(path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path_, append ? std::ios::app : std::ios::trunc);
  if (!out) throw InvalidInput("cannot open for write: " + path_.string());
}

void JsonlWriter::write_line(const std::string& json_object) {
  std::ofstream out(path_, std::ios::app);
  out << json_object << "\n";
  if (!out) throw InvalidInput("write failed: " + path_.string());
}

std::vector<std::string> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace hoimo::io
