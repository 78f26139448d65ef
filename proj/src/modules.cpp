#include "hoimotion/nn/modules.hpp"

#include <cmath>

namespace hoimo::nn {

void ParamMap::add(const std::string& name, Var v) {
  if (index_.count(name)) throw InvalidInput("duplicate parameter name: " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(v));
}

Var& ParamMap::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInput("unknown parameter: " + name);
  return entries_[it->second].second;
}

const Var& ParamMap::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInput("unknown parameter: " + name);
  return entries_[it->second].second;
}

bool ParamMap::contains(const std::string& name) const { return index_.count(name) > 0; }

std::vector<Var> ParamMap::vars() const {
  std::vector<Var> out;
  out.reserve(entries_.size());
  for (const auto& [_, v] : entries_) out.push_back(v);
  return out;
}

void ParamMap::zero_grad() {
  for (auto& [_, v] : entries_) v.zero_grad();
}

void ParamMap::freeze() {
  for (auto& [_, v] : entries_) v.node()->requires_grad = false;
}

Var make_param(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return Var(rng.uniform_mat(rows, cols, -limit, limit), true);
}

Var make_zero_param(Eigen::Index rows, Eigen::Index cols) {
  return Var(Mat::Zero(rows, cols), true);
}

Linear::Linear(Rng& rng, Eigen::Index in, Eigen::Index out, bool zero_init)
    : weight(zero_init ? make_zero_param(in, out) : make_param(rng, in, out)),
      bias(make_zero_param(1, out)) {}

Var Linear::forward(const Var& x) const { return add_rowvec(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParamMap& params) {
  params.add(prefix + ".weight", weight);
  params.add(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(Eigen::Index d)
    : gamma(Var(Mat::Ones(1, d), true)), beta(make_zero_param(1, d)) {}

Var LayerNorm::forward(const Var& x) const {
  return add_rowvec(mul_rowvec(layer_norm_rows(x), gamma), beta);
}

void LayerNorm::collect(const std::string& prefix, ParamMap& params) {
  params.add(prefix + ".gamma", gamma);
  params.add(prefix + ".beta", beta);
}

MultiheadAttention::MultiheadAttention(Rng& rng, Eigen::Index d_model, int heads,
                                       bool zero_init_out)
    : wq(rng, d_model, d_model),
      wk(rng, d_model, d_model),
      wv(rng, d_model, d_model),
      wo(rng, d_model, d_model, zero_init_out),
      n_heads(heads) {
  if (d_model % heads != 0) throw InvalidInput("d_model must divide by n_heads");
}

Var MultiheadAttention::forward(const Var& query, const Var& key, const Var& value) const {
  return forward_with_weights(query, key, value, nullptr);
}

Var MultiheadAttention::forward_with_weights(const Var& query, const Var& key,
                                             const Var& value,
                                             std::vector<Mat>* weights) const {
  Eigen::Index d_model = wq.weight.cols();
  Eigen::Index d_head = d_model / n_heads;
  Var q = wq.forward(query);
  Var k = wk.forward(key);
  Var v = wv.forward(value);
  double scale = 1.0 / std::sqrt(static_cast<double>(d_head));
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    Var qh = slice_cols(q, h * d_head, d_head);
    Var kh = slice_cols(k, h * d_head, d_head);
    Var vh = slice_cols(v, h * d_head, d_head);
    Var logits = mul_scalar(matmul(qh, transpose(kh)), scale);
    Var attn = softmax_rows(logits);
    if (weights) weights->push_back(attn.value());
    heads.push_back(matmul(attn, vh));
  }
  Var cat = n_heads == 1 ? heads[0] : concat_cols(heads);
  return wo.forward(cat);
}

void MultiheadAttention::collect(const std::string& prefix, ParamMap& params) {
  wq.collect(prefix + ".wq", params);
  wk.collect(prefix + ".wk", params);
  wv.collect(prefix + ".wv", params);
  wo.collect(prefix + ".wo", params);
}

TransformerBlock::TransformerBlock(Rng& rng, Eigen::Index d_model, int n_heads,
                                   Eigen::Index d_ff)
    : ln1(d_model),
      ln2(d_model),
      attn(rng, d_model, n_heads),
      ff1(rng, d_model, d_ff),
      ff2(rng, d_ff, d_model) {}

Var TransformerBlock::forward(const Var& x) const {
  Var h = ln1.forward(x);
  Var y = add(x, attn.forward(h, h, h));
  Var z = ff2.forward(gelu(ff1.forward(ln2.forward(y))));
  return add(y, z);
}

void TransformerBlock::collect(const std::string& prefix, ParamMap& params) {
  ln1.collect(prefix + ".ln1", params);
  ln2.collect(prefix + ".ln2", params);
  attn.collect(prefix + ".attn", params);
  ff1.collect(prefix + ".ff1", params);
  ff2.collect(prefix + ".ff2", params);
}

Mlp::Mlp(Rng& rng, const std::vector<Eigen::Index>& dims) {
  if (dims.size() < 2) throw InvalidInput("Mlp needs at least one layer");
  for (size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(rng, dims[i], dims[i + 1]);
}

Var Mlp::forward(const Var& x) const {
  Var h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = gelu(h);
  }
  return h;
}

void Mlp::collect(const std::string& prefix, ParamMap& params) {
  for (size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(prefix + ".l" + std::to_string(i), params);
}

Mat positional_encoding(Eigen::Index length, Eigen::Index dim) {
  Mat pe = Mat::Zero(length, dim);
  for (Eigen::Index pos = 0; pos < length; ++pos) {
    for (Eigen::Index i = 0; i < dim; i += 2) {
      double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      pe(pos, i) = std::sin(pos * freq);
      if (i + 1 < dim) pe(pos, i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

Mat timestep_embedding(int t, Eigen::Index dim) {
  Mat e = Mat::Zero(1, dim);
  for (Eigen::Index i = 0; i < dim; i += 2) {
    double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
    e(0, i) = std::sin(t * freq);
    if (i + 1 < dim) e(0, i + 1) = std::cos(t * freq);
  }
  return e;
}

}  // namespace hoimo::nn
