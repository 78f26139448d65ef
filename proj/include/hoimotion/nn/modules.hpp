#pragma once

#include "hoimotion/nn/autograd.hpp"
#include "hoimotion/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace hoimo::nn {

// Named parameter registry. Modules register their Vars under a prefix so
// optimizers and checkpoints see a flat name -> tensor map.
class ParamMap {
 public:
  void add(const std::string& name, Var v);
  Var& at(const std::string& name);
  const Var& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::pair<std::string, Var>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::vector<Var> vars() const;
  size_t size() const { return entries_.size(); }
  void zero_grad();
  // Marks every parameter as frozen (requires_grad = false).
  void freeze();

 private:
  std::vector<std::pair<std::string, Var>> entries_;
  std::map<std::string, size_t> index_;
};

Var make_param(Rng& rng, Eigen::Index rows, Eigen::Index cols);  // Xavier uniform
Var make_zero_param(Eigen::Index rows, Eigen::Index cols);

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  Linear() = default;
  Linear(Rng& rng, Eigen::Index in, Eigen::Index out, bool zero_init = false);
  Var forward(const Var& x) const;
  void collect(const std::string& prefix, ParamMap& params);
};

struct LayerNorm {
  Var gamma;  // 1 x d
  Var beta;   // 1 x d

  LayerNorm() = default;
  explicit LayerNorm(Eigen::Index d);
  Var forward(const Var& x) const;
  void collect(const std::string& prefix, ParamMap& params);
};

// Multi-head attention over row-major sequences (rows = positions).
struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  int n_heads = 1;

  MultiheadAttention() = default;
  MultiheadAttention(Rng& rng, Eigen::Index d_model, int n_heads, bool zero_init_out = false);
  Var forward(const Var& query, const Var& key, const Var& value) const;
  // Forward that also reports each head's attention weights (for invariants).
  Var forward_with_weights(const Var& query, const Var& key, const Var& value,
                           std::vector<Mat>* weights) const;
  void collect(const std::string& prefix, ParamMap& params);
};

// Pre-norm transformer encoder block: x + MHA(LN(x)), then x + FFN(LN(x)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiheadAttention attn;
  Linear ff1, ff2;

  TransformerBlock() = default;
  TransformerBlock(Rng& rng, Eigen::Index d_model, int n_heads, Eigen::Index d_ff);
  Var forward(const Var& x) const;
  void collect(const std::string& prefix, ParamMap& params);
};

struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(Rng& rng, const std::vector<Eigen::Index>& dims);
  Var forward(const Var& x) const;  // GELU between layers, linear last
  void collect(const std::string& prefix, ParamMap& params);
};

// Sinusoidal position table, rows = positions.
Mat positional_encoding(Eigen::Index length, Eigen::Index dim);
// Sinusoidal embedding of a diffusion step index as a 1 x dim row.
Mat timestep_embedding(int t, Eigen::Index dim);

}  // namespace hoimo::nn
