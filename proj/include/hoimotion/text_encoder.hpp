#pragma once

#include "hoimotion/nn/modules.hpp"

#include <string>
#include <vector>

namespace hoimo::text {

// Lowercase alphanumeric runs; punctuation splits tokens.
std::vector<std::string> tokenize(const std::string& s);

struct TextEncoderConfig {
  Eigen::Index dim = 512;
  Eigen::Index vocab_buckets = 512;  // hashed token buckets, bucket 0 = PAD
  Eigen::Index max_tokens = 77;      // long-context variant raises this to 256
};

// Small trainable sentence encoder: hashed token embeddings, mean pooling,
// one projection layer. Deterministic per input; gradients flow through the
// embedding table so the encoder trains jointly with its consumer.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const TextEncoderConfig& cfg, Rng& rng);

  nn::Var encode(const std::string& text) const;                       // 1 x dim
  nn::Var encode_fine(const std::vector<std::string>& sentences) const;  // joined phases

  std::vector<int> token_ids(const std::string& text) const;
  const TextEncoderConfig& config() const { return cfg_; }
  void collect(const std::string& prefix, nn::ParamMap& params);

 private:
  TextEncoderConfig cfg_;
  nn::Var embedding_;  // vocab_buckets x dim
  nn::Linear proj_;
};

}  // namespace hoimo::text
