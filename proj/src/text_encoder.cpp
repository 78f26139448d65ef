#include "hoimotion/text_encoder.hpp"

#include <cctype>

namespace hoimo::text {

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

TextEncoder::TextEncoder(const TextEncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  embedding_ = nn::make_param(rng, cfg.vocab_buckets, cfg.dim);
  proj_ = nn::Linear(rng, cfg.dim, cfg.dim);
}

std::vector<int> TextEncoder::token_ids(const std::string& text) const {
  const auto tokens = tokenize(text);
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    if (static_cast<Eigen::Index>(ids.size()) >= cfg_.max_tokens) break;
    // Bucket 0 is reserved for PAD; hash the rest into [1, buckets).
    ids.push_back(static_cast<int>(fnv1a(tok) % static_cast<std::uint64_t>(cfg_.vocab_buckets - 1)) + 1);
  }
  if (ids.empty()) ids.push_back(0);
  return ids;
}

nn::Var TextEncoder::encode(const std::string& text) const {
  const auto ids = token_ids(text);
  const nn::Var rows = nn::gather_rows(embedding_, ids);
  return proj_.forward(nn::mean_rows(rows));
}

nn::Var TextEncoder::encode_fine(const std::vector<std::string>& sentences) const {
  std::string joined;
  for (const auto& s : sentences) {
    if (!joined.empty()) joined += " ";
    joined += s;
  }
  return encode(joined);
}

void TextEncoder::collect(const std::string& prefix, nn::ParamMap& params) {
  params.add(prefix + ".embedding", embedding_);
  proj_.collect(prefix + ".proj", params);
}

}  // namespace hoimo::text
