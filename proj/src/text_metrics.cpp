#include "hoimotion/text_metrics.hpp"

#include "hoimotion/text_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace hoimo::text {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& tokens,
                                                     int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

int clipped_overlap(const std::map<std::vector<std::string>, int>& cand,
                    const std::map<std::vector<std::string>, int>& ref) {
  int overlap = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  return overlap;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu4(const std::string& candidate, const std::string& reference) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;

  const int max_n = std::min<int>(4, static_cast<int>(cand.size()));
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cgrams = ngram_counts(cand, n);
    const auto rgrams = ngram_counts(ref, n);
    int total = 0;
    for (const auto& [_, c] : cgrams) total += c;
    const int overlap = clipped_overlap(cgrams, rgrams);
    double p;
    if (overlap > 0) {
      p = static_cast<double>(overlap) / total;
    } else if (n == 1) {
      return 0.0;  // no shared vocabulary at all
    } else {
      p = 1.0 / (2.0 * total);
    }
    log_sum += std::log(p);
  }
  const double ratio = static_cast<double>(ref.size()) / static_cast<double>(cand.size());
  const double bp = cand.size() >= ref.size() ? 1.0 : std::exp(1.0 - ratio);
  return 100.0 * bp * std::exp(log_sum / max_n);
}

double rouge_n(const std::string& candidate, const std::string& reference, int n) {
  const auto cgrams = ngram_counts(tokenize(candidate), n);
  const auto rgrams = ngram_counts(tokenize(reference), n);
  int ctotal = 0, rtotal = 0;
  for (const auto& [_, c] : cgrams) ctotal += c;
  for (const auto& [_, c] : rgrams) rtotal += c;
  if (ctotal == 0 || rtotal == 0) return 0.0;
  const int overlap = clipped_overlap(cgrams, rgrams);
  return 100.0 * f1(static_cast<double>(overlap) / ctotal, static_cast<double>(overlap) / rtotal);
}

double rouge_l(const std::string& candidate, const std::string& reference) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  return 100.0 * f1(lcs / static_cast<double>(cand.size()), lcs / static_cast<double>(ref.size()));
}

TextScores score_text(const std::string& candidate, const std::string& reference) {
  TextScores s;
  s.bleu4 = bleu4(candidate, reference);
  s.rouge1 = rouge_n(candidate, reference, 1);
  s.rouge2 = rouge_n(candidate, reference, 2);
  s.rougeL = rouge_l(candidate, reference);
  return s;
}

}  // namespace hoimo::text
