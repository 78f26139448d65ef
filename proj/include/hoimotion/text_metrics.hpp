#pragma once

#include <string>

namespace hoimo::text {

// All scores on the percent scale; identical texts score 100 everywhere.
struct TextScores {
  double bleu4 = 0.0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
};

// Sentence BLEU-4 (modified n-gram precision, brevity penalty). Zero unigram
// overlap scores 0; a zero higher-order count is smoothed to 1/(2*total) so
// near-misses stay comparable; orders above the candidate length are skipped.
double bleu4(const std::string& candidate, const std::string& reference);

// ROUGE-N F1 from clipped n-gram overlap counts.
double rouge_n(const std::string& candidate, const std::string& reference, int n);

// ROUGE-L F1 from the longest common subsequence.
double rouge_l(const std::string& candidate, const std::string& reference);

TextScores score_text(const std::string& candidate, const std::string& reference);

}  // namespace hoimo::text
