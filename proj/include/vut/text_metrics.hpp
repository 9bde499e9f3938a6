#pragma once

#include <string>
#include <vector>

namespace vut {

// Text metrics over whitespace/punctuation-tokenized strings (the tokenizer's
// split rules). All return raw scores; report writers rescale for display.

// Corpus-level cumulative BLEU-n: geometric mean of clipped modified k-gram
// precisions for k = 1..n, times the brevity penalty. Reference length uses
// the closest reference (ties toward the shorter one). No smoothing: a zero
// precision at any order zeroes the score.
double bleu(const std::vector<std::string>& candidates,
            const std::vector<std::vector<std::string>>& references, int n);

// LCS F1 against the best reference.
double rouge_l(const std::string& candidate, const std::vector<std::string>& references);
// Corpus level: mean over pairs.
double rouge_l(const std::vector<std::string>& candidates,
               const std::vector<std::vector<std::string>>& references);

// CIDEr-D: TF-IDF n-gram cosine similarity for n = 1..4 with clipped
// candidate counts and a Gaussian length penalty (sigma = 6), averaged over
// references and orders, scaled by 10. IDF comes from the reference corpus,
// so a single-document corpus scores 0 (log N = 0).
double cider_d(const std::vector<std::string>& candidates,
               const std::vector<std::vector<std::string>>& references);

}  // namespace vut
