#include "vut/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "vut/errors.hpp"
#include "vut/tokenizer.hpp"

namespace vut {

namespace {

using Words = std::vector<std::string>;
using Counts = std::map<std::string, double>;

// n-gram key: tokens joined with an unprintable separator.
Counts ngram_counts(const Words& w, int n) {
  Counts c;
  for (size_t i = 0; i + size_t(n) <= w.size(); ++i) {
    std::string key = w[i];
    for (size_t j = 1; j < size_t(n); ++j) {
      key += '\x1f';
      key += w[i + j];
    }
    c[key] += 1.0;
  }
  return c;
}

void check_pairs(const std::vector<std::string>& candidates,
                 const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size())
    throw UsageError("need one reference list per candidate");
  for (const auto& refs : references)
    if (refs.empty()) throw UsageError("every candidate needs at least one reference");
}

size_t lcs_len(const Words& a, const Words& b) {
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu(const std::vector<std::string>& candidates,
            const std::vector<std::vector<std::string>>& references, int n) {
  if (n < 1 || n > 4) throw UsageError("bleu order must be in 1..4");
  check_pairs(candidates, references);

  std::vector<double> clipped(size_t(n), 0.0), total(size_t(n), 0.0);
  double c_len = 0.0, r_len = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    Words cand = Vocabulary::split(candidates[i]);
    std::vector<Words> refs;
    for (const auto& r : references[i]) refs.push_back(Vocabulary::split(r));

    c_len += double(cand.size());
    size_t best_ref = refs[0].size();
    for (const auto& r : refs) {
      auto d = [&](size_t len) { return std::llabs(int64_t(len) - int64_t(cand.size())); };
      if (d(r.size()) < d(best_ref) || (d(r.size()) == d(best_ref) && r.size() < best_ref))
        best_ref = r.size();
    }
    r_len += double(best_ref);

    for (int k = 1; k <= n; ++k) {
      Counts cc = ngram_counts(cand, k);
      Counts cmax;
      for (const auto& r : refs)
        for (const auto& [key, cnt] : ngram_counts(r, k)) {
          double& m = cmax[key];
          m = std::max(m, cnt);
        }
      for (const auto& [key, cnt] : cc) {
        total[size_t(k - 1)] += cnt;
        auto it = cmax.find(key);
        if (it != cmax.end()) clipped[size_t(k - 1)] += std::min(cnt, it->second);
      }
    }
  }

  if (c_len == 0.0) return 0.0;
  double log_prec = 0.0;
  for (int k = 0; k < n; ++k) {
    if (total[size_t(k)] == 0.0 || clipped[size_t(k)] == 0.0) return 0.0;
    log_prec += std::log(clipped[size_t(k)] / total[size_t(k)]) / double(n);
  }
  double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * std::exp(log_prec);
}

double rouge_l(const std::string& candidate, const std::vector<std::string>& references) {
  if (references.empty()) throw UsageError("rouge_l needs at least one reference");
  Words cand = Vocabulary::split(candidate);
  double best = 0.0;
  for (const auto& ref : references) {
    Words r = Vocabulary::split(ref);
    if (cand.empty() || r.empty()) continue;
    double l = double(lcs_len(cand, r));
    if (l == 0.0) continue;
    double p = l / double(cand.size());
    double rec = l / double(r.size());
    best = std::max(best, 2.0 * p * rec / (p + rec));
  }
  return best;
}

double rouge_l(const std::vector<std::string>& candidates,
               const std::vector<std::vector<std::string>>& references) {
  check_pairs(candidates, references);
  if (candidates.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) sum += rouge_l(candidates[i], references[i]);
  return sum / double(candidates.size());
}

double cider_d(const std::vector<std::string>& candidates,
               const std::vector<std::vector<std::string>>& references) {
  check_pairs(candidates, references);
  if (candidates.empty()) return 0.0;
  constexpr int kMaxN = 4;
  constexpr double kSigma = 6.0;

  // Document frequency: number of images whose reference set contains the
  // n-gram.
  Counts df;
  std::vector<std::vector<std::array<Counts, kMaxN>>> ref_counts(references.size());
  for (size_t i = 0; i < references.size(); ++i) {
    std::map<std::string, bool> seen;
    for (const auto& ref : references[i]) {
      std::array<Counts, kMaxN> per_n;
      Words w = Vocabulary::split(ref);
      for (int n = 1; n <= kMaxN; ++n) per_n[size_t(n - 1)] = ngram_counts(w, n);
      for (const auto& counts : per_n)
        for (const auto& [key, cnt] : counts) seen[key] = true;
      ref_counts[i].push_back(std::move(per_n));
    }
    for (const auto& [key, _] : seen) df[key] += 1.0;
  }
  double log_docs = std::log(double(references.size()));

  auto vectorize = [&](const std::array<Counts, kMaxN>& counts, double* norm) {
    std::array<Counts, kMaxN> vec;
    for (int n = 0; n < kMaxN; ++n) {
      double sq = 0.0;
      for (const auto& [key, cnt] : counts[size_t(n)]) {
        auto it = df.find(key);
        double idf = log_docs - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
        double g = cnt * idf;
        vec[size_t(n)][key] = g;
        sq += g * g;
      }
      norm[n] = std::sqrt(sq);
    }
    return vec;
  };

  double score = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    Words cand = Vocabulary::split(candidates[i]);
    std::array<Counts, kMaxN> cc;
    for (int n = 1; n <= kMaxN; ++n) cc[size_t(n - 1)] = ngram_counts(cand, n);
    double cnorm[kMaxN];
    auto cvec = vectorize(cc, cnorm);

    double image_score = 0.0;
    for (size_t r = 0; r < references[i].size(); ++r) {
      double rnorm[kMaxN];
      auto rvec = vectorize(ref_counts[i][r], rnorm);
      Words ref = Vocabulary::split(references[i][r]);
      double delta = double(cand.size()) - double(ref.size());
      double penalty = std::exp(-delta * delta / (2.0 * kSigma * kSigma));
      for (int n = 0; n < kMaxN; ++n) {
        double dot = 0.0;
        for (const auto& [key, g] : cvec[size_t(n)]) {
          auto it = rvec[size_t(n)].find(key);
          if (it != rvec[size_t(n)].end()) dot += std::min(g, it->second) * it->second;
        }
        if (cnorm[n] > 0.0 && rnorm[n] > 0.0) dot /= cnorm[n] * rnorm[n];
        image_score += penalty * dot / double(kMaxN);
      }
    }
    score += image_score / double(references[i].size());
  }
  return 10.0 * score / double(candidates.size());
}

}  // namespace vut
