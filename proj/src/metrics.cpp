#include "graformer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>

#include "graformer/errors.hpp"

namespace graformer {

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

namespace {

constexpr int kBleuOrder = 4;

using NgramCounts = std::map<std::vector<std::string>, size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<std::vector<std::string>>& hyp_tokens,
                   const std::vector<std::vector<std::vector<std::string>>>& ref_tokens) {
  require(!hyp_tokens.empty(), "corpus_bleu: empty corpus");
  require(hyp_tokens.size() == ref_tokens.size(),
          "corpus_bleu: hypothesis and reference counts differ");

  size_t matched[kBleuOrder] = {0, 0, 0, 0};
  size_t total[kBleuOrder] = {0, 0, 0, 0};
  size_t hyp_len = 0, ref_len = 0;

  for (size_t s = 0; s < hyp_tokens.size(); ++s) {
    const auto& hyp = hyp_tokens[s];
    const auto& refs = ref_tokens[s];
    require(!refs.empty(), "corpus_bleu: hypothesis " + std::to_string(s) + " has no reference");

    hyp_len += hyp.size();
    size_t shortest = refs[0].size();
    for (const auto& r : refs) shortest = std::min(shortest, r.size());
    ref_len += shortest;

    for (int n = 1; n <= kBleuOrder; ++n) {
      NgramCounts hyp_counts = count_ngrams(hyp, n);
      NgramCounts max_ref_counts;
      for (const auto& r : refs)
        for (const auto& [gram, count] : count_ngrams(r, n))
          max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = max_ref_counts.find(gram);
        if (it != max_ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision_sum = 0.0;
  int included = 0;
  for (int n = 0; n < kBleuOrder; ++n) {
    if (total[n] == 0) continue;  // no n-grams of this order anywhere in the corpus
    if (matched[n] == 0) return 0.0;
    log_precision_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
    ++included;
  }
  if (included == 0 || hyp_len == 0) return 0.0;

  double brevity = 1.0;
  if (hyp_len < ref_len)
    brevity = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * brevity * std::exp(log_precision_sum / included);
}

double corpus_bleu(const std::vector<std::string>& hyps,
                   const std::vector<std::vector<std::string>>& refs) {
  require(hyps.size() == refs.size(), "corpus_bleu: hypothesis and reference counts differ");
  std::vector<std::vector<std::string>> hyp_tokens;
  std::vector<std::vector<std::vector<std::string>>> ref_tokens;
  hyp_tokens.reserve(hyps.size());
  ref_tokens.reserve(refs.size());
  for (const auto& h : hyps) hyp_tokens.push_back(split_whitespace(h));
  for (const auto& alternatives : refs) {
    std::vector<std::vector<std::string>> tokenized;
    for (const auto& r : alternatives) tokenized.push_back(split_whitespace(r));
    ref_tokens.push_back(std::move(tokenized));
  }
  return corpus_bleu(hyp_tokens, ref_tokens);
}

namespace {

constexpr int kCharOrder = 6;
constexpr int kWordOrder = 2;
constexpr int kChrfOrders = kCharOrder + kWordOrder;
constexpr double kBeta = 2.0;

// UTF-8 code points with all whitespace removed.
std::vector<uint32_t> codepoints_no_space(const std::string& text) {
  std::vector<uint32_t> cps;
  for (size_t i = 0; i < text.size();) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    uint32_t cp = 0;
    size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      len = 4;
    }
    for (size_t k = 1; k < len && i + k < text.size(); ++k)
      cp = (cp << 6) | (static_cast<unsigned char>(text[i + k]) & 0x3F);
    i += len;
    if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r') continue;
    cps.push_back(cp);
  }
  return cps;
}

struct OrderStats {
  size_t matched = 0;
  size_t hyp_total = 0;
  size_t ref_total = 0;
};

template <typename Seq>
void accumulate_order(const Seq& hyp, const Seq& ref, int n, OrderStats& st) {
  using Gram = std::vector<typename Seq::value_type>;
  std::map<Gram, size_t> ref_counts;
  if (static_cast<int>(ref.size()) >= n)
    for (size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[Gram(ref.begin() + i, ref.begin() + i + n)];
  size_t ref_total = static_cast<int>(ref.size()) >= n ? ref.size() - n + 1 : 0;
  size_t hyp_total = static_cast<int>(hyp.size()) >= n ? hyp.size() - n + 1 : 0;
  size_t matched = 0;
  if (hyp_total > 0) {
    std::map<Gram, size_t> hyp_counts;
    for (size_t i = 0; i + n <= hyp.size(); ++i)
      ++hyp_counts[Gram(hyp.begin() + i, hyp.begin() + i + n)];
    for (const auto& [gram, count] : hyp_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
  }
  st.matched += matched;
  st.hyp_total += hyp_total;
  st.ref_total += ref_total;
}

void sentence_stats(const std::string& hyp, const std::string& ref,
                    OrderStats stats[kChrfOrders]) {
  auto hyp_chars = codepoints_no_space(hyp);
  auto ref_chars = codepoints_no_space(ref);
  for (int n = 1; n <= kCharOrder; ++n)
    accumulate_order(hyp_chars, ref_chars, n, stats[n - 1]);
  auto hyp_words = split_whitespace(hyp);
  auto ref_words = split_whitespace(ref);
  for (int n = 1; n <= kWordOrder; ++n)
    accumulate_order(hyp_words, ref_words, n, stats[kCharOrder + n - 1]);
}

double f_score_from(const OrderStats stats[kChrfOrders]) {
  double f_sum = 0.0;
  int included = 0;
  for (int n = 0; n < kChrfOrders; ++n) {
    const OrderStats& st = stats[n];
    if (st.hyp_total == 0 && st.ref_total == 0) continue;
    double precision =
        st.hyp_total > 0 ? static_cast<double>(st.matched) / static_cast<double>(st.hyp_total) : 0.0;
    double recall =
        st.ref_total > 0 ? static_cast<double>(st.matched) / static_cast<double>(st.ref_total) : 0.0;
    double f = 0.0;
    if (precision + recall > 0.0) {
      double b2 = kBeta * kBeta;
      f = (1.0 + b2) * precision * recall / (b2 * precision + recall);
    }
    f_sum += f;
    ++included;
  }
  if (included == 0) return 1.0;  // both sides empty: verbatim match
  return f_sum / included;
}

}  // namespace

double chrf_pp(const std::vector<std::string>& hyps,
               const std::vector<std::vector<std::string>>& refs) {
  require(!hyps.empty(), "chrf_pp: empty corpus");
  require(hyps.size() == refs.size(), "chrf_pp: hypothesis and reference counts differ");

  OrderStats corpus[kChrfOrders];
  for (size_t s = 0; s < hyps.size(); ++s) {
    require(!refs[s].empty(), "chrf_pp: hypothesis " + std::to_string(s) + " has no reference");
    double best_f = -1.0;
    OrderStats best[kChrfOrders];
    for (const auto& ref : refs[s]) {
      OrderStats stats[kChrfOrders];
      sentence_stats(hyps[s], ref, stats);
      double f = f_score_from(stats);
      if (f > best_f) {
        best_f = f;
        std::copy(stats, stats + kChrfOrders, best);
      }
    }
    for (int n = 0; n < kChrfOrders; ++n) {
      corpus[n].matched += best[n].matched;
      corpus[n].hyp_total += best[n].hyp_total;
      corpus[n].ref_total += best[n].ref_total;
    }
  }
  return 100.0 * f_score_from(corpus);
}

}  // namespace graformer
