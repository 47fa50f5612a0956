#pragma once

#include <string>
#include <vector>

namespace graformer {

std::vector<std::string> split_whitespace(const std::string& text);

// Corpus-level BLEU-4 in [0, 100]. Modified n-gram precisions with
// multi-reference clipping are aggregated over the corpus before the
// ratios are taken (no smoothing). Orders for which the corpus has no
// hypothesis n-grams at all are dropped from the geometric mean; an
// included order with zero matches yields 0. The brevity penalty uses the
// shortest reference length, which keeps multi-reference scores at least
// as high as against any single reference.
double corpus_bleu(const std::vector<std::vector<std::string>>& hyp_tokens,
                   const std::vector<std::vector<std::vector<std::string>>>& ref_tokens);

// Whitespace-tokenizing convenience overload; refs[i] are the alternative
// references of hypothesis i.
double corpus_bleu(const std::vector<std::string>& hyps,
                   const std::vector<std::vector<std::string>>& refs);

// chrF++ in [0, 100]: character 1..6-grams plus word 1..2-grams, F-score
// with beta=2. Whitespace is removed before character n-gram extraction;
// strings are treated as UTF-8. Per sentence the best-scoring reference is
// chosen; its counts are aggregated over the corpus and the per-order
// F-scores averaged. Scores 0 when the hypothesis side is empty, unless
// both sides are empty.
double chrf_pp(const std::vector<std::string>& hyps,
               const std::vector<std::vector<std::string>>& refs);

}  // namespace graformer
