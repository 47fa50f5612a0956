#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "graformer/model.hpp"
#include "graformer/vocab.hpp"

namespace graformer {

struct DecodeConfig {
  int beams = 2;
  double length_penalty_alpha = 5.0;
  int min_len = 1;   // shortest train target
  int max_len = 64;  // longest train target

  void validate() const {
    require(beams >= 1, "beam count must be >= 1");
    require(min_len >= 0 && min_len <= max_len, "decode length bounds require min_len <= max_len");
  }
};

// lp(L) = ((5 + L) / 6)^alpha; hypotheses are ranked by sum-log-prob / lp.
inline double length_penalty(int length, double alpha) {
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

// Log-probabilities over the vocabulary for the next token, given the
// generated prefix (BOS handling is the scorer's business).
using StepScorer = std::function<std::vector<double>(const std::vector<int>&)>;

// Argmax decoding. EOS is suppressed while the output is shorter than
// min_len; generation force-stops at max_len. Logit ties go to the lowest
// token id. The returned sequence contains content tokens only.
inline std::vector<int> greedy_decode(const StepScorer& step, const DecodeConfig& cfg,
                                      int eos_id = SpecialTokens::kEos) {
  cfg.validate();
  std::vector<int> tokens;
  while (static_cast<int>(tokens.size()) < cfg.max_len) {
    std::vector<double> logp = step(tokens);
    int best = -1;
    for (int v = 0; v < static_cast<int>(logp.size()); ++v) {
      if (v == eos_id && static_cast<int>(tokens.size()) < cfg.min_len) continue;
      if (best < 0 || logp[v] > logp[best]) best = v;
    }
    if (best == eos_id) break;
    tokens.push_back(best);
  }
  return tokens;
}

namespace detail {

struct BeamHyp {
  std::vector<int> tokens;
  double sum_logp = 0.0;
};

struct FinishedHyp {
  std::vector<int> tokens;
  double score = 0.0;  // sum_logp / lp(content length)

  bool better_than(const FinishedHyp& other) const {
    if (score != other.score) return score > other.score;
    if (tokens.size() != other.tokens.size()) return tokens.size() < other.tokens.size();
    return tokens < other.tokens;
  }
};

}  // namespace detail

struct BeamResult {
  std::vector<int> tokens;
  double score = 0.0;
};

// Beam search with the GNMT length penalty. A hypothesis that emits EOS
// inside the top-k candidates is frozen into a finished pool of size
// `beams`; everything still alive at max_len is force-stopped into the
// pool (without an EOS term), so finished hypotheses compete with
// in-flight beams. Candidate ordering breaks score ties by beam index
// then token id, which makes beams=1 reproduce greedy_decode exactly.
inline BeamResult beam_search_scored(const StepScorer& step, const DecodeConfig& cfg,
                                     int eos_id = SpecialTokens::kEos) {
  cfg.validate();
  using detail::BeamHyp;
  using detail::FinishedHyp;

  std::vector<BeamHyp> live{BeamHyp{}};
  std::vector<FinishedHyp> finished;
  auto add_finished = [&](std::vector<int> tokens, double sum_logp) {
    int content_len = static_cast<int>(tokens.size());
    FinishedHyp hyp{std::move(tokens),
                    sum_logp / length_penalty(content_len, cfg.length_penalty_alpha)};
    finished.push_back(std::move(hyp));
    std::sort(finished.begin(), finished.end(),
              [](const FinishedHyp& a, const FinishedHyp& b) { return a.better_than(b); });
    if (static_cast<int>(finished.size()) > cfg.beams) finished.resize(cfg.beams);
  };

  for (int len = 0; !live.empty(); ++len) {
    if (len == cfg.max_len) {
      for (auto& hyp : live) add_finished(std::move(hyp.tokens), hyp.sum_logp);
      break;
    }

    struct Cand {
      double sum_logp;
      int beam;
      int token;
    };
    std::vector<Cand> cands;
    for (size_t b = 0; b < live.size(); ++b) {
      std::vector<double> logp = step(live[b].tokens);
      for (int v = 0; v < static_cast<int>(logp.size()); ++v) {
        if (v == eos_id && len < cfg.min_len) continue;
        cands.push_back({live[b].sum_logp + logp[v], static_cast<int>(b), v});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.sum_logp != b.sum_logp) return a.sum_logp > b.sum_logp;
      if (a.beam != b.beam) return a.beam < b.beam;
      return a.token < b.token;
    });

    std::vector<BeamHyp> next;
    for (size_t rank = 0; rank < cands.size(); ++rank) {
      const Cand& cand = cands[rank];
      if (cand.token == eos_id) {
        // EOS only finalizes from the top-k ranks; below that the slot
        // serves purely as live backfill.
        if (rank < static_cast<size_t>(cfg.beams))
          add_finished(live[cand.beam].tokens, cand.sum_logp);
        continue;
      }
      if (static_cast<int>(next.size()) < cfg.beams) {
        BeamHyp hyp = live[cand.beam];
        hyp.tokens.push_back(cand.token);
        hyp.sum_logp = cand.sum_logp;
        next.push_back(std::move(hyp));
      }
      if (static_cast<int>(next.size()) == cfg.beams &&
          rank + 1 >= static_cast<size_t>(cfg.beams))
        break;
    }
    live = std::move(next);
  }

  require(!finished.empty(), "beam search produced no hypothesis");
  BeamResult result;
  result.tokens = finished.front().tokens;
  result.score = finished.front().score;
  return result;
}

inline std::vector<int> beam_search(const StepScorer& step, const DecodeConfig& cfg,
                                    int eos_id = SpecialTokens::kEos) {
  return beam_search_scored(step, cfg, eos_id).tokens;
}

// Binds a frozen model and one encoded graph into a StepScorer. The
// decoder prefix is re-run each step; no state is cached.
template <typename S>
class ModelScorer {
 public:
  ModelScorer(const GraformerParams<S>& params, const ModelConfig& cfg,
              const std::vector<int>& node_labels, const RelPosMatrix& relpos)
      : params_(&params), cfg_(cfg), rng_(0) {
    h_enc_ = encode(node_labels, relpos, params, cfg, /*train=*/false, rng_);
  }

  std::vector<double> operator()(const std::vector<int>& prefix) {
    std::vector<int> input{SpecialTokens::kBos};
    input.insert(input.end(), prefix.begin(), prefix.end());
    auto out = decode_forward(input, h_enc_, *params_, cfg_, /*train=*/false, rng_);
    const Tensor<S>& logits = out.logits;
    int rows = logits.rows(), vocab = logits.cols();
    std::vector<double> logp(vocab);
    double mx = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < vocab; ++v)
      mx = std::max(mx, static_cast<double>(logits.value(rows - 1, v)));
    double denom = 0.0;
    for (int v = 0; v < vocab; ++v)
      denom += std::exp(static_cast<double>(logits.value(rows - 1, v)) - mx);
    double lse = mx + std::log(denom);
    for (int v = 0; v < vocab; ++v)
      logp[v] = static_cast<double>(logits.value(rows - 1, v)) - lse;
    return logp;
  }

  const Tensor<S>& encoded() const { return h_enc_; }

 private:
  const GraformerParams<S>* params_;
  ModelConfig cfg_;
  Rng rng_;
  Tensor<S> h_enc_;
};

}  // namespace graformer
