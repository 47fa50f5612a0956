#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "graformer/metrics.hpp"
#include "graformer/model.hpp"
#include "graformer/vocab.hpp"

namespace graformer {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 8;
  int gradient_accumulation = 1;
  double gradient_clipping = 1.0;
  double label_smoothing = 0.0;
  double l2_regularizer = 0.0;
  uint64_t seed = 0;

  void validate() const {
    require(epochs >= 1 && batch_size >= 1 && gradient_accumulation >= 1,
            "epochs, batch size and accumulation must be >= 1");
    require(gradient_clipping > 0.0, "gradient clipping must be positive");
    require(label_smoothing >= 0.0 && label_smoothing < 1.0, "label smoothing must be in [0, 1)");
    require(l2_regularizer >= 0.0, "L2 coefficient must be >= 0");
  }
};

// One training example: graph node labels as vocabulary ids, the relative
// position matrix, and the target token ids (no BOS/EOS).
struct TrainInstance {
  std::vector<int> node_labels;
  RelPosMatrix relpos;
  std::vector<int> target_ids;
  std::string target_text;
};

// Length-sorted split into four buckets of 40/40/10/10 percent (floor rule,
// remainder into the last bucket). Membership is fixed once; each epoch
// shuffles inside the buckets while the shortest-first bucket order stays.
class CurriculumDataset {
 public:
  static CurriculumDataset make(const std::vector<size_t>& target_lengths, uint64_t seed) {
    require(!target_lengths.empty(), "curriculum needs a nonempty train set");
    std::vector<size_t> order(target_lengths.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return target_lengths[a] < target_lengths[b]; });
    size_t n = order.size();
    size_t sizes[4] = {n * 4 / 10, n * 4 / 10, n / 10, 0};
    sizes[3] = n - sizes[0] - sizes[1] - sizes[2];
    CurriculumDataset ds;
    ds.seed_ = seed;
    size_t at = 0;
    for (size_t b = 0; b < 4; ++b) {
      ds.buckets_[b].assign(order.begin() + at, order.begin() + at + sizes[b]);
      at += sizes[b];
    }
    return ds;
  }

  static CurriculumDataset make(const std::vector<TrainInstance>& train, uint64_t seed) {
    std::vector<size_t> lengths;
    lengths.reserve(train.size());
    for (const auto& inst : train) lengths.push_back(inst.target_ids.size());
    return make(lengths, seed);
  }

  const std::array<std::vector<size_t>, 4>& buckets() const { return buckets_; }

  // Buckets in global order with epoch-specific intra-bucket shuffles.
  std::array<std::vector<size_t>, 4> epoch_buckets(int epoch) const {
    std::array<std::vector<size_t>, 4> out = buckets_;
    Rng rng(seed_ ^ (0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(epoch + 1)));
    for (auto& bucket : out) rng.shuffle(bucket);
    return out;
  }

  std::vector<size_t> epoch_order(int epoch) const {
    std::vector<size_t> flat;
    for (const auto& bucket : epoch_buckets(epoch))
      flat.insert(flat.end(), bucket.begin(), bucket.end());
    return flat;
  }

  size_t size() const {
    size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
  }

 private:
  std::array<std::vector<size_t>, 4> buckets_;
  uint64_t seed_ = 0;
};

// Label-smoothed negative log-likelihood, averaged over non-pad positions.
template <typename S>
Tensor<S> sequence_loss(const Tensor<S>& logits, const std::vector<int>& targets,
                        double smoothing, int pad_id = SpecialTokens::kPad) {
  return smoothed_cross_entropy(logits, targets, smoothing, pad_id, Reduction::Mean);
}

// ---- Adafactor ----

// Factored second moments for matrices, full second moments for vectors,
// relative step size without any schedule, update clipping, decoupled
// weight decay. Defaults follow the original publication.
struct AdafactorConfig {
  double eps1 = 1e-30;          // regularizer inside the second moment
  double eps2 = 1e-3;           // floor for the parameter scale
  double clip_threshold = 1.0;  // d in the update-clipping rule
  double decay_exponent = 0.8;  // beta2_t = 1 - t^-decay_exponent
  double max_rel_step = 1e-2;   // rho_t = min(max_rel_step, 1/sqrt(t))
  double weight_decay = 0.0;    // decoupled, scaled by the step size
};

template <typename S>
class Adafactor {
 public:
  Adafactor(std::vector<Tensor<S>*> params, AdafactorConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    states_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor<S>& p = *params_[i];
      State& st = states_[i];
      st.factored = p.rank() == 2 && p.rows() > 1 && p.cols() > 1;
      if (st.factored) {
        st.row.assign(p.rows(), 0.0);
        st.col.assign(p.cols(), 0.0);
      } else {
        st.full.assign(p.size(), 0.0);
      }
    }
  }

  int64_t steps() const { return t_; }

  void step() {
    ++t_;
    double rho = std::min(cfg_.max_rel_step, 1.0 / std::sqrt(static_cast<double>(t_)));
    double beta2 = 1.0 - std::pow(static_cast<double>(t_), -cfg_.decay_exponent);

    std::vector<double> update;
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor<S>& p = *params_[pi];
      State& st = states_[pi];
      const auto& grad = p.grad();
      auto& values = p.mutable_values();

      double mean_sq = 0.0;
      for (S v : values) mean_sq += static_cast<double>(v) * v;
      mean_sq /= static_cast<double>(values.size());
      double alpha = std::max(cfg_.eps2, std::sqrt(mean_sq)) * rho;

      update.assign(values.size(), 0.0);
      if (st.factored) {
        int rows = p.rows(), cols = p.cols();
        std::vector<double> row_acc(rows, 0.0), col_acc(cols, 0.0);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) {
            double g2 = static_cast<double>(grad[static_cast<size_t>(i) * cols + j]);
            g2 = g2 * g2 + cfg_.eps1;
            row_acc[i] += g2;
            col_acc[j] += g2;
          }
        double row_sum = 0.0;
        for (int i = 0; i < rows; ++i) {
          st.row[i] = beta2 * st.row[i] + (1.0 - beta2) * row_acc[i];
          row_sum += st.row[i];
        }
        for (int j = 0; j < cols; ++j) st.col[j] = beta2 * st.col[j] + (1.0 - beta2) * col_acc[j];
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) {
            size_t k = static_cast<size_t>(i) * cols + j;
            double vhat = st.row[i] * st.col[j] / row_sum;
            update[k] = static_cast<double>(grad[k]) / std::sqrt(vhat);
          }
      } else {
        for (size_t k = 0; k < values.size(); ++k) {
          double g = grad[k];
          st.full[k] = beta2 * st.full[k] + (1.0 - beta2) * (g * g + cfg_.eps1);
          update[k] = g / std::sqrt(st.full[k]);
        }
      }

      double update_sq = 0.0;
      for (double u : update) update_sq += u * u;
      double rms_u = std::sqrt(update_sq / static_cast<double>(update.size()));
      double damp = std::max(1.0, rms_u / cfg_.clip_threshold);

      for (size_t k = 0; k < values.size(); ++k) {
        double next = static_cast<double>(values[k]) - alpha * update[k] / damp;
        if (cfg_.weight_decay > 0.0) next -= alpha * cfg_.weight_decay * values[k];
        values[k] = static_cast<S>(next);
      }
    }
  }

 private:
  struct State {
    bool factored = false;
    std::vector<double> row, col, full;
  };

  std::vector<Tensor<S>*> params_;
  AdafactorConfig cfg_;
  std::vector<State> states_;
  int64_t t_ = 0;
};

// Scales gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <typename S>
double clip_global_grad_norm(const std::vector<Tensor<S>*>& params, double max_norm) {
  double total = 0.0;
  for (const auto* p : params)
    for (S g : p->grad()) total += static_cast<double>(g) * g;
  double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    S factor = static_cast<S>(max_norm / norm);
    for (auto* p : params) {
      auto& grad = const_cast<std::vector<S>&>(p->grad());
      for (auto& g : grad) g *= factor;
    }
  }
  return norm;
}

template <typename S>
void scale_grads(const std::vector<Tensor<S>*>& params, double factor) {
  for (auto* p : params) {
    auto& grad = const_cast<std::vector<S>&>(p->grad());
    for (auto& g : grad) g = static_cast<S>(g * factor);
  }
}

struct EpochMetrics {
  double avg_token_loss = 0.0;
  size_t tokens = 0;
  int optimizer_steps = 0;
  double wall_seconds = 0.0;
};

// Runs forward/backward for every instance of an accumulation window,
// normalizes the summed gradients by the window's token count, clips and
// steps. Windows never cross bucket boundaries so length-similar items
// stay together.
template <typename S>
class Trainer {
 public:
  Trainer(GraformerParams<S>& params, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
          AdafactorConfig opt_cfg = {})
      : params_(&params),
        model_cfg_(model_cfg),
        train_cfg_(train_cfg),
        dropout_rng_(train_cfg.seed + 0x5DEECE66DULL),
        param_ptrs_(collect(params)),
        optimizer_(param_ptrs_, with_decay(opt_cfg, train_cfg)) {
    train_cfg.validate();
  }

  EpochMetrics train_epoch(const std::vector<TrainInstance>& data,
                           const CurriculumDataset& curriculum, int epoch) {
    auto start = std::chrono::steady_clock::now();
    EpochMetrics metrics;
    double loss_sum = 0.0;
    size_t window_span = static_cast<size_t>(train_cfg_.batch_size) *
                         static_cast<size_t>(train_cfg_.gradient_accumulation);
    int batch_index = 0;
    for (const auto& bucket : curriculum.epoch_buckets(epoch)) {
      for (size_t at = 0; at < bucket.size(); at += window_span) {
        size_t end = std::min(bucket.size(), at + window_span);
        params_->zero_grads();
        size_t window_tokens = 0;
        for (size_t k = at; k < end; ++k) {
          const TrainInstance& inst = data[bucket[k]];
          double value = instance_loss_sum(inst);
          if (!std::isfinite(value))
            throw ContractViolation("non-finite loss in epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index + static_cast<int>((k - at) /
                                    static_cast<size_t>(train_cfg_.batch_size))));
          loss_sum += value;
          window_tokens += inst.target_ids.size() + 1;  // EOS counts as a position
        }
        scale_grads(param_ptrs_, 1.0 / static_cast<double>(window_tokens));
        clip_global_grad_norm(param_ptrs_, train_cfg_.gradient_clipping);
        optimizer_.step();
        metrics.tokens += window_tokens;
        metrics.optimizer_steps += 1;
        batch_index += static_cast<int>((end - at + train_cfg_.batch_size - 1) /
                                        static_cast<size_t>(train_cfg_.batch_size));
      }
    }
    metrics.avg_token_loss = loss_sum / static_cast<double>(metrics.tokens);
    metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return metrics;
  }

  // Sum (not mean) of the smoothed NLL over the instance's positions;
  // gradients accumulate into the parameter tensors.
  double instance_loss_sum(const TrainInstance& inst) {
    require(!inst.target_ids.empty(), "training instance with empty target");
    Tensor<S> h_enc = encode(inst.node_labels, inst.relpos, *params_, model_cfg_, true,
                             dropout_rng_);
    std::vector<int> input{SpecialTokens::kBos};
    input.insert(input.end(), inst.target_ids.begin(), inst.target_ids.end());
    std::vector<int> gold(inst.target_ids.begin(), inst.target_ids.end());
    gold.push_back(SpecialTokens::kEos);

    auto out = decode_forward(input, h_enc, *params_, model_cfg_, true, dropout_rng_);
    Tensor<S> loss = smoothed_cross_entropy(out.logits, gold, train_cfg_.label_smoothing,
                                            SpecialTokens::kPad, Reduction::Sum);
    double value = loss.value(0);
    if (std::isfinite(value)) backward(loss);
    return value;
  }

  Adafactor<S>& optimizer() { return optimizer_; }
  Rng& dropout_rng() { return dropout_rng_; }

 private:
  static std::vector<Tensor<S>*> collect(GraformerParams<S>& params) {
    std::vector<Tensor<S>*> out;
    for (auto& [name, tensor] : params.named_params()) out.push_back(tensor);
    return out;
  }
  static AdafactorConfig with_decay(AdafactorConfig cfg, const TrainConfig& tc) {
    cfg.weight_decay = tc.l2_regularizer;
    return cfg;
  }

  GraformerParams<S>* params_;
  ModelConfig model_cfg_;
  TrainConfig train_cfg_;
  Rng dropout_rng_;
  std::vector<Tensor<S>*> param_ptrs_;
  Adafactor<S> optimizer_;
};

struct SelectionResult {
  size_t best_index = 0;
  double best_bleu = 0.0;
  std::vector<double> scores;
};

// Picks the checkpoint whose greedy-decoded hypotheses score the highest
// corpus BLEU against the validation references; ties go to the earlier
// epoch.
inline SelectionResult select_model(const std::vector<std::vector<std::string>>& candidate_hyps,
                                    const std::vector<std::vector<std::string>>& references) {
  require(!candidate_hyps.empty(), "select_model needs at least one checkpoint");
  require(!references.empty(), "select_model needs a nonempty validation set");
  SelectionResult result;
  for (const auto& hyps : candidate_hyps) result.scores.push_back(corpus_bleu(hyps, references));
  for (size_t i = 1; i < result.scores.size(); ++i)
    if (result.scores[i] > result.scores[result.best_index]) result.best_index = i;
  result.best_bleu = result.scores[result.best_index];
  return result;
}

}  // namespace graformer
