#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "graformer/model.hpp"

namespace graformer {

// CSV of the learned graph-position bias: one row per relative-position
// bucket, one column per head. By default the same-cluster rows are
// omitted, leaving the 2*n_delta + 2 path buckets -n_delta..n_delta and
// inf; include_same adds the full table in position-vocabulary order with
// same offsets labeled "same(p)". Values round-trip exactly.
template <typename S>
std::string dump_attention_bias(const GraformerParams<S>& params, const ModelConfig& cfg,
                                bool include_same = false) {
  const PositionVocabulary vocab = cfg.position_vocab();
  const Tensor<S>& table = params.graph_pos_bias;
  require(table.rows() == cfg.num_heads && table.cols() == vocab.size(),
          "bias table shape does not match the configuration");

  std::vector<int> order;
  if (include_same) {
    for (int i = 0; i < vocab.size(); ++i) order.push_back(i);
  } else {
    for (int r = -cfg.graph_range; r <= cfg.graph_range; ++r)
      order.push_back(vocab.index_of(r));
    order.push_back(vocab.index_of(kUnreachable));
  }

  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<S>::max_digits10);
  out << "position";
  for (int h = 0; h < cfg.num_heads; ++h) out << ",head_" << h;
  out << "\n";
  for (int index : order) {
    int value = vocab.value_at(index);
    if (value == kUnreachable)
      out << "inf";
    else if (value > cfg.graph_range)
      out << "same(" << value - cfg.max_diameter << ")";
    else if (value < -cfg.graph_range)
      out << "same(" << value + cfg.max_diameter << ")";
    else
      out << value;
    for (int h = 0; h < cfg.num_heads; ++h) out << "," << table.value(h, index);
    out << "\n";
  }
  return out.str();
}

struct AttentionBiasRow {
  std::string position;
  std::vector<double> values;  // one per head
};

inline std::vector<AttentionBiasRow> parse_attention_bias(const std::string& csv) {
  std::vector<AttentionBiasRow> rows;
  std::istringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    AttentionBiasRow row;
    std::istringstream cells(line);
    std::string cell;
    bool first = true;
    while (std::getline(cells, cell, ',')) {
      if (first) {
        row.position = cell;
        first = false;
      } else {
        row.values.push_back(std::stod(cell));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace graformer
