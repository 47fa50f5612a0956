#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graformer/model.hpp"

namespace graformer {

// Versioned binary checkpoint: a JSON header (model config, vocabulary,
// decode-length bounds) followed by named tensors. Byte-deterministic for
// a given parameter state.

inline void model_config_to_json(const ModelConfig& cfg, nlohmann::json& j) {
  j["model_dimension"] = cfg.model_dimension;
  j["num_heads"] = cfg.num_heads;
  j["encoder_layers"] = cfg.encoder_layers;
  j["decoder_layers"] = cfg.decoder_layers;
  j["feedforward_dimension"] = cfg.feedforward_dimension;
  j["input_dropout"] = cfg.input_dropout;
  j["attention_dropout"] = cfg.attention_dropout;
  j["dropout"] = cfg.dropout;
  j["text_self_attention_range"] = cfg.text_range;
  j["graph_self_attention_range"] = cfg.graph_range;
  j["same_range"] = cfg.same_range;
  j["max_graph_diameter"] = cfg.max_diameter;
  j["vocab_size"] = cfg.vocab_size;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.model_dimension = j.value("model_dimension", cfg.model_dimension);
  cfg.num_heads = j.value("num_heads", cfg.num_heads);
  cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
  cfg.decoder_layers = j.value("decoder_layers", cfg.decoder_layers);
  cfg.feedforward_dimension = j.value("feedforward_dimension", cfg.feedforward_dimension);
  cfg.input_dropout = j.value("input_dropout", cfg.input_dropout);
  cfg.attention_dropout = j.value("attention_dropout", cfg.attention_dropout);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.text_range = j.value("text_self_attention_range", cfg.text_range);
  cfg.graph_range = j.value("graph_self_attention_range", cfg.graph_range);
  cfg.same_range = j.value("same_range", cfg.same_range);
  cfg.max_diameter = j.value("max_graph_diameter", cfg.max_diameter);
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  return cfg;
}

template <typename S>
struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> vocab;
  int min_decode_len = 1;
  int max_decode_len = 64;
  GraformerParams<S> params;
};

namespace detail {

constexpr char kCheckpointMagic[9] = "GFMRCKP1";

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint truncated");
  return v;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const Checkpoint<S>& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);

  nlohmann::json header;
  model_config_to_json(ckpt.config, header["model"]);
  header["vocab"] = ckpt.vocab;
  header["min_decode_len"] = ckpt.min_decode_len;
  header["max_decode_len"] = ckpt.max_decode_len;
  std::string header_text = header.dump();

  out.write(detail::kCheckpointMagic, 8);
  detail::write_pod<uint32_t>(out, static_cast<uint32_t>(sizeof(S)));
  detail::write_pod<uint64_t>(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  auto named = ckpt.params.named_params();
  detail::write_pod<uint64_t>(out, named.size());
  for (const auto& [name, tensor] : named) {
    detail::write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<uint32_t>(out, static_cast<uint32_t>(tensor->shape().size()));
    for (int dim : tensor->shape()) detail::write_pod<uint32_t>(out, static_cast<uint32_t>(dim));
    detail::write_pod<uint64_t>(out, tensor->size());
    out.write(reinterpret_cast<const char*>(tensor->values().data()),
              static_cast<std::streamsize>(tensor->size() * sizeof(S)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(detail::kCheckpointMagic, 8))
    throw IoError("not a checkpoint file: " + path);
  uint32_t scalar = detail::read_pod<uint32_t>(in);
  if (scalar != sizeof(S))
    throw IoError("checkpoint scalar width " + std::to_string(scalar) + " does not match " +
                  std::to_string(sizeof(S)));

  uint64_t header_len = detail::read_pod<uint64_t>(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("checkpoint truncated");
  nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
  if (header.is_discarded()) throw IoError("corrupt checkpoint header");

  Checkpoint<S> ckpt;
  ckpt.config = model_config_from_json(header.at("model"));
  ckpt.vocab = header.at("vocab").get<std::vector<std::string>>();
  ckpt.min_decode_len = header.value("min_decode_len", 1);
  ckpt.max_decode_len = header.value("max_decode_len", 64);

  Rng scratch(0);
  ckpt.params = GraformerParams<S>::init(ckpt.config, scratch);
  auto named = ckpt.params.named_params();
  uint64_t count = detail::read_pod<uint64_t>(in);
  if (count != named.size())
    throw IoError("checkpoint tensor count mismatch: file has " + std::to_string(count) +
                  ", model needs " + std::to_string(named.size()));
  for (auto& [name, tensor] : named) {
    uint32_t name_len = detail::read_pod<uint32_t>(in);
    std::string file_name(name_len, '\0');
    in.read(file_name.data(), name_len);
    if (!in || file_name != name)
      throw IoError("checkpoint tensor order mismatch at '" + name + "'");
    uint32_t rank = detail::read_pod<uint32_t>(in);
    std::vector<int> dims(rank);
    for (auto& dim : dims) dim = static_cast<int>(detail::read_pod<uint32_t>(in));
    if (dims != tensor->shape()) throw IoError("checkpoint shape mismatch at '" + name + "'");
    uint64_t numel = detail::read_pod<uint64_t>(in);
    if (numel != tensor->size()) throw IoError("checkpoint size mismatch at '" + name + "'");
    in.read(reinterpret_cast<char*>(tensor->mutable_values().data()),
            static_cast<std::streamsize>(numel * sizeof(S)));
    if (!in) throw IoError("checkpoint truncated");
  }
  return ckpt;
}

}  // namespace graformer
