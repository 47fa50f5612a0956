// Command-line shell: train, generate, score, analyze, stats.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graformer/analyze.hpp"
#include "graformer/checkpoint.hpp"
#include "graformer/data.hpp"
#include "graformer/decoding.hpp"
#include "graformer/errors.hpp"
#include "graformer/metrics.hpp"
#include "graformer/training.hpp"

namespace gf = graformer;

namespace {

struct TokenizerSpec {
  std::string type = "whitespace";  // or "bpe"
  std::string vocab_path;
  std::string merges_path;
};

std::unique_ptr<gf::Tokenizer> make_tokenizer(const TokenizerSpec& spec) {
  if (spec.type == "whitespace") return std::make_unique<gf::WhitespaceTokenizer>();
  if (spec.type == "bpe") {
    if (spec.merges_path.empty())
      throw gf::IoError("bpe tokenizer needs a merges file");
    return std::make_unique<gf::BpeTokenizer>(gf::BpeTokenizer::load(spec.merges_path));
  }
  throw gf::ContractViolation("unknown tokenizer type: " + spec.type);
}

struct RunConfig {
  gf::ModelConfig model;
  gf::TrainConfig train;
  gf::DecodeConfig decode;
  TokenizerSpec tokenizer;
  gf::IngestOptions ingest;
};

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gf::IoError("cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw gf::IoError("config is not valid JSON: " + path);

  RunConfig cfg;
  cfg.model = gf::model_config_from_json(j);
  cfg.train.epochs = j.value("epochs", cfg.train.epochs);
  cfg.train.batch_size = j.value("batch_size", cfg.train.batch_size);
  cfg.train.gradient_accumulation = j.value("gradient_accumulation", cfg.train.gradient_accumulation);
  cfg.train.gradient_clipping = j.value("gradient_clipping", cfg.train.gradient_clipping);
  cfg.train.label_smoothing = j.value("label_smoothing", cfg.train.label_smoothing);
  cfg.train.l2_regularizer = j.value("l2_regularizer", cfg.train.l2_regularizer);
  cfg.train.seed = j.value("seed", cfg.train.seed);
  cfg.decode.beams = j.value("beams", cfg.decode.beams);
  cfg.decode.length_penalty_alpha = j.value("length_penalty", cfg.decode.length_penalty_alpha);
  if (j.contains("tokenizer")) {
    const auto& t = j["tokenizer"];
    cfg.tokenizer.type = t.value("type", cfg.tokenizer.type);
    cfg.tokenizer.vocab_path = t.value("vocab", cfg.tokenizer.vocab_path);
    cfg.tokenizer.merges_path = t.value("merges", cfg.tokenizer.merges_path);
  }
  if (j.contains("ingest")) {
    const auto& g = j["ingest"];
    cfg.ingest.tag_entities = g.value("tag_entities", cfg.ingest.tag_entities);
    cfg.ingest.link_title = g.value("link_title", cfg.ingest.link_title);
    cfg.ingest.add_types = g.value("add_types", cfg.ingest.add_types);
    cfg.ingest.lowercase = g.value("lowercase", cfg.ingest.lowercase);
    cfg.ingest.strict = g.value("strict", cfg.ingest.strict);
  }
  return cfg;
}

std::vector<gf::TrainInstance> to_train_instances(const std::vector<gf::IngestedInstance>& ingested,
                                                  const gf::ModelConfig& model) {
  std::vector<gf::TrainInstance> out;
  out.reserve(ingested.size());
  for (const auto& inst : ingested) {
    gf::TrainInstance t;
    t.node_labels = inst.node_label_ids;
    t.relpos = gf::build_r_matrix(inst.graph, model.max_diameter, model.graph_range,
                                  model.same_range);
    t.target_ids = inst.target_ids;
    t.target_text = inst.target_text;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> greedy_decode_all(const std::vector<gf::TrainInstance>& instances,
                                           const gf::GraformerParams<float>& params,
                                           const gf::ModelConfig& model,
                                           const gf::DecodeConfig& decode,
                                           const gf::Tokenizer& tok, const gf::Vocabulary& vocab) {
  std::vector<std::string> hyps;
  hyps.reserve(instances.size());
  gf::DecodeConfig greedy_cfg = decode;
  greedy_cfg.beams = 1;
  for (const auto& inst : instances) {
    gf::ModelScorer<float> scorer(params, model, inst.node_labels, inst.relpos);
    auto ids = gf::greedy_decode([&scorer](const std::vector<int>& prefix) { return scorer(prefix); },
                                 greedy_cfg);
    hyps.push_back(gf::decode_ids(ids, tok, vocab));
  }
  return hyps;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& output_dir) {
  RunConfig cfg = load_run_config(config_path);
  auto tokenizer = make_tokenizer(cfg.tokenizer);

  auto train_records = gf::read_jsonl(data_dir + "/train.jsonl", cfg.ingest.strict);
  auto val_records = gf::read_jsonl(data_dir + "/val.jsonl", cfg.ingest.strict);
  if (train_records.empty()) throw gf::IoError("no usable train records");

  gf::Vocabulary vocab = cfg.tokenizer.vocab_path.empty()
                             ? gf::build_vocabulary(train_records, *tokenizer, cfg.ingest)
                             : gf::load_vocabulary(cfg.tokenizer.vocab_path);
  cfg.model.vocab_size = vocab.size();
  cfg.model.validate();
  cfg.train.validate();

  auto train_instances =
      to_train_instances(gf::ingest(train_records, *tokenizer, vocab, cfg.ingest), cfg.model);
  auto val_instances =
      to_train_instances(gf::ingest(val_records, *tokenizer, vocab, cfg.ingest), cfg.model);

  size_t min_len = train_instances[0].target_ids.size(), max_len = min_len;
  for (const auto& inst : train_instances) {
    min_len = std::min(min_len, inst.target_ids.size());
    max_len = std::max(max_len, inst.target_ids.size());
  }
  cfg.decode.min_len = static_cast<int>(min_len);
  cfg.decode.max_len = static_cast<int>(max_len);

  std::filesystem::create_directories(output_dir);
  gf::save_vocabulary(vocab, output_dir + "/vocab.txt");

  gf::Rng init_rng(cfg.train.seed);
  auto params = gf::GraformerParams<float>::init(cfg.model, init_rng);
  gf::Trainer<float> trainer(params, cfg.model, cfg.train);
  auto curriculum = gf::CurriculumDataset::make(train_instances, cfg.train.seed);

  std::vector<std::vector<std::string>> per_epoch_hyps;
  std::vector<std::vector<std::string>> references;
  for (const auto& inst : val_instances) references.push_back({inst.target_text});

  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    auto metrics = trainer.train_epoch(train_instances, curriculum, epoch);

    double val_bleu = 0.0;
    if (!val_instances.empty()) {
      per_epoch_hyps.push_back(
          greedy_decode_all(val_instances, params, cfg.model, cfg.decode, *tokenizer, vocab));
      val_bleu = gf::corpus_bleu(per_epoch_hyps.back(), references);
    }

    gf::Checkpoint<float> ckpt{cfg.model, vocab.tokens(), cfg.decode.min_len, cfg.decode.max_len,
                               params};
    gf::save_checkpoint(ckpt, output_dir + "/checkpoint_epoch_" + std::to_string(epoch + 1) +
                                  ".bin");
    std::printf("epoch=%d loss=%.6f val_bleu=%.4f wall_time_s=%.3f\n", epoch + 1,
                metrics.avg_token_loss, val_bleu, metrics.wall_seconds);
    std::fflush(stdout);
  }

  if (!per_epoch_hyps.empty()) {
    auto selection = gf::select_model(per_epoch_hyps, references);
    std::filesystem::copy_file(
        output_dir + "/checkpoint_epoch_" + std::to_string(selection.best_index + 1) + ".bin",
        output_dir + "/best.bin", std::filesystem::copy_options::overwrite_existing);
    std::printf("best_epoch=%zu best_val_bleu=%.4f\n", selection.best_index + 1,
                selection.best_bleu);
  }
  return 0;
}

int run_generate(const std::string& checkpoint_path, const std::string& input_path,
                 const std::string& output_path, int beams, double length_penalty, int min_len,
                 int max_len, const std::string& merges_path, const gf::IngestOptions& ingest) {
  auto ckpt = gf::load_checkpoint<float>(checkpoint_path);
  gf::Vocabulary vocab = gf::Vocabulary::from_tokens(ckpt.vocab);

  TokenizerSpec spec;
  if (!merges_path.empty()) {
    spec.type = "bpe";
    spec.merges_path = merges_path;
  }
  auto tokenizer = make_tokenizer(spec);

  gf::DecodeConfig decode;
  decode.beams = beams;
  decode.length_penalty_alpha = length_penalty;
  decode.min_len = min_len >= 0 ? min_len : ckpt.min_decode_len;
  decode.max_len = max_len >= 0 ? max_len : ckpt.max_decode_len;
  decode.validate();

  gf::IngestOptions options = ingest;
  options.require_text = false;
  options.strict = true;

  auto records = gf::read_jsonl(input_path, options.strict);
  std::ofstream file_out;
  std::ostream* out = &std::cout;
  if (!output_path.empty()) {
    file_out.open(output_path);
    if (!file_out) throw gf::IoError("cannot open output: " + output_path);
    out = &file_out;
  }

  for (const auto& record : records) {
    auto inst = gf::ingest_record(record, *tokenizer, vocab, options);
    gf::RelPosMatrix r = gf::build_r_matrix(inst.graph, ckpt.config.max_diameter,
                                            ckpt.config.graph_range, ckpt.config.same_range);
    gf::ModelScorer<float> scorer(ckpt.params, ckpt.config, inst.node_label_ids, r);
    auto step = [&scorer](const std::vector<int>& prefix) { return scorer(prefix); };
    std::vector<int> ids = decode.beams == 1 ? gf::greedy_decode(step, decode)
                                             : gf::beam_search(step, decode);
    (*out) << gf::decode_ids(ids, *tokenizer, vocab) << "\n";
  }
  return 0;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gf::IoError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int run_score(const std::string& hyp_path, const std::vector<std::string>& ref_paths) {
  auto hyps = read_lines(hyp_path);
  std::vector<std::vector<std::string>> refs(hyps.size());
  for (const auto& path : ref_paths) {
    auto lines = read_lines(path);
    if (lines.size() != hyps.size())
      throw gf::ContractViolation("reference file " + path + " has " +
                                  std::to_string(lines.size()) + " lines, hypotheses have " +
                                  std::to_string(hyps.size()));
    for (size_t i = 0; i < lines.size(); ++i) refs[i].push_back(lines[i]);
  }
  std::printf("bleu=%.4f\n", gf::corpus_bleu(hyps, refs));
  std::printf("chrf_pp=%.4f\n", gf::chrf_pp(hyps, refs));
  return 0;
}

int run_analyze(const std::string& checkpoint_path, const std::string& gamma_path,
                bool full_gamma) {
  auto ckpt = gf::load_checkpoint<float>(checkpoint_path);
  std::string csv = gf::dump_attention_bias(ckpt.params, ckpt.config, full_gamma);
  if (gamma_path == "-") {
    std::cout << csv;
  } else {
    std::ofstream out(gamma_path);
    if (!out) throw gf::IoError("cannot open output: " + gamma_path);
    out << csv;
    if (!out) throw gf::IoError("write failed: " + gamma_path);
  }
  return 0;
}

int run_stats(const std::string& input_path, const gf::IngestOptions& options) {
  auto records = gf::read_jsonl(input_path, options.strict);
  gf::WhitespaceTokenizer tokenizer;
  std::cout << gf::stats_report(gf::dataset_stats(records, tokenizer, options));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-to-text transformer with shortest-path relative position attention"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train a model from JSONL data");
  std::string config_path, data_dir, output_dir = "run";
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--data", data_dir, "directory with train.jsonl and val.jsonl")->required();
  train->add_option("--output", output_dir, "output directory for checkpoints");

  auto* generate = app.add_subcommand("generate", "Decode texts for JSONL graphs");
  std::string checkpoint_path, input_path, output_path, merges_path;
  int beams = 2, min_len = -1, max_len = -1;
  double length_penalty = 5.0;
  gf::IngestOptions gen_ingest;
  generate->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  generate->add_option("--input", input_path, "JSONL graphs")->required();
  generate->add_option("--output", output_path, "output text file (default stdout)");
  generate->add_option("--beams", beams, "beam count (1 = greedy)");
  generate->add_option("--length-penalty", length_penalty, "length penalty alpha");
  generate->add_option("--min-len", min_len, "override minimum decode length");
  generate->add_option("--max-len", max_len, "override maximum decode length");
  generate->add_option("--merges", merges_path, "BPE merges file (whitespace tokenizer if absent)");
  generate->add_flag("--no-tag-entities", [&gen_ingest](int64_t) { gen_ingest.tag_entities = false; },
                     "do not prepend <E> nodes");
  generate->add_flag("--no-link-title", [&gen_ingest](int64_t) { gen_ingest.link_title = false; },
                     "do not add title2txt/txt2title arcs");
  generate->add_flag("--no-types", [&gen_ingest](int64_t) { gen_ingest.add_types = false; },
                     "ignore type information");

  auto* score = app.add_subcommand("score", "BLEU and chrF++ for a hypothesis file");
  std::string hyp_path;
  std::vector<std::string> ref_paths;
  score->add_option("--hyp", hyp_path, "hypothesis file, one per line")->required();
  score->add_option("--ref", ref_paths, "reference file(s), aligned by line")->required();

  auto* analyze = app.add_subcommand("analyze", "Dump learned attention bias tables");
  std::string analyze_checkpoint, gamma_path;
  bool full_gamma = false;
  analyze->add_option("--checkpoint", analyze_checkpoint, "model checkpoint")->required();
  analyze->add_option("--dump-gamma", gamma_path, "output CSV path, '-' for stdout")->required();
  analyze->add_flag("--full-gamma", full_gamma, "include same-cluster rows");

  auto* stats = app.add_subcommand("stats", "Dataset statistics for a JSONL file");
  std::string stats_input;
  gf::IngestOptions stats_options;
  stats_options.tag_entities = false;
  stats_options.link_title = false;
  stats_options.add_types = false;
  stats_options.require_text = false;
  stats_options.strict = false;
  stats->add_option("--input", stats_input, "JSONL dataset")->required();
  stats->add_flag("--tag-entities", [&stats_options](int64_t) { stats_options.tag_entities = true; },
                  "count <E> tag nodes");
  stats->add_flag("--link-title", [&stats_options](int64_t) { stats_options.link_title = true; },
                  "add title arcs before measuring");
  stats->add_flag("--types", [&stats_options](int64_t) { stats_options.add_types = true; },
                  "add has-type arcs before measuring");
  stats->add_flag("--strict", [&stats_options](int64_t) { stats_options.strict = true; },
                  "abort on malformed records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(config_path, data_dir, output_dir);
    if (generate->parsed())
      return run_generate(checkpoint_path, input_path, output_path, beams, length_penalty,
                          min_len, max_len, merges_path, gen_ingest);
    if (score->parsed()) return run_score(hyp_path, ref_paths);
    if (analyze->parsed()) return run_analyze(analyze_checkpoint, gamma_path, full_gamma);
    if (stats->parsed()) return run_stats(stats_input, stats_options);
  } catch (const gf::ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const gf::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
