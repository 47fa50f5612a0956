#include "graformer/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "graformer/errors.hpp"
#include "graformer/metrics.hpp"

namespace graformer {

// ---- tokenizers ----

std::vector<std::string> WhitespaceTokenizer::tokenize(const std::string& text) const {
  return split_whitespace(text);
}

std::string WhitespaceTokenizer::detokenize(const std::vector<std::string>& symbols) const {
  std::string out;
  for (size_t i = 0; i < symbols.size(); ++i) {
    if (i) out += ' ';
    out += symbols[i];
  }
  return out;
}

BpeTokenizer::BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges) {
  for (size_t i = 0; i < merges.size(); ++i)
    merge_rank_.emplace(std::move(merges[i]), static_cast<int>(i));
}

BpeTokenizer BpeTokenizer::load(const std::string& merges_path) {
  std::ifstream in(merges_path);
  if (!in) throw IoError("cannot open merges file: " + merges_path);
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("#version", 0) == 0) continue;
    std::istringstream parts(line);
    std::string left, right;
    if (parts >> left >> right) merges.emplace_back(left, right);
  }
  return BpeTokenizer(std::move(merges));
}

namespace {

constexpr const char* kWordEnd = "</w>";

std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> chars;
  for (size_t i = 0; i < word.size();) {
    size_t len = 1;
    unsigned char c = static_cast<unsigned char>(word[i]);
    if ((c >> 5) == 0x6)
      len = 2;
    else if ((c >> 4) == 0xE)
      len = 3;
    else if ((c >> 3) == 0x1E)
      len = 4;
    len = std::min(len, word.size() - i);
    chars.push_back(word.substr(i, len));
    i += len;
  }
  return chars;
}

}  // namespace

std::vector<std::string> BpeTokenizer::tokenize(const std::string& text) const {
  std::vector<std::string> out;
  for (const std::string& word : split_whitespace(text)) {
    std::vector<std::string> symbols = utf8_chars(word);
    if (symbols.empty()) continue;
    symbols.back() += kWordEnd;
    while (symbols.size() > 1) {
      int best_rank = -1;
      size_t best_at = 0;
      for (size_t i = 0; i + 1 < symbols.size(); ++i) {
        auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
        if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
          best_rank = it->second;
          best_at = i;
        }
      }
      if (best_rank < 0) break;
      symbols[best_at] += symbols[best_at + 1];
      symbols.erase(symbols.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
    }
    out.insert(out.end(), symbols.begin(), symbols.end());
  }
  return out;
}

std::string BpeTokenizer::detokenize(const std::vector<std::string>& symbols) const {
  std::string joined;
  for (const auto& s : symbols) joined += s;
  std::string out;
  size_t at = 0;
  const std::string marker = kWordEnd;
  while (at < joined.size()) {
    size_t end = joined.find(marker, at);
    if (end == std::string::npos) {
      out += joined.substr(at);
      break;
    }
    out += joined.substr(at, end - at);
    at = end + marker.size();
    if (at < joined.size()) out += ' ';
  }
  return out;
}

std::vector<int> encode_text(const std::string& text, const Tokenizer& tok,
                             const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& symbol : tok.tokenize(text)) ids.push_back(vocab.id_of(symbol));
  return ids;
}

std::string decode_ids(const std::vector<int>& ids, const Tokenizer& tok,
                       const Vocabulary& vocab) {
  std::vector<std::string> symbols;
  for (int id : ids) {
    if (id == SpecialTokens::kPad || id == SpecialTokens::kBos || id == SpecialTokens::kEos)
      continue;
    symbols.push_back(vocab.token(id));
  }
  return tok.detokenize(symbols);
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocab.add(line);
  }
  return vocab;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open vocabulary file for writing: " + path);
  const auto& tokens = vocab.tokens();
  for (size_t i = SpecialTokens::kCount; i < tokens.size(); ++i) out << tokens[i] << "\n";
  if (!out) throw IoError("vocabulary write failed: " + path);
}

// ---- dataset records ----

DatasetRecord record_from_json_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) throw IoError("malformed JSON record");
  DatasetRecord rec;
  if (!j.contains("entities") || !j["entities"].is_array())
    throw IoError("record is missing the 'entities' array");
  rec.entities = j["entities"].get<std::vector<std::string>>();
  if (j.contains("types")) {
    for (const auto& [key, value] : j["types"].items()) {
      int index = -1;
      try {
        index = std::stoi(key);
      } catch (const std::exception&) {
        throw IoError("type key '" + key + "' is not an entity index");
      }
      if (index < 0 || index >= static_cast<int>(rec.entities.size()))
        throw IoError("type key '" + key + "' is out of entity range");
      rec.types[index] = value.get<std::string>();
    }
  }
  if (j.contains("facts")) {
    for (const auto& fact : j["facts"]) {
      if (!fact.is_array() || fact.size() != 3)
        throw IoError("each fact must be [subject_index, relation, object_index]");
      DatasetRecord::Fact f{fact[0].get<int>(), fact[1].get<std::string>(), fact[2].get<int>()};
      if (f.subject < 0 || f.subject >= static_cast<int>(rec.entities.size()) || f.object < 0 ||
          f.object >= static_cast<int>(rec.entities.size()))
        throw IoError("fact index out of entity range");
      rec.facts.push_back(std::move(f));
    }
  }
  rec.title = j.value("title", std::string{});
  rec.text = j.value("text", std::string{});
  return rec;
}

std::vector<DatasetRecord> read_jsonl(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(record_from_json_line(line));
    } catch (const IoError& e) {
      if (strict) throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
      std::cerr << "skipping " << path << ":" << line_no << ": " << e.what() << "\n";
    }
  }
  return records;
}

namespace {

std::string lowercase(const std::string& text) {
  std::string out = text;
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace

KnowledgeGraph record_to_kg(const DatasetRecord& record, const IngestOptions& options) {
  KnowledgeGraph kg;
  auto prep = [&](const std::string& s) { return options.lowercase ? lowercase(s) : s; };

  std::vector<int> entity_vertex;
  for (const auto& name : record.entities) entity_vertex.push_back(kg.add_vertex(prep(name)));

  for (const auto& fact : record.facts) {
    require(fact.subject >= 0 && fact.subject < static_cast<int>(entity_vertex.size()) &&
                fact.object >= 0 && fact.object < static_cast<int>(entity_vertex.size()),
            "fact index out of entity range");
    kg.add_arc(entity_vertex[fact.subject], entity_vertex[fact.object],
               kRelationTagText + prep(fact.relation));
  }

  if (options.link_title && !record.title.empty()) {
    int title_vertex = kg.add_vertex(prep(record.title));
    for (int e : entity_vertex) {
      kg.add_arc(title_vertex, e, std::string(kRelationTagText) + "title2txt");
      kg.add_arc(e, title_vertex, std::string(kRelationTagText) + "txt2title");
    }
  }

  if (options.add_types && !record.types.empty()) {
    std::map<std::string, int> type_vertex;  // one node set per distinct type label
    for (const auto& [entity_index, label] : record.types) {
      std::string prepped = prep(label);
      auto it = type_vertex.find(prepped);
      if (it == type_vertex.end())
        it = type_vertex.emplace(prepped, kg.add_vertex(prepped)).first;
      kg.add_arc(entity_vertex[entity_index], it->second,
                 std::string(kRelationTagText) + "has-type");
    }
  }
  return kg;
}

namespace {

TokenizerFn entity_tokenizer(const Tokenizer& tok, const IngestOptions& options) {
  return [&tok, tag = options.tag_entities](const std::string& name) {
    std::vector<std::string> tokens;
    if (tag) tokens.push_back(kEntityTagText);
    auto pieces = tok.tokenize(name);
    tokens.insert(tokens.end(), pieces.begin(), pieces.end());
    return tokens;
  };
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<DatasetRecord>& records, const Tokenizer& tok,
                            const IngestOptions& options) {
  std::map<std::string, size_t> freq;
  for (const auto& record : records) {
    KnowledgeGraph kg = record_to_kg(record, options);
    for (const auto& [id, name] : kg.vertex_labels)
      for (const auto& symbol : tok.tokenize(name)) ++freq[symbol];
    for (const auto& [id, relation] : kg.arc_labels) ++freq[relation];
    std::string text = options.lowercase ? lowercase(record.text) : record.text;
    for (const auto& symbol : tok.tokenize(text)) ++freq[symbol];
  }
  std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [symbol, count] : ranked) vocab.add(symbol);
  return vocab;
}

IngestedInstance ingest_record(const DatasetRecord& record, const Tokenizer& tok,
                               const Vocabulary& vocab, const IngestOptions& options) {
  if (options.require_text && record.text.empty())
    throw IoError("record has no target text");

  KnowledgeGraph kg = record_to_kg(record, options);
  TokenGraph tg = build_token_graph(kg, entity_tokenizer(tok, options));

  IngestedInstance inst;
  inst.graph = build_incidence_graph(tg);
  inst.node_label_ids.reserve(inst.graph.nodes.size());
  for (const auto& node : inst.graph.nodes) inst.node_label_ids.push_back(vocab.id_of(node.label));

  inst.target_text = options.lowercase ? lowercase(record.text) : record.text;
  for (const auto& symbol : tok.tokenize(inst.target_text))
    inst.target_ids.push_back(vocab.id_of(symbol));
  return inst;
}

std::vector<IngestedInstance> ingest(const std::vector<DatasetRecord>& records,
                                     const Tokenizer& tok, const Vocabulary& vocab,
                                     const IngestOptions& options) {
  std::vector<IngestedInstance> out;
  out.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(ingest_record(records[i], tok, vocab, options));
    } catch (const std::exception& e) {
      if (options.strict)
        throw IoError("record " + std::to_string(i) + ": " + e.what());
      std::cerr << "skipping record " << i << ": " << e.what() << "\n";
    }
  }
  return out;
}

// ---- graph-property splits ----

std::vector<int> split_by_graph_property(const std::vector<IncidenceGraph>& graphs,
                                         GraphProperty property,
                                         const std::vector<double>& thresholds) {
  require(!thresholds.empty(), "split needs at least one threshold");
  for (size_t i = 1; i < thresholds.size(); ++i)
    require(thresholds[i - 1] < thresholds[i], "thresholds must be strictly ascending");

  std::vector<int> bins;
  bins.reserve(graphs.size());
  for (const auto& g : graphs) {
    ComponentStats stats = component_stats(g);
    double value = property == GraphProperty::kAvgComponentSizeEntities
                       ? stats.avg_size_entities
                       : static_cast<double>(stats.largest_diameter);
    int bin = static_cast<int>(thresholds.size());
    for (size_t t = 0; t < thresholds.size(); ++t) {
      if (value < thresholds[t]) {
        bin = static_cast<int>(t);
        break;
      }
    }
    bins.push_back(bin);
  }
  return bins;
}

// ---- dataset statistics ----

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records, const Tokenizer& tok,
                           const IngestOptions& options) {
  DatasetStats stats;
  stats.instances = records.size();
  if (records.empty()) return stats;

  std::set<std::string> relations;
  size_t entity_sum = 0, connected = 0, token_node_sum = 0, text_token_sum = 0;
  double component_sum = 0.0, component_size_sum = 0.0;
  size_t text_in_graph = 0, graph_in_text = 0;

  for (const auto& record : records) {
    for (const auto& fact : record.facts) relations.insert(fact.relation);
    entity_sum += record.entities.size();

    KnowledgeGraph kg = record_to_kg(record, options);
    TokenGraph tg = build_token_graph(kg, entity_tokenizer(tok, options));
    IncidenceGraph g = build_incidence_graph(tg);
    ComponentStats comp = component_stats(g);
    if (comp.component_count <= 1) ++connected;
    component_sum += comp.component_count;
    component_size_sum += comp.avg_size_entities;

    std::set<std::string> graph_tokens;
    size_t token_nodes = 0;
    for (const auto& node : g.nodes) {
      if (node.kind != IncidenceGraph::NodeKind::Token) continue;
      ++token_nodes;
      graph_tokens.insert(node.label);
    }
    token_node_sum += token_nodes;

    std::string text = options.lowercase ? lowercase(record.text) : record.text;
    auto text_tokens = tok.tokenize(text);
    text_token_sum += text_tokens.size();
    std::set<std::string> text_set(text_tokens.begin(), text_tokens.end());
    for (const auto& t : text_tokens)
      if (graph_tokens.count(t)) ++text_in_graph;
    for (const auto& node : g.nodes)
      if (node.kind == IncidenceGraph::NodeKind::Token && text_set.count(node.label))
        ++graph_in_text;
  }

  double n = static_cast<double>(records.size());
  stats.relation_types = relations.size();
  stats.avg_entities = static_cast<double>(entity_sum) / n;
  stats.pct_connected = 100.0 * static_cast<double>(connected) / n;
  stats.avg_components = component_sum / n;
  stats.avg_component_size_entities = component_size_sum / n;
  stats.avg_token_nodes = static_cast<double>(token_node_sum) / n;
  stats.avg_text_tokens = static_cast<double>(text_token_sum) / n;
  stats.pct_text_tokens_in_graph =
      text_token_sum == 0 ? 0.0 : 100.0 * static_cast<double>(text_in_graph) / text_token_sum;
  stats.pct_graph_tokens_in_text =
      token_node_sum == 0 ? 0.0 : 100.0 * static_cast<double>(graph_in_text) / token_node_sum;
  return stats;
}

std::string stats_report(const DatasetStats& stats) {
  char buf[64];
  std::ostringstream out;
  auto line = [&](const char* key, double value) {
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    out << key << "=" << buf << "\n";
  };
  out << "instances=" << stats.instances << "\n";
  out << "relation_types=" << stats.relation_types << "\n";
  line("avg_entities", stats.avg_entities);
  line("pct_connected", stats.pct_connected);
  line("avg_components", stats.avg_components);
  line("avg_component_size_entities", stats.avg_component_size_entities);
  line("avg_token_nodes", stats.avg_token_nodes);
  line("avg_text_tokens", stats.avg_text_tokens);
  line("pct_text_tokens_in_graph", stats.pct_text_tokens_in_graph);
  line("pct_graph_tokens_in_text", stats.pct_graph_tokens_in_text);
  return out.str();
}

}  // namespace graformer
