#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "graformer/graph.hpp"
#include "graformer/vocab.hpp"

namespace graformer {

// ---- tokenizers ----

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(const std::string& text) const = 0;
  virtual std::string detokenize(const std::vector<std::string>& symbols) const = 0;
};

class WhitespaceTokenizer : public Tokenizer {
 public:
  std::vector<std::string> tokenize(const std::string& text) const override;
  std::string detokenize(const std::vector<std::string>& symbols) const override;
};

// Applies a pretrained byte-pair encoding. Words are split into UTF-8
// characters with "</w>" appended to the last one, then merged greedily by
// merge priority. The merges file has one "left right" pair per line;
// lines starting with "#version" are skipped.
class BpeTokenizer : public Tokenizer {
 public:
  explicit BpeTokenizer(std::vector<std::pair<std::string, std::string>> merges);
  static BpeTokenizer load(const std::string& merges_path);

  std::vector<std::string> tokenize(const std::string& text) const override;
  std::string detokenize(const std::vector<std::string>& symbols) const override;

 private:
  std::map<std::pair<std::string, std::string>, int> merge_rank_;
};

std::vector<int> encode_text(const std::string& text, const Tokenizer& tok,
                             const Vocabulary& vocab);
std::string decode_ids(const std::vector<int>& ids, const Tokenizer& tok,
                       const Vocabulary& vocab);

// One token per line; specials are implicit and must not appear in the file.
Vocabulary load_vocabulary(const std::string& path);
void save_vocabulary(const Vocabulary& vocab, const std::string& path);

// ---- dataset records ----

struct DatasetRecord {
  std::vector<std::string> entities;
  std::map<int, std::string> types;  // entity index -> type label
  struct Fact {
    int subject;
    std::string relation;
    int object;
  };
  std::vector<Fact> facts;
  std::string title;  // empty when absent
  std::string text;   // target; may be empty for generation-only inputs
};

// JSON lines, one record per line, UTF-8. Field names match DatasetRecord;
// facts are [subject_index, relation, object_index] triples and types is an
// object keyed by the entity index as a string.
DatasetRecord record_from_json_line(const std::string& line);
std::vector<DatasetRecord> read_jsonl(const std::string& path, bool strict);

struct IngestOptions {
  bool tag_entities = true;  // prepend an <E> token node to every entity cluster
  bool link_title = true;    // title2txt / txt2title arcs when a title exists
  bool add_types = true;     // has-type arcs, one node set per distinct type label
  bool lowercase = true;
  bool strict = true;        // malformed record: throw (true) or skip with a log line
  bool require_text = true;  // train/val records need nonempty text
};

// Knowledge graph for one record: entity vertices in record order, then the
// title vertex, then type vertices in first-use order. Relation symbols are
// stored tagged ("<R>" + label) so they occupy their own vocabulary entries.
KnowledgeGraph record_to_kg(const DatasetRecord& record, const IngestOptions& options);

struct IngestedInstance {
  IncidenceGraph graph;
  std::vector<int> node_label_ids;  // one vocabulary id per graph node
  std::vector<int> target_ids;      // no BOS/EOS
  std::string target_text;          // preprocessed target, for metrics
};

// Scans records and returns a deterministic vocabulary: specials, then all
// node-label and target symbols by descending frequency (ties lexicographic).
Vocabulary build_vocabulary(const std::vector<DatasetRecord>& records, const Tokenizer& tok,
                            const IngestOptions& options);

IngestedInstance ingest_record(const DatasetRecord& record, const Tokenizer& tok,
                               const Vocabulary& vocab, const IngestOptions& options);

// Order-preserving; a malformed record aborts (strict) or is skipped with a
// log line on stderr.
std::vector<IngestedInstance> ingest(const std::vector<DatasetRecord>& records,
                                     const Tokenizer& tok, const Vocabulary& vocab,
                                     const IngestOptions& options);

// ---- graph-property test splits ----

enum class GraphProperty { kAvgComponentSizeEntities, kLargestDiameter };

// Bin index per graph: x < t[0], t[0] <= x < t[1], ..., x >= t[last].
// Thresholds must be strictly ascending; bins partition the input.
std::vector<int> split_by_graph_property(const std::vector<IncidenceGraph>& graphs,
                                         GraphProperty property,
                                         const std::vector<double>& thresholds);

// ---- dataset statistics ----

struct DatasetStats {
  size_t instances = 0;
  size_t relation_types = 0;
  double avg_entities = 0.0;
  double pct_connected = 0.0;
  double avg_components = 0.0;
  double avg_component_size_entities = 0.0;
  double avg_token_nodes = 0.0;
  double avg_text_tokens = 0.0;
  double pct_text_tokens_in_graph = 0.0;
  double pct_graph_tokens_in_text = 0.0;
};

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records, const Tokenizer& tok,
                           const IngestOptions& options);

// key=value lines, deterministic formatting.
std::string stats_report(const DatasetStats& stats);

}  // namespace graformer
