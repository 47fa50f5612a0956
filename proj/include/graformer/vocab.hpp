#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "graformer/errors.hpp"

namespace graformer {

struct SpecialTokens {
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kEntityTag = 4;    // <E>
  static constexpr int kRelationTag = 5;  // <R>
  static constexpr int kCount = 6;
};

inline const char* kEntityTagText = "<E>";
inline const char* kRelationTagText = "<R>";

// Shared vocabulary over text tokens and relation symbols. Relation
// symbols are atomic entries of the form "<R>" + relation string, so they
// never collide with text tokens.
class Vocabulary {
 public:
  Vocabulary() {
    for (const char* tok : {"<pad>", "<bos>", "<eos>", "<unk>", "<E>", "<R>"}) add(tok);
  }

  // Rebuild from a full token list (e.g. a checkpoint header). The list
  // must start with the six special tokens.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    require(tokens.size() >= SpecialTokens::kCount &&
                std::vector<std::string>(tokens.begin(), tokens.begin() + SpecialTokens::kCount) ==
                    v.tokens_,
            "vocabulary list does not start with the special tokens");
    for (size_t i = SpecialTokens::kCount; i < tokens.size(); ++i) v.add(tokens[i]);
    return v;
  }

  int add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
  }

  int id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? SpecialTokens::kUnk : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  const std::string& token(int id) const {
    require(id >= 0 && id < size(), "token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace graformer
