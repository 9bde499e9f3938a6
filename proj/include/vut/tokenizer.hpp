#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace vut {

// Closed-vocabulary tokenizer: lowercase words split on whitespace, with
// sentence punctuation kept as standalone tokens. Reserved ids are fixed so
// any corpus shares the same special tokens.
class Vocabulary {
 public:
  Vocabulary();  // reserved tokens only

  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  // Builds from the non-reserved token inventory; duplicates are an error.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id(const std::string& token) const;  // kUnk when unknown
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return map_.count(token) != 0; }
  int size() const { return int(tokens_.size()); }

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids, bool skip_special = true) const;

  static std::vector<std::string> split(const std::string& text);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> map_;
};

}  // namespace vut
