#include "vut/tokenizer.hpp"

#include <cctype>
#include <fstream>

#include "vut/errors.hpp"

namespace vut {

namespace {
const char* kReserved[] = {"<pad>", "<bos>", "<eos>", "<unk>"};
bool is_punct(char c) { return c == '?' || c == '.' || c == ',' || c == '!' || c == ':' || c == ';'; }
}  // namespace

Vocabulary::Vocabulary() {
  for (const char* r : kReserved) {
    map_.emplace(r, int(tokens_.size()));
    tokens_.push_back(r);
  }
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (t.empty()) throw DataError("empty vocabulary token");
    if (!v.map_.emplace(t, int(v.tokens_.size())).second)
      throw DataError("duplicate vocabulary token: " + t);
    v.tokens_.push_back(t);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open vocabulary file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  for (int i = 0; i < 4; ++i)
    if (int(lines.size()) <= i || lines[i] != kReserved[i])
      throw DataError("vocabulary file missing reserved tokens: " + path);
  return from_tokens({lines.begin() + 4, lines.end()});
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) os << t << '\n';
}

int Vocabulary::id(const std::string& token) const {
  auto it = map_.find(token);
  return it == map_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= int(tokens_.size())) throw DataError("token id out of range");
  return tokens_[size_t(id)];
}

std::vector<std::string> Vocabulary::split(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.push_back(std::string(1, c));
    } else {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> out;
  for (const auto& t : split(text)) out.push_back(id(t));
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids, bool skip_special) const {
  std::string out;
  for (int id : ids) {
    if (skip_special && id < 4) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

}  // namespace vut
