#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vut/corpus.hpp"
#include "vut/errors.hpp"
#include "vut/render.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace vut {

namespace {

json node_to_json(const ViewNode& n) {
  json j;
  j["type"] = n.type_id;
  j["bbox"] = {n.bbox.top, n.bbox.left, n.bbox.right, n.bbox.bottom};
  j["clickable"] = n.clickable;
  j["text"] = n.text;
  json kids = json::array();
  for (const auto& c : n.children) kids.push_back(node_to_json(c));
  j["children"] = std::move(kids);
  return j;
}

ViewNode node_from_json(const json& j) {
  ViewNode n;
  n.type_id = j.at("type").get<int>();
  auto bb = j.at("bbox");
  if (!bb.is_array() || bb.size() != 4) throw DataError("bbox must have four coordinates");
  n.bbox = Box{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
  n.clickable = j.at("clickable").get<bool>();
  n.text = j.at("text").get<std::vector<std::string>>();
  for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
  return n;
}

json config_to_json(const CorpusConfig& c) {
  json j;
  j["screens"] = c.screens;
  j["raster_h"] = c.raster_h;
  j["raster_w"] = c.raster_w;
  j["n_max"] = c.n_max;
  j["max_depth"] = c.max_depth;
  j["tappability_noise"] = c.tappability_noise;
  j["val_frac"] = c.val_frac;
  j["test_frac"] = c.test_frac;
  j["commands_per_screen"] = c.commands_per_screen;
  j["leaf_weights"] = c.leaf_weights;
  return j;
}

CorpusConfig config_from_json(const json& j) {
  CorpusConfig c;
  c.screens = j.at("screens").get<int>();
  c.raster_h = j.at("raster_h").get<int>();
  c.raster_w = j.at("raster_w").get<int>();
  c.n_max = j.at("n_max").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.tappability_noise = j.at("tappability_noise").get<double>();
  c.val_frac = j.at("val_frac").get<double>();
  c.test_frac = j.at("test_frac").get<double>();
  c.commands_per_screen = j.at("commands_per_screen").get<int>();
  c.leaf_weights = j.at("leaf_weights").get<std::vector<double>>();
  return c;
}

}  // namespace

void write_corpus(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream os(fs::path(dir) / "config.json", std::ios::trunc);
    if (!os) throw DataError("cannot write corpus config in " + dir);
    os << config_to_json(corpus.cfg).dump(2) << '\n';
  }
  corpus.vocab.save((fs::path(dir) / "vocab.txt").string());
  {
    std::ofstream os(fs::path(dir) / "types.txt", std::ios::trunc);
    for (int t = 0; t < kNumTypes; ++t) os << type_name(t) << '\n';
  }

  std::ofstream manifest(fs::path(dir) / "manifest.jsonl", std::ios::trunc);
  if (!manifest) throw DataError("cannot write manifest in " + dir);
  for (const auto& s : corpus.screens) {
    std::string raster_name = s.screen_id + ".ppm";
    write_ppm((fs::path(dir) / raster_name).string(), s.raster);

    json j;
    j["id"] = s.screen_id;
    j["raster"] = raster_name;
    j["split"] = s.split;
    j["root"] = node_to_json(s.root);
    json caps = json::object();
    for (const auto& [idx, refs] : s.captions) caps[std::to_string(idx)] = refs;
    j["captions"] = std::move(caps);
    j["summaries"] = s.summaries;
    json cmds = json::array();
    for (const auto& c : s.commands) cmds.push_back({{"phrase", c.phrase}, {"target", c.target_idx}});
    j["commands"] = std::move(cmds);
    j["tappable"] = std::vector<bool>(s.tappable.begin(), s.tappable.end());
    manifest << j.dump() << '\n';
  }
  if (!manifest) throw DataError("short write for manifest in " + dir);
}

Corpus read_corpus(const std::string& dir) {
  Corpus corpus;
  {
    std::ifstream is(fs::path(dir) / "config.json");
    if (!is) throw DataError("missing corpus config in " + dir);
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      throw DataError("malformed corpus config in " + dir + ": " + e.what());
    }
    corpus.cfg = config_from_json(j);
  }
  corpus.vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());

  std::ifstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw DataError("missing manifest in " + dir);
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    Screen s;
    try {
      s.screen_id = j.at("id").get<std::string>();
      s.split = j.at("split").get<std::string>();
      s.root = node_from_json(j.at("root"));
      s.refresh_flattened(corpus.cfg.n_max);
      for (const auto& [key, refs] : j.at("captions").items()) {
        int idx = std::stoi(key);
        if (idx < 0 || idx >= int(s.flattened.size()))
          throw DataError("caption index out of range in screen " + s.screen_id);
        s.captions[idx] = refs.get<std::vector<std::string>>();
      }
      s.summaries = j.at("summaries").get<std::vector<std::string>>();
      for (const auto& c : j.at("commands")) {
        Command cmd{c.at("phrase").get<std::string>(), c.at("target").get<int>()};
        if (cmd.target_idx < 0 || cmd.target_idx >= int(s.flattened.size()))
          throw DataError("command target out of range in screen " + s.screen_id);
        s.commands.push_back(std::move(cmd));
      }
      auto tap = j.at("tappable").get<std::vector<bool>>();
      if (tap.size() != s.flattened.size())
        throw DataError("tappability labels do not cover screen " + s.screen_id);
      s.tappable.assign(tap.begin(), tap.end());
      s.raster = read_ppm((fs::path(dir) / j.at("raster").get<std::string>()).string());
    } catch (const json::exception& e) {
      throw DataError("malformed manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    corpus.screens.push_back(std::move(s));
  }
  // Flattened pointers must reference the vector's final resting trees.
  for (auto& s : corpus.screens) s.refresh_flattened(corpus.cfg.n_max);
  return corpus;
}

}  // namespace vut
