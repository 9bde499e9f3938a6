#include "vut/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vut/errors.hpp"
#include "vut/render.hpp"

namespace vut {

namespace {

const char* kContentWords[] = {"ok",     "next",    "back",    "save", "cancel", "menu", "home",
                               "search", "login",   "submit",  "settings", "profile", "help",
                               "done",   "edit",    "new",     "open", "close",  "start", "stop"};

const char* kOrdinals[] = {"first",      "second",     "third",     "fourth",    "fifth",
                           "sixth",      "seventh",    "eighth",    "ninth",     "tenth",
                           "eleventh",   "twelfth",    "thirteenth", "fourteenth", "fifteenth",
                           "sixteenth",  "seventeenth", "eighteenth", "nineteenth", "twentieth"};

const char* kNumbers[] = {"zero", "one", "two",  "three", "four",   "five",  "six",
                          "seven", "eight", "nine", "ten",  "eleven", "twelve"};

// Per leaf type (button..bar): chance the widget is clickable.
const double kClickProb[] = {0.9, 0.3, 0.1, 0.6, 0.8, 0.7, 0.2, 0.6, 0.4, 0.1};

bool leaf_carries_text(int type_id) {
  return type_id == 3 || type_id == 5 || type_id == 10 || type_id == 11;
}

struct LayoutState {
  int remaining;          // node budget left
  bool truncated = false;  // ran out of budget mid-container
};

int draw_leaf_type(RngStream& rng, const CorpusConfig& cfg) {
  int leaf_count = kNumTypes - kNumContainerTypes;
  if (cfg.leaf_weights.empty()) return kNumContainerTypes + int(rng.uniform_int(uint64_t(leaf_count)));
  if (int(cfg.leaf_weights.size()) != leaf_count)
    throw DataError("leaf_weights must have one entry per leaf type");
  return kNumContainerTypes + int(rng.categorical(cfg.leaf_weights));
}

ViewNode make_leaf(RngStream& rng, const Box& box, const CorpusConfig& cfg, int forced_type) {
  ViewNode n;
  n.type_id = forced_type >= 0 ? forced_type : draw_leaf_type(rng, cfg);
  n.bbox = box;
  n.clickable = rng.uniform() < kClickProb[n.type_id - kNumContainerTypes];
  if (leaf_carries_text(n.type_id) && rng.uniform() < 0.7) {
    int words = 1 + int(rng.uniform_int(3));
    for (int i = 0; i < words; ++i)
      n.text.push_back(kContentWords[rng.uniform_int(std::size(kContentWords))]);
  }
  return n;
}

ViewNode gen_node(RngStream& rng, const Box& box, int depth, int depth_limit,
                  const CorpusConfig& cfg, LayoutState& st, bool force_container) {
  --st.remaining;
  bool room = box.width() >= 0.22 && box.height() >= 0.22;
  bool can_recurse = depth < depth_limit && st.remaining >= 3 && room;
  bool container = force_container ? true : (can_recurse && rng.uniform() < 0.35);
  if (!container || !can_recurse) return make_leaf(rng, box, cfg, -1);

  ViewNode n;
  double tsel = rng.uniform();
  n.type_id = tsel < 0.4 ? 0 : (tsel < 0.8 ? 1 : 2);
  n.bbox = box;
  n.clickable = rng.uniform() < 0.05;

  bool vertical = n.type_id != 1;  // column and list split top-to-bottom
  double extent = vertical ? box.height() : box.width();
  int want = n.type_id == 2 ? 2 + int(rng.uniform_int(4)) : 2 + int(rng.uniform_int(3));
  int fit = std::max(1, int(extent / 0.07));
  int k = std::max(1, std::min(want, fit));

  // List items share one leaf type.
  int item_type = n.type_id == 2 ? draw_leaf_type(rng, cfg) : -1;

  std::vector<double> weights(static_cast<size_t>(k));
  double total = 0;
  for (auto& w : weights) {
    w = 0.6 + rng.uniform();
    total += w;
  }
  double lo = vertical ? box.top : box.left;
  for (int i = 0; i < k && st.remaining > 0; ++i) {
    double span = extent * weights[size_t(i)] / total;
    double hi = lo + span;
    Box child = box;
    if (vertical) {
      child.top = lo;
      child.bottom = hi;
    } else {
      child.left = lo;
      child.right = hi;
    }
    lo = hi;
    double mx = child.width() * 0.06, my = child.height() * 0.06;
    child.top += my;
    child.bottom -= my;
    child.left += mx;
    child.right -= mx;
    if (item_type >= 0) {
      --st.remaining;
      n.children.push_back(make_leaf(rng, child, cfg, item_type));
    } else {
      n.children.push_back(gen_node(rng, child, depth + 1, depth_limit, cfg, st, false));
    }
  }
  if (int(n.children.size()) < k) st.truncated = true;
  return n;
}

std::vector<int> leaf_indices(const Screen& s) {
  std::vector<int> out;
  for (size_t i = 0; i < s.flattened.size(); ++i)
    if (s.flattened[i]->is_leaf()) out.push_back(int(i));
  return out;
}

std::vector<std::string> make_captions(const ViewNode& leaf, RngStream& rng) {
  const std::string& ty = type_name(leaf.type_id);
  std::vector<std::string> pool = {"a " + ty, "the " + ty + " widget", "a " + ty + " on the screen"};
  if (!leaf.text.empty()) pool.push_back(ty + " labeled " + leaf.text.front());
  rng.shuffle(pool);
  size_t count = 1 + rng.uniform_int(std::min<uint64_t>(3, pool.size()));
  pool.resize(std::min(pool.size(), count));
  return pool;
}

std::vector<std::string> make_summaries(const Screen& s, RngStream& rng) {
  std::vector<int> counts(kNumTypes, 0);
  for (const auto* n : s.flattened)
    if (n->is_leaf()) ++counts[size_t(n->type_id)];
  int dominant = -1, best = 0;
  for (int t = kNumContainerTypes; t < kNumTypes; ++t)
    if (counts[size_t(t)] > best) {
      best = counts[size_t(t)];
      dominant = t;
    }
  if (dominant < 0) return {"an empty screen"};

  std::string word = number_word(best) + " " + type_name(dominant) + (best == 1 ? "" : "s");
  std::vector<std::string> pool = {"a screen with " + word, "screen showing " + word + " and other widgets",
                                   "ui with " + word};
  rng.shuffle(pool);
  pool.resize(1 + rng.uniform_int(2));
  return pool;
}

}  // namespace

std::string number_word(int n) {
  if (n >= 0 && n < int(std::size(kNumbers))) return kNumbers[n];
  return "many";
}

bool rel_below(const Box& c, const Box& a) {
  return c.center_y() > a.center_y() && std::min(c.right, a.right) > std::max(c.left, a.left);
}
bool rel_above(const Box& c, const Box& a) {
  return c.center_y() < a.center_y() && std::min(c.right, a.right) > std::max(c.left, a.left);
}
bool rel_left_of(const Box& c, const Box& a) {
  return c.center_x() < a.center_x() && std::min(c.bottom, a.bottom) > std::max(c.top, a.top);
}
bool rel_right_of(const Box& c, const Box& a) {
  return c.center_x() > a.center_x() && std::min(c.bottom, a.bottom) > std::max(c.top, a.top);
}

std::string make_question(const std::string& task, RngStream& rng) {
  static const char* kObjects[] = {"object", "element", "widget", "control"};
  if (task == "tappable") {
    std::string obj = kObjects[rng.uniform_int(4)];
    std::string adj = rng.uniform() < 0.5 ? "clickable" : "tappable";
    return "is the " + obj + " " + adj + " ?";
  }
  if (task == "summarize") {
    std::string what = rng.uniform() < 0.5 ? "summary" : "description";
    std::string where = rng.uniform() < 0.5 ? "screen" : "ui";
    return "what is the " + what + " of the " + where + " ?";
  }
  if (task == "caption") {
    std::string what = rng.uniform() < 0.5 ? "caption" : "description";
    std::string obj = kObjects[rng.uniform_int(4)];
    return "what is the " + what + " of the " + obj + " ?";
  }
  throw DataError("no question template for task: " + task);
}

std::string make_command(const Screen& screen, int target_idx, RngStream& rng) {
  if (target_idx < 0 || target_idx >= int(screen.flattened.size()))
    throw DataError("command target index out of range");
  const ViewNode& target = *screen.flattened[size_t(target_idx)];
  if (!target.is_leaf()) throw DataError("command target must be a leaf");

  static const char* kVerbs[] = {"click on", "press", "tap"};
  std::string verb = kVerbs[rng.uniform_int(3)];
  const std::string& ty = type_name(target.type_id);

  std::vector<int> leaves = leaf_indices(screen);
  std::vector<int> same_type;
  for (int i : leaves)
    if (screen.flattened[size_t(i)]->type_id == target.type_id) same_type.push_back(i);

  if (same_type.size() == 1) return verb + " the " + ty;

  // Relation against an anchor whose type is unique among leaves.
  struct Rel {
    const char* phrase;
    bool (*pred)(const Box&, const Box&);
  };
  static const Rel kRels[] = {{"below", rel_below},
                              {"above", rel_above},
                              {"left of", rel_left_of},
                              {"right of", rel_right_of}};
  std::vector<std::string> options;
  for (int a : leaves) {
    if (a == target_idx) continue;
    const ViewNode& anchor = *screen.flattened[size_t(a)];
    int anchor_type_count = 0;
    for (int i : leaves)
      if (screen.flattened[size_t(i)]->type_id == anchor.type_id) ++anchor_type_count;
    if (anchor_type_count != 1) continue;
    for (const Rel& rel : kRels) {
      int hits = 0;
      bool target_hit = false;
      for (int c : same_type)
        if (rel.pred(screen.flattened[size_t(c)]->bbox, anchor.bbox)) {
          ++hits;
          if (c == target_idx) target_hit = true;
        }
      if (hits == 1 && target_hit)
        options.push_back(verb + " the " + ty + " " + rel.phrase + " the " + type_name(anchor.type_id));
    }
  }
  if (!options.empty()) return options[rng.uniform_int(options.size())];

  // Ordinal fallback: rank within same-type leaves in pre-order.
  size_t rank = 0;
  while (rank < same_type.size() && same_type[rank] != target_idx) ++rank;
  if (rank < std::size(kOrdinals)) return verb + " the " + std::string(kOrdinals[rank]) + " " + ty;
  return verb + " the " + ty + " number " + std::to_string(rank + 1);
}

Screen generate_screen(uint64_t seed, const CorpusConfig& cfg, int index) {
  Screen s;
  char buf[32];
  std::snprintf(buf, sizeof buf, "scr_%05d", index);
  s.screen_id = buf;

  int64_t n_val = llround(cfg.screens * cfg.val_frac);
  int64_t n_test = llround(cfg.screens * cfg.test_frac);
  int64_t n_train = std::max<int64_t>(0, cfg.screens - n_val - n_test);
  s.split = index < n_train ? "train" : (index < n_train + n_val ? "val" : "test");

  if (cfg.n_max < 4 || cfg.n_max > 128) throw DataError("n_max must be in [4,128]");
  for (int depth_limit = std::max(1, cfg.max_depth); depth_limit >= 1; --depth_limit) {
    RngStream layout(seed, "corpus/layout", {uint64_t(index), uint64_t(depth_limit)});
    LayoutState st{cfg.n_max};
    s.root = gen_node(layout, Box{0, 0, 1, 1}, 0, depth_limit, cfg, st, true);
    if (!st.truncated || depth_limit == 1) break;
  }
  s.refresh_flattened(cfg.n_max);
  s.raster = render_screen(s.root, cfg.raster_h, cfg.raster_w);

  RngStream ann(seed, "corpus/annotations", {uint64_t(index)});
  for (size_t i = 0; i < s.flattened.size(); ++i)
    if (s.flattened[i]->is_leaf()) s.captions[int(i)] = make_captions(*s.flattened[i], ann);
  s.summaries = make_summaries(s, ann);

  std::vector<int> leaves = leaf_indices(s);
  ann.shuffle(leaves);
  int n_cmd = std::min<int>(cfg.commands_per_screen, int(leaves.size()));
  for (int i = 0; i < n_cmd; ++i)
    s.commands.push_back({make_command(s, leaves[size_t(i)], ann), leaves[size_t(i)]});

  s.tappable.resize(s.flattened.size());
  for (size_t i = 0; i < s.flattened.size(); ++i) {
    bool flip = ann.uniform() < cfg.tappability_noise;
    s.tappable[i] = s.flattened[i]->clickable != flip;
  }
  return s;
}

Corpus generate_corpus(uint64_t seed, const CorpusConfig& cfg) {
  if (cfg.screens < 0) throw DataError("screen count must be non-negative");
  Corpus c;
  c.cfg = cfg;
  c.vocab = build_vocabulary();
  c.screens.resize(size_t(cfg.screens));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < cfg.screens; ++i) c.screens[size_t(i)] = generate_screen(seed, cfg, i);
  // Pointers in flattened refer to moved-from trees after vector assignment.
  for (auto& s : c.screens) s.refresh_flattened(cfg.n_max);
  return c;
}

std::vector<const Screen*> Corpus::split_screens(const std::string& split) const {
  std::vector<const Screen*> out;
  for (const auto& s : screens)
    if (s.split == split) out.push_back(&s);
  return out;
}

Vocabulary build_vocabulary() {
  std::vector<std::string> words;
  auto add = [&](std::initializer_list<const char*> xs) {
    for (const char* x : xs) {
      std::string s(x);
      if (std::find(words.begin(), words.end(), s) == words.end()) words.push_back(s);
    }
  };
  add({"is", "the", "object", "element", "widget", "control", "clickable", "tappable", "what",
       "of", "summary", "description", "screen", "ui", "caption", "?"});
  add({"yes", "no"});
  add({"click", "press", "tap", "on", "below", "above", "left", "right", "number"});
  for (const char* o : kOrdinals) add({o});
  for (int t = 0; t < kNumTypes; ++t) {
    add({type_name(t).c_str()});
    std::string plural = type_name(t) + "s";
    if (std::find(words.begin(), words.end(), plural) == words.end()) words.push_back(plural);
  }
  add({"a", "an", "with", "labeled", "showing", "and", "other", "widgets", "items", "empty"});
  for (const char* n : kNumbers) add({n});
  add({"many"});
  for (const char* w : kContentWords) add({w});
  for (int i = 0; i < 40; ++i) add({std::to_string(i + 1).c_str()});  // ordinal overflow fallback
  return Vocabulary::from_tokens(words);
}

}  // namespace vut
