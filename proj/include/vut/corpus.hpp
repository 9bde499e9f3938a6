#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vut/rng.hpp"
#include "vut/tokenizer.hpp"
#include "vut/view.hpp"

namespace vut {

struct CorpusConfig {
  int screens = 100;
  int raster_h = 256;
  int raster_w = 256;
  int n_max = 32;  // node budget per screen, up to 128
  int max_depth = 3;
  double tappability_noise = 0.15;  // fraction of labels flipped vs the clickable bit
  double val_frac = 0.1;
  double test_frac = 0.1;
  int commands_per_screen = 3;
  std::vector<double> leaf_weights;  // sampling weights over the 10 leaf types; empty = uniform
};

struct Corpus {
  CorpusConfig cfg;
  std::vector<Screen> screens;
  Vocabulary vocab;

  std::vector<const Screen*> split_screens(const std::string& split) const;
};

// The full closed template vocabulary (independent of any particular corpus).
Vocabulary build_vocabulary();

// Pure function of (seed, cfg): one screen per index, byte-identical across
// runs and across serial/parallel generation.
Corpus generate_corpus(uint64_t seed, const CorpusConfig& cfg);
Screen generate_screen(uint64_t seed, const CorpusConfig& cfg, int index);

// Question surface forms for the QA tasks (caption / summarize / tappable).
std::string make_question(const std::string& task, RngStream& rng);

// Command phrase for a leaf target; prefers a unique-type reference, then a
// spatial relation against a unique anchor, then an ordinal.
std::string make_command(const Screen& screen, int target_idx, RngStream& rng);

// Spatial predicates shared by the command generator (tests carry their own
// independent resolver).
bool rel_below(const Box& c, const Box& anchor);
bool rel_above(const Box& c, const Box& anchor);
bool rel_left_of(const Box& c, const Box& anchor);
bool rel_right_of(const Box& c, const Box& anchor);

// "zero".."twelve", then "many" (documented corpus convention).
std::string number_word(int n);

// Corpus directory: config.json + manifest.jsonl + vocab.txt + types.txt +
// one PPM raster per screen. read(write(x)) is byte-identical on re-write.
void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus read_corpus(const std::string& dir);

}  // namespace vut
