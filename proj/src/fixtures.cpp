#include "vut/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vut/errors.hpp"
#include "vut/eval.hpp"
#include "vut/text_metrics.hpp"
#include "vut/training.hpp"

namespace fs = std::filesystem;

namespace vut {

namespace {

constexpr double kTol = 1e-6;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
  if (!out) throw DataError("cannot write " + p.string());
}

std::vector<std::string> relative_files(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
  std::sort(out.begin(), out.end());
  return out;
}

bool close(double a, double b) { return std::abs(a - b) <= kTol * std::max({1.0, std::abs(a), std::abs(b)}); }

// Numbers within tolerance, everything else exact.
bool json_close(const nlohmann::json& a, const nlohmann::json& b, std::string& where) {
  if (a.is_number() && b.is_number()) {
    if (close(a.get<double>(), b.get<double>())) return true;
    where = a.dump() + " vs " + b.dump();
    return false;
  }
  if (a.type() != b.type()) {
    where = "type mismatch";
    return false;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) {
      where = "object size mismatch";
      return false;
    }
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key())) {
        where = "missing key " + it.key();
        return false;
      }
      if (!json_close(it.value(), b.at(it.key()), where)) {
        where = it.key() + ": " + where;
        return false;
      }
    }
    return true;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) {
      where = "array size mismatch";
      return false;
    }
    for (size_t i = 0; i < a.size(); ++i)
      if (!json_close(a[i], b[i], where)) {
        where = "[" + std::to_string(i) + "] " + where;
        return false;
      }
    return true;
  }
  if (a == b) return true;
  where = a.dump() + " vs " + b.dump();
  return false;
}

// The frozen run: golden config in, regenerated corpus / loss log / report out.
struct Regenerated {
  RunConfig cfg;
  fs::path corpus_dir;
  fs::path loss_log;
  std::string report;
};

Regenerated regenerate(const fs::path& fixtures, const fs::path& work) {
  Regenerated out;
  out.cfg = load_run_config((fixtures / "golden.cfg").string());
  fs::remove_all(work);
  fs::create_directories(work);

  Corpus corpus = generate_corpus(out.cfg.seed, out.cfg.corpus);
  out.corpus_dir = work / "corpus";
  write_corpus(corpus, out.corpus_dir.string());

  RunConfig train_cfg = out.cfg;
  train_cfg.out_dir = (work / "run").string();
  TrainResult tr = run_schedule(train_cfg, corpus);
  out.loss_log = work / "run" / "loss.jsonl";

  LoadedModel lm = load_model(tr.final_checkpoint);
  ModelConfig mc = lm.cfg.model;
  mc.vocab_size = corpus.vocab.size();
  out.report = report_json(evaluate(lm.params, mc, corpus, "train", lm.cfg.tasks, lm.step));
  return out;
}

FixtureCheck check_corpus(const fs::path& fixtures, const Regenerated& regen) {
  FixtureCheck c{"golden-corpus", false, ""};
  fs::path committed = fixtures / "golden-corpus";
  auto want = relative_files(committed);
  auto got = relative_files(regen.corpus_dir);
  if (want != got) {
    c.detail = "file list differs";
    return c;
  }
  for (const auto& rel : want)
    if (read_file(committed / rel) != read_file(regen.corpus_dir / rel)) {
      c.detail = rel + " differs";
      return c;
    }
  c.ok = true;
  return c;
}

FixtureCheck check_loss_log(const fs::path& fixtures, const Regenerated& regen) {
  FixtureCheck c{"golden-loss", false, ""};
  std::istringstream want(read_file(fixtures / "golden-loss" / "loss.jsonl"));
  std::istringstream got(read_file(regen.loss_log));
  std::string wline, gline;
  int lineno = 0;
  while (std::getline(want, wline)) {
    ++lineno;
    if (!std::getline(got, gline)) {
      c.detail = "regenerated log is shorter";
      return c;
    }
    std::string where;
    if (!json_close(nlohmann::json::parse(wline), nlohmann::json::parse(gline), where)) {
      c.detail = "line " + std::to_string(lineno) + ": " + where;
      return c;
    }
  }
  if (std::getline(got, gline)) {
    c.detail = "regenerated log is longer";
    return c;
  }
  c.ok = true;
  return c;
}

FixtureCheck check_report(const fs::path& fixtures, const Regenerated& regen) {
  FixtureCheck c{"golden-report", false, ""};
  std::string where;
  if (!json_close(nlohmann::json::parse(read_file(fixtures / "golden-report" / "report.json")),
                  nlohmann::json::parse(regen.report), where)) {
    c.detail = where;
    return c;
  }
  c.ok = true;
  return c;
}

FixtureCheck check_text_metrics(const fs::path& fixtures) {
  FixtureCheck c{"text-metrics", false, ""};
  auto doc = nlohmann::json::parse(read_file(fixtures / "text-metrics.json"));
  std::vector<std::string> cands;
  std::vector<std::vector<std::string>> refs;
  for (const auto& case_ : doc.at("cases")) {
    cands.push_back(case_.at("candidate").get<std::string>());
    refs.push_back(case_.at("references").get<std::vector<std::string>>());
  }
  const auto& want = doc.at("expected");
  auto check = [&](const char* key, double got) {
    if (!c.detail.empty()) return;
    double w = want.at(key).get<double>();
    if (std::abs(w - got) > kTol)
      c.detail = std::string(key) + ": expected " + std::to_string(w) + ", got " +
                 std::to_string(got);
  };
  check("bleu1", bleu(cands, refs, 1));
  check("bleu2", bleu(cands, refs, 2));
  check("bleu3", bleu(cands, refs, 3));
  check("bleu4", bleu(cands, refs, 4));
  check("rouge_l", rouge_l(cands, refs));
  check("cider_d", cider_d(cands, refs));
  c.ok = c.detail.empty();
  return c;
}

}  // namespace

std::vector<FixtureCheck> verify_fixtures(const std::string& fixtures_dir,
                                          const std::string& work_dir) {
  fs::path fixtures(fixtures_dir);
  Regenerated regen = regenerate(fixtures, work_dir);
  return {check_corpus(fixtures, regen), check_loss_log(fixtures, regen),
          check_report(fixtures, regen), check_text_metrics(fixtures)};
}

void bless_fixtures(const std::string& fixtures_dir, const std::string& work_dir) {
  fs::path fixtures(fixtures_dir);
  Regenerated regen = regenerate(fixtures, work_dir);

  fs::path committed = fixtures / "golden-corpus";
  fs::remove_all(committed);
  fs::create_directories(committed);
  for (const auto& rel : relative_files(regen.corpus_dir))
    write_file(committed / rel, read_file(regen.corpus_dir / rel));

  write_file(fixtures / "golden-loss" / "loss.jsonl", read_file(regen.loss_log));
  write_file(fixtures / "golden-report" / "report.json", regen.report);
}

bool all_ok(const std::vector<FixtureCheck>& checks) {
  for (const auto& c : checks)
    if (!c.ok) return false;
  return true;
}

}  // namespace vut
