// vut: corpus generation, training, evaluation, prediction, rendering, and
// the detector architecture benchmark, as one binary with subcommands.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "vut/bench.hpp"
#include "vut/corpus.hpp"
#include "vut/errors.hpp"
#include "vut/eval.hpp"
#include "vut/fixtures.hpp"
#include "vut/render.hpp"
#include "vut/run_config.hpp"
#include "vut/training.hpp"

namespace {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };
LogLevel g_log_level = LogLevel::Info;

void info(const std::string& msg) {
  if (g_log_level <= LogLevel::Info) std::cout << msg << "\n";
}

std::vector<vut::Task> parse_tasks(const std::string& csv) {
  std::vector<vut::Task> tasks;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ','))
    if (!item.empty()) tasks.push_back(vut::task_by_name(item));
  if (tasks.empty()) throw vut::UsageError("empty task list");
  return tasks;
}

vut::Corpus load_corpus(const std::string& dir) {
  if (!std::filesystem::exists(dir))
    throw vut::DataError("corpus directory not found: " + dir);
  return vut::read_corpus(dir);
}

// Checkpoint + corpus, shapes cross-checked.
struct EvalSetup {
  vut::LoadedModel model;
  vut::Corpus corpus;
  vut::ModelConfig mc;
};

EvalSetup load_eval_setup(const std::string& ckpt, const std::string& corpus_override) {
  EvalSetup s{vut::load_model(ckpt), {}, {}};
  s.corpus = load_corpus(corpus_override.empty() ? s.model.cfg.corpus_dir : corpus_override);
  s.mc = s.model.cfg.model;
  s.mc.vocab_size = s.corpus.vocab.size();
  if (s.model.params.has("decoder.tok") &&
      s.model.params.tensor("decoder.tok").dim(0) != s.corpus.vocab.size())
    throw vut::DataError("checkpoint vocabulary size differs from the corpus");
  return s;
}

const vut::Screen& find_screen(const vut::Corpus& corpus, const std::string& id) {
  for (const auto& s : corpus.screens)
    if (s.screen_id == id) return s;
  throw vut::DataError("no screen with id '" + id + "' in the corpus");
}

void print_split_sizes(const vut::Corpus& corpus) {
  for (const char* split : {"train", "val", "test"})
    std::cout << split << " " << corpus.split_screens(split).size() << "\n";
}

int cmd_gen_corpus(uint64_t seed, bool seed_set, int screens, bool screens_set,
                   const std::string& out, const std::string& config_path) {
  vut::RunConfig cfg;
  if (!config_path.empty()) cfg = vut::load_run_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (screens_set) cfg.corpus.screens = screens;
  vut::Corpus corpus = vut::generate_corpus(cfg.seed, cfg.corpus);
  vut::write_corpus(corpus, out);
  print_split_sizes(corpus);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& tasks_csv,
              const std::string& resume) {
  vut::RunConfig cfg;
  if (!resume.empty()) {
    // Bit-exact resume requires the checkpoint's own config.
    cfg = vut::load_model(resume).cfg;
    if (!config_path.empty() &&
        vut::serialize_run_config(vut::load_run_config(config_path)) !=
            vut::serialize_run_config(cfg))
      throw vut::UsageError("--config disagrees with the checkpoint; drop one of them");
  } else {
    if (config_path.empty()) throw vut::UsageError("train needs --config (or --resume)");
    cfg = vut::load_run_config(config_path);
  }
  if (!tasks_csv.empty()) {
    vut::apply_override(cfg, "tasks", tasks_csv);
    if (!resume.empty()) throw vut::UsageError("--tasks cannot change a resumed run");
  }

  vut::Corpus corpus = load_corpus(cfg.corpus_dir);
  vut::ValMetricFn val_metric;
  if (cfg.tasks.size() == 1 && cfg.tasks[0] == vut::Task::Tappable &&
      !corpus.split_screens("val").empty()) {
    val_metric = [&corpus](vut::ParamStore& params, const vut::ModelConfig& mc, int64_t step) {
      return vut::evaluate(params, mc, corpus, "val", {vut::Task::Tappable}, step).tappable->f1;
    };
  }
  vut::TrainResult res = vut::run_schedule(cfg, corpus, resume, val_metric);
  info("trained to step " + std::to_string(res.final_step) +
       (res.stopped_early ? " (early stop)" : "") + ", final loss " +
       std::to_string(res.final_loss));
  info("checkpoint: " + res.final_checkpoint);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& split, const std::string& tasks_csv,
             const std::string& report_path, const std::string& corpus_override) {
  EvalSetup s = load_eval_setup(ckpt, corpus_override);
  auto tasks = tasks_csv.empty() ? s.model.cfg.tasks : parse_tasks(tasks_csv);
  vut::EvalReport report =
      vut::evaluate(s.model.params, s.mc, s.corpus, split, tasks, s.model.step);
  std::string doc = vut::report_json(report);
  if (report_path.empty()) {
    std::cout << doc;
  } else {
    std::ofstream out(report_path, std::ios::trunc);
    out << doc;
    if (!out) throw vut::DataError("cannot write report to " + report_path);
    info("report: " + report_path);
  }
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& screen_id,
                const std::string& task_name_str, int target_idx, const std::string& question,
                const std::string& corpus_override) {
  EvalSetup s = load_eval_setup(ckpt, corpus_override);
  const vut::Screen& screen = find_screen(s.corpus, screen_id);
  vut::Task task = vut::task_by_name(task_name_str);
  const vut::Vocabulary& vocab = s.corpus.vocab;

  switch (task) {
    case vut::Task::Detect: {
      for (const auto& d : vut::predict_objects(s.model.params, s.mc, screen, vocab))
        std::cout << vut::type_name(d.type_id) << " [" << d.bbox.top << ", " << d.bbox.left
                  << ", " << d.bbox.right << ", " << d.bbox.bottom << "] score " << d.score
                  << "\n";
      return 0;
    }
    case vut::Task::Ground: {
      std::string phrase = question;
      if (phrase.empty()) {
        if (screen.commands.empty())
          throw vut::UsageError("ground needs --question (screen has no stored commands)");
        phrase = screen.commands[0].phrase;
      }
      int idx = vut::predict_target(s.model.params, s.mc, screen, vocab, vocab.encode(phrase));
      const auto& node = *screen.flattened[size_t(idx)];
      std::cout << "\"" << phrase << "\" -> node " << idx << " (" << vut::type_name(node.type_id)
                << ")\n";
      return 0;
    }
    case vut::Task::Caption:
    case vut::Task::Tappable:
      if (target_idx < 0)
        throw vut::UsageError(task_name_str + " prediction needs --target-idx");
      if (target_idx >= int(screen.flattened.size()))
        throw vut::UsageError("--target-idx is outside the screen's hierarchy");
      [[fallthrough]];
    case vut::Task::Summarize: {
      std::string q = question.empty()
                          ? [&] {
                              vut::RngStream rng(0, "predict/question");
                              return vut::make_question(task_name_str, rng);
                            }()
                          : question;
      auto answer = vut::predict_answer(s.model.params, s.mc, screen, vocab, task,
                                        task == vut::Task::Summarize ? -1 : target_idx,
                                        vocab.encode(q));
      std::cout << vocab.decode(answer) << "\n";
      return 0;
    }
  }
  return 0;
}

int cmd_render(const std::string& ckpt, const std::string& screen_id, const std::string& out,
               const std::string& corpus_override) {
  EvalSetup s = load_eval_setup(ckpt, corpus_override);
  const vut::Screen& screen = find_screen(s.corpus, screen_id);

  vut::Raster r = screen.raster;
  for (const auto& g : vut::gt_objects(screen))
    vut::draw_box_outline(r, g.bbox, 40, 200, 40);  // ground truth: green
  for (const auto& d : vut::predict_objects(s.model.params, s.mc, screen, s.corpus.vocab))
    vut::draw_box_outline(r, d.bbox, 230, 40, 200);  // predictions: magenta

  if (out.size() >= 4 && out.substr(out.size() - 4) == ".png")
    vut::write_png(out, r);
  else
    vut::write_ppm(out, r);
  info("wrote " + out);
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& arch_name) {
  vut::RunConfig cfg = vut::load_run_config(config_path);
  vut::BenchArch arch = vut::bench_arch_by_name(arch_name);
  vut::Corpus corpus = load_corpus(cfg.corpus_dir);
  vut::BenchResult row = vut::run_bench_detector(cfg, corpus, arch);
  std::cout << vut::bench_row_json(row);
  return 0;
}

int cmd_verify_fixtures(const std::string& fixtures_dir, const std::string& work_dir,
                        bool bless) {
  if (bless) {
    vut::bless_fixtures(fixtures_dir, work_dir);
    info("fixtures blessed under " + fixtures_dir);
    return 0;
  }
  auto checks = vut::verify_fixtures(fixtures_dir, work_dir);
  for (const auto& c : checks)
    std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << (c.ok ? "" : ": " + c.detail) << "\n";
  if (!vut::all_ok(checks)) throw vut::DataError("fixture verification failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VUT: multi-task UI transformer"};
  app.require_subcommand(1);

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic UI corpus");
  uint64_t seed = 0;
  int screens = 0;
  std::string gen_out, gen_config;
  auto* seed_opt = gen->add_option("--seed", seed, "Generation seed");
  auto* screens_opt = gen->add_option("--screens", screens, "Number of screens");
  gen->add_option("--out", gen_out, "Output corpus directory")->required();
  gen->add_option("--config", gen_config, "Run config supplying corpus.* keys");

  // train
  auto* train = app.add_subcommand("train", "Train on a task subset");
  std::string train_config, train_tasks, train_resume;
  train->add_option("--config", train_config, "Run config file");
  train->add_option("--tasks", train_tasks, "Comma-separated task subset");
  train->add_option("--resume", train_resume, "Checkpoint to resume from");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_split = "val", eval_tasks, eval_report, eval_corpus;
  ev->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  ev->add_option("--split", eval_split, "Corpus split");
  ev->add_option("--tasks", eval_tasks, "Comma-separated task subset");
  ev->add_option("--report", eval_report, "Write the JSON report here");
  ev->add_option("--corpus", eval_corpus, "Override the checkpoint's corpus directory");

  // predict
  auto* pred = app.add_subcommand("predict", "Run one example through a checkpoint");
  std::string pred_ckpt, pred_screen, pred_task, pred_question, pred_corpus;
  int pred_target = -1;
  pred->add_option("--ckpt", pred_ckpt, "Checkpoint path")->required();
  pred->add_option("--screen-id", pred_screen, "Screen id")->required();
  pred->add_option("--task", pred_task, "Task name")->required();
  pred->add_option("--target-idx", pred_target, "Focus node index (caption / tappable)");
  pred->add_option("--question", pred_question, "Question or command text");
  pred->add_option("--corpus", pred_corpus, "Override the checkpoint's corpus directory");

  // render
  auto* ren = app.add_subcommand("render", "Write a screen raster with box overlays");
  std::string ren_ckpt, ren_screen, ren_out, ren_corpus;
  ren->add_option("--ckpt", ren_ckpt, "Checkpoint path")->required();
  ren->add_option("--screen-id", ren_screen, "Screen id")->required();
  ren->add_option("--out", ren_out, "Output image (.ppm or .png)")->required();
  ren->add_option("--corpus", ren_corpus, "Override the checkpoint's corpus directory");

  // bench-detectors
  auto* bench = app.add_subcommand("bench-detectors", "Train and score one detector arch");
  std::string bench_config, bench_arch;
  bench->add_option("--config", bench_config, "Run config file")->required();
  bench->add_option("--arch", bench_arch, "single12 or encdec6x6")->required();

  // verify-fixtures
  auto* fix = app.add_subcommand("verify-fixtures", "Check the committed golden fixtures");
  std::string fix_dir = "fixtures", fix_work = "fixture-check";
  bool fix_bless = false;
  fix->add_option("--fixtures", fix_dir, "Fixture directory");
  fix->add_option("--work", fix_work, "Scratch directory for regenerated artifacts");
  fix->add_flag("--bless", fix_bless, "Overwrite the committed fixtures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (log_level == "debug") g_log_level = LogLevel::Debug;
  else if (log_level == "warn") g_log_level = LogLevel::Warn;
  else if (log_level == "error") g_log_level = LogLevel::Error;

  try {
    if (gen->parsed())
      return cmd_gen_corpus(seed, seed_opt->count() > 0, screens, screens_opt->count() > 0,
                            gen_out, gen_config);
    if (train->parsed()) return cmd_train(train_config, train_tasks, train_resume);
    if (ev->parsed()) return cmd_eval(eval_ckpt, eval_split, eval_tasks, eval_report, eval_corpus);
    if (pred->parsed())
      return cmd_predict(pred_ckpt, pred_screen, pred_task, pred_target, pred_question,
                         pred_corpus);
    if (ren->parsed()) return cmd_render(ren_ckpt, ren_screen, ren_out, ren_corpus);
    if (bench->parsed()) return cmd_bench(bench_config, bench_arch);
    if (fix->parsed()) return cmd_verify_fixtures(fix_dir, fix_work, fix_bless);
  } catch (const vut::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const vut::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const vut::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
