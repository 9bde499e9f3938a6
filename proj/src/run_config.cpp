#include "vut/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "vut/errors.hpp"

namespace vut {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": expected a number, got '" + v + "'");
  }
}

int64_t to_i64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(v[i]);
  }
  return out;
}

struct KeyDef {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

KeyDef int_key(const char* key, int RunConfig::* field) {
  return {key,
          [field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*field = int(to_i64(k, v));
          },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeyDef i64_key(const char* key, int64_t RunConfig::* field) {
  return {key,
          [field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*field = to_i64(k, v);
          },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeyDef dbl_key(const char* key, double RunConfig::* field) {
  return {key,
          [field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*field = to_double(k, v);
          },
          [field](const RunConfig& c) { return fmt_double(c.*field); }};
}

KeyDef str_key(const char* key, std::string RunConfig::* field) {
  return {key,
          [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return c.*field; }};
}

template <class Sub, class T>
KeyDef sub_int(const char* key, Sub RunConfig::* sub, T Sub::* field) {
  return {key,
          [sub, field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*sub.*field = T(to_i64(k, v));
          },
          [sub, field](const RunConfig& c) { return std::to_string(c.*sub.*field); }};
}

template <class Sub>
KeyDef sub_dbl(const char* key, Sub RunConfig::* sub, double Sub::* field) {
  return {key,
          [sub, field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*sub.*field = to_double(k, v);
          },
          [sub, field](const RunConfig& c) { return fmt_double(c.*sub.*field); }};
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    t.push_back(str_key("corpus_dir", &RunConfig::corpus_dir));
    t.push_back(str_key("out_dir", &RunConfig::out_dir));
    t.push_back({"seed",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   c.seed = uint64_t(to_i64(k, v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    t.push_back({"tasks",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   std::vector<Task> tasks;
                   for (const auto& name : split_list(v)) tasks.push_back(task_by_name(name));
                   if (tasks.empty()) throw UsageError("config key " + k + ": empty task list");
                   c.tasks = tasks;
                   // keep the weight vector parallel; an explicit task_weights
                   // key (written after this one) overrides the uniform fill
                   if (c.task_weights.size() != tasks.size())
                     c.task_weights.assign(tasks.size(), 1.0);
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (size_t i = 0; i < c.tasks.size(); ++i) {
                     if (i) out += ",";
                     out += task_name(c.tasks[i]);
                   }
                   return out;
                 }});
    t.push_back({"task_weights",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   std::vector<double> w;
                   for (const auto& item : split_list(v)) w.push_back(to_double(k, item));
                   c.task_weights = w;
                 },
                 [](const RunConfig& c) { return join_doubles(c.task_weights); }});

    t.push_back(i64_key("train.phase1_steps", &RunConfig::phase1_steps));
    t.push_back(i64_key("train.phase2_steps", &RunConfig::phase2_steps));
    t.push_back(int_key("train.batch_size", &RunConfig::batch_size));
    t.push_back(dbl_key("train.lr_initial", &RunConfig::lr_initial));
    t.push_back(i64_key("train.lr_decay_step", &RunConfig::lr_decay_step));
    t.push_back(dbl_key("train.lr_decayed", &RunConfig::lr_decayed));
    t.push_back(dbl_key("train.weight_decay", &RunConfig::weight_decay));
    t.push_back(i64_key("train.checkpoint_every", &RunConfig::checkpoint_every));
    t.push_back(i64_key("train.eval_every", &RunConfig::eval_every));
    t.push_back(i64_key("train.early_stop_patience", &RunConfig::early_stop_patience));

    auto m = &RunConfig::model;
    t.push_back(sub_int("model.raster_h", m, &ModelConfig::raster_h));
    t.push_back(sub_int("model.raster_w", m, &ModelConfig::raster_w));
    t.push_back(sub_int("model.n_queries", m, &ModelConfig::n_queries));
    t.push_back({"model.backbone_channels",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   std::vector<int> ch;
                   for (const auto& item : split_list(v)) ch.push_back(int(to_i64(k, item)));
                   if (ch.empty()) throw UsageError("config key " + k + ": empty channel list");
                   c.model.backbone_channels = ch;
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (size_t i = 0; i < c.model.backbone_channels.size(); ++i) {
                     if (i) out += ",";
                     out += std::to_string(c.model.backbone_channels[i]);
                   }
                   return out;
                 }});
    t.push_back(sub_int("model.group_norm_groups", m, &ModelConfig::group_norm_groups));
    t.push_back(sub_int("model.fourier_dim", m, &ModelConfig::fourier_dim));
    t.push_back(sub_dbl("model.focus_beta", m, &ModelConfig::focus_beta));
    t.push_back(sub_dbl("model.focus_tau", m, &ModelConfig::focus_tau));
    t.push_back(sub_int("model.enc_layers", m, &ModelConfig::enc_layers));
    t.push_back(sub_int("model.heads", m, &ModelConfig::heads));
    t.push_back(sub_int("model.d_model", m, &ModelConfig::d_model));
    t.push_back(sub_int("model.mlp_dim", m, &ModelConfig::mlp_dim));
    t.push_back(sub_int("model.qkv_dim", m, &ModelConfig::qkv_dim));
    t.push_back(sub_dbl("model.attn_dropout", m, &ModelConfig::attn_dropout));
    t.push_back(sub_dbl("model.mlp_dropout", m, &ModelConfig::mlp_dropout));
    t.push_back(sub_int("model.dec_layers", m, &ModelConfig::dec_layers));
    t.push_back(sub_int("model.dec_heads", m, &ModelConfig::dec_heads));
    t.push_back(sub_int("model.dec_mlp_dim", m, &ModelConfig::dec_mlp_dim));
    t.push_back(sub_int("model.dec_qkv_dim", m, &ModelConfig::dec_qkv_dim));
    t.push_back(sub_dbl("model.dec_dropout", m, &ModelConfig::dec_dropout));
    t.push_back(sub_dbl("model.cross_attn_dropout", m, &ModelConfig::cross_attn_dropout));
    t.push_back(sub_dbl("model.enc_dropout_before_cross", m,
                        &ModelConfig::enc_dropout_before_cross));
    t.push_back(sub_int("model.max_len", m, &ModelConfig::max_len));
    t.push_back({"model.dtype",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   if (v == "real32") c.model.dtype = DType::F32;
                   else if (v == "real64") c.model.dtype = DType::F64;
                   else throw UsageError("config key " + k + ": expected real32 or real64");
                 },
                 [](const RunConfig& c) { return std::string(dtype_name(c.model.dtype)); }});

    auto cc = &RunConfig::corpus;
    t.push_back(sub_int("corpus.screens", cc, &CorpusConfig::screens));
    t.push_back(sub_int("corpus.raster_h", cc, &CorpusConfig::raster_h));
    t.push_back(sub_int("corpus.raster_w", cc, &CorpusConfig::raster_w));
    t.push_back(sub_int("corpus.max_nodes", cc, &CorpusConfig::n_max));
    t.push_back(sub_int("corpus.max_depth", cc, &CorpusConfig::max_depth));
    t.push_back(sub_dbl("corpus.tappability_noise", cc, &CorpusConfig::tappability_noise));
    t.push_back(sub_dbl("corpus.val_frac", cc, &CorpusConfig::val_frac));
    t.push_back(sub_dbl("corpus.test_frac", cc, &CorpusConfig::test_frac));
    t.push_back(sub_int("corpus.commands_per_screen", cc, &CorpusConfig::commands_per_screen));
    t.push_back({"corpus.leaf_weights",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   std::vector<double> w;
                   for (const auto& item : split_list(v)) w.push_back(to_double(k, item));
                   c.corpus.leaf_weights = w;
                 },
                 [](const RunConfig& c) { return join_doubles(c.corpus.leaf_weights); }});
    return t;
  }();
  return table;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& def : key_table()) {
    if (key == def.key) {
      def.set(cfg, key, value);
      return;
    }
  }
  throw UsageError("unknown config key: " + key + " (see docs/config-keys.md)");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (cfg.task_weights.size() != cfg.tasks.size())
    throw UsageError("task_weights must list one weight per task");
  bool any = false;
  for (double w : cfg.task_weights) {
    if (w < 0) throw UsageError("task weights must be non-negative");
    any |= w > 0;
  }
  if (!any) throw UsageError("at least one task weight must be positive");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& def : key_table()) {
    out += def.key;
    out += " = ";
    out += def.get(cfg);
    out += "\n";
  }
  return out;
}

}  // namespace vut
