#pragma once

// Multi-run experiment campaigns: configuration, per-run archives, the five
// summary tables and the statistical report over one tester's scores.
//
// Layout of a campaign directory:
//   campaign.json            methods, testers, proxy, config echo
//   comparison.csv           long-format scores, rewritten after every run
//   run_000/ ...             config.json, split.json, history.csv,
//                            best_phenotype.txt, best.json, scores.csv
//                            (error.txt instead of the evolution files when
//                            the run crashed)

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "fedora/baselines/baseline.hpp"
#include "fedora/dataset.hpp"
#include "fedora/evolution.hpp"
#include "fedora/grammar.hpp"
#include "fedora/stats.hpp"
#include "fedora/svg.hpp"

namespace fedora {

namespace fs = std::filesystem;

inline constexpr const char* kRawMethod = "raw";
inline constexpr const char* kFedoraMethod = "fedora";

struct SyntheticSpec {
  std::size_t n = 600;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

struct ExternalEmbedding {
  std::string name;
  fs::path path;
};

struct ExperimentConfig {
  fs::path dataset_path;
  std::string label_column = "label";
  std::optional<SyntheticSpec> synthetic;  // replaces dataset_path when set
  fs::path grammar_path;                   // empty: default grammar for the dataset
  EvolutionConfig evolution;
  std::vector<ModelKind> testers{kAllModels.begin(), kAllModels.end()};
  std::vector<BaselineKind> baselines{BaselineKind::Pca, BaselineKind::Som, BaselineKind::Autoencoder};
  std::vector<ExternalEmbedding> externals;
  std::size_t runs = 30;
  std::uint64_t base_seed = 0;
  fs::path output_dir = "campaign";
  ModelSettings models;
  BaselineSettings baseline_settings;
  bool svg = true;

  /// Method names in table order: raw, fedora, baselines, externals.
  std::vector<std::string> methods() const {
    std::vector<std::string> out{kRawMethod, kFedoraMethod};
    for (auto b : baselines) out.emplace_back(to_string(b));
    for (const auto& e : externals) out.push_back(e.name);
    return out;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
    if (runs < 1) fail("runs must be >= 1");
    evolution.validate();
    if (testers.empty()) fail("at least one tester is required");
    if (!synthetic && dataset_path.empty()) fail("dataset.path or dataset.synthetic is required");
    if (!synthetic && !fs::exists(dataset_path)) fail("dataset not found: " + dataset_path.string());
    if (!grammar_path.empty() && !fs::exists(grammar_path)) fail("grammar not found: " + grammar_path.string());
    std::set<std::string> seen;
    for (const auto& m : methods())
      if (!seen.insert(m).second) fail("duplicate method name '" + m + "'");
    for (const auto& e : externals) {
      if (e.name.empty()) fail("external embedding needs a name");
      if (!fs::exists(e.path)) fail("external embedding not found: " + e.path.string());
    }
  }

  nlohmann::json to_json() const {
    auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(); };
    nlohmann::json j;
    if (synthetic)
      j["dataset"] = {{"synthetic", {{"n", synthetic->n}, {"noise", synthetic->noise}, {"seed", synthetic->seed}}}};
    else
      j["dataset"] = {{"path", dataset_path.string()}, {"label_column", label_column}};
    j["grammar"] = grammar_path.empty() ? "default" : grammar_path.string();
    const auto& e = evolution;
    j["evolution"] = {{"population_size", e.population_size}, {"generations", e.generations},
                      {"elitism_fraction", e.elitism_fraction}, {"crossover_rate", e.crossover_rate},
                      {"mutation_rate", e.mutation_rate},     {"tournament_size", e.tournament_size},
                      {"depth_min", e.depth_min},             {"depth_max", e.depth_max},
                      {"proxy", to_string(e.proxy)},          {"max_features", e.max_features},
                      {"feature_penalty", e.feature_penalty}};
    for (auto t : testers) j["testers"].push_back(to_string(t));
    j["baselines"] = nlohmann::json::array();
    for (auto b : baselines) j["baselines"].push_back(to_string(b));
    j["external_embeddings"] = nlohmann::json::array();
    for (const auto& x : externals) j["external_embeddings"].push_back({{"name", x.name}, {"path", x.path.string()}});
    j["runs"] = runs;
    j["base_seed"] = base_seed;
    j["seed_scheme"] = "run i uses seed base_seed + i for its split and its evolution";
    const auto& m = models;
    nlohmann::json tree{{"min_samples_split", m.tree.min_samples_split}};
    tree["max_depth"] = opt(m.tree.max_depth);
    nlohmann::json forest{{"n_estimators", m.forest.n_estimators},
                          {"max_depth", opt(m.forest.max_depth)},
                          {"min_samples_split", m.forest.min_samples_split},
                          {"bootstrap", m.forest.bootstrap}};
    nlohmann::json boost{{"n_rounds", m.boost.n_rounds},
                         {"learning_rate", m.boost.learning_rate},
                         {"max_depth", opt(m.boost.max_depth)}};
    nlohmann::json mlp{{"hidden_units", m.mlp.hidden_units},
                       {"epochs", m.mlp.epochs},
                       {"batch_size", m.mlp.batch_size},
                       {"learning_rate", m.mlp.learning_rate},
                       {"activation", m.mlp.activation == Activation::Relu ? "relu" : "tanh"},
                       {"optimizer", m.mlp.optimizer == Optimizer::Adam ? "adam" : "sgd"}};
    j["models"] = {{"decision_tree", tree}, {"random_forest", forest}, {"boosted_trees", boost}, {"mlp", mlp}};
    const auto& b = baseline_settings;
    j["som"] = {{"epochs", b.som.epochs}, {"learning_rate", b.som.initial_learning_rate},
                {"radius", opt(b.som.initial_radius)}};
    j["autoencoder"] = {{"hidden_units", b.autoencoder.hidden_units}, {"epochs", b.autoencoder.epochs},
                        {"batch_size", b.autoencoder.batch_size}, {"learning_rate", b.autoencoder.learning_rate}};
    return j;
  }
};

// ---------------------------------------------------------------------------
// TOML loading

namespace detail {

class TomlReader {
 public:
  TomlReader(const toml::table& table, std::string where) : table_(table), where_(std::move(where)) {}

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const toml::node* node = table_.get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = node->value<bool>();
      if (!v) fail(key, "a boolean");
      out = *v;
    } else if constexpr (std::is_integral_v<T>) {
      auto v = node->value<std::int64_t>();
      if (!v || *v < 0) fail(key, "a non-negative integer");
      out = static_cast<T>(*v);
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = node->value<double>();
      if (!v) fail(key, "a number");
      out = *v;
    } else {
      auto v = node->value<std::string>();
      if (!v) fail(key, "a string");
      out = *v;
    }
  }

  template <typename T>
  void read(const char* key, std::optional<T>& out) {
    if (!table_.contains(key)) {
      seen_.insert(key);
      return;
    }
    T v{};
    read(key, v);
    out = v;
  }

  std::vector<std::string> strings(const char* key, std::vector<std::string> fallback) {
    seen_.insert(key);
    const toml::node* node = table_.get(key);
    if (!node) return fallback;
    const toml::array* arr = node->as_array();
    if (!arr) fail(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      auto v = item.value<std::string>();
      if (!v) fail(key, "an array of strings");
      out.push_back(*v);
    }
    return out;
  }

  const toml::table* sub(const char* key) {
    seen_.insert(key);
    const toml::node* node = table_.get(key);
    if (!node) return nullptr;
    if (!node->is_table()) fail(key, "a table");
    return node->as_table();
  }

  void allow(const char* key) { seen_.insert(key); }

  /// Rejects keys that no reader asked for; catches typos in configs.
  void finish() const {
    for (const auto& [k, v] : table_)
      if (!seen_.count(std::string(k.str())))
        throw Error(ErrorCode::ConfigInvalid, "unknown key '" + std::string(k.str()) + "' in " + where_);
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw Error(ErrorCode::ConfigInvalid, where_ + "." + key + " must be " + what);
  }

  const toml::table& table_;
  std::string where_;
  std::set<std::string> seen_;
};

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// Parses a TOML experiment config. Relative paths resolve against base_dir.
inline ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir = {}) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw Error(ErrorCode::ConfigInvalid, msg.str());
  }

  ExperimentConfig cfg;
  detail::TomlReader top(root, "config");
  top.read("runs", cfg.runs);
  top.read("base_seed", cfg.base_seed);
  top.read("svg", cfg.svg);
  std::string out = cfg.output_dir.string();
  top.read("output_dir", out);
  cfg.output_dir = detail::resolve(base_dir, out);
  std::string grammar;
  top.read("grammar", grammar);
  if (!grammar.empty()) cfg.grammar_path = detail::resolve(base_dir, grammar);

  std::vector<std::string> default_testers;
  for (auto t : cfg.testers) default_testers.emplace_back(to_string(t));
  cfg.testers.clear();
  for (const auto& t : top.strings("testers", default_testers)) cfg.testers.push_back(parse_model_kind(t));
  std::vector<std::string> default_baselines;
  for (auto b : cfg.baselines) default_baselines.emplace_back(to_string(b));
  cfg.baselines.clear();
  for (const auto& b : top.strings("baselines", default_baselines)) cfg.baselines.push_back(parse_baseline_kind(b));

  if (const auto* t = top.sub("dataset")) {
    detail::TomlReader r(*t, "dataset");
    std::string path;
    r.read("path", path);
    if (!path.empty()) cfg.dataset_path = detail::resolve(base_dir, path);
    r.read("label_column", cfg.label_column);
    if (const auto* s = r.sub("synthetic")) {
      detail::TomlReader sr(*s, "dataset.synthetic");
      SyntheticSpec spec;
      sr.read("n", spec.n);
      sr.read("noise", spec.noise);
      sr.read("seed", spec.seed);
      sr.finish();
      cfg.synthetic = spec;
    }
    r.finish();
  }

  if (const auto* t = top.sub("evolution")) {
    detail::TomlReader r(*t, "evolution");
    auto& e = cfg.evolution;
    r.read("population_size", e.population_size);
    r.read("generations", e.generations);
    r.read("elitism_fraction", e.elitism_fraction);
    r.read("crossover_rate", e.crossover_rate);
    r.read("mutation_rate", e.mutation_rate);
    r.read("tournament_size", e.tournament_size);
    r.read("depth_min", e.depth_min);
    r.read("depth_max", e.depth_max);
    r.read("max_features", e.max_features);
    r.read("feature_penalty", e.feature_penalty);
    r.read("threads", e.threads);
    std::string proxy(to_string(e.proxy));
    r.read("proxy", proxy);
    try {
      e.proxy = parse_model_kind(proxy);
    } catch (const Error&) {
      throw Error(ErrorCode::ConfigInvalid, "unknown proxy '" + proxy + "'");
    }
    r.finish();
  }

  if (const auto* t = top.sub("models")) {
    detail::TomlReader r(*t, "models");
    auto& m = cfg.models;
    if (const auto* s = r.sub("decision_tree")) {
      detail::TomlReader sr(*s, "models.decision_tree");
      sr.read("max_depth", m.tree.max_depth);
      sr.read("min_samples_split", m.tree.min_samples_split);
      sr.finish();
    }
    if (const auto* s = r.sub("random_forest")) {
      detail::TomlReader sr(*s, "models.random_forest");
      sr.read("n_estimators", m.forest.n_estimators);
      sr.read("max_depth", m.forest.max_depth);
      sr.read("min_samples_split", m.forest.min_samples_split);
      sr.read("bootstrap", m.forest.bootstrap);
      sr.finish();
    }
    if (const auto* s = r.sub("boosted_trees")) {
      detail::TomlReader sr(*s, "models.boosted_trees");
      sr.read("n_rounds", m.boost.n_rounds);
      sr.read("learning_rate", m.boost.learning_rate);
      sr.read("max_depth", m.boost.max_depth);
      sr.finish();
    }
    if (const auto* s = r.sub("mlp")) {
      detail::TomlReader sr(*s, "models.mlp");
      sr.read("hidden_units", m.mlp.hidden_units);
      sr.read("epochs", m.mlp.epochs);
      sr.read("batch_size", m.mlp.batch_size);
      sr.read("learning_rate", m.mlp.learning_rate);
      std::string activation = "relu", optimizer = "adam";
      sr.read("activation", activation);
      sr.read("optimizer", optimizer);
      if (activation != "relu" && activation != "tanh")
        throw Error(ErrorCode::ConfigInvalid, "models.mlp.activation must be relu or tanh");
      if (optimizer != "adam" && optimizer != "sgd")
        throw Error(ErrorCode::ConfigInvalid, "models.mlp.optimizer must be adam or sgd");
      m.mlp.activation = activation == "relu" ? Activation::Relu : Activation::Tanh;
      m.mlp.optimizer = optimizer == "adam" ? Optimizer::Adam : Optimizer::Sgd;
      sr.finish();
    }
    r.finish();
  }

  if (const auto* t = top.sub("som")) {
    detail::TomlReader r(*t, "som");
    auto& s = cfg.baseline_settings.som;
    r.read("epochs", s.epochs);
    r.read("learning_rate", s.initial_learning_rate);
    r.read("radius", s.initial_radius);
    r.finish();
  }
  if (const auto* t = top.sub("autoencoder")) {
    detail::TomlReader r(*t, "autoencoder");
    auto& a = cfg.baseline_settings.autoencoder;
    r.read("hidden_units", a.hidden_units);
    r.read("epochs", a.epochs);
    r.read("batch_size", a.batch_size);
    r.read("learning_rate", a.learning_rate);
    r.finish();
  }

  top.allow("external_embedding");
  if (const toml::node* node = root.get("external_embedding")) {
    const toml::array* arr = node->as_array();
    if (!arr) throw Error(ErrorCode::ConfigInvalid, "external_embedding must be an array of tables");
    for (const auto& item : *arr) {
      const toml::table* t = item.as_table();
      if (!t) throw Error(ErrorCode::ConfigInvalid, "external_embedding must be an array of tables");
      detail::TomlReader r(*t, "external_embedding");
      std::string name, path;
      r.read("name", name);
      r.read("path", path);
      r.finish();
      cfg.externals.push_back({name, detail::resolve(base_dir, path)});
    }
  }
  top.finish();
  return cfg;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

/// Parses "NAME=path" as given on the command line.
inline ExternalEmbedding parse_embedding_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
    throw Error(ErrorCode::ConfigInvalid, "external embedding must be NAME=path, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

// ---------------------------------------------------------------------------
// Results

struct ScoreCell {
  std::size_t run = 0;
  std::string method;
  std::string tester;
  std::optional<double> balanced_accuracy;
  std::string error;  // empty when the cell succeeded
};

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::optional<RunResult> result;  // nullopt: the run crashed
  std::string error;
};

struct CampaignResult {
  std::vector<std::string> methods;
  std::vector<std::string> testers;
  std::string proxy;
  std::vector<RunRecord> runs;
  std::vector<ScoreCell> scores;

  std::size_t completed_runs() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.result.has_value(); }));
  }
  std::size_t failed_runs() const { return runs.size() - completed_runs(); }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + '"';
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string run_dir_name(std::size_t run) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03zu", run);
  return buf;
}

inline std::string history_csv(const std::vector<GenerationRecord>& history) {
  std::string out =
      "generation,best_fitness,mean_fitness,mean_feature_count,best_feature_count,min_feature_count,max_feature_count\n";
  for (const auto& h : history)
    out += std::to_string(h.generation) + ',' + fmt(h.best_fitness) + ',' + fmt(h.mean_fitness) + ',' +
           fmt(h.mean_feature_count) + ',' + std::to_string(h.best_feature_count) + ',' +
           std::to_string(h.min_feature_count) + ',' + std::to_string(h.max_feature_count) + '\n';
  return out;
}

inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

inline std::vector<GenerationRecord> parse_history_csv(const std::string& text) {
  auto rows = read_csv_rows(text);
  std::vector<GenerationRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 7) throw Error(ErrorCode::InvalidDataset, "history.csv row has wrong width");
    GenerationRecord g;
    g.generation = std::stoul(r[0]);
    g.best_fitness = std::stod(r[1]);
    g.mean_fitness = std::stod(r[2]);
    g.mean_feature_count = std::stod(r[3]);
    g.best_feature_count = std::stoul(r[4]);
    g.min_feature_count = std::stoul(r[5]);
    g.max_feature_count = std::stoul(r[6]);
    out.push_back(g);
  }
  return out;
}

inline std::string scores_csv(const std::vector<ScoreCell>& cells) {
  std::string out = "run,method,tester,balanced_accuracy,error\n";
  for (const auto& c : cells)
    out += std::to_string(c.run) + ',' + csv_field(c.method) + ',' + csv_field(c.tester) + ',' +
           (c.balanced_accuracy ? fmt(*c.balanced_accuracy) : std::string()) + ',' + csv_field(c.error) + '\n';
  return out;
}

inline std::vector<ScoreCell> parse_scores_csv(const std::string& text) {
  auto rows = read_csv_rows(text);
  if (rows.empty()) throw Error(ErrorCode::InvalidDataset, "comparison file is empty");
  const auto& header = rows.front();
  auto col = [&](const char* name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto run = col("run"), method = col("method"), tester = col("tester"), score = col("balanced_accuracy");
  const auto error = col("error");
  if (!run || !method || !tester || !score)
    throw Error(ErrorCode::InvalidDataset, "comparison file needs run,method,tester,balanced_accuracy columns");
  std::vector<ScoreCell> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != header.size())
      throw Error(ErrorCode::InvalidDataset, "comparison row " + std::to_string(i) + " has wrong width");
    ScoreCell c;
    c.run = std::stoul(r[*run]);
    c.method = r[*method];
    c.tester = r[*tester];
    if (!r[*score].empty()) {
      double v = 0.0;
      if (!parse_double(r[*score], v))
        throw Error(ErrorCode::InvalidDataset, "non-numeric score on comparison row " + std::to_string(i));
      c.balanced_accuracy = v;
    }
    if (error) c.error = r[*error];
    out.push_back(std::move(c));
  }
  return out;
}

inline Matrix load_embedding(const fs::path& path, std::size_t expected_rows) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open embedding " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptyFile, "embedding " + path.string() + " is empty");
  const std::size_t width = split_csv_line(line).size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != width)
      throw Error(ErrorCode::InvalidDataset, "embedding row " + std::to_string(rows + 1) + " has wrong width");
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0.0;
      if (!parse_double(cells[j], v)) throw NonNumericCellError(rows + 1, "column " + std::to_string(j), cells[j]);
      values.push_back(v);
    }
    ++rows;
  }
  if (rows != expected_rows)
    throw Error(ErrorCode::ConfigInvalid, "embedding " + path.string() + " has " + std::to_string(rows) +
                                              " rows, dataset has " + std::to_string(expected_rows));
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * width + j];
  return m;
}

inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b = {}) {
  Matrix out(static_cast<Eigen::Index>(a.size() + b.size()), m.cols());
  Eigen::Index r = 0;
  for (auto i : a) out.row(r++) = m.row(static_cast<Eigen::Index>(i));
  for (auto i : b) out.row(r++) = m.row(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Running

/// Everything a campaign needs besides the config itself, loaded up front so
/// that config errors fail before any run starts.
struct CampaignInputs {
  Dataset dataset;
  Grammar grammar;
  std::vector<Matrix> embeddings;  // parallel to config.externals
};

inline CampaignInputs load_inputs(const ExperimentConfig& config) {
  config.validate();
  Dataset ds = config.synthetic ? synth_interaction(config.synthetic->n, config.synthetic->noise, config.synthetic->seed)
                                : load_csv(config.dataset_path.string(), config.label_column);
  Grammar g = config.grammar_path.empty()
                  ? default_grammar(ds.cols(), config.evolution.max_features)
                  : parse_grammar(detail::read_text(config.grammar_path));
  std::vector<Matrix> embeddings;
  for (const auto& e : config.externals) embeddings.push_back(detail::load_embedding(e.path, ds.rows()));
  return {std::move(ds), std::move(g), std::move(embeddings)};
}

namespace detail {

class CampaignRunner {
 public:
  CampaignRunner(const ExperimentConfig& cfg, const CampaignInputs& in, std::ostream* log)
      : cfg_(cfg), in_(in), log_(log) {}

  CampaignResult run() {
    CampaignResult res;
    res.methods = cfg_.methods();
    for (auto t : cfg_.testers) res.testers.emplace_back(to_string(t));
    res.proxy = std::string(to_string(cfg_.evolution.proxy));

    fs::create_directories(cfg_.output_dir);
    nlohmann::json manifest{{"methods", res.methods}, {"testers", res.testers}, {"proxy", res.proxy},
                            {"runs", cfg_.runs}, {"config", cfg_.to_json()}};
    write_text(cfg_.output_dir / "campaign.json", manifest.dump(2) + "\n");

    for (std::size_t i = 0; i < cfg_.runs; ++i) {
      RunRecord rec = run_one(i, res);
      if (log_) {
        if (rec.result)
          *log_ << "run " << i + 1 << "/" << cfg_.runs << ": best fitness " << *rec.result->best.fitness
                << ", " << rec.result->best.program.size() << " features, " << rec.result->wall_seconds
                << " s\n";
        else
          *log_ << "run " << i + 1 << "/" << cfg_.runs << " failed: " << rec.error << '\n';
      }
      res.runs.push_back(std::move(rec));
      write_text(cfg_.output_dir / "comparison.csv", scores_csv(res.scores));
    }
    return res;
  }

 private:
  RunRecord run_one(std::size_t i, CampaignResult& res) {
    RunRecord rec;
    rec.run = i;
    rec.seed = cfg_.base_seed + i;
    const fs::path dir = cfg_.output_dir / run_dir_name(i);
    fs::create_directories(dir);
    nlohmann::json echo = cfg_.to_json();
    echo["run"] = i;
    echo["seed"] = rec.seed;
    write_text(dir / "config.json", echo.dump(2) + "\n");
    fs::remove(dir / "error.txt");

    std::vector<ScoreCell> cells;
    std::optional<SplitDataset> split_data;
    try {
      split_data = split(in_.dataset, rec.seed);
      write_text(dir / "split.json", split_manifest(*split_data).dump() + "\n");
      EvolutionConfig ec = cfg_.evolution;
      ec.seed = rec.seed;
      rec.result = run_evolution(ec, in_.grammar, *split_data, cfg_.models);
    } catch (const std::exception& e) {
      rec.error = e.what();
      write_text(dir / "error.txt", rec.error + "\n");
      for (const auto& m : res.methods)
        for (const auto& t : res.testers) cells.push_back({i, m, t, std::nullopt, "run failed: " + rec.error});
      write_text(dir / "scores.csv", scores_csv(cells));
      res.scores.insert(res.scores.end(), cells.begin(), cells.end());
      return rec;
    }

    const RunResult& r = *rec.result;
    write_text(dir / "history.csv", history_csv(r.history));
    write_text(dir / "best_phenotype.txt", render(r.best.program) + "\n");
    nlohmann::json best{{"fitness", *r.best.fitness},
                        {"feature_count", r.best.program.size()},
                        {"genotype_hash", r.best.program.source_genotype_hash},
                        {"depth_bound", r.best.genotype.depth_bound},
                        {"genes", r.best.genotype.genes},
                        {"wall_seconds", r.wall_seconds}};
    write_text(dir / "best.json", best.dump(2) + "\n");

    const SplitDataset& s = *split_data;
    const Dataset fit = concat(s.train, s.validation);
    const std::uint64_t test_seed = derive_seed({rec.seed, 0x7e57u});
    const std::size_t k = r.best.program.size();

    score_method(cells, i, kRawMethod, test_seed, [&] { return std::pair{fit.features, s.test.features}; }, fit, s);
    score_method(cells, i, kFedoraMethod, test_seed,
                 [&] { return std::pair{evaluate(r.best.program, fit.features), evaluate(r.best.program, s.test.features)}; },
                 fit, s);
    for (auto b : cfg_.baselines)
      score_method(cells, i, std::string(to_string(b)), test_seed,
                   [&] {
                     FittedBaseline model = fit_baseline(b, k, fit.features, cfg_.baseline_settings,
                                                         derive_seed({rec.seed, 0xba5eu, static_cast<std::uint64_t>(b)}));
                     return std::pair{model.transform(fit.features), model.transform(s.test.features)};
                   },
                   fit, s);
    for (std::size_t e = 0; e < cfg_.externals.size(); ++e)
      score_method(cells, i, cfg_.externals[e].name, test_seed,
                   [&] {
                     return std::pair{take_rows(in_.embeddings[e], s.train_rows, s.validation_rows),
                                      take_rows(in_.embeddings[e], s.test_rows)};
                   },
                   fit, s);

    write_text(dir / "scores.csv", scores_csv(cells));
    res.scores.insert(res.scores.end(), cells.begin(), cells.end());
    return rec;
  }

  // A failing transform marks every tester cell of the method; a failing
  // tester marks only its own cell.
  template <typename Transform>
  void score_method(std::vector<ScoreCell>& cells, std::size_t run, const std::string& method,
                    std::uint64_t seed, Transform&& transform, const Dataset& fit, const SplitDataset& s) {
    std::pair<Matrix, Matrix> xs;
    try {
      xs = transform();
    } catch (const std::exception& e) {
      for (auto t : cfg_.testers) cells.push_back({run, method, std::string(to_string(t)), std::nullopt, e.what()});
      return;
    }
    for (auto t : cfg_.testers) {
      ScoreCell c{run, method, std::string(to_string(t)), std::nullopt, {}};
      try {
        c.balanced_accuracy =
            score_testers(xs.first, fit.labels, xs.second, s.test.labels, {t}, cfg_.models, seed).front().balanced_accuracy;
      } catch (const std::exception& e) {
        c.error = e.what();
      }
      cells.push_back(std::move(c));
    }
  }

  const ExperimentConfig& cfg_;
  const CampaignInputs& in_;
  std::ostream* log_;
};

}  // namespace detail

/// Runs every configured run in order, writing archives as it goes. Config
/// and input errors throw before the first run; errors inside a run are
/// recorded in that run's record and score cells.
inline CampaignResult run_campaign(const ExperimentConfig& config, std::ostream* log = nullptr) {
  const CampaignInputs inputs = load_inputs(config);
  return detail::CampaignRunner(config, inputs, log).run();
}

/// Rebuilds a campaign result from its directory (history, best phenotype and
/// scores of every run).
inline CampaignResult load_campaign(const fs::path& dir) {
  const fs::path manifest_path = dir / "campaign.json";
  if (!fs::exists(manifest_path)) throw Error(ErrorCode::Io, "no campaign.json in " + dir.string());
  const auto manifest = nlohmann::json::parse(detail::read_text(manifest_path));
  CampaignResult res;
  res.methods = manifest.at("methods").get<std::vector<std::string>>();
  res.testers = manifest.at("testers").get<std::vector<std::string>>();
  res.proxy = manifest.at("proxy").get<std::string>();
  const auto runs = manifest.at("runs").get<std::size_t>();
  for (std::size_t i = 0; i < runs; ++i) {
    const fs::path run_dir = dir / detail::run_dir_name(i);
    if (!fs::exists(run_dir / "scores.csv")) continue;  // never reached
    RunRecord rec;
    rec.run = i;
    const auto echo = nlohmann::json::parse(detail::read_text(run_dir / "config.json"));
    rec.seed = echo.at("seed").get<std::uint64_t>();
    if (fs::exists(run_dir / "error.txt")) {
      rec.error = detail::read_text(run_dir / "error.txt");
    } else {
      RunResult r;
      r.history = detail::parse_history_csv(detail::read_text(run_dir / "history.csv"));
      const auto best = nlohmann::json::parse(detail::read_text(run_dir / "best.json"));
      r.best.fitness = best.at("fitness").get<double>();
      r.best.genotype.genes = best.at("genes").get<std::vector<std::vector<int>>>();
      r.best.genotype.depth_bound = best.at("depth_bound").get<std::size_t>();
      r.wall_seconds = best.at("wall_seconds").get<double>();
      std::string phenotype = detail::read_text(run_dir / "best_phenotype.txt");
      while (!phenotype.empty() && (phenotype.back() == '\n' || phenotype.back() == '\r')) phenotype.pop_back();
      r.best.program = parse_program(phenotype);
      r.best.program.source_genotype_hash = best.at("genotype_hash").get<std::string>();
      rec.result = std::move(r);
    }
    auto cells = detail::parse_scores_csv(detail::read_text(run_dir / "scores.csv"));
    res.scores.insert(res.scores.end(), cells.begin(), cells.end());
    res.runs.push_back(std::move(rec));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Summaries

struct SummaryFiles {
  std::vector<fs::path> written;
};

/// Writes fitness_curves.csv, feature_evolution.csv, complexity_ratios.csv,
/// feature_counts.csv and comparison.csv (plus SVG renderings when asked).
/// Crashed runs are left out of the aggregates.
inline SummaryFiles emit_summary(const CampaignResult& campaign, const fs::path& outdir, bool with_svg = true) {
  std::vector<const RunRecord*> done;
  for (const auto& r : campaign.runs)
    if (r.result) done.push_back(&r);
  if (done.empty()) throw Error(ErrorCode::NoCompletedRuns, "campaign has no completed runs");
  fs::create_directories(outdir);
  SummaryFiles files;
  auto emit = [&](const char* name, const std::string& text) {
    detail::write_text(outdir / name, text);
    files.written.push_back(outdir / name);
  };
  using detail::fmt;

  std::size_t gens = done.front()->result->history.size();
  for (const auto* r : done) gens = std::min(gens, r->result->history.size());
  const double runs = static_cast<double>(done.size());
  auto mean_over_runs = [&](std::size_t g, auto field) {
    double sum = 0.0;
    for (const auto* r : done) sum += static_cast<double>(field(r->result->history[g]));
    return sum / runs;
  };

  std::string curves = "generation,mean_population_fitness,mean_best_fitness\n";
  std::string features = "generation,mean_population_features,mean_best_features,mean_min_features,mean_max_features\n";
  std::vector<svg::Series> fitness_series{{"population mean", {}}, {"best", {}}};
  std::vector<svg::Series> feature_series{{"population mean", {}}, {"best", {}}, {"min", {}}, {"max", {}}};
  for (std::size_t g = 0; g < gens; ++g) {
    const double pop = mean_over_runs(g, [](const auto& h) { return h.mean_fitness; });
    const double best = mean_over_runs(g, [](const auto& h) { return h.best_fitness; });
    curves += std::to_string(g) + ',' + fmt(pop) + ',' + fmt(best) + '\n';
    fitness_series[0].values.push_back(pop);
    fitness_series[1].values.push_back(best);
    const double f[4] = {mean_over_runs(g, [](const auto& h) { return h.mean_feature_count; }),
                         mean_over_runs(g, [](const auto& h) { return h.best_feature_count; }),
                         mean_over_runs(g, [](const auto& h) { return h.min_feature_count; }),
                         mean_over_runs(g, [](const auto& h) { return h.max_feature_count; })};
    features += std::to_string(g);
    for (int s = 0; s < 4; ++s) {
      features += ',' + fmt(f[s]);
      feature_series[static_cast<std::size_t>(s)].values.push_back(f[s]);
    }
    features += '\n';
  }
  emit("fitness_curves.csv", curves);
  emit("feature_evolution.csv", features);

  std::string ratios = "run,n_features,n_original,n_engineered,n_complex,r_o,r_e,r_c\n";
  std::string counts = "run,n_features\n";
  for (const auto* r : done) {
    const auto rep = complexity_report(r->result->best.program);
    ratios += std::to_string(r->run) + ',' + std::to_string(rep.n_total) + ',' + std::to_string(rep.n_selected) + ',' +
              std::to_string(rep.n_engineered) + ',' + std::to_string(rep.n_complex) + ',' + fmt(rep.r_o) + ',' +
              fmt(rep.r_e) + ',' + fmt(rep.r_c) + '\n';
    counts += std::to_string(r->run) + ',' + std::to_string(rep.n_total) + '\n';
  }
  emit("complexity_ratios.csv", ratios);
  emit("feature_counts.csv", counts);
  emit("comparison.csv", detail::scores_csv(campaign.scores));

  if (with_svg) {
    emit("fitness_curves.svg", svg::line_chart("Fitness over generations", "generation", "1 - balanced accuracy",
                                               fitness_series));
    emit("feature_evolution.svg",
         svg::line_chart("Feature count over generations", "generation", "features", feature_series));
    std::vector<svg::BoxGroup> boxes;
    for (const auto& t : campaign.testers)
      for (const auto& m : campaign.methods) {
        svg::BoxGroup g{m + " / " + t, {}};
        for (const auto& c : campaign.scores)
          if (c.method == m && c.tester == t && c.balanced_accuracy) g.values.push_back(*c.balanced_accuracy);
        boxes.push_back(std::move(g));
      }
    emit("comparison.svg", svg::box_plot("Test balanced accuracy", "balanced accuracy", boxes));
  }
  return files;
}

// ---------------------------------------------------------------------------
// Statistics over one tester

/// Groups the successful scores of one tester by method, in order of first
/// appearance.
inline stats::ScoreGroups groups_for_tester(const std::vector<ScoreCell>& cells, const std::string& tester) {
  stats::ScoreGroups groups;
  bool any = false;
  for (const auto& c : cells) {
    if (c.tester != tester) continue;
    any = true;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.name == c.method; });
    if (it == groups.end()) {
      groups.push_back({c.method, {}});
      it = groups.end() - 1;
    }
    if (c.balanced_accuracy) it->values.push_back(*c.balanced_accuracy);
  }
  if (!any) throw Error(ErrorCode::UnknownTester, "no scores for tester '" + tester + "'");
  // Methods whose cells all failed cannot enter a rank test.
  groups.erase(std::remove_if(groups.begin(), groups.end(), [](const auto& g) { return g.values.empty(); }),
               groups.end());
  return groups;
}

struct StatsOutput {
  std::string tester;
  stats::ComparisonReport report;
  std::vector<fs::path> written;
};

/// Runs the comparison report for one tester of a comparison file and writes
/// kruskal.csv, dunn.csv and dunn_effects.txt to `outdir`. Without a tester
/// name the proxy recorded in a sibling campaign.json is used.
inline StatsOutput stats_command(const fs::path& comparison_csv, std::optional<std::string> tester,
                                 const fs::path& outdir, double alpha = 0.05) {
  const auto cells = detail::parse_scores_csv(detail::read_text(comparison_csv));
  std::string experiment;
  const fs::path manifest = comparison_csv.parent_path() / "campaign.json";
  if (fs::exists(manifest)) experiment = nlohmann::json::parse(detail::read_text(manifest)).value("proxy", "");
  if (!tester) {
    if (experiment.empty())
      throw Error(ErrorCode::ConfigInvalid, "no tester given and no campaign.json next to " + comparison_csv.string());
    tester = experiment;
  } else {
    // Accept short forms (DT, RF, XGB, MLP) for known models.
    try {
      tester = std::string(to_string(parse_model_kind(*tester)));
    } catch (const Error&) {
    }
  }

  StatsOutput out;
  out.tester = *tester;
  out.report = stats::comparison_report(groups_for_tester(cells, *tester), alpha);
  const auto& rep = out.report;
  fs::create_directories(outdir);
  using detail::fmt;

  std::string kruskal = "experiment,tester,h,p_value,df,groups,all_identical\n";
  kruskal += detail::csv_field(experiment) + ',' + detail::csv_field(*tester) + ',' + fmt(rep.omnibus.h) + ',' +
             fmt(rep.omnibus.p) + ',' + std::to_string(rep.omnibus.df) + ',' + std::to_string(rep.names.size()) +
             ',' + (rep.omnibus.all_identical ? "true" : "false") + '\n';
  detail::write_text(outdir / "kruskal.csv", kruskal);
  out.written.push_back(outdir / "kruskal.csv");

  std::string dunn = "method_a,method_b,z,p_raw,p_adjusted,cliffs_delta,magnitude,significant\n";
  if (rep.posthoc_performed)
    for (std::size_t i = 1; i < rep.names.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        dunn += detail::csv_field(rep.names[i]) + ',' + detail::csv_field(rep.names[j]) + ',' + fmt(rep.dunn.z[i][j]) +
                ',' + fmt(rep.dunn.p_raw[i][j]) + ',' + fmt(rep.dunn.p_adjusted[i][j]) + ',' +
                fmt(rep.effects[i][j].delta) + ',' + std::string(stats::to_string(rep.effects[i][j].magnitude)) + ',' +
                (rep.significant(i, j) ? "true" : "false") + '\n';
  detail::write_text(outdir / "dunn.csv", dunn);
  out.written.push_back(outdir / "dunn.csv");

  detail::write_text(outdir / "dunn_effects.txt", stats::render_effect_table(rep, *tester));
  out.written.push_back(outdir / "dunn_effects.txt");
  return out;
}

}  // namespace fedora
