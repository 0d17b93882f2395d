// Command-line front end: evolve, summarize, stats, plus two helpers for
// generating synthetic data and the default grammar.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedora/campaign.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;

struct EvolveArgs {
  std::string config;
  std::string grammar;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> threads;
  std::string output;
  std::vector<std::string> embeddings;
  bool quiet = false;
};

int evolve(const EvolveArgs& a) {
  fedora::ExperimentConfig cfg = fedora::load_config(a.config);
  if (!a.grammar.empty()) cfg.grammar_path = a.grammar;
  if (a.seed) cfg.base_seed = *a.seed;
  if (a.runs) cfg.runs = *a.runs;
  if (a.threads) cfg.evolution.threads = *a.threads;
  if (!a.output.empty()) cfg.output_dir = a.output;
  for (const auto& e : a.embeddings) cfg.externals.push_back(fedora::parse_embedding_arg(e));

  const auto result = fedora::run_campaign(cfg, a.quiet ? nullptr : &std::clog);
  if (result.completed_runs() > 0) fedora::emit_summary(result, cfg.output_dir, cfg.svg);
  std::size_t failed_cells = 0;
  for (const auto& c : result.scores)
    if (!c.balanced_accuracy) ++failed_cells;
  std::cout << "campaign: " << result.completed_runs() << "/" << result.runs.size() << " runs completed, "
            << failed_cells << " failed score cells, output in " << cfg.output_dir.string() << '\n';
  return result.failed_runs() > 0 ? kPartialFailure : kOk;
}

int summarize(const std::string& campaign, const std::string& out, bool svg) {
  const auto result = fedora::load_campaign(campaign);
  const auto files = fedora::emit_summary(result, out.empty() ? campaign : out, svg);
  for (const auto& f : files.written) std::cout << f.string() << '\n';
  return result.failed_runs() > 0 ? kPartialFailure : kOk;
}

int stats(const std::string& comparison, const std::string& tester, const std::string& out, double alpha) {
  const std::filesystem::path csv(comparison);
  const auto res = fedora::stats_command(csv, tester.empty() ? std::nullopt : std::optional<std::string>(tester),
                                         out.empty() ? csv.parent_path() : std::filesystem::path(out), alpha);
  std::cout << "tester: " << res.tester << '\n' << fedora::stats::render_effect_table(res.report, res.tester);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grammar-guided feature engineering experiments"};
  app.require_subcommand(1);

  EvolveArgs ev;
  auto* evolve_cmd = app.add_subcommand("evolve", "Run a campaign described by a TOML config");
  evolve_cmd->add_option("--config", ev.config, "Experiment config (TOML)")->required()->check(CLI::ExistingFile);
  evolve_cmd->add_option("--grammar", ev.grammar, "BNF grammar overriding the config")->check(CLI::ExistingFile);
  evolve_cmd->add_option("--seed", ev.seed, "Base seed overriding the config");
  evolve_cmd->add_option("--runs", ev.runs, "Number of runs overriding the config");
  evolve_cmd->add_option("--threads", ev.threads, "Fitness evaluation threads");
  evolve_cmd->add_option("--output", ev.output, "Campaign directory overriding the config");
  evolve_cmd->add_option("--external-embedding", ev.embeddings,
                         "Precomputed embedding NAME=path.csv, row-aligned with the dataset");
  evolve_cmd->add_flag("--quiet", ev.quiet, "No per-run progress lines");

  std::string campaign, summary_out;
  bool no_svg = false;
  auto* summarize_cmd = app.add_subcommand("summarize", "Emit summary tables for a campaign directory");
  summarize_cmd->add_option("--campaign", campaign, "Campaign directory")->required()->check(CLI::ExistingDirectory);
  summarize_cmd->add_option("--out", summary_out, "Output directory (default: the campaign directory)");
  summarize_cmd->add_flag("--no-svg", no_svg, "Skip SVG renderings");

  std::string comparison, tester, stats_out;
  double alpha = 0.05;
  auto* stats_cmd = app.add_subcommand("stats", "Kruskal-Wallis, Dunn and Cliff's delta over one tester");
  stats_cmd->add_option("--comparison", comparison, "comparison.csv")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--tester", tester, "Tester name (default: the campaign's proxy)");
  stats_cmd->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  stats_cmd->add_option("--out", stats_out, "Output directory (default: next to the comparison file)");

  std::size_t synth_n = 600;
  double synth_noise = 0.05;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic interaction dataset as CSV");
  synth_cmd->add_option("--n", synth_n, "Rows");
  synth_cmd->add_option("--noise", synth_noise, "Label flip probability")->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--seed", synth_seed, "Seed");
  synth_cmd->add_option("--out", synth_out, "Output CSV")->required();

  std::size_t vars = 0, max_features = 60;
  auto* grammar_cmd = app.add_subcommand("grammar", "Print the default grammar for a number of inputs");
  grammar_cmd->add_option("--vars", vars, "Input columns")->required()->check(CLI::PositiveNumber);
  grammar_cmd->add_option("--max-features", max_features, "Largest feature list")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*evolve_cmd) return evolve(ev);
    if (*summarize_cmd) return summarize(campaign, summary_out, !no_svg);
    if (*stats_cmd) return stats(comparison, tester, stats_out, alpha);
    if (*synth_cmd) {
      fedora::save_csv(synth_out, fedora::synth_interaction(synth_n, synth_noise, synth_seed));
      return kOk;
    }
    if (*grammar_cmd) {
      std::cout << fedora::default_grammar_text(vars, max_features);
      return kOk;
    }
  } catch (const fedora::Error& e) {
    std::cerr << "error [" << fedora::to_string(e.code()) << "]: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
