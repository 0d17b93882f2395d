#pragma once

// The wrapper loop. Individuals are SGE genotypes mapped to feature programs;
// a program's fitness is the validation error (1 - balanced accuracy) of a
// proxy classifier trained on the program-transformed training subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "fedora/dataset.hpp"
#include "fedora/expression.hpp"
#include "fedora/grammar.hpp"
#include "fedora/models/registry.hpp"
#include "fedora/random.hpp"
#include "fedora/sge.hpp"

namespace fedora {

struct EvolutionConfig {
  std::size_t population_size = 200;
  std::size_t generations = 100;
  double elitism_fraction = 0.10;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  std::size_t tournament_size = 3;
  std::size_t depth_min = 3;
  std::size_t depth_max = 10;
  ModelKind proxy = ModelKind::DecisionTree;
  std::uint64_t seed = 0;
  std::size_t max_features = 60;
  /// Optional parsimony term: fitness += feature_penalty * features / max_features.
  double feature_penalty = 0.0;
  std::size_t threads = 1;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
    if (population_size < 2) fail("population_size must be >= 2");
    if (generations < 1) fail("generations must be >= 1");
    if (!(elitism_fraction > 0.0 && elitism_fraction < 1.0)) fail("elitism_fraction must be in (0, 1)");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) fail("crossover_rate must be in [0, 1]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) fail("mutation_rate must be in [0, 1]");
    if (tournament_size < 1) fail("tournament_size must be >= 1");
    if (depth_min < 1 || depth_min > depth_max) fail("need 1 <= depth_min <= depth_max");
    if (proxy == ModelKind::Mlp) fail("proxy must be a tree model (decision_tree, random_forest, boosted_trees)");
    if (max_features < 1) fail("max_features must be >= 1");
    if (feature_penalty < 0.0) fail("feature_penalty must be >= 0");
    if (threads < 1) fail("threads must be >= 1");
  }

  std::size_t elite_count() const {
    return static_cast<std::size_t>(std::ceil(elitism_fraction * static_cast<double>(population_size)));
  }
};

struct Individual {
  Genotype genotype;
  FeatureProgram program;
  std::optional<double> fitness;
  std::uint64_t id = 0;  // creation order within the run
};

/// Selection order: lower fitness, then fewer features, then created earlier.
inline bool better(const Individual& a, const Individual& b) {
  const double fa = a.fitness.value_or(2.0);
  const double fb = b.fitness.value_or(2.0);
  return std::make_tuple(fa, a.program.size(), a.id) < std::make_tuple(fb, b.program.size(), b.id);
}

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double mean_feature_count = 0.0;
  std::size_t best_feature_count = 0;
  std::size_t min_feature_count = 0;
  std::size_t max_feature_count = 0;
};

struct RunResult {
  Individual best;
  std::vector<GenerationRecord> history;
  EvolutionConfig config;
  double wall_seconds = 0.0;
};

/// Fitness of a feature program: 1 - balanced accuracy of the proxy on the
/// transformed validation subset. A validation subset with a single class
/// scores the worst fitness, 1.
inline double evaluate_individual(const FeatureProgram& program, const SplitDataset& split,
                                  ModelKind proxy, const ModelSettings& models, std::uint64_t seed) {
  const Matrix train = evaluate(program, split.train.features);
  const Matrix validation = evaluate(program, split.validation.features);
  Labels predicted = fit_predict(proxy, models, train, split.train.labels, validation, seed);
  try {
    return 1.0 - balanced_accuracy(split.validation.labels, predicted);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingleClassTruth) throw;
    std::clog << "warning: single-class validation subset, assigning worst fitness\n";
    return 1.0;
  }
}

using GenerationObserver = std::function<void(std::size_t generation, const std::vector<Individual>&)>;

namespace detail {

class EvolutionRun {
 public:
  EvolutionRun(const EvolutionConfig& config, const Grammar& grammar, const SplitDataset& split,
               const ModelSettings& models)
      : cfg_(config), grammar_(grammar), split_(split), models_(models) {}

  RunResult run(const GenerationObserver& observer) {
    const auto started = std::chrono::steady_clock::now();
    RunResult result;
    result.config = cfg_;

    std::vector<Individual> population;
    Rng init(derive_seed({cfg_.seed, 0, 0x1417u}));
    for (std::size_t i = 0; i < cfg_.population_size; ++i)
      population.push_back(make(random_genotype(grammar_, cfg_.depth_min, cfg_.depth_max, init)));
    evaluate_pending(population, 0);
    result.history.push_back(record(population, 0));
    if (observer) observer(0, population);

    for (std::size_t gen = 1; gen < cfg_.generations; ++gen) {
      population = breed(population, gen);
      evaluate_pending(population, gen);
      result.history.push_back(record(population, gen));
      if (observer) observer(gen, population);
    }

    result.best = *std::min_element(population.begin(), population.end(), better);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
  }

 private:
  Individual make(Genotype g) {
    Individual ind;
    ind.program = map_genotype(grammar_, g);
    ind.genotype = std::move(g);
    ind.id = next_id_++;
    return ind;
  }

  double fitness_of(const FeatureProgram& program, std::uint64_t seed) const {
    if (program.features.empty() || program.features.size() > cfg_.max_features) return 1.0;
    double f = evaluate_individual(program, split_, cfg_.proxy, models_, seed);
    if (cfg_.feature_penalty > 0.0)
      f += cfg_.feature_penalty * static_cast<double>(program.features.size()) /
           static_cast<double>(cfg_.max_features);
    return f;
  }

  // Elites keep their cached fitness; everything else is evaluated with a seed
  // derived from (run seed, generation, slot) so thread count cannot matter.
  void evaluate_pending(std::vector<Individual>& pop, std::size_t gen) const {
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (!pop[i].fitness) pending.push_back(i);
    auto work = [&](std::size_t worker, std::size_t workers) {
      for (std::size_t k = worker; k < pending.size(); k += workers) {
        const std::size_t i = pending[k];
        pop[i].fitness = fitness_of(pop[i].program, derive_seed({cfg_.seed, gen, i}));
      }
    };
    const std::size_t workers = std::min(cfg_.threads, std::max<std::size_t>(1, pending.size()));
    if (workers <= 1) {
      work(0, 1);
      return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
      threads.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const Individual& tournament(const std::vector<Individual>& pop, Rng& rng) const {
    const Individual* winner = &pop[uniform_index(rng, pop.size())];
    for (std::size_t t = 1; t < cfg_.tournament_size; ++t) {
      const Individual& challenger = pop[uniform_index(rng, pop.size())];
      if (better(challenger, *winner)) winner = &challenger;
    }
    return *winner;
  }

  std::vector<Individual> breed(std::vector<Individual> pop, std::size_t gen) {
    std::sort(pop.begin(), pop.end(), better);
    const std::size_t elites = std::min(cfg_.elite_count(), pop.size());
    std::vector<Individual> next(pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(elites));

    Rng rng(derive_seed({cfg_.seed, gen, 0xB4EEDu}));
    while (next.size() < cfg_.population_size) {
      const Individual& a = tournament(pop, rng);
      const Individual& b = tournament(pop, rng);
      Genotype c1 = a.genotype;
      Genotype c2 = b.genotype;
      if (coin(rng, cfg_.crossover_rate)) std::tie(c1, c2) = crossover(grammar_, a.genotype, b.genotype, rng);
      c1 = mutate(grammar_, c1, cfg_.mutation_rate, rng);
      c2 = mutate(grammar_, c2, cfg_.mutation_rate, rng);
      next.push_back(make(std::move(c1)));
      if (next.size() < cfg_.population_size) next.push_back(make(std::move(c2)));
    }
    return next;
  }

  static GenerationRecord record(const std::vector<Individual>& pop, std::size_t gen) {
    GenerationRecord r;
    r.generation = gen;
    const Individual& best = *std::min_element(pop.begin(), pop.end(), better);
    r.best_fitness = *best.fitness;
    r.best_feature_count = best.program.size();
    r.min_feature_count = pop.front().program.size();
    r.max_feature_count = pop.front().program.size();
    double fitness_sum = 0.0;
    double feature_sum = 0.0;
    for (const auto& ind : pop) {
      fitness_sum += *ind.fitness;
      feature_sum += static_cast<double>(ind.program.size());
      r.min_feature_count = std::min(r.min_feature_count, ind.program.size());
      r.max_feature_count = std::max(r.max_feature_count, ind.program.size());
    }
    r.mean_fitness = fitness_sum / static_cast<double>(pop.size());
    r.mean_feature_count = feature_sum / static_cast<double>(pop.size());
    return r;
  }

  const EvolutionConfig& cfg_;
  const Grammar& grammar_;
  const SplitDataset& split_;
  const ModelSettings& models_;
  std::uint64_t next_id_ = 0;
};

}  // namespace detail

/// Generational SGE. Generation 0 is the random initial population; each later
/// generation keeps the top ceil(elitism_fraction * population) individuals
/// unchanged and fills the rest with tournament-selected, crossed-over and
/// mutated offspring. History holds one record per generation.
inline RunResult run_evolution(const EvolutionConfig& config, const Grammar& grammar,
                               const SplitDataset& split, const ModelSettings& models = {},
                               const GenerationObserver& observer = {}) {
  config.validate();
  return detail::EvolutionRun(config, grammar, split, models).run(observer);
}

struct TesterScore {
  ModelKind tester;
  double balanced_accuracy;
};

/// Trains each testing model on (fit_x, fit_y) and scores it on the test rows.
inline std::vector<TesterScore> score_testers(const Matrix& fit_x, const Labels& fit_y,
                                              const Matrix& test_x, const Labels& test_y,
                                              const std::vector<ModelKind>& testers,
                                              const ModelSettings& models, std::uint64_t seed) {
  std::vector<TesterScore> out;
  for (auto t : testers) {
    Labels predicted = fit_predict(t, models, fit_x, fit_y, test_x, derive_seed({seed, static_cast<std::uint64_t>(t)}));
    out.push_back({t, balanced_accuracy(test_y, predicted)});
  }
  return out;
}

/// Applies the program to all three subsets, trains every testing model on
/// train + validation and scores it on test.
inline std::vector<TesterScore> test_best(const FeatureProgram& program, const SplitDataset& split,
                                          const std::vector<ModelKind>& testers,
                                          const ModelSettings& models, std::uint64_t seed) {
  const Dataset fit = concat(split.train, split.validation);
  return score_testers(evaluate(program, fit.features), fit.labels, evaluate(program, split.test.features),
                       split.test.labels, testers, models, seed);
}

/// The program that selects every input column unchanged.
inline FeatureProgram identity_program(std::size_t columns) {
  FeatureProgram p;
  for (std::size_t j = 0; j < columns; ++j) p.features.push_back(ExpressionTree::var(j));
  return p;
}

}  // namespace fedora
