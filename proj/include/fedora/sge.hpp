#pragma once

// Structured Grammatical Evolution: one integer list per nonterminal, each
// entry choosing a production the next time that nonterminal is expanded.
//
// Depth control works by masking. A nonterminal expanded at depth k (root = 1)
// under bound D may only use productions whose shallowest completion fits in
// the remaining D - k + 1 levels. When some productions are masked the gene
// selects allowed[gene % |allowed|]; the gene value itself is left untouched.

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fedora/error.hpp"
#include "fedora/expression.hpp"
#include "fedora/grammar.hpp"
#include "fedora/random.hpp"

namespace fedora {

struct Genotype {
  std::vector<std::vector<int>> genes;  // indexed by nonterminal
  std::size_t depth_bound = 10;

  bool operator==(const Genotype&) const = default;
};

struct Derivation {
  std::vector<std::string> tokens;   // terminal yield, left to right
  std::size_t depth = 0;             // nonterminal levels on the longest path
  std::size_t repairs = 0;           // choices redirected by depth masking
  std::vector<std::size_t> consumed; // genes read per nonterminal

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += ' ';
      out += tokens[i];
    }
    return out;
  }
};

namespace detail {

inline std::vector<std::size_t> allowed_productions(const Grammar& g, std::size_t nt,
                                                    std::size_t budget) {
  std::vector<std::size_t> allowed;
  for (std::size_t p = 0; p < g.productions(nt).size(); ++p)
    if (g.production_min_depth(nt, p) <= budget) allowed.push_back(p);
  return allowed;
}

inline void check_shape(const Grammar& g, const Genotype& x) {
  if (x.genes.size() != g.size())
    throw Error(ErrorCode::GrammarMismatch, "genotype has " + std::to_string(x.genes.size()) +
                                                " gene lists, grammar has " +
                                                std::to_string(g.size()) + " nonterminals");
}

// Leftmost derivation. With `extend` set, exhausted gene lists grow with
// uniformly drawn values instead of failing.
class Deriver {
 public:
  Deriver(const Grammar& g, std::vector<std::vector<int>>& genes, std::size_t bound, Rng* extend)
      : grammar_(g), genes_(genes), bound_(bound), extend_(extend) {
    result_.consumed.assign(g.size(), 0);
  }

  Derivation run() {
    if (grammar_.min_depth(grammar_.start()) > bound_)
      throw Error(ErrorCode::UnsatisfiableDepth,
                  "start symbol needs depth " + std::to_string(grammar_.min_depth(grammar_.start())) +
                      " but the bound is " + std::to_string(bound_));
    expand(grammar_.start(), 1);
    return std::move(result_);
  }

 private:
  void expand(std::size_t nt, std::size_t depth) {
    result_.depth = std::max(result_.depth, depth);
    const auto& prods = grammar_.productions(nt);
    auto& list = genes_[nt];
    std::size_t& cursor = result_.consumed[nt];
    if (cursor >= list.size()) {
      if (!extend_)
        throw Error(ErrorCode::InvalidGene, "gene list of <" + grammar_.name(nt) + "> exhausted");
      list.push_back(static_cast<int>(uniform_index(*extend_, prods.size())));
    }
    const int gene = list[cursor++];
    if (gene < 0 || static_cast<std::size_t>(gene) >= prods.size())
      throw Error(ErrorCode::InvalidGene, "gene " + std::to_string(gene) + " for <" +
                                              grammar_.name(nt) + "> with " +
                                              std::to_string(prods.size()) + " productions");
    std::size_t choice = static_cast<std::size_t>(gene);
    auto allowed = allowed_productions(grammar_, nt, bound_ - depth + 1);
    if (allowed.size() != prods.size()) {
      std::size_t masked = allowed[choice % allowed.size()];
      if (masked != choice) ++result_.repairs;
      choice = masked;
    }
    for (const auto& s : prods[choice]) {
      if (s.nonterminal)
        expand(s.index, depth + 1);
      else
        result_.tokens.push_back(s.terminal);
    }
  }

  const Grammar& grammar_;
  std::vector<std::vector<int>>& genes_;
  std::size_t bound_;
  Rng* extend_;
  Derivation result_;
};

}  // namespace detail

/// Derives the terminal yield of a genotype. Fails with InvalidGene on an
/// out-of-range or missing gene.
inline Derivation derive(const Grammar& grammar, const Genotype& genotype) {
  detail::check_shape(grammar, genotype);
  auto genes = genotype.genes;
  return detail::Deriver(grammar, genes, genotype.depth_bound, nullptr).run();
}

/// Extends gene lists so that the genotype maps without running out of genes.
inline Derivation complete(const Grammar& grammar, Genotype& genotype, Rng& rng) {
  detail::check_shape(grammar, genotype);
  return detail::Deriver(grammar, genotype.genes, genotype.depth_bound, &rng).run();
}

inline std::string genotype_hash(const Genotype& genotype) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(genotype.depth_bound);
  for (const auto& list : genotype.genes) {
    feed(list.size());
    for (int g : list) feed(static_cast<std::uint64_t>(static_cast<std::int64_t>(g)));
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

/// Maps a genotype to its feature list. The derived text is split on
/// top-level commas and each piece parsed as an algebraic expression.
inline FeatureProgram map_genotype(const Grammar& grammar, const Genotype& genotype) {
  Derivation d = derive(grammar, genotype);
  FeatureProgram program = parse_program(d.text());
  program.source_genotype_hash = genotype_hash(genotype);
  return program;
}

namespace detail {

class RandomBuilder {
 public:
  RandomBuilder(const Grammar& g, std::size_t min_depth, std::size_t max_depth, Rng& rng)
      : grammar_(g), min_depth_(min_depth), max_depth_(max_depth), rng_(rng) {}

  std::pair<Genotype, std::size_t> build() {
    Genotype out;
    out.genes.assign(grammar_.size(), {});
    out.depth_bound = max_depth_;
    reached_ = 0;
    expand(grammar_.start(), 1, out);
    return {std::move(out), reached_};
  }

 private:
  bool can_reach(std::size_t nt, std::size_t levels) const {
    const std::size_t deepest = grammar_.max_depth(nt);
    return deepest == kUnboundedDepth || deepest >= levels;
  }

  void expand(std::size_t nt, std::size_t depth, Genotype& out) {
    reached_ = std::max(reached_, depth);
    const auto& prods = grammar_.productions(nt);
    auto allowed = allowed_productions(grammar_, nt, max_depth_ - depth + 1);

    // While the tree is still shallower than required, prefer productions
    // that can still reach the minimum depth.
    std::vector<std::size_t> candidates = allowed;
    if (reached_ < min_depth_) {
      std::vector<std::size_t> deep;
      for (auto p : allowed)
        for (const auto& s : prods[p])
          if (s.nonterminal && can_reach(s.index, min_depth_ - depth)) {
            deep.push_back(p);
            break;
          }
      if (!deep.empty()) candidates = std::move(deep);
    }

    const std::size_t choice = candidates[uniform_index(rng_, candidates.size())];
    if (allowed.size() == prods.size()) {
      out.genes[nt].push_back(static_cast<int>(choice));
    } else {
      auto pos = std::find(allowed.begin(), allowed.end(), choice) - allowed.begin();
      out.genes[nt].push_back(static_cast<int>(pos));
    }
    for (const auto& s : prods[choice])
      if (s.nonterminal) expand(s.index, depth + 1, out);
  }

  const Grammar& grammar_;
  std::size_t min_depth_;
  std::size_t max_depth_;
  Rng& rng_;
  std::size_t reached_ = 0;
};

}  // namespace detail

/// Draws a genotype whose derivation tree depth lies in [min_depth, max_depth].
inline Genotype random_genotype(const Grammar& grammar, std::size_t min_depth,
                                std::size_t max_depth, Rng& rng) {
  if (min_depth < 1 || min_depth > max_depth)
    throw Error(ErrorCode::UnsatisfiableDepth, "depth window [" + std::to_string(min_depth) + ", " +
                                                   std::to_string(max_depth) + "] is empty");
  const std::size_t start = grammar.start();
  if (grammar.min_depth(start) > max_depth)
    throw Error(ErrorCode::UnsatisfiableDepth,
                "shallowest derivation has depth " + std::to_string(grammar.min_depth(start)));
  if (grammar.max_depth(start) != kUnboundedDepth && grammar.max_depth(start) < min_depth)
    throw Error(ErrorCode::UnsatisfiableDepth,
                "deepest derivation has depth " + std::to_string(grammar.max_depth(start)));

  constexpr int kAttempts = 1000;
  detail::RandomBuilder builder(grammar, min_depth, max_depth, rng);
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto [genotype, depth] = builder.build();
    if (depth >= min_depth && depth <= max_depth) return genotype;
  }
  throw Error(ErrorCode::UnsatisfiableDepth, "no derivation within the depth window after " +
                                                 std::to_string(kAttempts) + " attempts");
}

/// Child 1 takes parent a's list for nonterminal n iff from_a[n]; child 2
/// takes the other one. Both children are completed afterwards.
inline std::pair<Genotype, Genotype> crossover_with_mask(const Grammar& grammar, const Genotype& a,
                                                         const Genotype& b,
                                                         const std::vector<bool>& from_a,
                                                         Rng& rng) {
  detail::check_shape(grammar, a);
  detail::check_shape(grammar, b);
  if (from_a.size() != grammar.size())
    throw Error(ErrorCode::GrammarMismatch, "crossover mask size does not match grammar");
  Genotype c1{{}, a.depth_bound};
  Genotype c2{{}, b.depth_bound};
  c1.genes.resize(grammar.size());
  c2.genes.resize(grammar.size());
  for (std::size_t n = 0; n < grammar.size(); ++n) {
    c1.genes[n] = from_a[n] ? a.genes[n] : b.genes[n];
    c2.genes[n] = from_a[n] ? b.genes[n] : a.genes[n];
  }
  complete(grammar, c1, rng);
  complete(grammar, c2, rng);
  return {std::move(c1), std::move(c2)};
}

inline std::pair<Genotype, Genotype> crossover(const Grammar& grammar, const Genotype& a,
                                               const Genotype& b, Rng& rng) {
  detail::check_shape(grammar, a);
  detail::check_shape(grammar, b);
  std::vector<bool> mask(grammar.size());
  for (std::size_t n = 0; n < grammar.size(); ++n) mask[n] = coin(rng, 0.5);
  return crossover_with_mask(grammar, a, b, mask, rng);
}

/// Resamples each gene with probability `rate`; the input is not modified.
inline Genotype mutate(const Grammar& grammar, const Genotype& genotype, double rate, Rng& rng) {
  detail::check_shape(grammar, genotype);
  Genotype out = genotype;
  for (std::size_t n = 0; n < grammar.size(); ++n) {
    const std::size_t options = grammar.productions(n).size();
    for (auto& gene : out.genes[n])
      if (coin(rng, rate)) gene = static_cast<int>(uniform_index(rng, options));
  }
  complete(grammar, out, rng);
  return out;
}

}  // namespace fedora
