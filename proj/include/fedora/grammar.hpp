#pragma once

// Context-free grammars in plain BNF:
//
//   <expr> ::= <expr> <op> <expr> | ( <expr> <op> <expr> ) | <var>
//            | x0
//
// Nonterminals are written in angle brackets, everything else is a terminal
// token. Terminals are separated by whitespace or by an adjacent nonterminal,
// so `<e>+<e>` reads as three symbols. A rule may continue on following lines
// until the next line containing `::=`. Lines starting with `#` are comments.
// The first rule defines the start symbol and production order is significant:
// gene values index into it.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fedora/error.hpp"

namespace fedora {

struct Symbol {
  bool nonterminal = false;
  std::string terminal;     // token text when !nonterminal
  std::size_t index = 0;    // nonterminal index when nonterminal

  static Symbol term(std::string text) { return Symbol{false, std::move(text), 0}; }
  static Symbol nonterm(std::size_t i) { return Symbol{true, {}, i}; }

  bool operator==(const Symbol&) const = default;
};

using Production = std::vector<Symbol>;

inline constexpr std::size_t kUnboundedDepth = std::numeric_limits<std::size_t>::max();

class Grammar {
 public:
  Grammar() = default;

  /// Builds a grammar from already-resolved tables and validates it.
  Grammar(std::vector<std::string> nonterminals, std::vector<std::vector<Production>> productions,
          std::size_t start = 0)
      : names_(std::move(nonterminals)), productions_(std::move(productions)), start_(start) {
    validate();
    analyse();
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& nonterminals() const noexcept { return names_; }
  const std::string& name(std::size_t n) const { return names_.at(n); }
  const std::vector<Production>& productions(std::size_t n) const { return productions_.at(n); }
  std::size_t start() const noexcept { return start_; }
  const std::string& start_symbol() const { return names_.at(start_); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  /// True iff the nonterminal can derive a sentential form containing itself.
  bool recursive(std::size_t n) const { return recursive_.at(n); }
  const std::vector<bool>& recursion_flags() const noexcept { return recursive_; }

  /// Depth of the shallowest derivation tree rooted at `n`, counting
  /// nonterminal levels (a rule whose production is all terminals has depth 1).
  std::size_t min_depth(std::size_t n) const { return min_depth_.at(n); }

  /// Shallowest subtree depth reachable when `n` expands with production `p`.
  std::size_t production_min_depth(std::size_t n, std::size_t p) const {
    return production_depth_.at(n).at(p);
  }

  /// Deepest derivation from `n`, or kUnboundedDepth when a recursive
  /// nonterminal is reachable.
  std::size_t max_depth(std::size_t n) const { return max_depth_.at(n); }

  bool operator==(const Grammar& other) const {
    return names_ == other.names_ && productions_ == other.productions_ && start_ == other.start_;
  }

 private:
  void validate() const {
    if (names_.empty()) throw Error(ErrorCode::MalformedRule, "grammar has no rules");
    if (productions_.size() != names_.size())
      throw Error(ErrorCode::MalformedRule, "production table does not match nonterminal list");
    if (start_ >= names_.size()) throw Error(ErrorCode::UndefinedNonterminal, "start symbol");
    for (std::size_t n = 0; n < names_.size(); ++n) {
      if (productions_[n].empty())
        throw Error(ErrorCode::EmptyProduction, "<" + names_[n] + "> has no productions");
      for (const auto& prod : productions_[n]) {
        if (prod.empty())
          throw Error(ErrorCode::EmptyProduction, "<" + names_[n] + "> has an empty alternative");
        for (const auto& s : prod)
          if (s.nonterminal && s.index >= names_.size())
            throw Error(ErrorCode::UndefinedNonterminal, "index " + std::to_string(s.index));
      }
    }
  }

  void analyse() {
    const std::size_t count = names_.size();

    // reach[a][b]: a derives b in one or more steps.
    std::vector<std::vector<bool>> reach(count, std::vector<bool>(count, false));
    for (std::size_t n = 0; n < count; ++n)
      for (const auto& prod : productions_[n])
        for (const auto& s : prod)
          if (s.nonterminal) reach[n][s.index] = true;
    for (std::size_t k = 0; k < count; ++k)
      for (std::size_t i = 0; i < count; ++i)
        if (reach[i][k])
          for (std::size_t j = 0; j < count; ++j)
            if (reach[k][j]) reach[i][j] = true;

    recursive_.assign(count, false);
    for (std::size_t n = 0; n < count; ++n) recursive_[n] = reach[n][n];

    // Least fixed point of min_depth(n) = min_p (1 + max_{m in p} min_depth(m)).
    min_depth_.assign(count, kUnboundedDepth);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t n = 0; n < count; ++n) {
        for (const auto& prod : productions_[n]) {
          std::size_t d = depth_of(prod);
          if (d < min_depth_[n]) {
            min_depth_[n] = d;
            changed = true;
          }
        }
      }
    }
    for (std::size_t n = 0; n < count; ++n)
      if (min_depth_[n] == kUnboundedDepth)
        throw Error(ErrorCode::MalformedRule, "<" + names_[n] + "> derives no finite string");

    production_depth_.resize(count);
    for (std::size_t n = 0; n < count; ++n) {
      production_depth_[n].clear();
      for (const auto& prod : productions_[n]) production_depth_[n].push_back(depth_of(prod));
    }

    max_depth_.assign(count, 0);
    std::vector<int> state(count, 0);  // 0 unvisited, 1 in progress, 2 done
    for (std::size_t n = 0; n < count; ++n) longest(n, reach, state);
  }

  std::size_t depth_of(const Production& prod) const {
    std::size_t deepest = 0;
    for (const auto& s : prod) {
      if (!s.nonterminal) continue;
      if (min_depth_[s.index] == kUnboundedDepth) return kUnboundedDepth;
      deepest = std::max(deepest, min_depth_[s.index]);
    }
    return deepest + 1;
  }

  std::size_t longest(std::size_t n, const std::vector<std::vector<bool>>& reach,
                      std::vector<int>& state) {
    if (state[n] == 2) return max_depth_[n];
    bool unbounded = recursive_[n];
    for (std::size_t m = 0; m < names_.size() && !unbounded; ++m)
      if (reach[n][m] && recursive_[m]) unbounded = true;
    if (unbounded) {
      state[n] = 2;
      return max_depth_[n] = kUnboundedDepth;
    }
    state[n] = 1;
    std::size_t deepest = 0;
    for (const auto& prod : productions_[n])
      for (const auto& s : prod)
        if (s.nonterminal) deepest = std::max(deepest, longest(s.index, reach, state));
    state[n] = 2;
    return max_depth_[n] = deepest + 1;
  }

  std::vector<std::string> names_;
  std::vector<std::vector<Production>> productions_;
  std::size_t start_ = 0;
  std::vector<bool> recursive_;
  std::vector<std::size_t> min_depth_;
  std::vector<std::vector<std::size_t>> production_depth_;
  std::vector<std::size_t> max_depth_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// Length of a `<name>` token starting at s[0], or 0 if s does not start with one.
inline std::size_t nonterminal_length(std::string_view s) {
  if (s.size() < 3 || s[0] != '<') return 0;
  std::size_t i = 1;
  while (i < s.size() && is_name_char(s[i])) ++i;
  if (i == 1 || i >= s.size() || s[i] != '>') return 0;
  return i + 1;
}

struct RawToken {
  bool nonterminal;
  std::string text;
};

inline std::vector<RawToken> tokenize_alternative(std::string_view alt) {
  std::vector<RawToken> out;
  std::size_t i = 0;
  while (i < alt.size()) {
    if (std::isspace(static_cast<unsigned char>(alt[i]))) {
      ++i;
      continue;
    }
    if (std::size_t len = nonterminal_length(alt.substr(i)); len > 0) {
      out.push_back({true, std::string(alt.substr(i + 1, len - 2))});
      i += len;
      continue;
    }
    std::size_t j = i + 1;
    while (j < alt.size() && !std::isspace(static_cast<unsigned char>(alt[j])) &&
           nonterminal_length(alt.substr(j)) == 0)
      ++j;
    out.push_back({false, std::string(alt.substr(i, j - i))});
    i = j;
  }
  return out;
}

}  // namespace detail

inline Grammar parse_grammar(std::string_view text) {
  struct RawRule {
    std::string lhs;
    std::string rhs;
    std::size_t line;
  };
  std::vector<RawRule> rules;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    std::size_t def = line.find("::=");
    if (def == std::string_view::npos) {
      if (rules.empty())
        throw Error(ErrorCode::MalformedRule,
                    "line " + std::to_string(line_no) + ": text before the first rule");
      rules.back().rhs += ' ';
      rules.back().rhs += line;
      continue;
    }
    std::string_view lhs = detail::trim(line.substr(0, def));
    if (detail::nonterminal_length(lhs) != lhs.size() || lhs.empty())
      throw Error(ErrorCode::MalformedRule, "line " + std::to_string(line_no) +
                                                ": left-hand side must be a single <nonterminal>");
    rules.push_back({std::string(lhs.substr(1, lhs.size() - 2)),
                     std::string(line.substr(def + 3)), line_no});
  }
  if (rules.empty()) throw Error(ErrorCode::MalformedRule, "grammar has no rules");

  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : rules) {
    if (index.count(r.lhs))
      throw Error(ErrorCode::DuplicateDefinition,
                  "<" + r.lhs + "> redefined on line " + std::to_string(r.line));
    index.emplace(r.lhs, names.size());
    names.push_back(r.lhs);
  }

  std::vector<std::vector<Production>> productions(names.size());
  for (const auto& r : rules) {
    auto& table = productions[index.at(r.lhs)];
    std::string_view rhs = r.rhs;
    std::size_t start = 0;
    while (true) {
      std::size_t bar = rhs.find('|', start);
      std::string_view alt = rhs.substr(start, bar == std::string_view::npos ? rhs.npos : bar - start);
      auto tokens = detail::tokenize_alternative(alt);
      if (tokens.empty())
        throw Error(ErrorCode::EmptyProduction,
                    "<" + r.lhs + "> has an empty alternative (line " + std::to_string(r.line) + ")");
      Production prod;
      for (auto& t : tokens) {
        if (!t.nonterminal) {
          prod.push_back(Symbol::term(std::move(t.text)));
          continue;
        }
        auto it = index.find(t.text);
        if (it == index.end())
          throw Error(ErrorCode::UndefinedNonterminal,
                      "<" + t.text + "> used in <" + r.lhs + "> but never defined");
        prod.push_back(Symbol::nonterm(it->second));
      }
      table.push_back(std::move(prod));
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
  }
  return Grammar(std::move(names), std::move(productions), 0);
}

/// Canonical text form: one rule per line, symbols separated by single spaces,
/// the start rule first.
inline std::string serialize(const Grammar& g) {
  std::ostringstream out;
  auto emit = [&](std::size_t n) {
    out << '<' << g.name(n) << "> ::=";
    bool first_alt = true;
    for (const auto& prod : g.productions(n)) {
      out << (first_alt ? " " : " | ");
      first_alt = false;
      bool first_sym = true;
      for (const auto& s : prod) {
        if (!first_sym) out << ' ';
        first_sym = false;
        if (s.nonterminal)
          out << '<' << g.name(s.index) << '>';
        else
          out << s.terminal;
      }
    }
    out << '\n';
  };
  emit(g.start());
  for (std::size_t n = 0; n < g.size(); ++n)
    if (n != g.start()) emit(n);
  return out.str();
}

/// The shipped algebraic grammar: a list of 1..max_features features, each
/// either a selected input column or a binary expression over `+ - * /`.
inline std::string default_grammar_text(std::size_t num_vars, std::size_t max_features = 60) {
  if (num_vars == 0 || max_features == 0)
    throw Error(ErrorCode::ConfigInvalid, "default grammar needs at least one variable and feature");
  std::ostringstream out;
  out << "<features> ::= <feature>";
  for (std::size_t count = 2; count <= max_features; ++count) {
    out << "\n             | <feature>";
    for (std::size_t i = 1; i < count; ++i) out << " , <feature>";
  }
  out << "\n<feature> ::= <var> | <expr> <op> <expr>\n";
  out << "<expr> ::= <var> | <expr> <op> <expr> | ( <expr> <op> <expr> )\n";
  out << "<op> ::= + | - | * | /\n";
  out << "<var> ::=";
  for (std::size_t i = 0; i < num_vars; ++i) out << (i == 0 ? " " : " | ") << 'x' << i;
  out << '\n';
  return out.str();
}

inline Grammar default_grammar(std::size_t num_vars, std::size_t max_features = 60) {
  return parse_grammar(default_grammar_text(num_vars, max_features));
}

}  // namespace fedora
