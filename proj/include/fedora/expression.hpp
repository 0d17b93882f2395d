#pragma once

// Algebraic feature expressions: immutable binary trees over input columns,
// their evaluation on a data matrix, the infix text form, and the
// original / engineered / complex taxonomy.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedora/error.hpp"

namespace fedora {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Op : char { Add = '+', Sub = '-', Mul = '*', Div = '/' };

/// Denominators with magnitude at or below this evaluate `a / b` to the
/// fallback value instead.
inline constexpr double kDivisionEpsilon = 1e-9;
inline constexpr double kDivisionFallback = 1.0;

constexpr int precedence(Op op) { return (op == Op::Add || op == Op::Sub) ? 1 : 2; }

namespace detail {

struct ExprNode {
  bool is_var = true;
  std::size_t column = 0;
  Op op = Op::Add;
  std::size_t operator_count = 0;
  std::size_t depth = 1;
  std::size_t max_column = 0;
  std::shared_ptr<const ExprNode> left;
  std::shared_ptr<const ExprNode> right;
};

}  // namespace detail

/// Immutable expression tree. Copies share structure.
class ExpressionTree {
 public:
  static ExpressionTree var(std::size_t column) {
    auto n = std::make_shared<detail::ExprNode>();
    n->column = column;
    n->max_column = column;
    return ExpressionTree(std::move(n));
  }

  static ExpressionTree binary(Op op, const ExpressionTree& lhs, const ExpressionTree& rhs) {
    auto n = std::make_shared<detail::ExprNode>();
    n->is_var = false;
    n->op = op;
    n->operator_count = 1 + lhs.operator_count() + rhs.operator_count();
    n->depth = 1 + std::max(lhs.depth(), rhs.depth());
    n->max_column = std::max(lhs.max_column(), rhs.max_column());
    n->left = lhs.node_;
    n->right = rhs.node_;
    return ExpressionTree(std::move(n));
  }

  bool is_var() const noexcept { return node_->is_var; }
  std::size_t column() const noexcept { return node_->column; }
  Op op() const noexcept { return node_->op; }
  ExpressionTree left() const { return ExpressionTree(node_->left); }
  ExpressionTree right() const { return ExpressionTree(node_->right); }

  /// Number of binary operator nodes in the tree.
  std::size_t operator_count() const noexcept { return node_->operator_count; }
  std::size_t depth() const noexcept { return node_->depth; }
  /// Largest column index referenced by any leaf.
  std::size_t max_column() const noexcept { return node_->max_column; }

  friend bool operator==(const ExpressionTree& a, const ExpressionTree& b) {
    return same(a.node_.get(), b.node_.get());
  }

 private:
  explicit ExpressionTree(std::shared_ptr<const detail::ExprNode> n) : node_(std::move(n)) {}

  static bool same(const detail::ExprNode* a, const detail::ExprNode* b) {
    if (a == b) return true;
    if (a->is_var != b->is_var) return false;
    if (a->is_var) return a->column == b->column;
    return a->op == b->op && a->operator_count == b->operator_count &&
           same(a->left.get(), b->left.get()) && same(a->right.get(), b->right.get());
  }

  std::shared_ptr<const detail::ExprNode> node_;
};

enum class FeatureClass { Original, Engineered, Complex };

constexpr std::string_view to_string(FeatureClass c) {
  switch (c) {
    case FeatureClass::Original: return "original";
    case FeatureClass::Engineered: return "engineered";
    case FeatureClass::Complex: return "complex";
  }
  return "unknown";
}

inline FeatureClass classify(const ExpressionTree& e) {
  switch (e.operator_count()) {
    case 0: return FeatureClass::Original;
    case 1: return FeatureClass::Engineered;
    default: return FeatureClass::Complex;
  }
}

/// A phenotype: the ordered list of constructed features.
struct FeatureProgram {
  std::vector<ExpressionTree> features;
  std::string source_genotype_hash;

  std::size_t size() const noexcept { return features.size(); }

  bool operator==(const FeatureProgram& other) const { return features == other.features; }
};

struct ComplexityReport {
  std::size_t n_total = 0;
  std::size_t n_selected = 0;
  std::size_t n_engineered = 0;
  std::size_t n_complex = 0;
  double r_o = 0.0;
  double r_e = 0.0;
  double r_c = 0.0;
};

inline ComplexityReport complexity_report(const FeatureProgram& program) {
  if (program.features.empty())
    throw Error(ErrorCode::InvalidDataset, "complexity report needs at least one feature");
  ComplexityReport r;
  for (const auto& f : program.features) {
    switch (classify(f)) {
      case FeatureClass::Original: ++r.n_selected; break;
      case FeatureClass::Engineered: ++r.n_engineered; break;
      case FeatureClass::Complex: ++r.n_complex; break;
    }
  }
  r.n_total = program.features.size();
  const auto total = static_cast<double>(r.n_total);
  r.r_o = static_cast<double>(r.n_selected) / total;
  r.r_e = static_cast<double>(r.n_engineered) / total;
  r.r_c = static_cast<double>(r.n_complex) / total;
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

// Overflow saturates to the largest finite magnitude so that no operator ever
// sees an infinite operand.
inline double saturate(double v) {
  constexpr double big = std::numeric_limits<double>::max();
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, -big, big);
}

inline double apply(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return saturate(a + b);
    case Op::Sub: return saturate(a - b);
    case Op::Mul: return saturate(a * b);
    case Op::Div: return std::abs(b) > kDivisionEpsilon ? saturate(a / b) : kDivisionFallback;
  }
  return 0.0;
}

inline Vector evaluate_node(const ExpressionTree& e, const Matrix& x) {
  if (e.is_var()) return x.col(static_cast<Eigen::Index>(e.column()));
  Vector lhs = evaluate_node(e.left(), x);
  Vector rhs = evaluate_node(e.right(), x);
  const Op op = e.op();
  for (Eigen::Index i = 0; i < lhs.size(); ++i) lhs[i] = apply(op, lhs[i], rhs[i]);
  return lhs;
}

}  // namespace detail

inline Vector evaluate(const ExpressionTree& e, const Matrix& x) {
  if (e.max_column() >= static_cast<std::size_t>(x.cols()))
    throw Error(ErrorCode::ColumnOutOfRange, "feature references x" + std::to_string(e.max_column()) +
                                                 " but the data has " + std::to_string(x.cols()) +
                                                 " columns");
  return detail::evaluate_node(e, x);
}

/// Column j of the result is feature j evaluated row by row.
inline Matrix evaluate(const FeatureProgram& program, const Matrix& x) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(program.features.size()));
  for (std::size_t j = 0; j < program.features.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = evaluate(program.features[j], x);
  return out;
}

// ---------------------------------------------------------------------------
// Text form

namespace detail {

inline void render_into(const ExpressionTree& e, std::string& out) {
  if (e.is_var()) {
    out += 'x';
    out += std::to_string(e.column());
    return;
  }
  const int p = precedence(e.op());
  // Left associativity: a right operand of equal precedence needs parentheses.
  const bool paren_left = !e.left().is_var() && precedence(e.left().op()) < p;
  const bool paren_right = !e.right().is_var() && precedence(e.right().op()) <= p;
  if (paren_left) out += '(';
  render_into(e.left(), out);
  if (paren_left) out += ')';
  out += ' ';
  out += static_cast<char>(e.op());
  out += ' ';
  if (paren_right) out += '(';
  render_into(e.right(), out);
  if (paren_right) out += ')';
}

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  ExpressionTree parse() {
    ExpressionTree e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) throw SyntaxError(pos_, "unexpected trailing input");
    return e;
  }

 private:
  ExpressionTree parse_sum() {
    ExpressionTree lhs = parse_product();
    while (true) {
      skip_space();
      auto op = peek_op();
      if (!op || precedence(*op) != 1) return lhs;
      consume_op();
      lhs = ExpressionTree::binary(*op, std::move(lhs), parse_product());
    }
  }

  ExpressionTree parse_product() {
    ExpressionTree lhs = parse_atom();
    while (true) {
      skip_space();
      auto op = peek_op();
      if (!op || precedence(*op) != 2) return lhs;
      consume_op();
      lhs = ExpressionTree::binary(*op, std::move(lhs), parse_atom());
    }
  }

  ExpressionTree parse_atom() {
    skip_space();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "unexpected end of input");
    if (text_[pos_] == '(') {
      ++pos_;
      ExpressionTree inner = parse_sum();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') throw SyntaxError(pos_, "expected ')'");
      ++pos_;
      return inner;
    }
    if (text_[pos_] == 'x') {
      std::size_t start = ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start) throw SyntaxError(start, "expected column index after 'x'");
      if (pos_ - start > 9) throw SyntaxError(start, "column index too large");
      return ExpressionTree::var(std::stoul(std::string(text_.substr(start, pos_ - start))));
    }
    throw SyntaxError(pos_, "expected variable or '('");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  // Accepts ASCII operators and the UTF-8 forms of minus, times and divide.
  std::optional<Op> peek_op() const {
    if (pos_ >= text_.size()) return std::nullopt;
    switch (text_[pos_]) {
      case '+': return Op::Add;
      case '-': return Op::Sub;
      case '*': return Op::Mul;
      case '/': return Op::Div;
      default: break;
    }
    auto rest = text_.substr(pos_);
    if (rest.starts_with("−")) return Op::Sub;
    if (rest.starts_with("×")) return Op::Mul;
    if (rest.starts_with("÷")) return Op::Div;
    return std::nullopt;
  }

  void consume_op() {
    auto rest = text_.substr(pos_);
    if (rest.starts_with("−"))
      pos_ += 3;
    else if (rest.starts_with("×") || rest.starts_with("÷"))
      pos_ += 2;
    else
      ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string render(const ExpressionTree& e) {
  std::string out;
  detail::render_into(e, out);
  return out;
}

inline ExpressionTree parse_expr(std::string_view text) {
  return detail::ExpressionParser(text).parse();
}

/// Features separated by top-level commas, e.g. "x0, x1 * (x2 + x3)".
inline std::string render(const FeatureProgram& program) {
  std::string out;
  for (std::size_t i = 0; i < program.features.size(); ++i) {
    if (i) out += ", ";
    out += render(program.features[i]);
  }
  return out;
}

inline FeatureProgram parse_program(std::string_view text) {
  FeatureProgram program;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i < text.size()) {
      if (text[i] == '(') ++depth;
      if (text[i] == ')') --depth;
      if (text[i] != ',' || depth != 0) continue;
    }
    try {
      program.features.push_back(parse_expr(text.substr(start, i - start)));
    } catch (const SyntaxError& e) {
      throw SyntaxError(start + e.position(), "malformed feature");
    }
    start = i + 1;
  }
  return program;
}

}  // namespace fedora
