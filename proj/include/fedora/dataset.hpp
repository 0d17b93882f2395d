#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedora/error.hpp"
#include "fedora/expression.hpp"
#include "fedora/random.hpp"

namespace fedora {

using Labels = std::vector<int>;

struct Dataset {
  Matrix features;                        // n x d
  Labels labels;                          // class ids 0..c-1
  std::vector<std::string> column_names;  // d names
  std::vector<std::string> class_names;   // original label text, by class id

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_classes() const {
    return labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  }

  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
      out.labels.push_back(labels[rows[i]]);
    }
    out.column_names = column_names;
    out.class_names = class_names;
    return out;
  }
};

/// Stacks b below a. Column layout must agree.
inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.features.cols() != b.features.cols())
    throw Error(ErrorCode::InvalidDataset, "cannot concatenate datasets of different width");
  Dataset out;
  out.features.resize(a.features.rows() + b.features.rows(), a.features.cols());
  out.features << a.features, b.features;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.column_names = a.column_names;
  out.class_names = a.class_names.size() >= b.class_names.size() ? a.class_names : b.class_names;
  return out;
}

inline std::vector<std::size_t> class_counts(const Labels& labels) {
  std::vector<std::size_t> counts;
  for (int y : labels) {
    if (y < 0) throw Error(ErrorCode::InvalidDataset, "negative class id");
    if (static_cast<std::size_t>(y) >= counts.size()) counts.resize(static_cast<std::size_t>(y) + 1, 0);
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  for (auto& s : cells) {
    auto first = s.find_first_not_of(" \t\r");
    auto last = s.find_last_not_of(" \t\r");
    s = first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
  }
  return cells;
}

inline bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace detail

/// Reads a labelled table from CSV text with a header row. Labels are
/// re-encoded to 0..c-1 in order of first appearance.
inline Dataset parse_csv(std::istream& in, const std::string& label_column) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::EmptyFile, "no header row");

  auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end())
    throw Error(ErrorCode::MissingLabelColumn, "no column named '" + label_column + "'");
  const auto label_pos = static_cast<std::size_t>(label_it - header.begin());

  Dataset ds;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != label_pos) ds.column_names.push_back(header[j]);

  std::unordered_map<std::string, int> class_ids;
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::InvalidDataset, "row " + std::to_string(row) + " has " +
                                                 std::to_string(cells.size()) + " cells, expected " +
                                                 std::to_string(header.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == label_pos) {
        if (cells[j].empty()) throw NonNumericCellError(row, header[j], cells[j]);
        auto [it, inserted] = class_ids.emplace(cells[j], static_cast<int>(class_ids.size()));
        if (inserted) ds.class_names.push_back(cells[j]);
        ds.labels.push_back(it->second);
        continue;
      }
      double v = 0.0;
      if (!detail::parse_double(cells[j], v)) throw NonNumericCellError(row, header[j], cells[j]);
      values.push_back(v);
    }
  }
  if (row == 0) throw Error(ErrorCode::EmptyFile, "no data rows");

  const auto n = static_cast<Eigen::Index>(row);
  const auto d = static_cast<Eigen::Index>(ds.column_names.size());
  ds.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, d);
  return ds;
}

inline Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_csv(in, label_column);
}

inline void write_csv(std::ostream& out, const Dataset& ds, const std::string& label_column = "label") {
  for (const auto& name : ds.column_names) out << name << ',';
  out << label_column << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j)
      out << ds.features(static_cast<Eigen::Index>(i), j) << ',';
    const auto y = static_cast<std::size_t>(ds.labels[i]);
    out << (y < ds.class_names.size() ? ds.class_names[y] : std::to_string(y)) << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& ds, const std::string& label_column = "label") {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_csv(out, ds, label_column);
}

// ---------------------------------------------------------------------------
// Train / validation / test split

inline constexpr double kTrainFraction = 0.4;
inline constexpr double kValidationFraction = 0.4;

struct SplitDataset {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;
  std::uint64_t seed = 0;
};

namespace detail {

// Rounds the class-by-subset table counts[k] * sizes[j] / n to integers. Rows
// keep the class counts, columns keep the subset sizes, every present class
// gets at least one row in every subset and every other cell stays at the
// floor or ceiling of its target. Starts from the floors and places the
// remaining units along augmenting paths, preferring large remainders.
inline std::vector<std::vector<std::size_t>> round_table(const std::vector<std::size_t>& counts,
                                                         const std::vector<std::size_t>& sizes) {
  const std::size_t c = counts.size(), s = sizes.size();
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  std::vector<std::vector<std::size_t>> cell(c, std::vector<std::size_t>(s, 0));
  std::vector<std::vector<double>> rem(c, std::vector<double>(s, 0.0));
  std::vector<std::vector<bool>> open(c, std::vector<bool>(s, false));  // may take one more unit
  std::vector<std::vector<bool>> raised(c, std::vector<bool>(s, false));
  std::vector<long> row_need(c, 0), col_need(s, 0);
  for (std::size_t j = 0; j < s; ++j) col_need[j] = static_cast<long>(sizes[j]);
  for (std::size_t k = 0; k < c; ++k) {
    row_need[k] = static_cast<long>(counts[k]);
    for (std::size_t j = 0; j < s; ++j) {
      const double target = static_cast<double>(counts[k]) * static_cast<double>(sizes[j]) / n;
      cell[k][j] = static_cast<std::size_t>(std::floor(target));
      rem[k][j] = target - std::floor(target);
      open[k][j] = counts[k] > 0;
      if (counts[k] > 0 && cell[k][j] == 0) {
        cell[k][j] = 1;
        open[k][j] = false;
      }
      row_need[k] -= static_cast<long>(cell[k][j]);
      col_need[j] -= static_cast<long>(cell[k][j]);
    }
  }
  const auto present = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto v) { return v > 0; }));
  for (std::size_t j = 0; j < s; ++j) {
    if (sizes[j] < present)
      throw Error(ErrorCode::ClassTooSmall, "a subset of " + std::to_string(sizes[j]) + " rows cannot hold " +
                                                std::to_string(present) + " classes");
    // The forced ones overshot this subset: take a row back from the cell
    // whose target sits closest to its floor.
    while (col_need[j] < 0) {
      std::size_t pick = c;
      for (std::size_t k = 0; k < c; ++k)
        if (open[k][j] && cell[k][j] > 1 && (pick == c || rem[k][j] < rem[pick][j])) pick = k;
      if (pick == c) throw Error(ErrorCode::ClassTooSmall, "classes too small to stratify");
      --cell[pick][j];
      ++col_need[j];
      ++row_need[pick];
    }
  }

  std::vector<std::size_t> by_rem(s);
  for (std::size_t k = 0; k < c; ++k) {
    while (row_need[k] > 0) {
      // Breadth-first search over rows; an edge row -> column raises a cell,
      // column -> row lowers a previously raised one.
      std::vector<long> col_from(s, -1), row_from(c, -1);
      std::vector<std::size_t> queue{k};
      row_from[k] = static_cast<long>(k);
      long sink = -1;
      for (std::size_t head = 0; head < queue.size() && sink < 0; ++head) {
        const std::size_t r = queue[head];
        std::iota(by_rem.begin(), by_rem.end(), 0);
        std::stable_sort(by_rem.begin(), by_rem.end(), [&](std::size_t a, std::size_t b) { return rem[r][a] > rem[r][b]; });
        for (std::size_t j : by_rem) {
          if (!open[r][j] || raised[r][j] || col_from[j] >= 0) continue;
          col_from[j] = static_cast<long>(r);
          if (col_need[j] > 0) {
            sink = static_cast<long>(j);
            break;
          }
          for (std::size_t r2 = 0; r2 < c; ++r2)
            if (raised[r2][j] && row_from[r2] < 0) {
              row_from[r2] = static_cast<long>(j);
              queue.push_back(r2);
            }
        }
      }
      if (sink < 0) throw Error(ErrorCode::ClassTooSmall, "classes too small to stratify");
      auto j = static_cast<std::size_t>(sink);
      --col_need[j];
      while (true) {
        const auto r = static_cast<std::size_t>(col_from[j]);
        ++cell[r][j];
        raised[r][j] = true;
        if (r == k) break;
        j = static_cast<std::size_t>(row_from[r]);
        --cell[r][j];
        raised[r][j] = false;
      }
      --row_need[k];
    }
  }
  return cell;
}

}  // namespace detail

/// Stratified 40/40/20 split. Every class lands in every subset.
inline SplitDataset split(const Dataset& ds, std::uint64_t seed) {
  const std::size_t n = ds.rows();
  if (n < 10) throw Error(ErrorCode::InvalidDataset, "need at least 10 rows, got " + std::to_string(n));
  auto counts = class_counts(ds.labels);
  std::size_t present = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    ++present;
    if (counts[k] < 3)
      throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(k) + " has " +
                                                std::to_string(counts[k]) + " rows, need 3");
  }
  if (present < 2) throw Error(ErrorCode::InvalidDataset, "need at least two classes");

  const std::size_t c = counts.size();
  const auto n_train = static_cast<std::size_t>(std::lround(kTrainFraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::lround(kValidationFraction * static_cast<double>(n)));
  const auto table = detail::round_table(counts, {n_train, n_val, n - n_train - n_val});

  std::vector<std::vector<std::size_t>> members(c);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  Rng rng(derive_seed({seed, 0x5b1u}));
  SplitDataset out;
  out.seed = seed;
  for (std::size_t k = 0; k < c; ++k) {
    auto& rows = members[k];
    std::shuffle(rows.begin(), rows.end(), rng);
    auto first_val = rows.begin() + static_cast<std::ptrdiff_t>(table[k][0]);
    auto first_test = first_val + static_cast<std::ptrdiff_t>(table[k][1]);
    out.train_rows.insert(out.train_rows.end(), rows.begin(), first_val);
    out.validation_rows.insert(out.validation_rows.end(), first_val, first_test);
    out.test_rows.insert(out.test_rows.end(), first_test, rows.end());
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.validation_rows.begin(), out.validation_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = ds.subset(out.train_rows);
  out.validation = ds.subset(out.validation_rows);
  out.test = ds.subset(out.test_rows);
  return out;
}

/// Row-index manifest of a split, for archives.
inline nlohmann::json split_manifest(const SplitDataset& s) {
  return nlohmann::json{{"seed", s.seed},
                        {"train", s.train_rows},
                        {"validation", s.validation_rows},
                        {"test", s.test_rows}};
}

/// Rebuilds a split from a manifest produced by split_manifest.
inline SplitDataset split_from_manifest(const Dataset& ds, const nlohmann::json& manifest) {
  SplitDataset out;
  out.seed = manifest.at("seed").get<std::uint64_t>();
  out.train_rows = manifest.at("train").get<std::vector<std::size_t>>();
  out.validation_rows = manifest.at("validation").get<std::vector<std::size_t>>();
  out.test_rows = manifest.at("test").get<std::vector<std::size_t>>();
  for (const auto* rows : {&out.train_rows, &out.validation_rows, &out.test_rows})
    for (auto r : *rows)
      if (r >= ds.rows()) throw Error(ErrorCode::InvalidDataset, "manifest row out of range");
  out.train = ds.subset(out.train_rows);
  out.validation = ds.subset(out.validation_rows);
  out.test = ds.subset(out.test_rows);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Six standard-normal columns; label 1 iff x0 * x1 > 0, each label flipped
/// with probability `noise_rate`. No single axis-parallel threshold separates
/// the classes, the product x0 * x1 does.
inline Dataset synth_interaction(std::size_t n, double noise_rate, std::uint64_t seed) {
  if (n < 100) throw Error(ErrorCode::InvalidDataset, "synthetic data needs n >= 100");
  constexpr Eigen::Index d = 6;
  Rng rng(derive_seed({seed, 0x517u}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) ds.features(static_cast<Eigen::Index>(i), j) = normal(rng);
    int y = ds.features(static_cast<Eigen::Index>(i), 0) * ds.features(static_cast<Eigen::Index>(i), 1) > 0 ? 1 : 0;
    if (coin(rng, noise_rate)) y = 1 - y;
    ds.labels[i] = y;
  }
  for (Eigen::Index j = 0; j < d; ++j) ds.column_names.push_back("x" + std::to_string(j));
  ds.class_names = {"0", "1"};
  return ds;
}

}  // namespace fedora
