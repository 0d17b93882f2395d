#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedora {

enum class ErrorCode {
  // grammar
  MalformedRule,
  UndefinedNonterminal,
  EmptyProduction,
  DuplicateDefinition,
  // genotype
  UnsatisfiableDepth,
  InvalidGene,
  GrammarMismatch,
  // expressions
  SyntaxError,
  ColumnOutOfRange,
  // data
  EmptyFile,
  MissingLabelColumn,
  NonNumericCell,
  ClassTooSmall,
  InvalidDataset,
  // models
  EmptyTrainingSet,
  MulticlassUnsupported,
  SingleClassTruth,
  DivergenceDetected,
  KTooLarge,
  // statistics
  InvalidGroups,
  // orchestration
  ConfigInvalid,
  UnknownTester,
  NoCompletedRuns,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRule: return "MalformedRule";
    case ErrorCode::UndefinedNonterminal: return "UndefinedNonterminal";
    case ErrorCode::EmptyProduction: return "EmptyProduction";
    case ErrorCode::DuplicateDefinition: return "DuplicateDefinition";
    case ErrorCode::UnsatisfiableDepth: return "UnsatisfiableDepth";
    case ErrorCode::InvalidGene: return "InvalidGene";
    case ErrorCode::GrammarMismatch: return "GrammarMismatch";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::ColumnOutOfRange: return "ColumnOutOfRange";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::MissingLabelColumn: return "MissingLabelColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::MulticlassUnsupported: return "MulticlassUnsupported";
    case ErrorCode::SingleClassTruth: return "SingleClassTruth";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::InvalidGroups: return "InvalidGroups";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UnknownTester: return "UnknownTester";
    case ErrorCode::NoCompletedRuns: return "NoCompletedRuns";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. The code is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Expression parse failure; position is a 0-based byte offset into the input.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& message)
      : Error(ErrorCode::SyntaxError, message + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// CSV cell that could not be read as a number. `row` is the 1-based data row
/// (the header is not counted).
class NonNumericCellError : public Error {
 public:
  NonNumericCellError(std::size_t row, std::string column, const std::string& cell)
      : Error(ErrorCode::NonNumericCell,
              "row " + std::to_string(row) + ", column '" + column + "': '" + cell + "'"),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace fedora
