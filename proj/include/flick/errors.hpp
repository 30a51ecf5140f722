#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flick {

enum class ErrorKind { argument, format, data, io, numeric, selection };

std::string_view to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& message)
      : Error(ErrorKind::argument, message) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message)
      : Error(ErrorKind::format, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorKind::data, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorKind::io, message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error(ErrorKind::numeric, message) {}
};

class SelectionError : public Error {
 public:
  explicit SelectionError(const std::string& message)
      : Error(ErrorKind::selection, message) {}
};

/// A module error re-raised by the pipeline with the stage that produced it
/// (stage1, stage2, plft, clsft, eval). Keeps the original kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.what()),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace flick
