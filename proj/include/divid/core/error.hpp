#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace divid {

// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  usage,    // bad arguments, violated preconditions, config contradictions
  data,     // unreadable / corrupt / missing inputs
  numeric,  // non-finite values, degenerate coefficients
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage:
      return "usage";
    case ErrorKind::data:
      return "data";
    case ErrorKind::numeric:
      return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

// Wraps a failure that happened while processing one frame of a clip.
class FrameError : public Error {
 public:
  FrameError(ErrorKind kind, int frame_index, const std::string& what)
      : Error(kind, "frame " + std::to_string(frame_index) + ": " + what), frame_index_(frame_index) {}

  int frame_index() const noexcept { return frame_index_; }

 private:
  int frame_index_;
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return 2;
    case ErrorKind::data:
      return 3;
    case ErrorKind::numeric:
      return 4;
  }
  return 1;
}

}  // namespace divid
