#pragma once

#include <stdexcept>
#include <string>

namespace todforge {

// Two error families, mirrored by the CLI exit codes: data problems (bad
// files, inconsistent annotations, budget violations) and backend problems.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingFile : DataError {
  explicit MissingFile(const std::string& path)
      : DataError("missing file: " + path), path(path) {}
  std::string path;
};

struct IoError : DataError {
  explicit IoError(const std::string& what) : DataError("io error: " + what) {}
};

struct FormatError : DataError {
  FormatError(const std::string& what, long line = 0)
      : DataError(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line(line) {}
  long line;  // 1-based, 0 when unknown
};

struct SchemaViolation : DataError {
  SchemaViolation(const std::string& session_id, const std::string& detail)
      : DataError("schema violation" +
                  (session_id.empty() ? std::string() : " in session " + session_id) +
                  ": " + detail),
        session_id(session_id),
        detail(detail) {}
  std::string session_id;
  std::string detail;
};

struct TypeMismatch : DataError {
  using DataError::DataError;
};

struct MissingAnnotation : DataError {
  MissingAnnotation(const std::string& task, std::size_t turn)
      : DataError("missing gold annotation for " + task + " at turn " +
                  std::to_string(turn)),
        task(task),
        turn(turn) {}
  std::string task;
  std::size_t turn;
};

struct TurnTooLarge : DataError {
  explicit TurnTooLarge(std::size_t turn)
      : DataError("turn " + std::to_string(turn) +
                  " plus instructions exceeds max_len"),
        turn(turn) {}
  std::size_t turn;
};

struct InstructionsTooLarge : DataError {
  using DataError::DataError;
};

struct LengthMismatch : DataError {
  using DataError::DataError;
};

struct MissingGoal : DataError {
  using DataError::DataError;
};

// Transport-level failure (connect error / timeout), after retries.
struct BackendUnavailable : BackendError {
  using BackendError::BackendError;
};

// The server answered with a non-2xx status.
struct BackendRefused : BackendError {
  BackendRefused(int status, const std::string& body)
      : BackendError("backend refused request: HTTP " + std::to_string(status) +
                     (body.empty() ? std::string() : " " + body)),
        status(status),
        body(body) {}
  int status;
  std::string body;
};

}  // namespace todforge
