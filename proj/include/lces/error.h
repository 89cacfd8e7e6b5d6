#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lces {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or record. `line` is 1-based; 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A value violates a documented domain or precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

// More pairs requested than the essay set can provide.
class CapacityError : public Error {
 public:
  CapacityError(std::size_t requested, std::size_t capacity)
      : Error("requested " + std::to_string(requested) +
              " pairs but capacity is " + std::to_string(capacity)),
        capacity_(capacity) {}
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

// The judge response did not contain a usable decision. Carries the raw text.
class VerdictParseError : public Error {
 public:
  VerdictParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// Transport or protocol failure talking to a remote service.
class RemoteError : public Error {
 public:
  using Error::Error;
};

// The judge could not produce a verdict for a pair within the retry budget.
class JudgeError : public Error {
 public:
  using Error::Error;
};

// Operation needs embeddings that some essays do not have.
class MissingEmbeddingError : public Error {
 public:
  explicit MissingEmbeddingError(std::vector<std::string> ids);
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

// Metric is mathematically undefined for the given input (e.g. constant ranks).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Training diverged.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int epoch, int batch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace lces
