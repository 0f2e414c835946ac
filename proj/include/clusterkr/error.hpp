#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ckr {

/// Broad failure categories. The C API and the CLI map these onto status
/// codes and exit codes respectively.
enum class ErrorKind {
  invalid_argument,
  schema,
  parse,
  validation,
  io,
  empty_window,
  singular,
  numeric,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// No observation receives positive kernel weight at the evaluation point.
class EmptyWindowError : public Error {
 public:
  EmptyWindowError(std::vector<double> x, double h, const std::string& context = {});

  const std::vector<double>& x() const noexcept { return x_; }
  double bandwidth() const noexcept { return h_; }

 private:
  std::vector<double> x_;
  double h_;
};

[[noreturn]] void throw_invalid(const std::string& what);

std::string format_point(const std::vector<double>& x);

}  // namespace ckr
