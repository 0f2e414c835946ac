#include "clusterkr/error.hpp"

#include "clusterkr/format.hpp"

namespace ckr {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::empty_window: return "empty window";
    case ErrorKind::singular: return "singular system";
    case ErrorKind::numeric: return "numerical failure";
  }
  return "unknown error";
}

std::string format_point(const std::vector<double>& x) {
  std::string out = "(";
  for (std::size_t q = 0; q < x.size(); ++q) {
    if (q) out += ", ";
    out += format_double(x[q]);
  }
  out += ")";
  return out;
}

EmptyWindowError::EmptyWindowError(std::vector<double> x, double h, const std::string& context)
    : Error(ErrorKind::empty_window,
            "empty kernel window at x=" + format_point(x) + " with h=" + format_double(h) +
                (context.empty() ? std::string{} : " (" + context + ")")),
      x_(std::move(x)),
      h_(h) {}

void throw_invalid(const std::string& what) { throw Error(ErrorKind::invalid_argument, what); }

}  // namespace ckr
