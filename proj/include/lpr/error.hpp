#pragma once

#include <stdexcept>
#include <string>

namespace lpr {

/// Raised for any contract violation on inputs (bad shapes, malformed files,
/// degenerate geometry). The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& what) { throw ValidationError(what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace lpr
