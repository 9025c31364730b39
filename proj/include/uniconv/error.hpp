#pragma once

#include <stdexcept>
#include <string>

namespace uniconv {

// Domain errors carry a category so the CLI can map them onto exit codes and
// report them without parsing message text.
enum class ErrorKind {
  invalid_argument,
  invalid_input,
  parse_error,
  numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool ok, const std::string& what,
                    ErrorKind kind = ErrorKind::invalid_argument) {
  if (!ok) throw Error(kind, what);
}

}  // namespace uniconv
