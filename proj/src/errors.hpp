#pragma once
#include <stdexcept>
#include <string>

namespace polo {

// Error taxonomy shared by the whole library. The C API maps the kind to its
// status codes and the CLI reuses those as exit codes: Usage -> 1, Data -> 2,
// Runtime -> 3.
class Error : public std::runtime_error {
public:
  enum class Kind { Usage = 1, Data = 2, Runtime = 3 };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) {
  throw Error(Error::Kind::Usage, msg);
}
[[noreturn]] inline void throw_data(const std::string& msg) {
  throw Error(Error::Kind::Data, msg);
}
[[noreturn]] inline void throw_runtime(const std::string& msg) {
  throw Error(Error::Kind::Runtime, msg);
}

}  // namespace polo
