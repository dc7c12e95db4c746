#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mcse {

// All errors surface as exceptions derived from std::runtime_error.
// Precondition violations use Error with a message naming the failed check.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

constexpr double kSpeedOfSound = 343.0;  // m/s

}  // namespace mcse
