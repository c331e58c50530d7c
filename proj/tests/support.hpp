#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <optional>

#include "bullseye/error.hpp"

namespace test_support {

/// Kind of the bullseye::Error thrown by `f`, or nothing when it returns.
inline std::optional<bullseye::ErrorKind> error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const bullseye::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace test_support

#define CHECK_ERROR_KIND(expr, expected) \
  CHECK(test_support::error_kind([&] { (void)(expr); }) == std::optional<bullseye::ErrorKind>(expected))
