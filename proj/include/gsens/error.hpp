#pragma once

#include <stdexcept>
#include <string>

namespace gsens {

// All recoverable failures (bad input files, infeasible fits, degenerate
// requests) surface as gsens::Error with a human-readable message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gsens
