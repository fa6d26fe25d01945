#pragma once

#include <stdexcept>
#include <string>

namespace sepflow {

// Input violates a documented precondition of the data model (duplicate
// points, coordinate collisions, degenerate clusters, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file or unreadable stream.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sepflow
