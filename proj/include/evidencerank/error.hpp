#pragma once

#include <stdexcept>
#include <string>

namespace evidencerank {

// Malformed or out-of-contract input. The CLI maps this to exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine failed on otherwise valid input (eigensolver did not
// converge, factorization broke down). The CLI maps this to exit code 3.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evidencerank
