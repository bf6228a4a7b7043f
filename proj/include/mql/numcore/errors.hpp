#pragma once

#include <stdexcept>
#include <string>

namespace mql {

/// A training quantity became non-finite. Runs abort rather than clip.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mql
