#pragma once

#include <stdexcept>
#include <string>

namespace mkan {

// Bad inputs (shapes, ranges, flags) surface as std::invalid_argument or
// std::out_of_range. The two types below carry extra context for failures
// that happen mid-computation.

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(int layer, const std::string& what)
      : std::runtime_error(what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace mkan
