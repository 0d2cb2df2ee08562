#include "isde/errors.hpp"

#include <sstream>

namespace isde {

namespace {

std::string divergence_message(std::size_t step, double time) {
  std::ostringstream os;
  os << "solver diverged: nonfinite state after step " << step << " (t = " << time << ")";
  return os.str();
}

}  // namespace

DivergenceError::DivergenceError(std::size_t step, double time)
    : Error(divergence_message(step, time)), step_(step), time_(time) {}

}  // namespace isde
