#include "isde/time_grid.hpp"

#include <cmath>
#include <sstream>

#include "isde/errors.hpp"

namespace isde {

TimeGrid::TimeGrid(std::vector<double> nodes, Spacing spacing)
    : nodes_(std::move(nodes)), spacing_(spacing) {
  if (nodes_.size() < 2) throw ParameterError("time grid needs at least two nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!std::isfinite(nodes_[i])) throw ParameterError("time grid nodes must be finite");
    if (i > 0 && !(nodes_[i] < nodes_[i - 1])) {
      throw ParameterError("time grid must be strictly descending");
    }
  }
  if (!(nodes_.back() > 0.0)) throw ParameterError("time grid must stop above zero");
}

TimeGrid TimeGrid::uniform(double t_start, double t_stop, std::size_t steps) {
  if (steps < 1) throw ParameterError("time grid needs at least one step");
  if (!(t_stop < t_start)) throw ParameterError("uniform grid requires stop < start");
  std::vector<double> nodes(steps + 1);
  const double h = (t_start - t_stop) / static_cast<double>(steps);
  for (std::size_t i = 0; i <= steps; ++i) nodes[i] = t_start - h * static_cast<double>(i);
  nodes.back() = t_stop;
  return TimeGrid(std::move(nodes), Spacing::kUniform);
}

TimeGrid TimeGrid::uniform(const InterpolatingSde& sde, std::size_t steps) {
  return uniform(sde.t_rev(), sde.delta(), steps);
}

TimeGrid TimeGrid::custom(std::vector<double> nodes) {
  return TimeGrid(std::move(nodes), Spacing::kCustom);
}

void TimeGrid::check_against(const InterpolatingSde& sde) const {
  if (start() > sde.t_rev() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time grid starts at " << start() << ", after the reverse start T = " << sde.t_rev();
    throw ParameterError(os.str());
  }
}

}  // namespace isde
