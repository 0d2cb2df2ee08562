#pragma once

#include <cstddef>
#include <vector>

#include "isde/sde.hpp"

namespace isde {

/// Reverse schedule T = t_M > ... > t_1 = stop > 0. A grid with `steps` steps
/// has steps + 1 nodes.
class TimeGrid {
 public:
  enum class Spacing { kUniform, kCustom };

  static TimeGrid uniform(double t_start, double t_stop, std::size_t steps);
  /// Uniform on [sde.delta(), sde.t_rev()].
  static TimeGrid uniform(const InterpolatingSde& sde, std::size_t steps);
  /// Nodes must be strictly descending and end above zero.
  static TimeGrid custom(std::vector<double> nodes);

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  std::size_t steps() const noexcept { return nodes_.size() - 1; }
  double start() const noexcept { return nodes_.front(); }
  double stop() const noexcept { return nodes_.back(); }
  Spacing spacing() const noexcept { return spacing_; }

  /// Throws ParameterError when the grid starts after sde.t_rev().
  void check_against(const InterpolatingSde& sde) const;

 private:
  TimeGrid(std::vector<double> nodes, Spacing spacing);

  std::vector<double> nodes_;
  Spacing spacing_;
};

}  // namespace isde
