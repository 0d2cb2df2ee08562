#pragma once

#include <cstddef>
#include <functional>

#include "isde/state.hpp"

namespace isde {

/// dx/dt written into the third argument.
using OdeField = std::function<void(double, const State&, State&)>;
/// Called with every accepted (t, x), including the initial point.
using OdeObserver = std::function<void(double, const State&)>;

struct AdaptiveOptions {
  double rtol = 1e-5;
  double atol = 1e-5;
  double initial_step = 0.0;  // 0 selects a starting step automatically
  std::size_t max_steps = 100000;
};

struct AdaptiveResult {
  State state;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// Dormand-Prince 5(4) with FSAL and a PI step-size controller. Integrates in
/// either time direction. Error per step is the RMS of
/// e_i / (atol + rtol max(|x_i|, |x_new_i|)).
///
/// Throws StiffnessError when the step size underflows or max_steps is hit,
/// DivergenceError on a nonfinite state.
AdaptiveResult integrate_dopri5(const OdeField& f, State x0, double t0, double t1,
                                const AdaptiveOptions& options = {},
                                const OdeObserver& observer = {});

}  // namespace isde
