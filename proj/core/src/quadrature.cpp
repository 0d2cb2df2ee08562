#include "isde/quadrature.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

#include "isde/errors.hpp"

namespace isde {

namespace {

// Kronrod abscissae (positive half, descending) and weights; the odd-indexed
// abscissae are the 7-point Gauss nodes.
constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  double roundoff;
};

struct ByError {
  bool operator()(const Segment& l, const Segment& r) const { return l.error < r.error; }
};

double sample(const std::function<double(double)>& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "integrand is not finite at x = " << x;
    throw DomainError(os.str());
  }
  return v;
}

Segment kronrod15(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = sample(f, center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  double absolute = std::abs(kronrod);
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double f1 = sample(f, center - dx);
    const double f2 = sample(f, center + dx);
    kronrod += kKronrodWeights[j] * (f1 + f2);
    absolute += kKronrodWeights[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * (f1 + f2);
  }
  const double scale = std::abs(half);
  Segment s{a, b, kronrod * half, std::abs((kronrod - gauss) * half), 0.0};
  s.roundoff = 50.0 * std::numeric_limits<double>::epsilon() * absolute * scale;
  return s;
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     const QuadOptions& options) {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw ParameterError("integration bounds must be finite");
  }
  if (options.abs_tol < 0.0 || options.rel_tol < 0.0) {
    throw ParameterError("quadrature tolerances must be nonnegative");
  }
  if (a == b) return {};
  if (b < a) {
    QuadResult r = integrate(f, b, a, options);
    r.value = -r.value;
    return r;
  }

  std::priority_queue<Segment, std::vector<Segment>, ByError> pending;
  std::vector<Segment> done;
  Segment first = kronrod15(f, a, b);
  std::size_t evaluations = 15;
  double value = first.value;
  double error = first.error;
  double roundoff = first.roundoff;
  pending.push(first);

  auto converged = [&] {
    return error <= std::max(options.abs_tol, options.rel_tol * std::abs(value)) ||
           error <= roundoff;
  };

  std::size_t subdivisions = 1;
  while (!converged()) {
    if (pending.empty()) break;
    if (subdivisions >= options.max_subdivisions) {
      std::ostringstream os;
      os << "quadrature on [" << a << ", " << b << "] did not reach tolerance after "
         << subdivisions << " subdivisions (error estimate " << error << ")";
      throw NumericError(os.str(), value, error);
    }
    Segment worst = pending.top();
    pending.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(worst.a < mid && mid < worst.b)) {
      // Interval cannot be split further in double precision.
      done.push_back(worst);
      roundoff += worst.error;
      continue;
    }
    Segment left = kronrod15(f, worst.a, mid);
    Segment right = kronrod15(f, mid, worst.b);
    evaluations += 30;
    ++subdivisions;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    roundoff += left.roundoff + right.roundoff - worst.roundoff;
    pending.push(left);
    pending.push(right);
  }

  // Re-sum to shed the drift of the incremental updates.
  double total = 0.0;
  double total_error = 0.0;
  for (const Segment& s : done) {
    total += s.value;
    total_error += s.error;
  }
  while (!pending.empty()) {
    total += pending.top().value;
    total_error += pending.top().error;
    pending.pop();
  }
  return {total, total_error, evaluations};
}

}  // namespace isde
