#ifndef EHTRAIN_SEARCH_HPP
#define EHTRAIN_SEARCH_HPP

#include <cmath>
#include <stdexcept>

namespace ehtrain {

struct ScalarOptimum {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section search for the maximum of a unimodal f on [lo, hi].
/// Stops once the bracket is narrower than tol.
template <class F>
ScalarOptimum golden_section_maximize(F&& f, double lo, double hi, double tol,
                                      int max_iterations = 500) {
  if (!(lo <= hi)) {
    throw std::invalid_argument("golden_section_maximize: empty bracket");
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iterations && (b - a) > tol; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? ScalarOptimum{c, fc} : ScalarOptimum{d, fd};
}

/// Bisection on a sign change of g over [lo, hi]: g(lo) and g(hi) must have
/// opposite signs. Returns the midpoint of the final bracket.
template <class G>
double bisect_sign_change(G&& g, double lo, double hi, double tol, int max_iterations = 500) {
  const bool lo_positive = g(lo) > 0.0;
  for (int it = 0; it < max_iterations && (hi - lo) > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((g(mid) > 0.0) == lo_positive) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace ehtrain

#endif  // EHTRAIN_SEARCH_HPP
