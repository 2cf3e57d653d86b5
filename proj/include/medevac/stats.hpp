#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "medevac/errors.hpp"

namespace medevac::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw ContractViolation("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Unbiased sample variance; zero for fewer than two observations.
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci95 = 0.0;  ///< Student-t half-width; NaN when n < 2
};

inline double t_quantile(double p, double df) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  s.mean = mean(xs);
  s.sd = std::sqrt(variance(xs));
  s.ci95 = s.n < 2 ? std::numeric_limits<double>::quiet_NaN()
                   : t_quantile(0.975, static_cast<double>(s.n - 1)) * s.sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

struct TestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  ///< one-sided, H1: mean(a) > mean(b)
};

inline double upper_tail(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), t));
}

/// Welch's unequal-variance t-test, one-sided.
inline TestResult welch_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ContractViolation("welch_greater: need at least two observations per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = variance(a) / na;
  const double vb = variance(b) / nb;
  const double diff = mean(a) - mean(b);
  TestResult r;
  if (va + vb == 0.0) {
    r.t = diff > 0 ? std::numeric_limits<double>::infinity() : (diff < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
    r.df = na + nb - 2.0;
    r.p = diff > 0 ? 0.0 : 1.0;
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = upper_tail(r.t, r.df);
  return r;
}

/// Paired t-test on a[i] - b[i], one-sided.
inline TestResult paired_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ContractViolation("paired_greater: need equal-length samples, n >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double m = mean(d);
  const double se = std::sqrt(variance(d) / n);
  TestResult r;
  r.df = n - 1.0;
  if (se == 0.0) {
    r.t = m > 0 ? std::numeric_limits<double>::infinity() : (m < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
    r.p = m > 0 ? 0.0 : 1.0;
    return r;
  }
  r.t = m / se;
  r.p = upper_tail(r.t, r.df);
  return r;
}

}  // namespace medevac::stats
