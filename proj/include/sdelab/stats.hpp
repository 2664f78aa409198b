#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sdelab {

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double slope_stderr = 0;
  double residual_rms = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const size_t n = xs.size();
  if (n != ys.size() || n < 2) throw std::invalid_argument("fit_line: need >= 2 points");
  double sx = 0, sy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  f.slope_stderr = (n > 2) ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
  return f;
}

struct MeanStderr {
  double mean = 0;
  double se = 0;  // standard error of the mean
  size_t count = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr m;
  m.count = v.size();
  if (v.empty()) return m;
  double s = 0;
  for (double x : v) s += x;
  m.mean = s / v.size();
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / (v.size() - 1) / v.size());
  }
  return m;
}

// two-sample Kolmogorov-Smirnov statistic; ties are consumed from both
// samples before the gap is measured
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

// critical value c(alpha) * sqrt((n+m)/(n m)); c(0.01) = 1.628
inline double ks_critical(double c_alpha, size_t n, size_t m) {
  return c_alpha * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

}  // namespace sdelab
