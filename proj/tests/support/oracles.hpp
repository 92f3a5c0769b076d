#pragma once

// Deliberately naive reference implementations: plain loops over std::vector,
// no Eigen, no shared code with the library.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

/// Rank of x_i: count of values below it plus half the count of equal values
/// (itself included), shifted to 1-based.
inline std::vector<double> ranks(const std::vector<double>& x)
{
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double y : x) {
      less += y < x[i];
      equal += y == x[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
  return pearson(ranks(a), ranks(b));
}

struct Errors
{
  double rmsd, mape, me;
};

inline Errors errors(const std::vector<double>& t, const std::vector<double>& p)
{
  double se = 0, ape = 0, e = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    se += (p[i] - t[i]) * (p[i] - t[i]);
    ape += std::abs(p[i] - t[i]) / std::abs(t[i]);
    e += p[i] - t[i];
  }
  const double n = double(t.size());
  return {std::sqrt(se / n), 100.0 * ape / n, e / n};
}

/// Two-way ANOVA with n subjects and k = 2 raters, mean squares written out
/// one sum at a time.
inline double icc21(const std::vector<double>& t, const std::vector<double>& p)
{
  const std::size_t n = t.size();
  const double k = 2.0;
  double grand = 0;
  for (std::size_t i = 0; i < n; ++i)
    grand += t[i] + p[i];
  grand /= (k * n);
  double mt = 0, mp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += t[i] / n;
    mp += p[i] / n;
  }
  double ssr = 0, sst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double row = (t[i] + p[i]) / k;
    ssr += k * (row - grand) * (row - grand);
    sst += (t[i] - grand) * (t[i] - grand) + (p[i] - grand) * (p[i] - grand);
  }
  const double ssc = n * ((mt - grand) * (mt - grand) + (mp - grand) * (mp - grand));
  const double sse = sst - ssr - ssc;
  const double msr = ssr / (n - 1);
  const double msc = ssc / (k - 1);
  const double mse = sse / ((n - 1) * (k - 1));
  return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n);
}

/// Least-squares slope through the origin: sum(t p) / sum(p p).
inline double slope(const std::vector<double>& t, const std::vector<double>& p)
{
  double tp = 0, pp = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    tp += t[i] * p[i];
    pp += p[i] * p[i];
  }
  return tp / pp;
}

/// Lattice points (r, c) of a size x size grid with (r-m)^2 + (c-m)^2 <= rad^2,
/// m = size / 2, counted row by row from the chord length.
inline std::int64_t disk_count(int size, int rad)
{
  const int m = size / 2;
  std::int64_t n = 0;
  for (int r = 0; r < size; ++r) {
    const int dy = r - m;
    if (dy * dy > rad * rad)
      continue;
    const int half = static_cast<int>(std::floor(std::sqrt(double(rad * rad - dy * dy))));
    const int lo = m - half < 0 ? 0 : m - half;
    const int hi = m + half > size - 1 ? size - 1 : m + half;
    n += hi - lo + 1;
  }
  return n;
}

}  // namespace oracle
