#include "hmt/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "hmt/error.hpp"

namespace hmt::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) throw Error(ErrorCode::invalid_argument, "normal quantile needs p in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double chi2_sf(double x, double dof) {
  if (x <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<>(dof), x));
}

double kolmogorov_sf(double t) {
  if (t <= 0) return 1.0;
  if (t < 1.18) {
    // Small-t form converges faster.
    const double pi = 3.14159265358979323846;
    double v = 0;
    for (int j = 1; j <= 50; ++j) {
      double a = (2 * j - 1) * pi / t;
      v += std::exp(-a * a / 8);
    }
    return std::clamp(1.0 - std::sqrt(2 * pi) / t * v, 0.0, 1.0);
  }
  double sum = 0;
  for (int j = 1; j <= 100; ++j) {
    double term = std::exp(-2.0 * j * j * t * t);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2 * sum, 0.0, 1.0);
}

namespace {

double scaled_p(double d, double en) {
  double se = std::sqrt(en);
  return kolmogorov_sf((se + 0.12 + 0.11 / se) * d);
}

}  // namespace

KsResult ks_standard_normal(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "KS test on an empty sample");
  std::sort(values.begin(), values.end());
  double n = static_cast<double>(values.size());
  double d = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double f = normal_cdf(values[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, scaled_p(d, n)};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::invalid_argument, "KS test on an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return {d, scaled_p(d, na * nb / (na + nb))};
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe r;
  if (values.empty()) return r;
  double n = static_cast<double>(values.size());
  for (double v : values) r.mean += v;
  r.mean /= n;
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / (n - 1));
    r.se = r.sd / std::sqrt(n);
  }
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::invalid_argument, "linear fit needs at least two points");
  double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << "\r\n";
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

}  // namespace hmt::stats
