#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmt::stats {

double normal_cdf(double z);
double normal_quantile(double p);
// Upper tail of the chi-squared distribution.
double chi2_sf(double x, double dof);
// Asymptotic Kolmogorov upper tail P(K > t).
double kolmogorov_sf(double t);

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};
// One-sample test against N(0,1).
KsResult ks_standard_normal(std::vector<double> values);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct MeanSe {
  double mean = 0;
  double se = 0;
  double sd = 0;
};
MeanSe mean_se(const std::vector<double>& values);

double median(std::vector<double> values);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};
// Least squares y ≈ intercept + slope·x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

std::string csv_field(const std::string& value);
// Writes one CSV record, quoting fields that need it.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
std::string format_double(double value);

}  // namespace hmt::stats
