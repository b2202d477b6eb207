#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace adtrade {

enum class DistKind { Uniform, Lognormal, Beta, Empirical };

struct Density {
  double f;  // pdf
  double F;  // cdf
};

// Value distribution on a compact support [lower(), upper()].
// Lognormal is truncated to the [q_lo, q_hi] quantile range and renormalized.
// Empirical is a Gaussian kernel estimate (Silverman bandwidth) restricted to
// [max(0, min - 3h), max + 3h] and renormalized.
class ValueDistribution {
 public:
  static ValueDistribution uniform(double lo, double hi);
  static ValueDistribution lognormal(double mu, double sigma, double q_lo = 0.001,
                                     double q_hi = 0.999);
  static ValueDistribution beta(double a, double b);
  static ValueDistribution empirical(std::vector<double> sample);

  DistKind kind() const { return kind_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }

  // Throws DomainError when z lies outside the support.
  Density density_cdf(double z) const;
  // Inverse cdf, u in [0, 1].
  double quantile(double u) const;

  // Raw parameters, meaning depends on kind:
  //   uniform (lo, hi), lognormal (mu, sigma, q_lo, q_hi), beta (a, b),
  //   empirical (bandwidth).
  const std::vector<double>& params() const { return params_; }
  const std::vector<double>& sample() const;
  double bandwidth() const { return bandwidth_; }

  std::string describe() const;

 private:
  ValueDistribution() = default;
  double raw_cdf(double z) const;  // empirical only, before renormalization
  double raw_pdf(double z) const;

  DistKind kind_ = DistKind::Uniform;
  std::vector<double> params_;
  std::shared_ptr<const std::vector<double>> sample_;
  double lo_ = 0.0;
  double hi_ = 1.0;
  double bandwidth_ = 0.0;
  double mass_lo_ = 0.0;  // cdf mass below the support before renormalization
  double mass_ = 1.0;     // cdf mass inside the support
};

struct ObjectiveWeights {
  double alpha = 0.0;  // revenue
  double beta = 1.0;   // welfare
  double gamma = 0.0;  // clicks

  // Throws DomainError unless alpha, beta, gamma >= 0 and alpha + beta > 0.
  void validate() const;
};

struct LinearVirtual {
  double slope = 1.0;
  double intercept = 0.0;
  double fit_error = 0.0;

  double operator()(double z) const { return slope * z + intercept; }
};

// phi(z) = z - (1 - F(z)) / f(z). SingularityError when f(z) == 0.
double virtual_value(const ValueDistribution& dist, double z);

// alpha * phi(z) + beta * z + gamma. phi is not evaluated when alpha == 0.
double psi(const ObjectiveWeights& w, const ValueDistribution& dist, double z);

struct ReserveResult {
  double value;
  bool clamped;  // true when the root lies outside the support
};

// Root of psi on the support by bisection. RegularityError when psi is not
// monotone on the probe grid.
ReserveResult psi_inverse_zero(const ObjectiveWeights& w, const ValueDistribution& dist,
                               double tol = 1e-10, std::size_t probe_points = 1024);

// Least-squares line through phi on an equispaced support grid.
LinearVirtual linear_fit_virtual(const ValueDistribution& dist, std::size_t grid_size);

// phi non-decreasing (within 1e-9) on an equispaced grid.
bool regularity_check(const ValueDistribution& dist, std::size_t grid_size);

// Score function psi used for ranking. Either exact (weights + distribution)
// or linear (slope * z + intercept).
class PsiFunction {
 public:
  static PsiFunction identity();
  static PsiFunction linear(double slope, double intercept);
  PsiFunction(const ObjectiveWeights& w, const ValueDistribution& dist);
  PsiFunction(const ObjectiveWeights& w, const LinearVirtual& lv);

  double operator()(double z) const;
  // Smallest z with psi(z) >= y. Linear: closed form over the real line.
  // Exact: clamps to the support lower end; +inf when y exceeds psi(upper).
  double inverse(double y) const;
  // psi^{-1}(0) as a bid floor, clamped at 0 for linear psi.
  double zero() const;

  bool is_linear() const { return linear_; }
  double slope() const { return slope_; }
  double intercept() const { return intercept_; }
  // Domain on which psi may be evaluated.
  double lower() const;
  double upper() const;

 private:
  PsiFunction() = default;
  double guarded(double z) const;

  bool linear_ = true;
  double slope_ = 1.0;
  double intercept_ = 0.0;
  ObjectiveWeights weights_{};
  std::shared_ptr<const ValueDistribution> dist_;
};

}  // namespace adtrade
