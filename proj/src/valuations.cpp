#include "adtrade/valuations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "adtrade/errors.hpp"

namespace adtrade {

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

double norm_cdf(double x) { return boost::math::cdf(kStdNormal, x); }
double norm_pdf(double x) { return boost::math::pdf(kStdNormal, x); }
double norm_quantile(double p) { return boost::math::quantile(kStdNormal, p); }

bool finite(double x) { return std::isfinite(x); }

double silverman(const std::vector<double>& s) {
  const double n = static_cast<double>(s.size());
  if (s.size() < 2) return 0.0;
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  auto quartile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const std::size_t j = std::min(i + 1, s.size() - 1);
    return s[i] + (pos - static_cast<double>(i)) * (s[j] - s[i]);
  };
  const double iqr = quartile(0.75) - quartile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

}  // namespace

ValueDistribution ValueDistribution::uniform(double lo, double hi) {
  if (!finite(lo) || !finite(hi) || !(lo < hi))
    throw DomainError("uniform: need finite lo < hi");
  ValueDistribution d;
  d.kind_ = DistKind::Uniform;
  d.params_ = {lo, hi};
  d.lo_ = lo;
  d.hi_ = hi;
  return d;
}

ValueDistribution ValueDistribution::lognormal(double mu, double sigma, double q_lo,
                                               double q_hi) {
  if (!finite(mu) || !finite(sigma) || !(sigma > 0.0))
    throw DomainError("lognormal: need finite mu and sigma > 0");
  if (!(q_lo > 0.0 && q_lo < q_hi && q_hi < 1.0))
    throw DomainError("lognormal: need 0 < q_lo < q_hi < 1");
  ValueDistribution d;
  d.kind_ = DistKind::Lognormal;
  d.params_ = {mu, sigma, q_lo, q_hi};
  d.lo_ = std::exp(mu + sigma * norm_quantile(q_lo));
  d.hi_ = std::exp(mu + sigma * norm_quantile(q_hi));
  d.mass_lo_ = q_lo;
  d.mass_ = q_hi - q_lo;
  return d;
}

ValueDistribution ValueDistribution::beta(double a, double b) {
  if (!finite(a) || !finite(b) || !(a > 0.0) || !(b > 0.0))
    throw DomainError("beta: need a > 0 and b > 0");
  ValueDistribution d;
  d.kind_ = DistKind::Beta;
  d.params_ = {a, b};
  d.lo_ = 0.0;
  d.hi_ = 1.0;
  return d;
}

ValueDistribution ValueDistribution::empirical(std::vector<double> sample) {
  if (sample.empty()) throw DomainError("empirical: sample is empty");
  for (double x : sample)
    if (!finite(x) || x < 0.0)
      throw DomainError("empirical: samples must be finite and non-negative");
  std::sort(sample.begin(), sample.end());
  ValueDistribution d;
  d.kind_ = DistKind::Empirical;
  double h = silverman(sample);
  if (!(h > 0.0)) h = 1e-3 * std::max(1.0, sample.back());
  d.bandwidth_ = h;
  d.params_ = {h};
  d.lo_ = std::max(0.0, sample.front() - 3.0 * h);
  d.hi_ = sample.back() + 3.0 * h;
  d.sample_ = std::make_shared<const std::vector<double>>(std::move(sample));
  d.mass_lo_ = d.raw_cdf(d.lo_);
  d.mass_ = d.raw_cdf(d.hi_) - d.mass_lo_;
  return d;
}

const std::vector<double>& ValueDistribution::sample() const {
  static const std::vector<double> kEmpty;
  return sample_ ? *sample_ : kEmpty;
}

double ValueDistribution::raw_cdf(double z) const {
  double acc = 0.0;
  for (double x : *sample_) acc += norm_cdf((z - x) / bandwidth_);
  return acc / static_cast<double>(sample_->size());
}

double ValueDistribution::raw_pdf(double z) const {
  double acc = 0.0;
  for (double x : *sample_) acc += norm_pdf((z - x) / bandwidth_);
  return acc / (static_cast<double>(sample_->size()) * bandwidth_);
}

Density ValueDistribution::density_cdf(double z) const {
  if (!(z >= lo_ && z <= hi_)) {
    std::ostringstream os;
    os << "z=" << z << " outside support [" << lo_ << ", " << hi_ << "] of " << describe();
    throw DomainError(os.str());
  }
  switch (kind_) {
    case DistKind::Uniform: {
      const double w = hi_ - lo_;
      return {1.0 / w, (z - lo_) / w};
    }
    case DistKind::Lognormal: {
      const double mu = params_[0], sigma = params_[1];
      const double x = (std::log(z) - mu) / sigma;
      const double f = norm_pdf(x) / (z * sigma) / mass_;
      const double F = std::clamp((norm_cdf(x) - mass_lo_) / mass_, 0.0, 1.0);
      return {f, F};
    }
    case DistKind::Beta: {
      const boost::math::beta_distribution<double> bd(params_[0], params_[1]);
      double f;
      // pdf is infinite at an endpoint when a < 1 or b < 1
      if ((z == 0.0 && params_[0] < 1.0) || (z == 1.0 && params_[1] < 1.0))
        f = std::numeric_limits<double>::infinity();
      else
        f = boost::math::pdf(bd, z);
      return {f, boost::math::cdf(bd, z)};
    }
    case DistKind::Empirical: {
      const double F = std::clamp((raw_cdf(z) - mass_lo_) / mass_, 0.0, 1.0);
      return {raw_pdf(z) / mass_, F};
    }
  }
  throw InternalError("unknown distribution kind");
}

double ValueDistribution::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile: u outside [0, 1]");
  switch (kind_) {
    case DistKind::Uniform:
      return lo_ + u * (hi_ - lo_);
    case DistKind::Lognormal: {
      if (u <= 0.0) return lo_;
      if (u >= 1.0) return hi_;
      const double p = mass_lo_ + u * mass_;
      return std::clamp(std::exp(params_[0] + params_[1] * norm_quantile(p)), lo_, hi_);
    }
    case DistKind::Beta: {
      const boost::math::beta_distribution<double> bd(params_[0], params_[1]);
      return boost::math::quantile(bd, u);
    }
    case DistKind::Empirical: {
      double a = lo_, b = hi_;
      for (int it = 0; it < 100 && b - a > 1e-12 * std::max(1.0, hi_); ++it) {
        const double m = 0.5 * (a + b);
        if (density_cdf(m).F < u)
          a = m;
        else
          b = m;
      }
      return 0.5 * (a + b);
    }
  }
  throw InternalError("unknown distribution kind");
}

std::string ValueDistribution::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case DistKind::Uniform:
      os << "uniform(" << params_[0] << ", " << params_[1] << ")";
      break;
    case DistKind::Lognormal:
      os << "lognormal(" << params_[0] << ", " << params_[1] << ")";
      break;
    case DistKind::Beta:
      os << "beta(" << params_[0] << ", " << params_[1] << ")";
      break;
    case DistKind::Empirical:
      os << "empirical(n=" << sample_->size() << ")";
      break;
  }
  return os.str();
}

void ObjectiveWeights::validate() const {
  if (!finite(alpha) || !finite(beta) || !finite(gamma))
    throw DomainError("objective weights must be finite");
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
    throw DomainError("objective weights must be non-negative");
  if (!(alpha + beta > 0.0)) throw DomainError("objective weights need alpha + beta > 0");
}

double virtual_value(const ValueDistribution& dist, double z) {
  const Density d = dist.density_cdf(z);
  if (!(d.f > 0.0)) {
    std::ostringstream os;
    os << "density vanishes at z=" << z << " for " << dist.describe();
    throw SingularityError(os.str());
  }
  if (std::isinf(d.f)) return z;
  return z - (1.0 - d.F) / d.f;
}

double psi(const ObjectiveWeights& w, const ValueDistribution& dist, double z) {
  if (w.alpha == 0.0) return w.beta * z + w.gamma;
  return w.alpha * virtual_value(dist, z) + w.beta * z + w.gamma;
}

namespace {

// psi at z, with the singular lower endpoint mapped to -inf and a singular
// upper endpoint evaluated just inside the support.
double guarded_psi(const ObjectiveWeights& w, const ValueDistribution& dist, double z) {
  try {
    return psi(w, dist, z);
  } catch (const SingularityError&) {
    if (z <= dist.lower()) return -std::numeric_limits<double>::infinity();
    const double inside = z - 1e-9 * (dist.upper() - dist.lower());
    return psi(w, dist, inside);
  }
}

}  // namespace

ReserveResult psi_inverse_zero(const ObjectiveWeights& w, const ValueDistribution& dist,
                               double tol, std::size_t probe_points) {
  w.validate();
  if (!(tol > 0.0)) throw DomainError("psi_inverse_zero: tol must be positive");
  probe_points = std::max<std::size_t>(probe_points, 2);
  const double c = dist.lower(), d = dist.upper();
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < probe_points; ++k) {
    const double z = c + (d - c) * static_cast<double>(k) / static_cast<double>(probe_points - 1);
    const double v = guarded_psi(w, dist, z);
    if (v < prev - 1e-9 * (1.0 + std::abs(prev))) {
      std::ostringstream os;
      os << "psi is not monotone on " << dist.describe() << " near z=" << z
         << "; use linear_fit_virtual";
      throw RegularityError(os.str());
    }
    prev = v;
  }
  if (guarded_psi(w, dist, c) >= 0.0) return {c, true};
  if (guarded_psi(w, dist, d) < 0.0) return {d, true};
  double a = c, b = d;
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    if (guarded_psi(w, dist, m) < 0.0)
      a = m;
    else
      b = m;
  }
  return {0.5 * (a + b), false};
}

LinearVirtual linear_fit_virtual(const ValueDistribution& dist, std::size_t grid_size) {
  if (grid_size < 2) throw DomainError("linear_fit_virtual: grid_size must be >= 2");
  const double c = dist.lower(), d = dist.upper();
  std::vector<double> xs, ys;
  std::size_t singular = 0;
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double z = c + (d - c) * static_cast<double>(k) / static_cast<double>(grid_size - 1);
    try {
      const double v = virtual_value(dist, z);
      if (!finite(v)) {
        ++singular;
        continue;
      }
      xs.push_back(z);
      ys.push_back(v);
    } catch (const SingularityError&) {
      ++singular;
    }
  }
  if (2 * singular > grid_size || xs.size() < 2)
    throw SingularityError("linear_fit_virtual: more than half the grid is singular");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  LinearVirtual lv;
  lv.slope = sxy / sxx;
  lv.intercept = my - lv.slope * mx;
  if (!(lv.slope > 0.0))
    throw RegularityError("linear_fit_virtual: fitted slope is not positive");
  for (std::size_t i = 0; i < xs.size(); ++i)
    lv.fit_error = std::max(lv.fit_error, std::abs(ys[i] - lv(xs[i])));
  return lv;
}

bool regularity_check(const ValueDistribution& dist, std::size_t grid_size) {
  if (grid_size < 2) throw DomainError("regularity_check: grid_size must be >= 2");
  const double c = dist.lower(), d = dist.upper();
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double z = c + (d - c) * static_cast<double>(k) / static_cast<double>(grid_size - 1);
    double v;
    try {
      v = virtual_value(dist, z);
    } catch (const SingularityError&) {
      continue;
    }
    if (v - prev < -1e-9) return false;
    prev = v;
  }
  return true;
}

PsiFunction PsiFunction::identity() { return linear(1.0, 0.0); }

PsiFunction PsiFunction::linear(double slope, double intercept) {
  if (!(slope > 0.0) || !finite(slope) || !finite(intercept))
    throw DomainError("linear psi needs a finite positive slope");
  PsiFunction p;
  p.linear_ = true;
  p.slope_ = slope;
  p.intercept_ = intercept;
  return p;
}

PsiFunction::PsiFunction(const ObjectiveWeights& w, const ValueDistribution& dist)
    : weights_(w) {
  w.validate();
  if (w.alpha == 0.0) {
    linear_ = true;
    slope_ = w.beta;
    intercept_ = w.gamma;
  } else {
    linear_ = false;
    dist_ = std::make_shared<const ValueDistribution>(dist);
  }
}

PsiFunction::PsiFunction(const ObjectiveWeights& w, const LinearVirtual& lv) : weights_(w) {
  w.validate();
  if (!(lv.slope > 0.0)) throw DomainError("linear virtual value needs slope > 0");
  linear_ = true;
  slope_ = w.alpha * lv.slope + w.beta;
  intercept_ = w.alpha * lv.intercept + w.gamma;
}

double PsiFunction::lower() const { return linear_ ? 0.0 : dist_->lower(); }

double PsiFunction::upper() const {
  return linear_ ? std::numeric_limits<double>::infinity() : dist_->upper();
}

double PsiFunction::guarded(double z) const { return guarded_psi(weights_, *dist_, z); }

double PsiFunction::operator()(double z) const {
  if (linear_) return slope_ * z + intercept_;
  return psi(weights_, *dist_, z);
}

double PsiFunction::inverse(double y) const {
  if (linear_) return (y - intercept_) / slope_;
  const double c = dist_->lower(), d = dist_->upper();
  if (y <= guarded(c)) return c;
  if (y > guarded(d)) return std::numeric_limits<double>::infinity();
  double a = c, b = d;
  const double tol = 1e-12 * std::max(1.0, d);
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    if (guarded(m) < y)
      a = m;
    else
      b = m;
  }
  return b;
}

double PsiFunction::zero() const { return std::max(0.0, inverse(0.0)); }

}  // namespace adtrade
