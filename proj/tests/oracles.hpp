#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "adtrade/constrained.hpp"

namespace oracle {

// Discrete virtual value recomputed from the cdf, last type maps to itself.
inline std::vector<double> discrete_phi(const adtrade::DiscreteBidder& b) {
  std::vector<double> phi(b.types.size());
  double F = 0.0;
  for (std::size_t k = 0; k < b.types.size(); ++k) {
    F += b.probs[k];
    phi[k] = k + 1 == b.types.size()
                 ? b.types[k]
                 : b.types[k] - (b.types[k + 1] - b.types[k]) * std::max(0.0, 1.0 - F) / b.probs[k];
  }
  return phi;
}

// Best objective of a mixture of per-term threshold policies ("show the
// winner iff its score >= theta_j") whose expected impressions stay <= cap.
// The objective is sum_j q_j s_j E[w psi 1{shown}].
inline double adcap_best_mixture(const adtrade::AdCapProblem& p) {
  struct Curve {
    std::vector<double> imp, obj;  // per threshold choice, index 0 = show nothing
  };
  std::vector<Curve> curves;
  for (const auto& term : p.terms) {
    std::map<double, std::pair<double, double>, std::greater<double>> by_score;  // prob, prob*score
    std::vector<std::vector<double>> phi;
    for (const auto& b : term.discrete) phi.push_back(discrete_phi(b));
    std::vector<std::size_t> k(term.discrete.size(), 0);
    for (bool done = false; !done;) {
      double prob = 1.0, best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k.size(); ++i) {
        const auto& b = term.discrete[i];
        prob *= b.probs[k[i]];
        const double s = b.weight * (term.weights.alpha * phi[i][k[i]] +
                                     term.weights.beta * b.types[k[i]] + term.weights.gamma);
        best = std::max(best, s);
      }
      auto& slot = by_score[best];
      slot.first += prob;
      slot.second += prob * best;
      std::size_t pos = 0;
      while (pos < k.size() && ++k[pos] == term.discrete[pos].types.size()) k[pos++] = 0;
      done = pos == k.size();
    }
    Curve c;
    c.imp.push_back(0.0);
    c.obj.push_back(0.0);
    for (const auto& [score, po] : by_score) {
      c.imp.push_back(c.imp.back() + term.probability * po.first);
      c.obj.push_back(c.obj.back() + term.probability * term.slot_effect * po.second);
    }
    curves.push_back(std::move(c));
  }
  // All deterministic joint policies, then the best two-policy mixture.
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  for (const auto& c : curves) {
    std::vector<std::pair<double, double>> next;
    for (const auto& [i0, o0] : pts)
      for (std::size_t q = 0; q < c.imp.size(); ++q) next.push_back({i0 + c.imp[q], o0 + c.obj[q]});
    pts.swap(next);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : pts) {
    if (a.first <= p.cap + 1e-15) best = std::max(best, a.second);
    for (const auto& b : pts) {
      if (!(a.first < p.cap && b.first > p.cap)) continue;
      const double f = (p.cap - a.first) / (b.first - a.first);
      best = std::max(best, (1 - f) * a.second + f * b.second);
    }
  }
  return best;
}

inline double oriented(const adtrade::MetricsRecord& m, const adtrade::Axis& a) {
  const double v = adtrade::metric_value(m, a.metric);
  return a.sense == adtrade::Sense::Maximize ? v : -v;
}

// O(n^2) dominance filter, exact duplicates kept.
inline std::vector<std::size_t> pareto_indices(const std::vector<adtrade::FrontierPoint>& pts,
                                               adtrade::Axis x, adtrade::Axis y) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double xi = oriented(pts[i].metrics, x), yi = oriented(pts[i].metrics, y);
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      const double xj = oriented(pts[j].metrics, x), yj = oriented(pts[j].metrics, y);
      dominated = xj >= xi && yj >= yi && (xj > xi || yj > yi);
    }
    if (!dominated) keep.push_back(i);
  }
  return keep;
}

}  // namespace oracle
