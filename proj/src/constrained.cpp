#include "adtrade/constrained.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "adtrade/errors.hpp"
#include "adtrade/parallel.hpp"

namespace adtrade {

void LinearConstraint::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma) ||
      !std::isfinite(bound))
    throw DomainError("constraint coefficients must be finite");
  if (alpha == 0.0 && beta == 0.0 && gamma == 0.0)
    throw DomainError("constraint weights must not all be zero");
}

void AdCapProblem::validate() const {
  if (terms.empty()) throw ConfigError("ad cap problem needs at least one term");
  double total = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const AdCapTerm& t = terms[j];
    std::ostringstream where;
    where << "terms[" << j << "]";
    if (!(t.probability >= 0.0 && t.probability <= 1.0))
      throw ConfigError(where.str() + ".probability must lie in [0, 1]");
    if (!(t.slot_effect > 0.0) || !std::isfinite(t.slot_effect))
      throw ConfigError(where.str() + ".slot_effect must be positive");
    if (t.bidders.empty() == t.discrete.empty())
      throw ConfigError(where.str() + " needs either continuous or discrete bidders");
    t.weights.validate();
    for (const auto& d : t.discrete) d.validate();
    total += t.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("term probabilities must sum to 1");
  if (!std::isfinite(cap)) throw ConfigError("cap must be finite");
}

namespace {

std::vector<ScoreAtom> merge_atoms(std::vector<ScoreAtom> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const ScoreAtom& a, const ScoreAtom& b) { return a.score > b.score; });
  std::vector<ScoreAtom> out;
  for (const auto& a : atoms) {
    if (!out.empty() && out.back().score == a.score) {
      out.back().prob += a.prob;
      out.back().welfare += a.welfare;
      out.back().clicks += a.clicks;
      out.back().revenue += a.revenue;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

std::vector<ScoreAtom> discrete_atoms(const AdCapTerm& term) {
  const auto& bs = term.discrete;
  const ObjectiveWeights& w = term.weights;
  std::vector<std::vector<double>> phi(bs.size());
  for (std::size_t i = 0; i < bs.size(); ++i) phi[i] = discrete_virtual_values(bs[i]);
  std::vector<std::size_t> digit(bs.size(), 0);
  std::vector<ScoreAtom> atoms;
  for (;;) {
    double prob = 1.0;
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const std::size_t k = digit[i];
      prob *= bs[i].probs[k];
      const double s = bs[i].weight * (w.alpha * phi[i][k] + w.beta * bs[i].types[k] + w.gamma);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    const DiscreteBidder& b = bs[best];
    const std::size_t k = digit[best];
    atoms.push_back({best_score, prob, prob * b.weight * b.types[k], prob * b.weight,
                     prob * b.weight * phi[best][k]});
    std::size_t pos = 0;
    while (pos < bs.size() && ++digit[pos] == bs[pos].types.size()) digit[pos++] = 0;
    if (pos == bs.size()) break;
  }
  return atoms;
}

std::vector<ScoreAtom> sampled_atoms(const AdCapTerm& term, const EstimatorConfig& est,
                                     std::size_t term_index) {
  est.validate();
  std::vector<PsiFunction> psis;
  psis.reserve(term.bidders.size());
  for (const auto& m : term.bidders) psis.emplace_back(term.weights, m.value);
  const std::uint64_t seed = splitmix64(est.seed + term_index);
  const double mass = 1.0 / static_cast<double>(est.samples);
  std::vector<ScoreAtom> atoms(est.samples);
  const std::size_t batches = (est.samples + est.batch - 1) / est.batch;
  parallel_for(batches, est.threads, [&](std::size_t b) {
    std::vector<BidderProfile> draw;
    const std::size_t end = std::min(est.samples, (b + 1) * est.batch);
    for (std::size_t idx = b * est.batch; idx < end; ++idx) {
      SampleRng rng(seed, idx);
      draw_types(term.bidders, rng, draw);
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < draw.size(); ++i) {
        const double s = draw[i].weight * psis[i](draw[i].value);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      const BidderProfile& wnr = draw[best];
      const double phi = virtual_value(term.bidders[best].value, wnr.value);
      atoms[idx] = {best_score, mass, mass * wnr.weight * wnr.value, mass * wnr.weight,
                    mass * wnr.weight * phi};
    }
  });
  return atoms;
}

}  // namespace

std::vector<ScoreAtom> winner_score_atoms(const AdCapTerm& term, const EstimatorConfig& est,
                                          std::size_t term_index) {
  if (!term.discrete.empty()) return merge_atoms(discrete_atoms(term));
  return merge_atoms(sampled_atoms(term, est, term_index));
}

double expected_impressions(const AdCapProblem& p, double lambda, const EstimatorConfig& est) {
  p.validate();
  if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
  double total = 0.0;
  for (std::size_t j = 0; j < p.terms.size(); ++j) {
    const auto atoms = winner_score_atoms(p.terms[j], est, j);
    const double reserve = lambda / p.terms[j].slot_effect;
    double shown = 0.0;
    for (const auto& a : atoms) {
      if (a.score < reserve || a.score < 0.0) break;
      shown += a.prob;
    }
    total += p.terms[j].probability * shown;
  }
  return total;
}

AdCapSolution solve_ad_cap(const AdCapProblem& p, double tol, const EstimatorConfig& est) {
  p.validate();
  if (!(tol > 0.0)) throw DomainError("solve_ad_cap: tol must be positive");
  if (!(p.cap > 0.0)) throw DomainError("solve_ad_cap: cap must be positive (degenerate input)");
  const std::size_t J = p.terms.size();
  std::vector<std::vector<ScoreAtom>> atoms(J);
  for (std::size_t j = 0; j < J; ++j) atoms[j] = winner_score_atoms(p.terms[j], est, j);

  // Breakpoints of the impression curve: lambda = s_j * score.
  struct Break {
    double lambda;
    std::size_t term;
    std::size_t atom;
  };
  std::vector<Break> breaks;
  double e0 = 0.0;
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t a = 0; a < atoms[j].size(); ++a) {
      if (atoms[j][a].score < 0.0) break;
      breaks.push_back({p.terms[j].slot_effect * atoms[j][a].score, j, a});
      e0 += p.terms[j].probability * atoms[j][a].prob;
    }
  std::stable_sort(breaks.begin(), breaks.end(),
                   [](const Break& x, const Break& y) { return x.lambda > y.lambda; });

  // shown[j][a] = fraction of atom a in term j that is shown
  std::vector<std::vector<double>> shown(J);
  for (std::size_t j = 0; j < J; ++j) shown[j].assign(atoms[j].size(), 0.0);
  AdCapSolution sol;
  if (p.cap >= e0) {
    sol.lambda = 0.0;
    for (const auto& b : breaks) shown[b.term][b.atom] = 1.0;
    sol.tie_fraction = 1.0;
  } else {
    double cum = 0.0;
    std::size_t g = 0;
    while (g < breaks.size()) {
      std::size_t h = g;
      double mass = 0.0;
      while (h < breaks.size() && breaks[h].lambda == breaks[g].lambda) {
        mass += p.terms[breaks[h].term].probability * atoms[breaks[h].term][breaks[h].atom].prob;
        ++h;
      }
      if (cum + mass >= p.cap) {
        sol.lambda = breaks[g].lambda;
        sol.tie_fraction = mass > 0.0 ? (p.cap - cum) / mass : 1.0;
        for (std::size_t q = g; q < h; ++q) shown[breaks[q].term][breaks[q].atom] = sol.tie_fraction;
        break;
      }
      for (std::size_t q = g; q < h; ++q) shown[breaks[q].term][breaks[q].atom] = 1.0;
      cum += mass;
      g = h;
    }
  }

  sol.terms.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    const AdCapTerm& t = p.terms[j];
    sol.terms[j].score_reserve = sol.lambda / t.slot_effect;
    for (std::size_t a = 0; a < atoms[j].size(); ++a) {
      const double f = shown[j][a];
      if (f == 0.0) continue;
      const ScoreAtom& at = atoms[j][a];
      sol.terms[j].impressions += f * at.prob;
      sol.objective += t.probability * t.slot_effect * f * at.prob * at.score;
      sol.metrics.welfare += t.probability * t.slot_effect * f * at.welfare;
      sol.metrics.clicks += t.probability * t.slot_effect * f * at.clicks;
      sol.metrics.revenue += t.probability * t.slot_effect * f * at.revenue;
    }
    sol.achieved += t.probability * sol.terms[j].impressions;
  }
  sol.metrics.impressions = sol.achieved;
  if (sol.lambda > 0.0 && std::abs(sol.achieved - p.cap) > tol) {
    std::ostringstream os;
    os << "solve_ad_cap: achieved impressions " << sol.achieved << " miss cap " << p.cap;
    throw InternalError(os.str());
  }
  return sol;
}

// ---- frontiers --------------------------------------------------------------

double metric_value(const MetricsRecord& m, Metric k) {
  switch (k) {
    case Metric::Revenue:
      return m.revenue;
    case Metric::Welfare:
      return m.welfare;
    case Metric::Clicks:
      return m.clicks;
    case Metric::Impressions:
      return m.impressions;
  }
  return 0.0;
}

Metric parse_metric(const std::string& name) {
  if (name == "revenue") return Metric::Revenue;
  if (name == "welfare") return Metric::Welfare;
  if (name == "clicks") return Metric::Clicks;
  if (name == "impressions") return Metric::Impressions;
  throw ConfigError("unknown metric '" + name + "'");
}

std::string metric_name(Metric k) {
  switch (k) {
    case Metric::Revenue:
      return "revenue";
    case Metric::Welfare:
      return "welfare";
    case Metric::Clicks:
      return "clicks";
    case Metric::Impressions:
      return "impressions";
  }
  return "";
}

namespace {

// Larger is better after orienting by sense.
double oriented(const FrontierPoint& p, Axis a) {
  const double v = metric_value(p.metrics, a.metric);
  return a.sense == Sense::Maximize ? v : -v;
}

}  // namespace

std::vector<FrontierPoint> pareto_filter(const std::vector<FrontierPoint>& points, Axis x,
                                         Axis y) {
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double xa = oriented(points[a], x), xb = oriented(points[b], x);
    if (xa != xb) return xa > xb;
    return oriented(points[a], y) > oriented(points[b], y);
  });
  // Sweep from best x to worst: keep a point iff its y beats every earlier
  // point's y, or it ties an earlier kept point exactly.
  std::vector<bool> keep(points.size(), false);
  double best_y = -std::numeric_limits<double>::infinity();
  double best_x = 0.0;
  for (std::size_t q = 0; q < idx.size(); ++q) {
    const FrontierPoint& p = points[idx[q]];
    const double px = oriented(p, x), py = oriented(p, y);
    if (py > best_y) {
      keep[idx[q]] = true;
      best_y = py;
      best_x = px;
    } else if (py == best_y && px == best_x) {
      keep[idx[q]] = true;
    }
  }
  std::vector<FrontierPoint> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (keep[i]) out.push_back(points[i]);
  return out;
}

std::vector<FrontierPoint> evaluate_grid(const Scenario& sc, const std::vector<GridRule>& grid,
                                         Pricing pricing, const EstimatorConfig& est) {
  std::vector<FrontierPoint> pts;
  pts.reserve(grid.size());
  for (const auto& g : grid) {
    const MetricsEstimate e = estimate_metrics(sc, g.rule, pricing, est);
    pts.push_back({g.params, e.mean, e.stderr_});
  }
  return pts;
}

std::vector<FrontierPoint> build_frontier(const Scenario& sc, const std::vector<GridRule>& grid,
                                          Pricing pricing, const EstimatorConfig& est, Axis x,
                                          Axis y) {
  if (grid.empty()) throw ConfigError("build_frontier: empty grid");
  return pareto_filter(evaluate_grid(sc, grid, pricing, est), x, y);
}

ConcavityVerdict concavity_check(std::vector<FrontierPoint> points, Axis x, Axis y,
                                 double k_sigma, double abs_slack) {
  std::stable_sort(points.begin(), points.end(), [&](const FrontierPoint& a, const FrontierPoint& b) {
    return metric_value(a.metrics, x.metric) < metric_value(b.metrics, x.metric);
  });
  ConcavityVerdict v;
  if (points.size() < 3) return v;
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    const double x0 = metric_value(points[i - 1].metrics, x.metric);
    const double x1 = metric_value(points[i].metrics, x.metric);
    const double x2 = metric_value(points[i + 1].metrics, x.metric);
    if (x2 == x0) continue;
    const double a = (x1 - x0) / (x2 - x0);
    const double y0 = metric_value(points[i - 1].metrics, y.metric);
    const double y1 = metric_value(points[i].metrics, y.metric);
    const double y2 = metric_value(points[i + 1].metrics, y.metric);
    const double chord = (1.0 - a) * y0 + a * y2;
    const double s0 = metric_value(points[i - 1].stderr_, y.metric);
    const double s1 = metric_value(points[i].stderr_, y.metric);
    const double s2 = metric_value(points[i + 1].stderr_, y.metric);
    const double sigma = std::sqrt(s1 * s1 + (1 - a) * (1 - a) * s0 * s0 + a * a * s2 * s2);
    const double slack = k_sigma * sigma + abs_slack;
    if (y1 < chord - slack) {
      v.ok = false;
      v.index = i;
      v.deficit = chord - y1;
      std::ostringstream os;
      os << "point " << i << " at " << metric_name(x.metric) << "=" << x1 << " has "
         << metric_name(y.metric) << "=" << y1 << " below chord " << chord << " (slack " << slack
         << ")";
      v.message = os.str();
      return v;
    }
  }
  return v;
}

}  // namespace adtrade
