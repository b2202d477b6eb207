#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "adtrade/constrained.hpp"
#include "adtrade/errors.hpp"

namespace adtrade {

void DiscreteBidder::validate() const {
  if (types.empty() || types.size() != probs.size())
    throw ConfigError("discrete bidder needs matching non-empty types and probabilities");
  double total = 0.0;
  for (std::size_t k = 0; k < types.size(); ++k) {
    if (!std::isfinite(types[k]) || types[k] < 0.0)
      throw ConfigError("discrete types must be finite and non-negative");
    if (k > 0 && !(types[k] > types[k - 1]))
      throw ConfigError("discrete types must be strictly increasing");
    if (!(probs[k] > 0.0)) throw ConfigError("discrete type probabilities must be positive");
    total += probs[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("discrete type probabilities must sum to 1");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("weight must be positive");
}

std::vector<double> discrete_virtual_values(const DiscreteBidder& b) {
  const std::size_t L = b.types.size();
  std::vector<double> phi(L);
  double cdf = 0.0;
  for (std::size_t k = 0; k < L; ++k) {
    cdf += b.probs[k];
    if (k + 1 == L) {
      phi[k] = b.types[k];
    } else {
      const double upper = std::max(0.0, 1.0 - cdf);
      phi[k] = b.types[k] - (b.types[k + 1] - b.types[k]) * upper / b.probs[k];
    }
  }
  return phi;
}

bool is_regular(const DiscreteBidder& b) {
  const auto phi = discrete_virtual_values(b);
  for (std::size_t k = 1; k < phi.size(); ++k)
    if (phi[k] < phi[k - 1] - 1e-12) return false;
  return true;
}

void DiscreteInstance::validate() const {
  if (bidders.empty()) throw ConfigError("discrete instance needs bidders");
  for (const auto& b : bidders) b.validate();
  slots.validate();
}

std::size_t DiscreteInstance::profile_count() const {
  std::size_t n = 1;
  for (const auto& b : bidders) n *= b.types.size();
  return n;
}

namespace {

// Enumerated type profiles with strides for replacing one bidder's type.
struct ProfileTable {
  std::size_t count = 0;
  std::vector<std::size_t> stride;
  std::vector<std::vector<std::size_t>> digits;  // [profile][bidder]
  std::vector<double> prob;
};

ProfileTable make_profiles(const DiscreteInstance& inst) {
  ProfileTable t;
  const std::size_t n = inst.bidders.size();
  t.count = inst.profile_count();
  t.stride.resize(n);
  std::size_t s = 1;
  for (std::size_t i = 0; i < n; ++i) {
    t.stride[i] = s;
    s *= inst.bidders[i].types.size();
  }
  t.digits.resize(t.count);
  t.prob.resize(t.count);
  for (std::size_t p = 0; p < t.count; ++p) {
    t.digits[p].resize(n);
    double pr = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (p / t.stride[i]) % inst.bidders[i].types.size();
      t.digits[p][i] = k;
      pr *= inst.bidders[i].probs[k];
    }
    t.prob[p] = pr;
  }
  return t;
}

// key[i][k]: priority of bidder i at type k (higher first); eligible[i][k].
// Returns clicks X[p * n + i] = w_i * s_slot.
void allocate_profiles(const DiscreteInstance& inst, const ProfileTable& t,
                       const std::vector<std::vector<double>>& key,
                       const std::vector<std::vector<char>>& eligible, std::vector<double>& X) {
  const std::size_t n = inst.bidders.size(), K = inst.slots.size();
  X.assign(t.count * n, 0.0);
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t p = 0; p < t.count; ++p) {
    order.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (eligible[i][t.digits[p][i]]) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return key[a][t.digits[p][a]] > key[b][t.digits[p][b]];
    });
    for (std::size_t r = 0; r < order.size() && r < K; ++r)
      X[p * n + order[r]] = inst.bidders[order[r]].weight * inst.slots[r];
  }
}

MetricsRecord metrics_from_clicks(const DiscreteInstance& inst, const ProfileTable& t,
                                  const std::vector<double>& X) {
  const std::size_t n = inst.bidders.size();
  MetricsRecord m;
  for (std::size_t p = 0; p < t.count; ++p) {
    const double pr = t.prob[p];
    for (std::size_t i = 0; i < n; ++i) {
      const double x = X[p * n + i];
      if (x <= 0.0) continue;
      const std::size_t k = t.digits[p][i];
      const auto& types = inst.bidders[i].types;
      // threshold payment: sum over own lower types of t_l * jump in clicks
      const std::size_t base = p - k * t.stride[i];
      double pay = 0.0, prev = 0.0;
      for (std::size_t l = 0; l <= k; ++l) {
        const double xl = X[(base + l * t.stride[i]) * n + i];
        pay += types[l] * (xl - prev);
        prev = xl;
      }
      m.impressions += pr;
      m.clicks += pr * x;
      m.welfare += pr * x * types[k];
      m.revenue += pr * pay;
    }
  }
  return m;
}

void psi_keys(const DiscreteInstance& inst, const PsiCoefficients& c,
              std::vector<std::vector<double>>& key, std::vector<std::vector<char>>& eligible) {
  const std::size_t n = inst.bidders.size();
  key.resize(n);
  eligible.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = inst.bidders[i];
    const auto phi = discrete_virtual_values(b);
    key[i].resize(b.types.size());
    eligible[i].resize(b.types.size());
    for (std::size_t k = 0; k < b.types.size(); ++k) {
      key[i][k] = b.weight * (c.alpha * phi[k] + c.beta * b.types[k] + c.gamma);
      eligible[i][k] = key[i][k] >= 0.0;
    }
  }
}

}  // namespace

MetricsRecord discrete_psi_metrics(const DiscreteInstance& inst, const PsiCoefficients& c) {
  inst.validate();
  const ProfileTable t = make_profiles(inst);
  std::vector<std::vector<double>> key;
  std::vector<std::vector<char>> elig;
  psi_keys(inst, c, key, elig);
  std::vector<double> X;
  allocate_profiles(inst, t, key, elig, X);
  return metrics_from_clicks(inst, t, X);
}

double discrete_psi_value(const DiscreteInstance& inst, const PsiCoefficients& c) {
  const ProfileTable t = make_profiles(inst);
  std::vector<std::vector<double>> key;
  std::vector<std::vector<char>> elig;
  psi_keys(inst, c, key, elig);
  const std::size_t n = inst.bidders.size(), K = inst.slots.size();
  std::vector<double> scores;
  double total = 0.0;
  for (std::size_t p = 0; p < t.count; ++p) {
    scores.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = key[i][t.digits[p][i]];
      if (s >= 0.0) scores.push_back(s);
    }
    std::sort(scores.begin(), scores.end(), std::greater<>());
    double v = 0.0;
    for (std::size_t r = 0; r < scores.size() && r < K; ++r) v += scores[r] * inst.slots[r];
    total += t.prob[p] * v;
  }
  return total;
}

std::vector<FrontierPoint> discrete_weight_sweep(const DiscreteInstance& inst,
                                                 const std::vector<ObjectiveWeights>& weights) {
  std::vector<FrontierPoint> out;
  for (const auto& w : weights) {
    w.validate();
    FrontierPoint fp;
    fp.params = {"optimal", 0.0, 0.0, w.alpha, w.beta, w.gamma};
    fp.metrics = discrete_psi_metrics(inst, {w.alpha, w.beta, w.gamma});
    out.push_back(fp);
  }
  return out;
}

// ---- linear programming -----------------------------------------------------

namespace {

struct LpResult {
  bool feasible = false;
  double value = 0.0;
};

// maximize c.x subject to A x (>= | =) b, x >= 0, by a dense two-phase
// tableau simplex. Sized for a handful of rows and many columns.
LpResult solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                  const std::vector<ConstraintSense>& sense, const std::vector<double>& c) {
  const std::size_t m = A.size();
  const std::size_t n = c.size();
  std::size_t surplus = 0;
  for (auto s : sense)
    if (s == ConstraintSense::AtLeast) ++surplus;
  const std::size_t cols = n + surplus + m;  // structural, surplus, artificial
  const std::size_t rhs = cols;
  std::vector<std::vector<double>> T(m, std::vector<double>(cols + 1, 0.0));
  std::size_t sp = n;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
    if (sense[i] == ConstraintSense::AtLeast) T[i][sp++] = -1.0;
    T[i][rhs] = b[i];
    if (b[i] < 0.0)
      for (auto& v : T[i]) v = -v;
    T[i][n + surplus + i] = 1.0;
  }
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) basis[i] = n + surplus + i;

  const double eps = 1e-11;
  auto run = [&](std::vector<double>& z, std::size_t allowed) {
    for (std::size_t iter = 0; iter < 100000; ++iter) {
      const bool bland = iter > 2000;
      std::size_t enter = cols;
      double best = -eps;
      for (std::size_t j = 0; j < allowed; ++j) {
        if (z[j] < best) {
          best = z[j];
          enter = j;
          if (bland) break;
        }
      }
      if (enter == cols) return;
      std::size_t leave = m;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        if (T[i][enter] > eps) {
          const double r = T[i][rhs] / T[i][enter];
          if (r < ratio - 1e-15 || (std::abs(r - ratio) <= 1e-15 && leave < m && basis[i] < basis[leave])) {
            ratio = r;
            leave = i;
          }
        }
      }
      if (leave == m) throw InternalError("linear program is unbounded");
      const double piv = T[leave][enter];
      for (auto& v : T[leave]) v /= piv;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == leave || T[i][enter] == 0.0) continue;
        const double f = T[i][enter];
        for (std::size_t j = 0; j <= cols; ++j) T[i][j] -= f * T[leave][j];
      }
      const double f = z[enter];
      for (std::size_t j = 0; j <= cols; ++j) z[j] -= f * T[leave][j];
      basis[leave] = enter;
    }
    throw InternalError("simplex iteration limit reached");
  };

  // phase 1: maximize -sum(artificials)
  std::vector<double> z(cols + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= cols; ++j)
      if (j < n + surplus || j == rhs) z[j] -= T[i][j];
  run(z, n + surplus);
  double scale = 1.0;
  for (double v : b) scale = std::max(scale, std::abs(v));
  LpResult res;
  if (z[rhs] < -1e-9 * scale) return res;
  res.feasible = true;
  // drive zero-level artificials out of the basis where possible
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n + surplus) continue;
    for (std::size_t j = 0; j < n + surplus; ++j) {
      if (std::abs(T[i][j]) > 1e-9) {
        const double piv = T[i][j];
        for (auto& v : T[i]) v /= piv;
        for (std::size_t r = 0; r < m; ++r) {
          if (r == i || T[r][j] == 0.0) continue;
          const double f = T[r][j];
          for (std::size_t q = 0; q <= cols; ++q) T[r][q] -= f * T[i][q];
        }
        basis[i] = j;
        break;
      }
    }
  }
  // phase 2
  std::vector<double> z2(cols + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) z2[j] = -c[j];
  for (std::size_t i = 0; i < m; ++i) {
    const double cb = basis[i] < n ? c[basis[i]] : 0.0;
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j <= cols; ++j) z2[j] += cb * T[i][j];
  }
  run(z2, n + surplus);
  res.value = z2[rhs];
  return res;
}

// Calls f(priority) for every interleaving of (bidder, type) pairs in which
// each bidder's higher types come first. priority[i][k] = position (0 = top).
void for_each_interleaving(const std::vector<std::size_t>& counts,
                           const std::function<void(const std::vector<std::vector<std::size_t>>&)>& f) {
  const std::size_t n = counts.size();
  std::vector<std::vector<std::size_t>> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i].assign(counts[i], 0);
  std::vector<std::size_t> left = counts;
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == total) {
      f(pos);
      return;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (left[i] == 0) continue;
      --left[i];
      pos[i][left[i]] = depth;
      rec(depth + 1);
      ++left[i];
    }
  };
  rec(0);
}

double multinomial(const std::vector<std::size_t>& counts) {
  double r = 1.0;
  std::size_t acc = 0;
  for (std::size_t c : counts)
    for (std::size_t k = 1; k <= c; ++k) {
      ++acc;
      r = r * static_cast<double>(acc) / static_cast<double>(k);
    }
  return r;
}

}  // namespace

DualityReport duality_gap_check(const DiscreteInstance& inst, const ObjectiveWeights& w0,
                                const std::vector<LinearConstraint>& constraints,
                                const DualityOptions& opt) {
  inst.validate();
  w0.validate();
  for (const auto& c : constraints) c.validate();
  const std::size_t n = inst.bidders.size();
  const std::size_t r = constraints.size();
  std::vector<std::size_t> counts(n);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    counts[i] = inst.bidders[i].types.size();
    pairs += counts[i];
  }
  const double policies = multinomial(counts) * static_cast<double>(pairs + 1);
  if (policies > static_cast<double>(opt.policy_budget)) {
    std::ostringstream os;
    os << "duality_gap_check: " << policies << " policies exceed budget " << opt.policy_budget;
    throw BudgetError(os.str());
  }

  // ---- primal: enumerate priority policies, then mix by LP
  const ProfileTable t = make_profiles(inst);
  std::map<std::array<double, 4>, bool> seen;
  std::vector<MetricsRecord> columns;
  std::vector<std::vector<double>> key(n);
  std::vector<std::vector<char>> elig(n);
  for (std::size_t i = 0; i < n; ++i) {
    key[i].resize(counts[i]);
    elig[i].resize(counts[i]);
  }
  std::vector<double> X;
  for_each_interleaving(counts, [&](const std::vector<std::vector<std::size_t>>& pos) {
    for (std::size_t cut = 0; cut <= pairs; ++cut) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < counts[i]; ++k) {
          key[i][k] = -static_cast<double>(pos[i][k]);
          elig[i][k] = pos[i][k] < cut;
        }
      allocate_profiles(inst, t, key, elig, X);
      const MetricsRecord m = metrics_from_clicks(inst, t, X);
      const std::array<double, 4> sig{m.revenue, m.welfare, m.clicks, m.impressions};
      if (seen.emplace(sig, true).second) columns.push_back(m);
    }
  });

  DualityReport rep;
  rep.policies = columns.size();
  const std::size_t P = columns.size();
  std::vector<double> cost(P);
  for (std::size_t p = 0; p < P; ++p) cost[p] = obj_value(w0, columns[p]);
  std::vector<std::vector<double>> A(r + 1, std::vector<double>(P));
  std::vector<double> b(r + 1);
  std::vector<ConstraintSense> sense(r + 1);
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t p = 0; p < P; ++p) A[k][p] = constraints[k].apply(columns[p]);
    b[k] = constraints[k].bound;
    sense[k] = constraints[k].sense;
  }
  std::fill(A[r].begin(), A[r].end(), 1.0);
  b[r] = 1.0;
  sense[r] = ConstraintSense::Equal;
  const LpResult primal = solve_lp(A, b, sense, cost);
  if (!primal.feasible) {
    rep.status = DualityStatus::Infeasible;
    return rep;
  }
  rep.primal = primal.value;

  // strict feasibility: maximize a common slack t on the >= rows
  double slack = 0.0;
  bool any_ge = false;
  for (const auto& c : constraints) any_ge |= c.sense == ConstraintSense::AtLeast;
  if (any_ge) {
    auto A2 = A;
    for (std::size_t k = 0; k <= r; ++k)
      A2[k].push_back(k < r && constraints[k].sense == ConstraintSense::AtLeast ? -1.0 : 0.0);
    std::vector<double> c2(P + 1, 0.0);
    c2[P] = 1.0;
    const LpResult s = solve_lp(A2, b, sense, c2);
    slack = s.feasible ? s.value : 0.0;
    rep.strictly_feasible = slack > 1e-9;
  } else {
    rep.strictly_feasible = true;
  }

  // ---- dual: minimize h over lambda
  auto h = [&](const std::vector<double>& lam) {
    PsiCoefficients c{w0.alpha, w0.beta, w0.gamma};
    double shift = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      c.alpha += lam[k] * constraints[k].alpha;
      c.beta += lam[k] * constraints[k].beta;
      c.gamma += lam[k] * constraints[k].gamma;
      shift += lam[k] * constraints[k].bound;
    }
    return discrete_psi_value(inst, c) - shift;
  };
  std::vector<double> best(r, 0.0);
  double best_h = h(best);
  if (r > 0) {
    // bracket: Slater bound when available, else doubling along each axis
    double U = 1.0;
    if (rep.strictly_feasible && any_ge && slack > 1e-9) {
      const double cmin = *std::min_element(cost.begin(), cost.end());
      U = std::max(1e-6, 1.05 * (best_h - cmin) / slack);
    }
    bool has_eq = false;
    for (const auto& c : constraints) has_eq |= c.sense == ConstraintSense::Equal;
    if (has_eq || !(rep.strictly_feasible && slack > 1e-9)) {
      for (int it = 0; it < 60; ++it) {
        bool grows = true;
        for (std::size_t k = 0; k < r && grows; ++k) {
          for (double sgn : {1.0, -1.0}) {
            if (sgn < 0.0 && constraints[k].sense == ConstraintSense::AtLeast) continue;
            std::vector<double> lam(r, 0.0);
            lam[k] = sgn * U;
            if (h(lam) < best_h) grows = false;
          }
        }
        if (grows) break;
        U *= 2.0;
      }
      U *= 2.0;
    }
    std::vector<double> lo(r), hi(r);
    for (std::size_t k = 0; k < r; ++k) {
      lo[k] = constraints[k].sense == ConstraintSense::AtLeast ? 0.0 : -U;
      hi[k] = U;
    }
    const std::size_t G = std::max<std::size_t>(opt.grid, 3);
    std::vector<double> center(r), half(r);
    for (std::size_t k = 0; k < r; ++k) {
      center[k] = 0.5 * (lo[k] + hi[k]);
      half[k] = 0.5 * (hi[k] - lo[k]);
    }
    std::vector<std::size_t> idx(r);
    std::vector<double> lam(r);
    for (std::size_t round = 0; round < opt.refinements; ++round) {
      std::fill(idx.begin(), idx.end(), 0);
      std::vector<double> round_best = best;
      double round_h = best_h;
      for (;;) {
        for (std::size_t k = 0; k < r; ++k) {
          const double a = std::max(lo[k], center[k] - half[k]);
          const double z = std::min(hi[k], center[k] + half[k]);
          lam[k] = a + (z - a) * static_cast<double>(idx[k]) / static_cast<double>(G - 1);
        }
        const double v = h(lam);
        if (v < round_h) {
          round_h = v;
          round_best = lam;
        }
        std::size_t k = 0;
        while (k < r && ++idx[k] == G) idx[k++] = 0;
        if (k == r) break;
      }
      best = round_best;
      best_h = round_h;
      center = best;
      for (auto& hw : half) hw *= 0.5;
    }
  }
  rep.dual = best_h;
  rep.lambda = best;
  rep.gap = rep.dual - rep.primal;
  return rep;
}

}  // namespace adtrade
