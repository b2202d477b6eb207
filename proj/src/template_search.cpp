#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <sstream>

#include "adtrade/errors.hpp"
#include "adtrade/parallel.hpp"
#include "adtrade/templates.hpp"

namespace adtrade {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double tol_for(double value) { return 1e-9 * (1.0 + std::abs(value)); }

double price_for_score(const PsiFunction& psi, double score, double w) {
  return std::max(psi.inverse(score / w), psi.zero());
}

// Everything about one class that depends only on the bids of its members.
// Sub-profiles are mixed-radix indices over the members' grids, first member
// most significant.
struct ClassTable {
  std::size_t cls = 0;
  std::vector<std::size_t> members;
  std::vector<std::size_t> radix;
  std::vector<std::size_t> stride;
  std::size_t count = 1;
  std::size_t m = 0;  // members.size()
  std::size_t T = 0;  // templates

  std::vector<double> value;   // count x T: class contribution to each template
  std::vector<int> rank;       // count x m: -1 when ineligible
  std::vector<double> floor;   // count x m: next-score price in own bid space
  std::vector<double> score;   // count x m
  std::vector<std::uint64_t> flags;  // templates passing the class envy filter
  std::vector<std::size_t> valid;    // sub-profiles with some flag set

  // coef[j][k]: derivative of the template value in the score at rank k
  std::vector<std::vector<double>> coef;
  // eff[j][k]: slot effect at rank k in template j (0 past the class's slots)
  std::vector<std::vector<double>> eff;

  std::size_t digit(std::size_t sigma, std::size_t k) const {
    return (sigma / stride[k]) % radix[k];
  }
};

double rank_coef(Selection sel, const std::vector<double>& e, std::size_t k) {
  auto at = [&](std::size_t i) { return i < e.size() ? e[i] : 0.0; };
  switch (sel) {
    case Selection::Standard:
      return at(k);
    case Selection::TopCapped:
      if (k == 0) return 0.0;
      if (k == 1) return at(0) + at(1);
      return at(k);
    case Selection::SecondHighest: {
      if (k != 1) return 0.0;
      double s = 0.0;
      for (double x : e) s += x;
      return s;
    }
  }
  return 0.0;
}

class Search {
 public:
  Search(const TemplateGame& g, const GridSearchOptions& opt,
         const std::vector<std::vector<double>>& grids)
      : g_(g), opt_(opt), grids_(grids), T_(g.templates.size()) {
    const std::size_t C = g.templates.num_classes;
    for (std::size_t c = 0; c < C; ++c) {
      ClassTable t;
      t.cls = c;
      for (std::size_t i = 0; i < g.bidders.size(); ++i)
        if (g.bidders[i].cls == c) t.members.push_back(i);
      if (t.members.empty()) continue;
      build(t);
      tables_.push_back(std::move(t));
    }
  }

  const std::vector<ClassTable>& tables() const { return tables_; }

  // Full check of one profile given by a sub-profile per table.
  bool check(const std::vector<std::size_t>& sigma) const {
    const std::size_t K = tables_.size();
    std::vector<double> V(T_, 0.0);
    for (std::size_t c = 0; c < K; ++c)
      for (std::size_t j = 0; j < T_; ++j) V[j] += tables_[c].value[sigma[c] * T_ + j];
    const std::size_t jstar = argmax(V);
    for (std::size_t c = 0; c < K; ++c)
      if (!((tables_[c].flags[sigma[c]] >> jstar) & 1u)) return false;

    // Prices and utilities at the profile.
    std::vector<std::vector<double>> price(K), own(K), effect(K);
    for (std::size_t c = 0; c < K; ++c) {
      const ClassTable& t = tables_[c];
      price[c].assign(t.m, 0.0);
      own[c].assign(t.m, 0.0);
      effect[c].assign(t.m, 0.0);
      for (std::size_t k = 0; k < t.m; ++k) {
        const double e = received(t, sigma[c], k, jstar);
        if (e <= 0.0) continue;
        effect[c][k] = e;
        price[c][k] = price_of(t, sigma[c], k, jstar, V);
        own[c][k] = e * (g_.bidders[t.members[k]].value - price[c][k]);
      }
    }

    if (opt_.pricing == TemplatePricing::Considerate) {
      for (std::size_t c = 0; c < K; ++c) {
        const ClassTable& t = tables_[c];
        const PsiFunction& psi = g_.class_psi[t.cls];
        for (std::size_t a = 0; a < t.m; ++a) {
          const ClassedBidder& bi = g_.bidders[t.members[a]];
          for (std::size_t b = 0; b < t.m; ++b) {
            if (a == b || effect[c][b] == 0.0) continue;
            const ClassedBidder& bj = g_.bidders[t.members[b]];
            const double pi = price_for_score(psi, bj.weight * psi(price[c][b]), bi.weight);
            if (effect[c][b] * (bi.value - pi) > own[c][a] + tol_for(bi.value)) return false;
          }
        }
      }
    }

    // Unilateral deviations over each bidder's grid.
    std::vector<double> Vd(T_);
    for (std::size_t c = 0; c < K; ++c) {
      const ClassTable& t = tables_[c];
      for (std::size_t k = 0; k < t.m; ++k) {
        const ClassedBidder& bi = g_.bidders[t.members[k]];
        const std::size_t cur = t.digit(sigma[c], k);
        const double bar = own[c][k] + tol_for(bi.value);
        for (std::size_t d = 0; d < t.radix[k]; ++d) {
          if (d == cur) continue;
          const std::size_t s2 = sigma[c] + d * t.stride[k] - cur * t.stride[k];
          for (std::size_t j = 0; j < T_; ++j)
            Vd[j] = V[j] - t.value[sigma[c] * T_ + j] + t.value[s2 * T_ + j];
          const std::size_t jd = argmax(Vd);
          const double e = received(t, s2, k, jd);
          if (e <= 0.0) {
            if (0.0 > bar) return false;
            continue;
          }
          const double p = price_of(t, s2, k, jd, Vd);
          if (e * (bi.value - p) > bar) return false;
        }
      }
    }
    return true;
  }

  std::vector<double> bids_of(const std::vector<std::size_t>& sigma) const {
    std::vector<double> bids(g_.bidders.size(), 0.0);
    for (std::size_t c = 0; c < tables_.size(); ++c) {
      const ClassTable& t = tables_[c];
      for (std::size_t k = 0; k < t.m; ++k) bids[t.members[k]] = grids_[t.members[k]][t.digit(sigma[c], k)];
    }
    return bids;
  }

 private:
  std::size_t argmax(const std::vector<double>& V) const {
    std::size_t best = 0;
    for (std::size_t j = 1; j < V.size(); ++j)
      if (V[j] > V[best]) best = j;
    return best;
  }

  double received(const ClassTable& t, std::size_t sigma, std::size_t k, std::size_t j) const {
    const int r = t.rank[sigma * t.m + k];
    if (r < 0) return 0.0;
    const auto& e = t.eff[j];
    return static_cast<std::size_t>(r) < e.size() ? e[r] : 0.0;
  }

  double price_of(const ClassTable& t, std::size_t sigma, std::size_t k, std::size_t j,
                  const std::vector<double>& V) const {
    const double a = t.floor[sigma * t.m + k];
    if (opt_.pricing == TemplatePricing::Indifferent) return a;
    const std::size_t r = static_cast<std::size_t>(t.rank[sigma * t.m + k]);
    const double sc = t.score[sigma * t.m + k];
    const double dj = t.coef[j][r];
    const double mj = V[j] - dj * sc;
    double keep = kNegInf;
    for (std::size_t j2 = 0; j2 < T_; ++j2) {
      if (j2 == j) continue;
      const double diff = dj - t.coef[j2][r];
      if (diff <= 0.0) continue;
      const double m2 = V[j2] - t.coef[j2][r] * sc;
      keep = std::max(keep, (m2 - mj) / diff);
    }
    if (keep == kNegInf) return a;
    const ClassedBidder& b = g_.bidders[t.members[k]];
    return std::max(a, price_for_score(g_.class_psi[t.cls], keep, b.weight));
  }

  void build(ClassTable& t) const {
    t.m = t.members.size();
    t.T = T_;
    t.radix.resize(t.m);
    t.stride.resize(t.m);
    double total = 1.0;
    for (std::size_t k = 0; k < t.m; ++k) {
      t.radix[k] = grids_[t.members[k]].size();
      total *= static_cast<double>(t.radix[k]);
    }
    if (total > 2e8) throw BudgetError("per-class grid too large; use a coarser grid");
    t.count = static_cast<std::size_t>(total);
    std::size_t s = 1;
    for (std::size_t k = t.m; k-- > 0;) {
      t.stride[k] = s;
      s *= t.radix[k];
    }
    t.coef.assign(T_, std::vector<double>(t.m, 0.0));
    t.eff.assign(T_, {});
    for (std::size_t j = 0; j < T_; ++j) {
      const auto& e = g_.templates.effects(j, t.cls);
      t.eff[j] = e;
      for (std::size_t k = 0; k < t.m; ++k) t.coef[j][k] = rank_coef(opt_.selection, e, k);
    }
    t.value.assign(t.count * T_, 0.0);
    t.rank.assign(t.count * t.m, -1);
    t.floor.assign(t.count * t.m, 0.0);
    t.score.assign(t.count * t.m, 0.0);
    t.flags.assign(t.count, 0);

    const PsiFunction& psi = g_.class_psi[t.cls];
    std::vector<double> bid(t.m), sc(t.m), hi(t.m);
    std::vector<std::size_t> order;
    for (std::size_t sigma = 0; sigma < t.count; ++sigma) {
      order.clear();
      for (std::size_t k = 0; k < t.m; ++k) {
        const ClassedBidder& b = g_.bidders[t.members[k]];
        bid[k] = grids_[t.members[k]][t.digit(sigma, k)];
        const double p = psi(bid[k]);
        sc[k] = b.weight * p;
        t.score[sigma * t.m + k] = sc[k];
        if (p >= 0.0) order.push_back(k);
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sc[a] > sc[b]; });
      for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t k = order[r];
        t.rank[sigma * t.m + k] = static_cast<int>(r);
        const ClassedBidder& b = g_.bidders[t.members[k]];
        t.floor[sigma * t.m + k] =
            r + 1 < order.size() ? price_for_score(psi, sc[order[r + 1]], b.weight) : psi.zero();
      }
      const double second = order.size() > 1 ? sc[order[1]] : 0.0;
      for (std::size_t j = 0; j < T_; ++j) {
        const auto& e = t.eff[j];
        double v = 0.0;
        if (opt_.selection == Selection::SecondHighest) {
          for (double x : e) v += second * x;
        } else {
          for (std::size_t r = 0; r < e.size() && r < order.size(); ++r)
            v += ((r == 0 && opt_.selection == Selection::TopCapped) ? second : sc[order[r]]) * e[r];
        }
        t.value[sigma * T_ + j] = v;
      }
      // Envy filter per template. Prices lie in [floor, bid]; with the lowest
      // own price and the highest rival price the test is necessary, and exact
      // for indifferent pricing where the price is the floor.
      const bool exact = opt_.pricing == TemplatePricing::Indifferent;
      std::uint64_t flags = 0;
      for (std::size_t j = 0; j < T_; ++j) {
        bool ok = true;
        for (std::size_t a = 0; a < t.m && ok; ++a) {
          const ClassedBidder& bi = g_.bidders[t.members[a]];
          const double ea = received(t, sigma, a, j);
          const double own = ea > 0.0 ? ea * (bi.value - t.floor[sigma * t.m + a]) : 0.0;
          for (std::size_t b = 0; b < t.m; ++b) {
            if (b == a) continue;
            const double eb = received(t, sigma, b, j);
            if (eb <= 0.0) continue;
            const ClassedBidder& bj = g_.bidders[t.members[b]];
            const double pj = exact ? t.floor[sigma * t.m + b] : bid[b];
            const double pi = price_for_score(psi, bj.weight * psi(pj), bi.weight);
            if (eb * (bi.value - pi) > own + tol_for(bi.value)) {
              ok = false;
              break;
            }
          }
        }
        if (ok) flags |= std::uint64_t{1} << j;
      }
      t.flags[sigma] = flags;
      if (flags) t.valid.push_back(sigma);
    }
  }

  const TemplateGame& g_;
  const GridSearchOptions& opt_;
  const std::vector<std::vector<double>>& grids_;
  std::size_t T_;
  std::vector<ClassTable> tables_;
};

}  // namespace

std::vector<std::vector<double>> search_grids(const TemplateGame& g, const GridSearchOptions& opt) {
  if (opt.points < 2) throw ConfigError("grid search needs at least 2 points per bidder");
  double vmax = 0.0;
  for (const auto& b : g.bidders) vmax = std::max(vmax, b.value);
  std::vector<std::vector<double>> grids;
  for (std::size_t i = 0; i < g.bidders.size(); ++i) {
    const ClassedBidder& b = g.bidders[i];
    const PsiFunction& psi = g.class_psi[b.cls];
    const double lo = std::max(0.0, psi.lower());
    const double hi = std::min(opt.conservative ? b.value : opt.upper_factor * vmax, psi.upper());
    std::vector<double> grid;
    if (hi > lo) {
      for (std::size_t k = 0; k < opt.points; ++k)
        grid.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(opt.points - 1));
    } else {
      grid.push_back(lo);
    }
    if (i < opt.anchors.size())
      for (double a : opt.anchors[i])
        if (a >= lo && a <= std::max(lo, hi)) grid.push_back(a);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grids.push_back(std::move(grid));
  }
  return grids;
}

GridSearchResult sne_grid_search(const TemplateGame& g, const GridSearchOptions& opt) {
  g.validate();
  if (g.templates.size() > 64) throw ConfigError("grid search supports at most 64 templates");
  if (opt.selection == Selection::SecondHighest && !is_class_selection(g.templates))
    throw ConfigError("second-highest selection needs a class-selection template set");
  GridSearchResult res;
  const auto grids = search_grids(g, opt);
  res.profiles = 1.0;
  for (const auto& gr : grids) {
    res.resolution.push_back(gr.size());
    res.profiles *= static_cast<double>(gr.size());
  }
  if (res.profiles > opt.budget) {
    std::ostringstream os;
    os << "grid has " << res.profiles << " profiles, above the budget of " << opt.budget
       << "; use fewer points per bidder or fewer bidders";
    throw BudgetError(os.str());
  }
  if (g.bidders.empty()) {
    res.found = std::vector<double>{};
    return res;
  }

  const Search search(g, opt, grids);
  const auto& tabs = search.tables();
  const std::size_t K = tabs.size();
  for (const auto& t : tabs)
    if (t.valid.empty()) return res;

  // Outer loop over the first class's surviving sub-profiles, split in chunks.
  const std::size_t outer = tabs[0].valid.size();
  const std::size_t chunk = std::max<std::size_t>(1, outer / 256);
  const std::size_t nchunks = (outer + chunk - 1) / chunk;
  std::atomic<std::size_t> best{nchunks};
  std::vector<std::vector<std::size_t>> hit(nchunks);
  std::vector<double> examined(nchunks, 0.0);

  parallel_for(nchunks, opt.threads, [&](std::size_t ci) {
    if (ci > best.load()) return;
    std::vector<std::size_t> pos(K, 0), sigma(K);
    const std::size_t end = std::min(outer, (ci + 1) * chunk);
    for (std::size_t o = ci * chunk; o < end; ++o) {
      sigma[0] = tabs[0].valid[o];
      std::fill(pos.begin() + 1, pos.end(), 0);
      for (;;) {
        for (std::size_t c = 1; c < K; ++c) sigma[c] = tabs[c].valid[pos[c]];
        examined[ci] += 1.0;
        if (search.check(sigma)) {
          hit[ci] = sigma;
          std::size_t cur = best.load();
          while (ci < cur && !best.compare_exchange_weak(cur, ci)) {
          }
          return;
        }
        bool done = true;
        for (std::size_t c = K; c-- > 1;) {
          if (++pos[c] < tabs[c].valid.size()) {
            done = false;
            break;
          }
          pos[c] = 0;
        }
        if (done) break;
      }
      if (ci > best.load()) return;
    }
  });

  for (double e : examined) res.examined += e;
  const std::size_t b = best.load();
  if (b == nchunks) return res;
  const std::vector<double> bids = search.bids_of(hit[b]);

  // Independent re-check through the generic verifier on the same deviations.
  VerifyOptions vo;
  vo.conservative = opt.conservative;
  vo.anchors = grids;
  vo.anchors_only = true;
  const SneVerdict v = verify_template_sne(g, bids, opt.pricing, opt.selection, vo);
  if (!v.ok) throw InternalError("grid search profile fails re-verification: " + v.violation);
  res.found = bids;
  return res;
}

}  // namespace adtrade
