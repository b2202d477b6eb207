#include "adtrade/templates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "adtrade/errors.hpp"

namespace adtrade {

namespace {

const std::vector<double> kNoSlots;

double tol_for(double value) { return 1e-9 * (1.0 + std::abs(value)); }

// Smallest bid in [lo, hi] for which keep(b) holds, assuming keep(hi) and a
// single switch point. Returns lo when keep(lo).
double retention_bid(const std::function<bool(double)>& keep, double lo, double hi) {
  if (hi <= lo || keep(lo)) return lo;
  const double tol = 1e-10 * std::max(1.0, std::abs(hi));
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (keep(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Price in i's bid space matching a score y (per unit weight w_i), floored.
double price_for_score(const PsiFunction& psi, double score, double w) {
  return std::max(psi.inverse(score / w), psi.zero());
}

}  // namespace

void TemplateSet::validate() const {
  if (templates.empty()) throw ConfigError("template set is empty");
  for (std::size_t j = 0; j < templates.size(); ++j) {
    if (templates[j].class_effects.size() > num_classes)
      throw ConfigError("template refers to an unknown class");
    for (const auto& eff : templates[j].class_effects)
      for (std::size_t k = 0; k < eff.size(); ++k) {
        if (!(eff[k] >= 0.0) || !std::isfinite(eff[k]))
          throw ConfigError("slot effects must be finite and non-negative");
        if (k > 0 && eff[k] > eff[k - 1])
          throw ConfigError("slot effects must be non-increasing within a class");
      }
  }
}

const std::vector<double>& TemplateSet::effects(std::size_t j, std::size_t c) const {
  const auto& ce = templates[j].class_effects;
  return c < ce.size() ? ce[c] : kNoSlots;
}

bool is_class_selection(const TemplateSet& ts, double tol) {
  for (std::size_t c = 0; c < ts.num_classes; ++c) {
    std::vector<const std::vector<double>*> uses;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const auto& e = ts.effects(j, c);
      if (std::any_of(e.begin(), e.end(), [](double x) { return x != 0.0; })) uses.push_back(&e);
    }
    for (std::size_t a = 1; a < uses.size(); ++a) {
      const auto& x = *uses[0];
      const auto& y = *uses[a];
      auto nonzero = [](const std::vector<double>& v) {
        return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double s) { return s != 0.0; }));
      };
      if (nonzero(x) != nonzero(y)) return false;
      double ratio = 0.0;
      for (std::size_t k = 0; k < x.size() && k < y.size(); ++k) {
        if (x[k] == 0.0 && y[k] == 0.0) continue;
        if (x[k] == 0.0 || y[k] == 0.0) return false;
        const double r = x[k] / y[k];
        if (ratio == 0.0)
          ratio = r;
        else if (std::abs(r - ratio) > tol * std::max(1.0, std::abs(ratio)))
          return false;
      }
    }
  }
  return true;
}

void TemplateGame::validate() const {
  templates.validate();
  if (class_psi.size() != templates.num_classes)
    throw ConfigError("need one psi function per class");
  for (const auto& b : bidders) {
    if (b.cls >= templates.num_classes) throw ConfigError("bidder class out of range");
    if (!(b.weight > 0.0) || !std::isfinite(b.weight)) throw ConfigError("weight must be positive");
    if (!(b.value >= 0.0) || !std::isfinite(b.value)) throw ConfigError("value must be >= 0");
  }
}

std::vector<double> TemplateGame::values() const {
  std::vector<double> v;
  for (const auto& b : bidders) v.push_back(b.value);
  return v;
}

std::vector<double> TemplateGame::bids() const {
  std::vector<double> v;
  for (const auto& b : bidders) v.push_back(b.bid);
  return v;
}

TemplateOutcome allocate_templates(const TemplateGame& g, const std::vector<double>& bids,
                                   Selection sel) {
  const std::size_t n = g.bidders.size();
  const std::size_t C = g.templates.num_classes;
  if (bids.size() != n) throw DomainError("allocate_templates: one bid per bidder required");
  if (sel == Selection::SecondHighest && !is_class_selection(g.templates))
    throw ConfigError("second-highest selection needs a class-selection template set");
  std::vector<double> score(n);
  TemplateOutcome out;
  out.class_order.assign(C, {});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = g.bidders[i];
    const double p = g.class_psi[b.cls](bids[i]);
    score[i] = b.weight * p;
    if (p >= 0.0) out.class_order[b.cls].push_back(i);
  }
  for (auto& ord : out.class_order)
    std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  out.template_values.assign(g.templates.size(), 0.0);
  for (std::size_t j = 0; j < g.templates.size(); ++j) {
    double v = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const auto& eff = g.templates.effects(j, c);
      const auto& ord = out.class_order[c];
      const double second = ord.size() > 1 ? score[ord[1]] : 0.0;
      if (sel == Selection::SecondHighest) {
        v += second * std::accumulate(eff.begin(), eff.end(), 0.0);
        continue;
      }
      for (std::size_t k = 0; k < eff.size() && k < ord.size(); ++k) {
        const double s = (k == 0 && sel == Selection::TopCapped) ? second : score[ord[k]];
        v += s * eff[k];
      }
    }
    out.template_values[j] = v;
  }
  out.chosen = static_cast<std::size_t>(
      std::max_element(out.template_values.begin(), out.template_values.end()) -
      out.template_values.begin());

  out.position.assign(n, std::nullopt);
  out.effects.assign(n, 0.0);
  out.prices.assign(n, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto& eff = g.templates.effects(out.chosen, c);
    const auto& ord = out.class_order[c];
    for (std::size_t k = 0; k < eff.size() && k < ord.size(); ++k) {
      if (eff[k] <= 0.0) continue;
      out.position[ord[k]] = k;
      out.effects[ord[k]] = eff[k];
      out.objective += score[ord[k]] * eff[k];
    }
  }
  return out;
}

TemplateOutcome second_highest_allocate(const TemplateGame& g, const std::vector<double>& bids) {
  return allocate_templates(g, bids, Selection::SecondHighest);
}

namespace {

double indifferent_price(const TemplateGame& g, const std::vector<double>& bids,
                         const TemplateOutcome& out, std::size_t i) {
  const auto& b = g.bidders[i];
  const PsiFunction& psi = g.class_psi[b.cls];
  const auto& ord = out.class_order[b.cls];
  const std::size_t k = *out.position[i];
  if (k + 1 < ord.size()) {
    const std::size_t nxt = ord[k + 1];
    const double sc = g.bidders[nxt].weight * psi(bids[nxt]);
    return price_for_score(psi, sc, b.weight);
  }
  return psi.zero();
}

double considerate_price(const TemplateGame& g, const std::vector<double>& bids,
                         const TemplateOutcome& out, std::size_t i, Selection sel) {
  const double a = indifferent_price(g, bids, out, i);
  const std::size_t k = *out.position[i];
  std::vector<double> probe = bids;
  auto keep = [&](double b) {
    probe[i] = b;
    const TemplateOutcome o = allocate_templates(g, probe, sel);
    return o.chosen == out.chosen && o.position[i] && *o.position[i] == k;
  };
  return std::max(a, retention_bid(keep, a, bids[i]));
}

}  // namespace

std::vector<double> template_indifferent_gsp(const TemplateGame& g, const std::vector<double>& bids,
                                             const TemplateOutcome& out) {
  std::vector<double> p(g.bidders.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (out.position[i]) p[i] = indifferent_price(g, bids, out, i);
  return p;
}

std::vector<double> template_considerate_gsp(const TemplateGame& g, const std::vector<double>& bids,
                                             const TemplateOutcome& out, Selection sel) {
  std::vector<double> p(g.bidders.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (out.position[i]) p[i] = considerate_price(g, bids, out, i, sel);
  return p;
}

TemplateOutcome run_template_auction(const TemplateGame& g, const std::vector<double>& bids,
                                     Selection sel, TemplatePricing pricing,
                                     std::optional<std::size_t> only) {
  TemplateOutcome out = allocate_templates(g, bids, sel);
  for (std::size_t i = 0; i < g.bidders.size(); ++i) {
    if (!out.position[i] || (only && *only != i)) continue;
    out.prices[i] = pricing == TemplatePricing::Indifferent ? indifferent_price(g, bids, out, i)
                                                            : considerate_price(g, bids, out, i, sel);
  }
  return out;
}

double myerson_price(const std::function<double(double)>& effect, double lo, double bid,
                     std::size_t grid) {
  const double top = effect(bid);
  if (top <= 0.0) return 0.0;
  grid = std::max<std::size_t>(grid, 1);
  double prev_z = lo;
  double prev_e = effect(lo);
  double pay = lo * prev_e;
  const double tol = 1e-12 * std::max(1.0, std::abs(bid));
  for (std::size_t k = 1; k <= grid; ++k) {
    const double z = lo + (bid - lo) * static_cast<double>(k) / static_cast<double>(grid);
    const double e = effect(z);
    if (e < prev_e - 1e-12) {
      std::ostringstream os;
      os << "received effect decreases in own bid near " << z;
      throw InternalError(os.str());
    }
    while (e > prev_e) {
      double a = prev_z, b = z;
      for (int it = 0; it < 200 && b - a > tol; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        if (effect(mid) > prev_e)
          b = mid;
        else
          a = mid;
      }
      const double e_new = effect(b);
      pay += 0.5 * (a + b) * (e_new - prev_e);
      prev_e = e_new;
      prev_z = b;
    }
    prev_z = z;
  }
  return pay / top;
}

std::vector<double> truthful_template_payments(const TemplateGame& g,
                                               const std::vector<double>& bids,
                                               std::size_t grid, Selection sel) {
  const TemplateOutcome out = allocate_templates(g, bids, sel);
  std::vector<double> prices(g.bidders.size(), 0.0);
  std::vector<double> probe = bids;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!out.position[i]) continue;
    auto effect = [&](double b) {
      probe[i] = b;
      return allocate_templates(g, probe, sel).effects[i];
    };
    const double lo = std::max(0.0, g.class_psi[g.bidders[i].cls].lower());
    prices[i] = myerson_price(effect, lo, bids[i], grid);
    probe[i] = bids[i];
  }
  return prices;
}

SneVerdict verify_sne_generic(const Mechanism& mech, const std::vector<ClassedBidder>& bidders,
                              const std::vector<PsiFunction>& class_psi,
                              const std::vector<double>& bids, const VerifyOptions& opt) {
  const std::size_t n = bidders.size();
  std::ostringstream os;
  if (opt.conservative)
    for (std::size_t i = 0; i < n; ++i)
      if (bids[i] > bidders[i].value + 1e-12) {
        os << "bidder " << i << " bids " << bids[i] << " above value " << bidders[i].value;
        return {false, os.str()};
      }
  const PricedOutcome base = mech(bids, std::nullopt);
  std::vector<double> own(n);
  for (std::size_t i = 0; i < n; ++i) own[i] = base.effects[i] * (bidders[i].value - base.prices[i]);

  for (std::size_t i = 0; i < n; ++i) {
    const PsiFunction& psi = class_psi[bidders[i].cls];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || bidders[j].cls != bidders[i].cls || base.effects[j] == 0.0) continue;
      const double sc = bidders[j].weight * psi(base.prices[j]);
      const double pi = price_for_score(psi, sc, bidders[i].weight);
      const double alt = base.effects[j] * (bidders[i].value - pi);
      if (alt > own[i] + tol_for(bidders[i].value)) {
        os << "envy: bidder " << i << " prefers the slot of bidder " << j << " (" << alt << " > "
           << own[i] << ")";
        return {false, os.str()};
      }
    }
  }

  double cap = 0.0;
  for (std::size_t i = 0; i < n; ++i) cap = std::max({cap, bids[i], bidders[i].value});
  std::vector<double> dev = bids;
  for (std::size_t i = 0; i < n; ++i) {
    const PsiFunction& psi = class_psi[bidders[i].cls];
    const double lo = std::max(0.0, psi.lower());
    const double hi = std::min(opt.conservative ? bidders[i].value : 2.0 * cap, psi.upper());
    std::vector<double> cand;
    const std::size_t G = std::max<std::size_t>(opt.deviation_grid, 1);
    if (hi >= lo && !opt.anchors_only)
      for (std::size_t k = 0; k <= G; ++k)
        cand.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(G));
    if (i < opt.anchors.size())
      for (double a : opt.anchors[i])
        if (a >= lo && a <= hi) cand.push_back(a);
    for (double b : cand) {
      dev[i] = b;
      const PricedOutcome o = mech(dev, i);
      const double u = o.effects[i] * (bidders[i].value - o.prices[i]);
      if (u > own[i] + tol_for(bidders[i].value)) {
        os << "deviation: bidder " << i << " gains by bidding " << b << " (" << u << " > "
           << own[i] << ")";
        dev[i] = bids[i];
        return {false, os.str()};
      }
    }
    dev[i] = bids[i];
  }
  return {};
}

SneVerdict verify_template_sne(const TemplateGame& g, const std::vector<double>& bids,
                               TemplatePricing pricing, Selection sel, const VerifyOptions& opt) {
  g.validate();
  Mechanism mech = [&](const std::vector<double>& b, std::optional<std::size_t> only) {
    const TemplateOutcome o = run_template_auction(g, b, sel, pricing, only);
    return PricedOutcome{o.effects, o.prices};
  };
  return verify_sne_generic(mech, g.bidders, g.class_psi, bids, opt);
}

// ---- MITA -------------------------------------------------------------------

void MitaInstance::validate() const {
  if (text_slots.empty()) throw ConfigError("MITA needs at least one text slot");
  for (std::size_t k = 0; k < text_slots.size(); ++k) {
    if (!(text_slots[k] > 0.0)) throw ConfigError("text slot effects must be positive");
    if (k > 0 && text_slots[k] > text_slots[k - 1])
      throw ConfigError("text slot effects must be non-increasing");
  }
  if (!(image_slot > 0.0)) throw ConfigError("image slot effect must be positive");
  for (const auto* cls : {&text, &image})
    for (const auto& b : *cls)
      if (!(b.weight > 0.0) || !(b.value >= 0.0)) throw ConfigError("invalid MITA bidder");
}

std::vector<ClassedBidder> MitaInstance::all_bidders() const {
  std::vector<ClassedBidder> all;
  for (auto b : text) {
    b.cls = 0;
    all.push_back(b);
  }
  for (auto b : image) {
    b.cls = 1;
    all.push_back(b);
  }
  return all;
}

std::vector<double> MitaInstance::values() const {
  std::vector<double> v;
  for (const auto& b : text) v.push_back(b.value);
  for (const auto& b : image) v.push_back(b.value);
  return v;
}

TemplateOutcome mita_allocate(const MitaInstance& m, const std::vector<double>& bids) {
  const std::size_t T = m.text.size(), I = m.image.size(), n = T + I;
  if (bids.size() != n) throw DomainError("mita_allocate: one bid per bidder required");
  std::vector<double> score(n);
  TemplateOutcome out;
  out.class_order.assign(2, {});
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_text = i < T;
    const ClassedBidder& b = is_text ? m.text[i] : m.image[i - T];
    const double p = (is_text ? m.text_psi : m.image_psi)(bids[i]);
    score[i] = b.weight * p;
    if (p >= 0.0) out.class_order[is_text ? 0 : 1].push_back(i);
  }
  for (auto& ord : out.class_order)
    std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  const auto& text = out.class_order[0];
  const auto& image = out.class_order[1];
  const double vi = image.empty() ? 0.0 : score[image[0]] * m.image_slot;
  out.template_values.push_back(vi);
  std::size_t jstar = 0;
  double prefix = 0.0;
  for (std::size_t j = 0; j < m.text_slots.size() && j < text.size(); ++j) {
    prefix += m.text_slots[j];
    const double v = score[text[j]] * prefix;
    out.template_values.push_back(v);
    if (v >= vi) jstar = j + 1;
  }
  out.chosen = jstar;
  out.position.assign(n, std::nullopt);
  out.effects.assign(n, 0.0);
  out.prices.assign(n, 0.0);
  if (jstar > 0) {
    for (std::size_t j = 0; j < jstar; ++j) {
      out.position[text[j]] = j;
      out.effects[text[j]] = m.text_slots[j];
      out.objective += score[text[j]] * m.text_slots[j];
    }
  } else if (!image.empty()) {
    out.position[image[0]] = 0;
    out.effects[image[0]] = m.image_slot;
    out.objective = vi;
  }
  return out;
}

std::vector<double> mita_considerate_gsp(const MitaInstance& m, const std::vector<double>& bids,
                                         const TemplateOutcome& out,
                                         std::optional<std::size_t> only) {
  const std::size_t T = m.text.size(), n = bids.size();
  std::vector<double> prices(n, 0.0);
  std::vector<double> probe = bids;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.position[i] || (only && *only != i)) continue;
    const bool is_text = i < T;
    const PsiFunction& psi = is_text ? m.text_psi : m.image_psi;
    const ClassedBidder& b = is_text ? m.text[i] : m.image[i - T];
    const auto& ord = out.class_order[is_text ? 0 : 1];
    const std::size_t k = *out.position[i];
    double a = psi.zero();
    if (k + 1 < ord.size()) {
      const std::size_t nxt = ord[k + 1];
      const ClassedBidder& nb = nxt < T ? m.text[nxt] : m.image[nxt - T];
      a = price_for_score(psi, nb.weight * psi(bids[nxt]), b.weight);
    }
    auto keep = [&](double x) {
      probe[i] = x;
      const TemplateOutcome o = mita_allocate(m, probe);
      return o.position[i] && *o.position[i] == k;
    };
    prices[i] = std::max(a, retention_bid(keep, a, bids[i]));
    probe[i] = bids[i];
  }
  return prices;
}

std::vector<double> mita_truthful_payments(const MitaInstance& m, const std::vector<double>& bids,
                                           std::size_t grid) {
  const TemplateOutcome out = mita_allocate(m, bids);
  const std::size_t T = m.text.size();
  std::vector<double> prices(bids.size(), 0.0);
  std::vector<double> probe = bids;
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (!out.position[i]) continue;
    auto effect = [&](double x) {
      probe[i] = x;
      return mita_allocate(m, probe).effects[i];
    };
    const PsiFunction& psi = i < T ? m.text_psi : m.image_psi;
    prices[i] = myerson_price(effect, std::max(0.0, psi.lower()), bids[i], grid);
    probe[i] = bids[i];
  }
  return prices;
}

Mechanism mita_mechanism(const MitaInstance& m) {
  return [m](const std::vector<double>& bids, std::optional<std::size_t> only) {
    const TemplateOutcome o = mita_allocate(m, bids);
    return PricedOutcome{o.effects, mita_considerate_gsp(m, bids, o, only)};
  };
}

std::vector<double> mita_sne_construct(const MitaInstance& m, std::size_t deviation_grid) {
  m.validate();
  const std::size_t T = m.text.size();
  std::vector<double> bids = m.values();
  const TemplateOutcome truth = mita_allocate(m, bids);
  if (truth.chosen > 0) {
    const auto& image = truth.class_order[1];
    const double vi = image.empty()
                          ? 0.0
                          : m.image[image[0] - T].weight * m.image_psi(bids[image[0]]);
    double prefix = 0.0;
    for (std::size_t j = 0; j < truth.chosen; ++j) prefix += m.text_slots[j];
    const double rho = vi * m.image_slot / prefix;
    const RankingRule rule = RankingRule::optimal({m.text_psi}, rho);
    std::vector<BidderProfile> types;
    for (const auto& b : m.text) types.push_back({b.value, b.weight, b.value});
    const std::vector<double> text_bids = lowest_sne_bids(rule, types, SlotLayout(m.text_slots));
    std::copy(text_bids.begin(), text_bids.end(), bids.begin());
  }
  const TemplateOutcome got = mita_allocate(m, bids);
  if (got.chosen != truth.chosen || got.position != truth.position)
    throw InternalError("constructed MITA bids do not reproduce the truthful allocation");
  VerifyOptions opt;
  opt.deviation_grid = deviation_grid;
  opt.conservative = true;
  const SneVerdict v =
      verify_sne_generic(mita_mechanism(m), m.all_bidders(), {m.text_psi, m.image_psi}, bids, opt);
  if (!v.ok) throw InternalError("constructed MITA bids fail SNE verification: " + v.violation);
  return bids;
}

}  // namespace adtrade
