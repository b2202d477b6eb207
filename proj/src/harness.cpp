#include "adtrade/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "adtrade/errors.hpp"

namespace adtrade {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double number(const json& j, const char* key, const std::string& path, std::optional<double> def = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    bad(path + "." + key, "missing");
  }
  if (!v->is_number()) bad(path + "." + key, "expected a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) bad(path + "." + key, "must be finite");
  return x;
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) bad(path + "[" + std::to_string(k) + "]", "expected a number");
    out.push_back(j[k].get<double>());
  }
  return out;
}

template <class F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    bad(path, e.what());
  }
}

ValueDistribution parse_dist(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected a distribution object");
  const json* t = find(j, "type");
  if (!t || !t->is_string()) bad(path + ".type", "missing distribution type");
  const std::string type = t->get<std::string>();
  return wrap(path, [&] {
    if (type == "uniform") return ValueDistribution::uniform(number(j, "lo", path, 0.0), number(j, "hi", path, 1.0));
    if (type == "lognormal")
      return ValueDistribution::lognormal(number(j, "mu", path, 0.0), number(j, "sigma", path, 1.0),
                                          number(j, "q_lo", path, 0.001), number(j, "q_hi", path, 0.999));
    if (type == "beta") return ValueDistribution::beta(number(j, "a", path), number(j, "b", path));
    if (type == "empirical") {
      const json* s = find(j, "sample");
      if (!s) bad(path + ".sample", "missing");
      return ValueDistribution::empirical(numbers(*s, path + ".sample"));
    }
    bad(path + ".type", "unknown distribution '" + type + "' (uniform, lognormal, beta, empirical)");
  });
}

std::vector<BidderModel> parse_bidders(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array");
  std::vector<BidderModel> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string p = path + "[" + std::to_string(k) + "]";
    const json& b = j[k];
    if (!b.is_object()) bad(p, "expected an object");
    const double count = number(b, "count", p, 1.0);
    if (count < 1.0 || count != std::floor(count) || count > 1e6) bad(p + ".count", "must be a positive integer");
    const json* v = find(b, "value");
    if (!v) bad(p + ".value", "missing");
    BidderModel m{parse_dist(*v, p + ".value"), WeightSpec::constant(1.0), 0.0};
    if (const json* w = find(b, "weight")) {
      if (w->is_number()) {
        const double x = w->get<double>();
        if (!(x > 0.0) || !std::isfinite(x)) bad(p + ".weight", "must be positive");
        m.weight = WeightSpec::constant(x);
      } else {
        m.weight = WeightSpec::random(parse_dist(*w, p + ".weight"));
      }
    }
    m.correlation = number(b, "correlation", p, 0.0);
    if (m.correlation < -1.0 || m.correlation > 1.0) bad(p + ".correlation", "must lie in [-1, 1]");
    for (int c = 0; c < static_cast<int>(count); ++c) out.push_back(m);
  }
  return out;
}

ObjectiveWeights parse_objective(const json& root, const std::string& path) {
  ObjectiveWeights w;
  if (const json* o = find(root, "objective")) {
    if (!o->is_object()) bad(path + ".objective", "expected an object");
    w.alpha = number(*o, "alpha", path + ".objective", 0.0);
    w.beta = number(*o, "beta", path + ".objective", 1.0);
    w.gamma = number(*o, "gamma", path + ".objective", 0.0);
    wrap(path + ".objective", [&] { w.validate(); });
  }
  return w;
}

SlotLayout parse_slots(const json& j, const std::string& path) {
  SlotLayout s(numbers(j, path));
  wrap(path, [&] { s.validate(); });
  return s;
}

TemplateGame parse_template_game(const json& root) {
  TemplateGame g;
  const json* cls = find(root, "classes");
  if (!cls || !cls->is_array() || cls->empty()) bad("classes", "expected a non-empty array of class names");
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < cls->size(); ++c) {
    if (!(*cls)[c].is_string()) bad("classes[" + std::to_string(c) + "]", "expected a string");
    index[(*cls)[c].get<std::string>()] = c;
  }
  const std::size_t C = cls->size();
  auto class_of = [&](const json& v, const std::string& p) -> std::size_t {
    if (v.is_string()) {
      auto it = index.find(v.get<std::string>());
      if (it == index.end()) bad(p, "unknown class '" + v.get<std::string>() + "'");
      return it->second;
    }
    if (v.is_number_unsigned() && v.get<std::size_t>() < C) return v.get<std::size_t>();
    bad(p, "expected a class name");
  };

  const ObjectiveWeights w = parse_objective(root, "");
  const json* dists = find(root, "class_distributions");
  for (std::size_t c = 0; c < C; ++c) {
    if (w.alpha == 0.0) {
      g.class_psi.push_back(PsiFunction::linear(w.beta, w.gamma));
      continue;
    }
    const std::string name = (*cls)[c].get<std::string>();
    if (!dists || !dists->contains(name))
      bad("class_distributions." + name, "needed when objective.alpha > 0");
    const ValueDistribution d = parse_dist((*dists)[name], "class_distributions." + name);
    g.class_psi.push_back(wrap("class_distributions." + name, [&] { return PsiFunction(w, d); }));
  }

  g.templates.num_classes = C;
  const json* ts = find(root, "templates");
  if (!ts || !ts->is_array() || ts->empty()) bad("templates", "expected a non-empty array");
  for (std::size_t j = 0; j < ts->size(); ++j) {
    const std::string p = "templates[" + std::to_string(j) + "]";
    const json& t = (*ts)[j];
    if (!t.is_object()) bad(p, "expected an object mapping class to slot effects");
    Template tpl;
    tpl.class_effects.assign(C, {});
    for (auto it = t.begin(); it != t.end(); ++it) {
      const std::size_t c = class_of(json(it.key()), p + "." + it.key());
      tpl.class_effects[c] = numbers(it.value(), p + "." + it.key());
    }
    g.templates.templates.push_back(std::move(tpl));
  }
  wrap("templates", [&] { g.templates.validate(); });

  const json* bs = find(root, "class_bidders");
  if (!bs || !bs->is_array()) bad("class_bidders", "expected an array");
  for (std::size_t k = 0; k < bs->size(); ++k) {
    const std::string p = "class_bidders[" + std::to_string(k) + "]";
    const json& b = (*bs)[k];
    if (!b.is_object()) bad(p, "expected an object");
    const json* c = find(b, "class");
    if (!c) bad(p + ".class", "missing");
    ClassedBidder cb;
    cb.cls = class_of(*c, p + ".class");
    cb.value = number(b, "value", p);
    cb.weight = number(b, "weight", p, 1.0);
    cb.bid = number(b, "bid", p, cb.value);
    if (cb.value < 0.0) bad(p + ".value", "must be >= 0");
    if (!(cb.weight > 0.0)) bad(p + ".weight", "must be positive");
    if (cb.bid < 0.0) bad(p + ".bid", "must be >= 0");
    g.bidders.push_back(cb);
  }
  return g;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t k = 0;
  while (k < s.size() && (s[k] == ' ' || s[k] == '\t')) ++k;
  return s.substr(k);
}

const std::vector<std::string> kRules{"standard", "subtractive", "impression", "two-param", "optimal"};
const std::vector<std::string> kParams{"r", "rho", "alpha", "beta", "gamma"};

void check_rule(const std::string& rule) {
  if (std::find(kRules.begin(), kRules.end(), rule) == kRules.end())
    throw ConfigError("unknown rule '" + rule + "' (standard, subtractive, impression, two-param, optimal)");
}

}  // namespace

// ---- scenarios --------------------------------------------------------------

ScenarioConfig parse_scenario(const std::string& json_text) {
  const json root = parse_json(json_text);
  if (!root.is_object()) bad("(root)", "expected an object");
  ScenarioConfig cfg;
  if (const json* n = find(root, "name")) {
    if (!n->is_string()) bad("name", "expected a string");
    cfg.name = n->get<std::string>();
  }
  if (const json* s = find(root, "seed")) {
    if (!s->is_number_unsigned()) bad("seed", "expected a non-negative integer");
    cfg.seed = s->get<std::uint64_t>();
  }
  const json* bidders = find(root, "bidders");
  if (bidders) {
    cfg.scenario.bidders = parse_bidders(*bidders, "bidders");
    const json* slots = find(root, "slots");
    if (!slots) bad("slots", "missing");
    cfg.scenario.slots = parse_slots(*slots, "slots");
  }
  if (find(root, "templates") || find(root, "classes")) cfg.templates = parse_template_game(root);
  if (!bidders && !cfg.templates) bad("bidders", "missing (or give a classes + templates block)");
  return cfg;
}

std::vector<std::string> preset_names() { return {"uniform8x3", "lahaie-pennock"}; }

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.scenario.slots = SlotLayout({1.0, 0.6, 0.36});
  if (name == "uniform8x3") {
    const BidderModel m{ValueDistribution::uniform(0.0, 1.0),
                        WeightSpec::random(ValueDistribution::uniform(0.0, 1.0)), 0.0};
    cfg.scenario.bidders.assign(8, m);
    return cfg;
  }
  if (name == "lahaie-pennock") {
    const BidderModel m{ValueDistribution::lognormal(0.0, 1.0),
                        WeightSpec::random(ValueDistribution::lognormal(0.0, 0.5)), 0.4};
    cfg.scenario.bidders.assign(8, m);
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
  for (const auto& p : preset_names())
    if (p == name_or_path) return preset(p);
  ScenarioConfig cfg = parse_scenario(read_file(name_or_path));
  if (cfg.name.empty()) cfg.name = name_or_path;
  return cfg;
}

std::string scenario_json(const TemplateGame& g, const std::string& name) {
  json root;
  root["name"] = name;
  const std::size_t C = g.templates.num_classes;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < C; ++c) names.push_back("class" + std::to_string(c));
  root["classes"] = names;
  for (const auto& p : g.class_psi)
    if (!p.is_linear() || p.slope() != g.class_psi[0].slope() || p.intercept() != g.class_psi[0].intercept())
      throw UnsupportedRule("only a shared linear psi can be written as a scenario objective");
  root["objective"] = {{"alpha", 0.0},
                       {"beta", g.class_psi.empty() ? 1.0 : g.class_psi[0].slope()},
                       {"gamma", g.class_psi.empty() ? 0.0 : g.class_psi[0].intercept()}};
  json ts = json::array();
  for (std::size_t j = 0; j < g.templates.size(); ++j) {
    json t = json::object();
    for (std::size_t c = 0; c < C; ++c) t[names[c]] = g.templates.effects(j, c);
    ts.push_back(t);
  }
  root["templates"] = ts;
  json bs = json::array();
  for (const auto& b : g.bidders)
    bs.push_back({{"class", names[b.cls]}, {"value", b.value}, {"weight", b.weight}, {"bid", b.bid}});
  root["class_bidders"] = bs;
  return root.dump(2);
}

// ---- sweeps -----------------------------------------------------------------

std::vector<double> parse_grid_values(const std::string& spec) {
  const auto parts = split(spec, ':');
  double a = 0.0, b = 0.0, n = 0.0;
  if (parts.size() == 1) {
    if (!parse_double(parts[0], a)) throw ConfigError("bad grid value '" + spec + "'");
    return {a};
  }
  if (parts.size() != 3 || !parse_double(parts[0], a) || !parse_double(parts[1], b) ||
      !parse_double(parts[2], n) || n < 1.0 || n != std::floor(n))
    throw ConfigError("bad grid '" + spec + "' (expected start:stop:count or a number)");
  const std::size_t cnt = static_cast<std::size_t>(n);
  if (cnt == 1) return {a};
  std::vector<double> v;
  for (std::size_t k = 0; k < cnt; ++k)
    v.push_back(k + 1 == cnt ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(cnt - 1));
  return v;
}

GridAxis parse_grid_axis(const std::string& flag) {
  const auto eq = flag.find('=');
  if (eq == std::string::npos) throw ConfigError("bad --grid '" + flag + "' (expected param=spec)");
  GridAxis ax;
  std::string key = flag.substr(0, eq);
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    ax.rule = key.substr(0, dot);
    check_rule(ax.rule);
    key = key.substr(dot + 1);
  }
  if (std::find(kParams.begin(), kParams.end(), key) == kParams.end())
    throw ConfigError("unknown grid parameter '" + key + "' (r, rho, alpha, beta, gamma)");
  ax.param = key;
  ax.values = parse_grid_values(flag.substr(eq + 1));
  return ax;
}

std::vector<RuleParams> expand_grid(const std::string& rule, const std::vector<GridAxis>& axes) {
  check_rule(rule);
  RuleParams base;
  base.rule = rule;
  base.beta = 1.0;
  std::vector<RuleParams> out{base};
  for (const auto& ax : axes) {
    if (!ax.rule.empty() && ax.rule != rule) continue;
    std::vector<RuleParams> next;
    for (const auto& p : out)
      for (double v : ax.values) {
        RuleParams q = p;
        if (ax.param == "r") q.r = v;
        else if (ax.param == "rho") q.rho = v;
        else if (ax.param == "alpha") q.alpha = v;
        else if (ax.param == "beta") q.beta = v;
        else q.gamma = v;
        next.push_back(q);
      }
    out = std::move(next);
  }
  return out;
}

RankingRule make_rule(const RuleParams& p, const Scenario& sc) {
  check_rule(p.rule);
  if (p.rule == "standard") return RankingRule::standard(p.r);
  if (p.rule == "subtractive") return RankingRule::subtractive(p.r);
  if (p.rule == "impression") return RankingRule::impression_reserve(p.rho);
  if (p.rule == "two-param") return RankingRule::two_param(p.r, p.rho);
  if (sc.bidders.empty()) throw UnsupportedRule("the optimal rule needs value distributions");
  const ObjectiveWeights w{p.alpha, p.beta, p.gamma};
  w.validate();
  std::vector<PsiFunction> psi;
  for (const auto& b : sc.bidders) psi.emplace_back(w, b.value);
  return RankingRule::optimal(std::move(psi), p.rho);
}

Pricing parse_pricing(const std::string& name) {
  if (name == "truthful") return Pricing::Truthful;
  if (name == "lowest-sne-gsp" || name == "gsp") return Pricing::LowestSneGsp;
  throw ConfigError("unknown pricing '" + name + "' (truthful, lowest-sne-gsp)");
}

std::vector<SweepRow> run_sweep(const Scenario& sc, const std::vector<std::string>& rules,
                                const std::vector<GridAxis>& axes, Pricing pricing,
                                const EstimatorConfig& est) {
  sc.validate();
  est.validate();
  std::vector<SweepRow> rows;
  for (const auto& rule : rules)
    for (const auto& p : expand_grid(rule, axes)) {
      SweepRow row;
      row.params = p;
      row.seed = est.seed;
      try {
        row.estimate = estimate_metrics(sc, make_rule(p, sc), pricing, est);
      } catch (const Error& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

std::vector<SweepRow> frontier_rows(const std::vector<SweepRow>& rows, Axis x, Axis y) {
  std::vector<FrontierPoint> pts;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].error.empty()) continue;
    pts.push_back({rows[i].params, rows[i].estimate.mean, rows[i].estimate.stderr_});
    origin.push_back(i);
  }
  const auto kept = pareto_filter(pts, x, y);
  std::vector<bool> used(pts.size(), false);
  std::vector<std::size_t> idx;
  for (const auto& k : kept)
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      if (used[i] || p.params.rule != k.params.rule || p.params.r != k.params.r ||
          p.params.rho != k.params.rho || p.params.alpha != k.params.alpha ||
          p.params.beta != k.params.beta || p.params.gamma != k.params.gamma)
        continue;
      used[i] = true;
      idx.push_back(origin[i]);
      break;
    }
  std::sort(idx.begin(), idx.end());
  std::vector<SweepRow> out;
  for (std::size_t i : idx) out.push_back(rows[i]);
  return out;
}

const char* const kSweepHeader =
    "rule,r,rho,alpha,beta,gamma,impressions,impressions_se,clicks,clicks_se,welfare,welfare_se,"
    "revenue,revenue_se,samples,seed,error";

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    const auto& p = r.params;
    os << p.rule << ',' << g17(p.r) << ',' << g17(p.rho) << ',' << g17(p.alpha) << ','
       << g17(p.beta) << ',' << g17(p.gamma);
    if (r.error.empty()) {
      const auto& m = r.estimate.mean;
      const auto& s = r.estimate.stderr_;
      os << ',' << g17(m.impressions) << ',' << g17(s.impressions) << ',' << g17(m.clicks) << ','
         << g17(s.clicks) << ',' << g17(m.welfare) << ',' << g17(s.welfare) << ','
         << g17(m.revenue) << ',' << g17(s.revenue) << ',' << r.estimate.samples;
    } else {
      os << ",,,,,,,,,0";
    }
    os << ',' << r.seed << ',' << csv_safe(r.error) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kSweepHeader) throw ConfigError("not a sweep CSV");
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 17) throw ConfigError("sweep CSV row has " + std::to_string(f.size()) + " fields");
    SweepRow r;
    r.params.rule = f[0];
    double* pf[] = {&r.params.r, &r.params.rho, &r.params.alpha, &r.params.beta, &r.params.gamma};
    for (int k = 0; k < 5; ++k)
      if (!parse_double(f[1 + k], *pf[k])) throw ConfigError("bad number '" + f[1 + k] + "'");
    r.error = f[16];
    r.seed = std::strtoull(f[15].c_str(), nullptr, 10);
    if (r.error.empty()) {
      auto& m = r.estimate.mean;
      auto& s = r.estimate.stderr_;
      double* mf[] = {&m.impressions, &s.impressions, &m.clicks, &s.clicks,
                      &m.welfare,     &s.welfare,     &m.revenue, &s.revenue};
      for (int k = 0; k < 8; ++k)
        if (!parse_double(f[6 + k], *mf[k])) throw ConfigError("bad number '" + f[6 + k] + "'");
      r.estimate.samples = std::strtoull(f[14].c_str(), nullptr, 10);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- replay -----------------------------------------------------------------

ReplayLog read_replay_log(std::istream& is) {
  ReplayLog log;
  std::map<std::string, std::size_t> index;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "auction_id,bidder_id,bid,weight")
        throw ConfigError("replay log must start with the header auction_id,bidder_id,bid,weight");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    ReplayRecord r;
    if (f.size() != 4 || f[0].empty() || !parse_double(f[2], r.bid) || !parse_double(f[3], r.weight) ||
        r.bid < 0.0 || !(r.weight > 0.0)) {
      ++log.skipped;
      continue;
    }
    r.auction_id = f[0];
    r.bidder_id = f[1];
    auto it = index.find(r.auction_id);
    if (it == index.end()) {
      index[r.auction_id] = log.auctions.size();
      log.auctions.push_back({r});
    } else {
      log.auctions[it->second].push_back(r);
    }
  }
  return log;
}

std::vector<ReplayRow> run_replay(const ReplayLog& log, const std::vector<std::string>& rules,
                                  const std::vector<GridAxis>& axes, const SlotLayout& slots) {
  slots.validate();
  std::vector<ReplayRow> rows;
  if (log.auctions.empty()) return rows;
  const Scenario none;
  for (const auto& rule_name : rules)
    for (const auto& p : expand_grid(rule_name, axes)) {
      if (p.rule == "optimal")
        throw UnsupportedRule("replay needs a bid-space rule (standard, subtractive, impression, two-param)");
      const RankingRule rule = make_rule(p, none);
      ReplayRow row;
      row.params = p;
      row.auctions = log.auctions.size();
      for (const auto& a : log.auctions) {
        std::vector<BidderProfile> bidders;
        for (const auto& r : a) bidders.push_back({r.bid, r.weight, r.bid});
        const AuctionOutcome out = run_auction(rule, bidders, slots, PaymentRule::Gsp);
        row.impressions += out.metrics.impressions;
        row.clicks += out.metrics.clicks;
        row.revenue += out.metrics.revenue;
      }
      const double n = static_cast<double>(row.auctions);
      row.impressions /= n;
      row.clicks /= n;
      row.revenue /= n;
      rows.push_back(row);
    }
  return rows;
}

void write_replay_csv(std::ostream& os, const std::vector<ReplayRow>& rows) {
  os << "rule,r,rho,auctions,impressions,clicks,revenue\n";
  for (const auto& r : rows)
    os << r.params.rule << ',' << g17(r.params.r) << ',' << g17(r.params.rho) << ',' << r.auctions
       << ',' << g17(r.impressions) << ',' << g17(r.clicks) << ',' << g17(r.revenue) << '\n';
}

// ---- ad cap -----------------------------------------------------------------

AdCapConfig parse_adcap(const std::string& json_text) {
  const json root = parse_json(json_text);
  if (!root.is_object()) bad("(root)", "expected an object");
  AdCapConfig cfg;
  cfg.problem.cap = number(root, "cap", "");
  cfg.tol = number(root, "tol", "", 1e-9);
  const json* terms = find(root, "terms");
  if (!terms || !terms->is_array() || terms->empty()) bad("terms", "expected a non-empty array");
  for (std::size_t k = 0; k < terms->size(); ++k) {
    const std::string p = "terms[" + std::to_string(k) + "]";
    const json& t = (*terms)[k];
    if (!t.is_object()) bad(p, "expected an object");
    AdCapTerm term;
    term.probability = number(t, "probability", p, 1.0);
    term.slot_effect = number(t, "slot_effect", p, 1.0);
    term.weights = parse_objective(t, p);
    if (const json* b = find(t, "bidders")) term.bidders = parse_bidders(*b, p + ".bidders");
    if (const json* d = find(t, "discrete")) {
      if (!d->is_array()) bad(p + ".discrete", "expected an array");
      for (std::size_t i = 0; i < d->size(); ++i) {
        const std::string q = p + ".discrete[" + std::to_string(i) + "]";
        const json& e = (*d)[i];
        if (!e.is_object()) bad(q, "expected an object");
        DiscreteBidder db;
        if (!find(e, "types")) bad(q + ".types", "missing");
        if (!find(e, "probabilities")) bad(q + ".probabilities", "missing");
        db.types = numbers(e["types"], q + ".types");
        db.probs = numbers(e["probabilities"], q + ".probabilities");
        db.weight = number(e, "weight", q, 1.0);
        wrap(q, [&] { db.validate(); });
        term.discrete.push_back(std::move(db));
      }
    }
    cfg.problem.terms.push_back(std::move(term));
  }
  wrap("terms", [&] { cfg.problem.validate(); });
  return cfg;
}

AdCapConfig load_adcap(const std::string& path) { return parse_adcap(read_file(path)); }

std::string adcap_report(const AdCapSolution& s) {
  json terms = json::array();
  for (const auto& t : s.terms)
    terms.push_back({{"score_reserve", t.score_reserve}, {"impressions", t.impressions}});
  json root = {{"lambda", s.lambda},
               {"achieved", s.achieved},
               {"objective", s.objective},
               {"tie_fraction", s.tie_fraction},
               {"terms", terms},
               {"metrics",
                {{"revenue", s.metrics.revenue},
                 {"welfare", s.metrics.welfare},
                 {"clicks", s.metrics.clicks},
                 {"impressions", s.metrics.impressions}}}};
  return root.dump(2);
}

std::string format_report(const CounterexampleReport& r) {
  std::ostringstream os;
  os << "counterexample: " << r.name << '\n' << "claim: " << r.claim << '\n';
  for (const auto& d : r.details) os << "  " << d << '\n';
  for (const auto& [k, v] : r.numbers) os << "  " << k << " = " << g17(v) << '\n';
  if (!r.bids.empty() && r.bids.size() <= 16) {
    os << "  profile:";
    for (double b : r.bids) os << ' ' << g17(b);
    os << '\n';
  }
  os << "verdict: " << (r.reproduced ? "reproduced" : "NOT reproduced");
  for (const auto& [k, v] : r.numbers)
    if (k == "points" && r.reproduced) os << " (no grid SNE at resolution " << g17(v) << " points per bidder)";
  os << '\n';
  return os.str();
}

}  // namespace adtrade
