// Acceptance checks: one PASS/FAIL line per criterion, tolerances pinned here.
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "dikw/artifact/store.hpp"
#include "dikw/common/clock.hpp"
#include "dikw/common/error.hpp"
#include "dikw/dataset/fingerprint.hpp"
#include "dikw/info/info_agent.hpp"
#include "dikw/info/stats.hpp"
#include "dikw/knowledge/knowledge_agent.hpp"
#include "dikw/orchestrator/engine.hpp"
#include "dikw/sim/simulator.hpp"
#include "dikw/wisdom/wisdom_agent.hpp"
#include "support.hpp"

using namespace dikw;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kLiftRelLow = 0.1217, kLiftRelHigh = 0.1227;
constexpr double kLiftPoints = 7.49, kLiftPointsTol = 0.005;
constexpr double kInfoTol = 1e-9;
constexpr int kInfoTables = 200;
constexpr std::size_t kInfoMaxRows = 50;
constexpr double kHighSupport = 0.8, kLowSupport = 0.2;
constexpr double kSeMultiple = 3.0;
constexpr double kMeanTracedLow = 2.0, kMeanTracedHigh = 4.0;
constexpr int kRandomDags = 100;

struct Verdict {
  bool pass = true;
  std::ostringstream why;
  void fail(const std::string& msg) {
    if (pass) why.str("");
    if (!pass) why << "; ";
    pass = false;
    why << msg;
  }
};

// ---------------------------------------------------------------------------
// Special functions written independently of the library code under test.

double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_fraction(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-17) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Regularized upper incomplete gamma.
double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_fraction(a, x);
}

double own_erfc(double x) { return x >= 0.0 ? gamma_q(0.5, x * x) : 2.0 - gamma_q(0.5, x * x); }

double own_phi(double x) { return 0.5 * own_erfc(-x / std::sqrt(2.0)); }

double own_inverse_phi(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (own_phi(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double beta_fraction(double a, double b, double x) {
  const double tiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0, c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-17) break;
  }
  return h;
}

// Regularized incomplete beta.
double beta_i(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double own_t_two_sided(double t, double df) { return beta_i(df / 2.0, 0.5, df / (df + t * t)); }

// ---------------------------------------------------------------------------
// Information oracle: brute force over the generated rows.

struct Expected {
  std::optional<ErrorCode> error;
  double estimate = 0.0;
  std::optional<double> ci_low, ci_high, stat, p, df;
  std::int64_t n = 0;
};

const std::vector<std::string> kVariants{"default", "salience", "timeliness", "authority"};

std::pair<double, double> own_wilson(std::int64_t k, std::int64_t n, double level) {
  const double z = own_inverse_phi(0.5 + level / 2.0);
  const double nn = static_cast<double>(n), p = static_cast<double>(k) / nn, z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z / (1 + z2 / nn) * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
  double lo = centre - half, hi = centre + half;
  if (k == 0) lo = 0.0;
  if (k == n) hi = 1.0;
  return {std::clamp(lo, 0.0, p), std::clamp(hi, p, 1.0)};
}

Expected expect_rate(const std::vector<testing::Row>& rows, const std::function<bool(const testing::Row&)>& in,
                     double level) {
  Expected e;
  std::int64_t n = 0, k = 0;
  for (const auto& r : rows) {
    if (!in(r)) continue;
    ++n;
    k += r.clicked;
  }
  if (n == 0) {
    e.error = ErrorCode::EmptySlice;
    return e;
  }
  e.n = n;
  e.estimate = static_cast<double>(k) / static_cast<double>(n);
  auto [lo, hi] = own_wilson(k, n, level);
  e.ci_low = lo;
  e.ci_high = hi;
  return e;
}

Expected expect_two_prop(const std::vector<testing::Row>& rows, const std::string& a, const std::string& b,
                         double level) {
  Expected e;
  std::int64_t n1 = 0, k1 = 0, n2 = 0, k2 = 0;
  for (const auto& r : rows) {
    if (!r.age) continue;  // restrict: age not null
    if (r.variant == a) ++n1, k1 += r.clicked;
    if (r.variant == b) ++n2, k2 += r.clicked;
  }
  if (n1 == 0 || n2 == 0) {
    e.error = ErrorCode::DegenerateGroup;
    return e;
  }
  const double p1 = static_cast<double>(k1) / n1, p2 = static_cast<double>(k2) / n2;
  e.n = n1 + n2;
  e.estimate = p1 - p2;
  const double z = own_inverse_phi(0.5 + level / 2.0);
  const double se = std::sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2);
  e.ci_low = std::min(e.estimate - z * se, e.estimate);
  e.ci_high = std::max(e.estimate + z * se, e.estimate);
  const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  if (k1 + k2 > 0 && k1 + k2 < n1 + n2) {
    const double zz = e.estimate / std::sqrt(pooled * (1 - pooled) * (1.0 / n1 + 1.0 / n2));
    e.stat = zz;
    e.p = std::min(1.0, own_erfc(std::fabs(zz) / std::sqrt(2.0)));
  }
  return e;
}

Expected expect_chi(const std::vector<testing::Row>& rows, int min_age) {
  Expected e;
  std::map<std::string, std::array<std::int64_t, 2>> table;
  std::int64_t total = 0;
  for (const auto& r : rows) {
    if (!r.age || *r.age < min_age) continue;
    table[r.variant][r.clicked ? 1 : 0]++;
    ++total;
  }
  if (total == 0) {
    e.error = ErrorCode::EmptySlice;
    return e;
  }
  std::array<std::int64_t, 2> col{0, 0};
  for (const auto& [_, c] : table) col[0] += c[0], col[1] += c[1];
  const int rows_kept = static_cast<int>(table.size());
  const int cols_kept = (col[0] > 0) + (col[1] > 0);
  if (rows_kept < 2 || cols_kept < 2) {
    e.error = ErrorCode::DegenerateGroup;
    return e;
  }
  double x2 = 0.0;
  for (const auto& [_, c] : table) {
    const double rs = static_cast<double>(c[0] + c[1]);
    for (int j = 0; j < 2; ++j) {
      const double ex = rs * static_cast<double>(col[j]) / static_cast<double>(total);
      x2 += (c[j] - ex) * (c[j] - ex) / ex;
    }
  }
  const double df = static_cast<double>(rows_kept - 1);
  e.n = total;
  e.stat = x2;
  e.df = df;
  e.p = x2 <= 0.0 ? 1.0 : gamma_q(df / 2.0, x2 / 2.0);
  e.estimate = std::sqrt(x2 / static_cast<double>(total));
  return e;
}

Expected expect_pearson(const std::vector<testing::Row>& rows, double level) {
  Expected e;
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    if (r.age && r.score) {
      xs.push_back(*r.age);
      ys.push_back(*r.score);
    }
  }
  const auto n = static_cast<std::int64_t>(xs.size());
  if (n < 3) {
    e.error = ErrorCode::DegenerateGroup;
    return e;
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    e.error = ErrorCode::DegenerateGroup;
    return e;
  }
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  e.n = n;
  e.estimate = r;
  e.df = df;
  if (1.0 - r * r <= 0.0) {
    e.p = 0.0;
    return e;
  }
  const double t = r * std::sqrt(df / (1.0 - r * r));
  e.stat = t;
  e.p = t == 0.0 ? 1.0 : std::min(1.0, own_t_two_sided(t, df));
  if (n > 3) {
    const double half = own_inverse_phi(0.5 + level / 2.0) / std::sqrt(static_cast<double>(n - 3));
    e.ci_low = std::min(std::tanh(std::atanh(r) - half), r);
    e.ci_high = std::max(std::tanh(std::atanh(r) + half), r);
  }
  return e;
}

bool close(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::fabs(*a - *b) <= kInfoTol;
}

std::string compare(const Expected& e, const std::function<info::StatResult()>& run) {
  std::optional<ErrorCode> got_error;
  info::StatResult r;
  try {
    r = run();
  } catch (const Error& err) {
    got_error = err.code();
  }
  if (got_error != e.error) {
    return std::string("error ") + (got_error ? std::string(to_string(*got_error)) : "none") + " vs expected " +
           (e.error ? std::string(to_string(*e.error)) : "none");
  }
  if (e.error) return "";
  if (r.n != e.n) return "n " + std::to_string(r.n) + " vs " + std::to_string(e.n);
  if (std::fabs(r.estimate - e.estimate) > kInfoTol) return "estimate differs";
  if (!close(r.ci_low, e.ci_low) || !close(r.ci_high, e.ci_high)) return "interval differs";
  if (!close(r.test_statistic, e.stat)) return "statistic differs";
  if (!close(r.p_value, e.p)) return "p-value differs";
  if (e.df && !close(r.degrees_of_freedom, e.df)) return "df differs";
  return "";
}

Predicate pred(const std::string& col, PredicateOp op, json v) { return Predicate{col, op, std::move(v)}; }

void check_info_oracle(Verdict& v) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int comparisons = 0, errors_expected = 0;
  for (int t = 0; t < kInfoTables && v.pass; ++t) {
    const std::size_t n = rng() % (kInfoMaxRows + 1);
    std::vector<testing::Row> rows;
    const double base = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      testing::Row r;
      r.patient_id = "R" + std::to_string(i);
      r.variant = kVariants[rng() % kVariants.size()];
      r.clicked = u(rng) < base;
      if (u(rng) > 0.1) r.age = 18 + static_cast<int>(rng() % 73);
      if (u(rng) > 0.1) r.gender = u(rng) < 0.5 ? "F" : "M";
      if (u(rng) > 0.1) r.score = static_cast<double>(rng() % 101);
      rows.push_back(r);
    }
    const auto table = testing::make_table(rows, true);
    const double level = std::array<double, 3>{0.9, 0.95, 0.99}[rng() % 3];
    auto eval = [&](const InfoTopic& topic) {
      info::Evaluator ev(table, &testing::stage1(), topic.context.age_bins, kernels::Exec::Parallel);
      return info::compute(topic, ev);
    };

    std::vector<std::pair<Expected, InfoTopic>> cases;
    {
      const int min_age = 18 + static_cast<int>(rng() % 80);
      InfoTopic topic;
      topic.query = InfoQuery::Rate;
      topic.subject = "clicked";
      topic.slice.predicates = {pred("age", PredicateOp::Ge, min_age)};
      topic.context.ci_level = level;
      cases.emplace_back(expect_rate(rows, [&](const testing::Row& r) { return r.age && *r.age >= min_age; }, level),
                         topic);
    }
    {
      const auto a = kVariants[rng() % 4], b = kVariants[rng() % 4];
      InfoTopic topic;
      topic.query = InfoQuery::Rate;
      topic.subject = "clicked";
      topic.slice.predicates = {pred("gender", PredicateOp::Eq, "F"), pred("variant", PredicateOp::In, json::array({a, b}))};
      topic.context.ci_level = level;
      cases.emplace_back(
          expect_rate(rows, [&](const testing::Row& r) { return r.gender == "F" && (r.variant == a || r.variant == b); },
                      level),
          topic);
    }
    {
      const auto a = kVariants[rng() % 4];
      auto b = kVariants[rng() % 4];
      if (b == a) b = kVariants[(rng() % 3 + 1 + (&a - &kVariants[0])) % 4];
      std::size_t ai = std::find(kVariants.begin(), kVariants.end(), a) - kVariants.begin();
      b = kVariants[(ai + 1 + rng() % 3) % 4];
      InfoTopic topic;
      topic.query = InfoQuery::TwoProportionTest;
      topic.subject = "clicked";
      topic.context.ci_level = level;
      topic.context.groups = {NamedSlice{a, SliceSpec{{pred("variant", PredicateOp::Eq, a)}}},
                              NamedSlice{b, SliceSpec{{pred("variant", PredicateOp::Eq, b)}}}};
      topic.context.restrict_to.predicates = {pred("age", PredicateOp::NotNull, json())};
      cases.emplace_back(expect_two_prop(rows, a, b, level), topic);
    }
    {
      const int min_age = 18 + static_cast<int>(rng() % 60);
      InfoTopic topic;
      topic.query = InfoQuery::ChiSquareIndependence;
      topic.subject = "clicked";
      topic.slice.predicates = {pred("age", PredicateOp::Ge, min_age)};
      topic.context.group_by = "variant";
      topic.context.ci_level = level;
      cases.emplace_back(expect_chi(rows, min_age), topic);
    }
    {
      InfoTopic topic;
      topic.query = InfoQuery::PearsonCorrelation;
      topic.subject = "score";
      topic.context.covariate = "age";
      topic.context.ci_level = level;
      cases.emplace_back(expect_pearson(rows, level), topic);
    }
    for (const auto& [expected, topic] : cases) {
      ++comparisons;
      errors_expected += expected.error.has_value();
      const auto diff = compare(expected, [&, &topic = topic] { return eval(topic); });
      if (!diff.empty()) {
        v.fail("table " + std::to_string(t) + " " + std::string(to_token(topic.query)) + ": " + diff);
        break;
      }
    }
  }
  if (v.pass) {
    v.why << comparisons << " results over " << kInfoTables << " tables within " << kInfoTol << " ("
          << errors_expected << " expected error outcomes)";
  }
}

// ---------------------------------------------------------------------------

void check_lift(Verdict& v) {
  const double rel = stats::relative_lift(0.6876, 0.6127);
  const double points = 100.0 * stats::absolute_lift(0.6876, 0.6127);
  if (rel < kLiftRelLow || rel > kLiftRelHigh) v.fail("relative lift " + std::to_string(rel));
  if (std::fabs(points - kLiftPoints) > kLiftPointsTol) v.fail("absolute lift " + std::to_string(points));
  const auto& oracle = testing::oracle_values().at("lift")[0];
  if (std::fabs(rel - oracle.at("relative").get<double>()) > 1e-12) v.fail("relative lift disagrees with the oracle");
  if (v.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "relative %.4f, absolute %.2f points", rel, points);
    v.why << buf;
  }
}

// ---------------------------------------------------------------------------

const Timestamp kNow = parse_rfc3339("2024-06-01T00:00:00Z");

void check_planted(Verdict& v) {
  const auto model = sim::GroundTruthModel::load(testing::fixture("planted_model.json"));
  const auto mix = sim::DemographicsMix::defaults();
  const auto table = sim::generate(model, testing::stage1(), sim::kDefaultRows, mix);
  const dataset::DatasetContext ctx{&table, &testing::stage1(), dataset::fingerprint(table).digest};
  MemoryArtifactStore store;
  auto resolver = [&](const InfoTopic& t) {
    auto a = info::resolve_info_topic(ctx, {}, t, kNow);
    store.publish(a);
    return a;
  };
  auto claim = [](const std::string& l, const std::string& r) {
    KnowledgeTopic k;
    k.claim.left = {DescriptorKind::Tag, l, ""};
    k.claim.right = {DescriptorKind::Tag, r, ""};
    return k;
  };
  const auto fwd = knowledge::evaluate_hypothesis(claim("urgency", "social_proof"), testing::stage1(), store, resolver,
                                                  nullptr, ctx.fingerprint, kNow);
  const auto rev = knowledge::evaluate_hypothesis(claim("social_proof", "urgency"), testing::stage1(), store, resolver,
                                                  nullptr, ctx.fingerprint, kNow);
  if (fwd.claim.support_score < kHighSupport) v.fail("planted direction scored " + std::to_string(fwd.claim.support_score));
  if (rev.claim.support_score > kLowSupport) v.fail("reverse direction scored " + std::to_string(rev.claim.support_score));

  const auto oracle = sim::oracle(model, testing::stage1(), mix);
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;
  const auto& var = table.column("variant");
  const auto& clk = table.column("clicked");
  for (std::size_t i = 0; i < table.row_count(); ++i) {
    auto& c = counts[var.texts()[i]];
    ++c.first;
    c.second += clk.ints()[i];
  }
  int outside = 0;
  for (const auto& [name, c] : counts) {
    const double p = oracle.at(name).click;
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(c.first));
    if (std::fabs(static_cast<double>(c.second) / static_cast<double>(c.first) - p) > kSeMultiple * se) ++outside;
  }
  if (outside > 0) v.fail(std::to_string(outside) + " variant rate(s) outside 3 SE of the oracle");
  if (v.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "support %.3f forward, %.3f reverse; %zu variant rates within 3 SE",
                  fwd.claim.support_score, rev.claim.support_score, counts.size());
    v.why << buf;
  }
}

// ---------------------------------------------------------------------------

struct PipelineResult {
  std::unique_ptr<testing::TempDir> dir;
  std::unique_ptr<orch::Engine> engine;
  std::string run_id;
  orch::RunSnapshot snap;
};

PipelineResult run_pipeline(kernels::Exec exec) {
  PipelineResult p;
  p.dir = std::make_unique<testing::TempDir>();
  orch::Engine::Options o;
  o.state_dir = p.dir->path();
  o.exec = exec;
  p.engine = std::make_unique<orch::Engine>(o);
  auto cfg = orch::RunConfig::load(testing::fixture("run_pipeline.json"));
  cfg.gates_off();
  p.run_id = p.engine->submit(cfg);
  p.snap = p.engine->run(p.run_id);
  return p;
}

// Literal scan of the default constraints, independent of the agent's checker.
bool plain_text_ok(const std::string& text) {
  std::size_t scalars = 0;
  for (unsigned char ch : text) scalars += (ch & 0xC0) != 0x80;
  if (scalars > 160) return false;
  std::string lower;
  for (unsigned char ch : text) lower += static_cast<char>(std::tolower(ch));
  for (const char* bad : {"expire", "last chance", "act now or"}) {
    if (lower.find(bad) != std::string::npos) return false;
  }
  for (const char* prefix : {"Dr. ", "From Dr. ", "Hi, Dr. ", "Hi, it's Dr. ", "Following your visit: Dr. "}) {
    const std::string p(prefix);
    if (text.compare(0, p.size(), p) == 0 && text.size() > p.size() && std::isupper(static_cast<unsigned char>(text[p.size()])))
      return true;
  }
  return false;
}

void check_portfolio(Verdict& v, PipelineResult& p) {
  for (const auto& t : p.snap.topics) {
    if (t.status != orch::TopicStatus::Resolved) v.fail(t.id.str() + " is " + std::string(orch::to_token(t.status)));
  }
  if (!v.pass) return;
  const auto candidates = p.engine->portfolio(p.run_id);
  std::map<TopicId, knowledge::Band> bands;
  for (const auto& t : p.snap.topics) {
    if (t.id.layer != Layer::Knowledge) continue;
    bands[t.id] = knowledge::claim_of(*p.engine->artifact(p.run_id, t.id)).confidence_band;
  }
  int exploit = 0, explore = 0;
  double traced = 0;
  std::set<std::string> texts, names;
  for (const auto& c : candidates) {
    (c.generation == wisdom::Mode::Exploitation ? exploit : explore)++;
    traced += static_cast<double>(c.traced_claims.size());
    texts.insert(c.text);
    names.insert(c.name);
    if (!c.constraint_report.passed()) v.fail(c.name + " fails its constraint report");
    if (!wisdom::check_constraints(c, ConstraintSet{}).passed()) v.fail(c.name + " fails a recheck");
    if (!plain_text_ok(c.text)) v.fail(c.name + " fails the literal scan");
    if (c.traced_claims.empty()) v.fail(c.name + " traces no claim");
    for (const auto& id : c.traced_claims) {
      auto it = bands.find(id);
      if (it == bands.end()) {
        v.fail(c.name + " traces an unknown claim");
      } else if (c.generation == wisdom::Mode::Exploitation && it->second != knowledge::Band::High) {
        v.fail(c.name + " exploits a non-High claim");
      }
    }
  }
  if (candidates.size() != 20) v.fail(std::to_string(candidates.size()) + " candidates");
  if (exploit != 15 || explore != 5) v.fail("split " + std::to_string(exploit) + "/" + std::to_string(explore));
  if (texts.size() != candidates.size() || names.size() != candidates.size()) v.fail("duplicate text or name");
  const double mean = candidates.empty() ? 0.0 : traced / static_cast<double>(candidates.size());
  if (mean < kMeanTracedLow || mean > kMeanTracedHigh) v.fail("mean traced claims " + std::to_string(mean));

  FileArtifactStore store(p.engine->store_dir(), p.snap.fingerprint);
  for (const auto& t : p.snap.topics) {
    auto a = store.find(t.id);
    if (!a) {
      v.fail("artifact missing for " + t.id.str());
      continue;
    }
    const auto problems = validate_artifact(*a, store);
    if (!problems.empty()) v.fail(t.id.str() + ": " + problems.front());
  }
  if (v.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu candidates, %d exploitation / %d exploration, mean %.2f traced claims",
                  candidates.size(), exploit, explore, mean);
    v.why << buf;
  }
}

// ---------------------------------------------------------------------------

json info_seed(const SliceSpec& slice, const std::string& query = "rate") {
  InfoTopic t;
  t.subject = "clicked";
  t.query = parse_info_query(query);
  t.slice = slice;
  return json{{"topic", topic_to_json(t)}};
}

orch::RunConfig golden_config(const json& seeds, int parallelism) {
  json j{{"catalog", testing::catalog_path("stage1").string()},
         {"dataset",
          {{"csv", testing::fixture("golden10.csv").string()},
           {"schema", testing::fixture("golden10.schema.json").string()}}},
         {"seeds", seeds},
         {"max_parallelism", parallelism},
         {"llm", {{"mode", "canned"}}},
         {"clock", "fixed:2024-06-01T00:00:00Z"}};
  auto c = orch::RunConfig::from_json(j);
  c.gates_off();
  return c;
}

void check_coordination(Verdict& v) {
  // Diamond: two information topics share one data dependency.
  {
    testing::TempDir dir;
    orch::Engine e({dir.path(), kernels::Exec::Parallel, {}});
    auto seeds = json::array({info_seed({}), info_seed({}, "funnel")});
    auto s = e.run(e.submit(golden_config(seeds, 4)));
    int data = 0;
    for (const auto& t : s.topics) data += t.id.layer == Layer::Data;
    if (data != 1 || s.stats.executions != 3) v.fail("diamond resolved the shared dependency more than once");
    auto again = e.run(e.submit(golden_config(seeds, 4)));
    if (again.stats.executions != 0) v.fail("cached rerun executed " + std::to_string(again.stats.executions));
  }

  // Random DAGs over distinct information topics.
  std::mt19937_64 rng(77);
  int cycles_caught = 0, dags = 0, total_topics = 0;
  for (int g = 0; g < kRandomDags && v.pass; ++g) {
    const int k = 2 + static_cast<int>(rng() % 7);
    json seeds = json::array();
    for (int i = 0; i < k; ++i) {
      auto s = info_seed(SliceSpec{{pred("age", PredicateOp::Ge, 18 + 5 * i)}});
      json deps = json::array();
      for (int j = 0; j < i; ++j) {
        if (rng() % 3 == 0) deps.push_back(j);
      }
      s["depends_on"] = deps;
      seeds.push_back(s);
    }
    const bool inject_cycle = g % 10 == 9 && k >= 2;
    if (inject_cycle) seeds[0]["depends_on"] = json::array({k - 1}), seeds[k - 1]["depends_on"] = json::array({0});
    const int par = 1 + static_cast<int>(rng() % 4);
    testing::TempDir dir;
    orch::Engine e({dir.path(), kernels::Exec::Parallel, {}});
    try {
      auto id = e.submit(golden_config(seeds, par));
      if (inject_cycle) {
        v.fail("cycle accepted in DAG " + std::to_string(g));
        break;
      }
      auto s = e.run(id);
      ++dags;
      total_topics += static_cast<int>(s.topics.size());
      if (s.stats.safety_violations != 0) v.fail("dependency ran before its inputs in DAG " + std::to_string(g));
      if (s.stats.peak_running > par) v.fail("parallelism bound exceeded in DAG " + std::to_string(g));
      for (const auto& t : s.topics) {
        if (t.status != orch::TopicStatus::Resolved) v.fail("unresolved topic in DAG " + std::to_string(g));
      }
      std::map<TopicId, std::size_t> position;
      const auto trace = e.trace(id);
      for (std::size_t i = 0; i < trace.size(); ++i) position[trace[i].id] = i;
      for (const auto& t : s.topics) {
        for (const auto& d : t.deps) {
          if (position.count(t.id) && position.count(d) && position[d] > position[t.id]) {
            v.fail("trace order violates an edge in DAG " + std::to_string(g));
          }
        }
      }
    } catch (const Error& err) {
      if (inject_cycle && err.code() == ErrorCode::InvalidTopic) {
        ++cycles_caught;
      } else {
        v.fail(std::string("DAG ") + std::to_string(g) + ": " + err.what());
      }
    }
  }

  // Crash after the k-th publish, for every k, then resume.
  int crash_points = 0;
  {
    auto seeds = json::array({info_seed({}), info_seed({}, "funnel"), info_seed({}, "count")});
    testing::TempDir clean_dir;
    orch::Engine clean({clean_dir.path(), kernels::Exec::Parallel, {}});
    auto clean_snap = clean.run(clean.submit(golden_config(seeds, 2)));
    const int publishes = clean_snap.stats.executions;
    for (int k = 1; k <= publishes && v.pass; ++k) {
      testing::TempDir dir;
      std::string id;
      bool crashed = false;
      {
        int count = 0;
        orch::Engine e({dir.path(), kernels::Exec::Parallel, [&count, k](const TopicId&) {
                          if (++count == k) throw std::runtime_error("simulated crash");
                        }});
        id = e.submit(golden_config(seeds, 2));
        try {
          e.run(id);
        } catch (const std::runtime_error&) {
          crashed = true;
        }
      }
      if (!crashed) {
        v.fail("crash hook did not fire at publish " + std::to_string(k));
        break;
      }
      orch::Engine e({dir.path(), kernels::Exec::Parallel, {}});
      e.resume(id);
      auto s = e.run(id);
      for (const auto& t : clean_snap.topics) {
        auto a = e.artifact(id, t.id);
        auto b = clean.artifact(clean_snap.run_id, t.id);
        const auto* st = s.find(t.id);
        if (!st || st->status != orch::TopicStatus::Resolved || !a || !b || serialize(*a) != serialize(*b)) {
          v.fail("resume after crash " + std::to_string(k) + " diverged at " + t.id.str());
          break;
        }
      }
      ++crash_points;
    }
  }
  if (v.pass) {
    v.why << "diamond deduplicated, cached rerun 0 executions, " << dags << " random DAGs (" << total_topics
          << " topics) safe, " << cycles_caught << " cycles rejected, " << crash_points << " crash points resumed";
  }
}

// ---------------------------------------------------------------------------

void check_catalog(Verdict& v) {
  const auto& c = testing::stage2();
  std::map<dataset::Generation, int> gen;
  int active = 0, max_len = 0;
  std::string max_name;
  for (const auto& e : c.entries()) {
    ++gen[e.generation];
    if (e.char_count > max_len) max_len = e.char_count, max_name = e.name;
    if (e.rejected_by_review) continue;
    ++active;
    if (!wisdom::check_text_constraints(e.text, ConstraintSet{}).passed() || !plain_text_ok(e.text)) {
      v.fail(e.name + " violates the message constraints");
    }
  }
  if (c.size() != 23) v.fail(std::to_string(c.size()) + " entries");
  if (gen[dataset::Generation::Exploitation] != 15 || gen[dataset::Generation::Exploration] != 5 ||
      gen[dataset::Generation::LastRound] != 3) {
    v.fail("generation split differs");
  }
  if (active != 20) v.fail(std::to_string(active) + " active entries");
  if (max_len > 160) v.fail("longest message exceeds 160");
  const auto* micro = c.find("microMessage");
  if (!micro || micro->char_count != 46 || micro->paper_char_count != 47) v.fail("microMessage count not recomputed");
  const auto mismatches = c.count_mismatches();
  if (testing::stage1().size() != 13) v.fail("baseline catalog size");
  if (v.pass) {
    v.why << "23 entries (15/5/3), 20 active pass the constraints, longest " << max_len << " chars (" << max_name
          << "), " << mismatches.size() << " printed counts differ from recomputed";
  }
}

// ---------------------------------------------------------------------------

void check_determinism(Verdict& v, PipelineResult& a) {
  auto b = run_pipeline(kernels::Exec::Serial);
  if (a.snap.fingerprint != b.snap.fingerprint) v.fail("dataset fingerprints differ between executors");
  if (a.snap.topics.size() != b.snap.topics.size()) {
    v.fail("topic sets differ");
    return;
  }
  int compared = 0;
  for (std::size_t i = 0; i < a.snap.topics.size(); ++i) {
    const auto& id = a.snap.topics[i].id;
    if (b.snap.topics[i].id != id) {
      v.fail("topic order differs at " + std::to_string(i));
      break;
    }
    auto x = a.engine->artifact(a.run_id, id);
    auto y = b.engine->artifact(b.run_id, id);
    if (!x || !y || serialize(*x) != serialize(*y)) {
      v.fail("artifact bytes differ for " + id.str());
      break;
    }
    ++compared;
  }
  const auto md_a = wisdom::portfolio_markdown(a.engine->portfolio(a.run_id));
  const auto md_b = wisdom::portfolio_markdown(b.engine->portfolio(b.run_id));
  if (md_a != md_b) v.fail("portfolio exports differ");
  if (v.pass) v.why << compared << " artifacts and the portfolio export byte-identical across parallel and serial runs";
}

int report(const std::string& name, Verdict& v) {
  std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.why.str() << std::endl;
  return v.pass ? 0 : 1;
}

template <typename F>
void guarded(Verdict& v, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    v.fail(std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  int failures = 0;
  {
    Verdict v;
    guarded(v, [&] { check_lift(v); });
    failures += report("headline-lift", v);
  }
  {
    Verdict v;
    guarded(v, [&] { check_info_oracle(v); });
    failures += report("information-oracle", v);
  }
  {
    Verdict v;
    guarded(v, [&] { check_planted(v); });
    failures += report("planted-effect-recovery", v);
  }
  std::optional<PipelineResult> pipeline;
  {
    Verdict v;
    guarded(v, [&] {
      pipeline = run_pipeline(kernels::Exec::Parallel);
      check_portfolio(v, *pipeline);
    });
    failures += report("portfolio-contract", v);
  }
  {
    Verdict v;
    guarded(v, [&] { check_coordination(v); });
    failures += report("coordination", v);
  }
  {
    Verdict v;
    guarded(v, [&] { check_catalog(v); });
    failures += report("catalog", v);
  }
  {
    Verdict v;
    guarded(v, [&] {
      if (!pipeline) pipeline = run_pipeline(kernels::Exec::Parallel);
      check_determinism(v, *pipeline);
    });
    failures += report("end-to-end-determinism", v);
  }
  return failures == 0 ? 0 : 1;
}
