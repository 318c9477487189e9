#include "dikw/info/info_agent.hpp"

#include <cstdio>
#include <sstream>

#include "dikw/common/error.hpp"
#include "dikw/info/stats.hpp"

namespace dikw::info {

using dataset::ColumnType;
using kernels::Mask;
using nlohmann::json;

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json();
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt_p(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string pct(double level) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g%%", level * 100.0);
  return buf;
}

const dataset::Column& binary_subject(Evaluator& ev, const std::string& subject) {
  const auto& col = ev.column(subject);
  if (col.type() != ColumnType::Bool) {
    throw Error(ErrorCode::InvalidTopic, "subject '" + subject + "' must be a Bool column for this query",
                {{"subject", subject}});
  }
  return col;
}

const dataset::Column& numeric_subject(Evaluator& ev, const std::string& subject) {
  const auto& col = ev.column(subject);
  if (!col.is_numeric()) {
    throw Error(ErrorCode::InvalidTopic, "subject '" + subject + "' must be numeric", {{"subject", subject}});
  }
  return col;
}

[[noreturn]] void empty_slice(const InfoTopic& t) {
  throw Error(ErrorCode::EmptySlice, "slice '" + describe(t.slice) + "' matches no usable rows",
              {{"slice", describe(t.slice)}, {"subject", t.subject}});
}

StatResult mean_result(const kernels::Moments& m, double level) {
  auto est = stats::mean_ci(m.n, m.mean, m.m2, level);
  StatResult r;
  r.query = InfoQuery::Mean;
  r.estimate = est.mean;
  r.n = est.n;
  r.ci_level = level;
  if (est.ci) {
    r.ci_low = est.ci->low;
    r.ci_high = est.ci->high;
  }
  return r;
}

GroupRow rate_row(const std::string& label, const kernels::BinaryTally& t, double level) {
  GroupRow g;
  g.label = label;
  g.n = t.n;
  g.successes = t.k;
  g.estimate = static_cast<double>(t.k) / static_cast<double>(t.n);
  auto ci = stats::wilson(t.k, t.n, level);
  g.ci_low = ci.low;
  g.ci_high = ci.high;
  return g;
}

StatResult compute_segment(const InfoTopic& topic, Evaluator& ev, const Mask& pop) {
  const double level = topic.context.ci_level;
  const auto& subject = ev.column(topic.subject);
  const bool binary = subject.type() == ColumnType::Bool;
  if (!binary && !subject.is_numeric()) {
    throw Error(ErrorCode::InvalidTopic, "segment subject '" + topic.subject + "' must be Bool or numeric");
  }
  auto grouping = ev.grouping(*topic.context.group_by);
  StatResult r;
  r.query = InfoQuery::SegmentBreakdown;
  r.ci_level = level;
  std::vector<GroupRow> rows;
  Mask covered(pop.size(), 0);
  for (std::size_t g = 0; g < grouping.labels.size(); ++g) {
    Mask m = grouping.members(g);
    kernels::mask_and(m, pop, ev.exec());
    for (std::size_t i = 0; i < m.size(); ++i) covered[i] |= m[i];
    if (binary) {
      auto t = kernels::tally_binary(subject, m, ev.exec());
      if (t.n == 0) {
        r.notes.push_back("group '" + grouping.labels[g] + "' excluded: no non-null " + topic.subject);
        continue;
      }
      rows.push_back(rate_row(grouping.labels[g], t, level));
    } else {
      auto mo = kernels::moments(subject, m, ev.exec());
      if (mo.n == 0) {
        r.notes.push_back("group '" + grouping.labels[g] + "' excluded: no non-null " + topic.subject);
        continue;
      }
      auto est = stats::mean_ci(mo.n, mo.mean, mo.m2, level);
      GroupRow row;
      row.label = grouping.labels[g];
      row.n = mo.n;
      row.estimate = est.mean;
      if (est.ci) {
        row.ci_low = est.ci->low;
        row.ci_high = est.ci->high;
      }
      rows.push_back(row);
    }
  }
  if (binary) {
    auto t = kernels::tally_binary(subject, covered, ev.exec());
    if (t.n == 0) empty_slice(topic);
    r.n = t.n;
    r.successes = t.k;
    r.estimate = static_cast<double>(t.k) / static_cast<double>(t.n);
    auto ci = stats::wilson(t.k, t.n, level);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
  } else {
    auto mo = kernels::moments(subject, covered, ev.exec());
    if (mo.n == 0) empty_slice(topic);
    auto m = mean_result(mo, level);
    r.estimate = m.estimate;
    r.n = m.n;
    r.ci_low = m.ci_low;
    r.ci_high = m.ci_high;
  }
  if (grouping.multi()) r.notes.push_back("groups overlap: rows count once per tag of their variant");
  r.group_results = std::move(rows);
  return r;
}

StatResult compute_funnel(const InfoTopic& topic, Evaluator& ev, const Mask& pop) {
  const double level = topic.context.ci_level;
  static const char* kStages[] = {"clicked", "authenticated", "redeemed"};
  const auto n = static_cast<std::int64_t>(kernels::count(pop, ev.exec()));
  if (n == 0) empty_slice(topic);
  StatResult r;
  r.query = InfoQuery::Funnel;
  r.ci_level = level;
  r.n = n;
  std::vector<GroupRow> rows;
  std::int64_t previous = n;
  for (int s = 0; s < 3; ++s) {
    const auto& col = binary_subject(ev, kStages[s]);
    auto t = kernels::tally_binary(col, pop, ev.exec());
    GroupRow g;
    g.label = kStages[s];
    g.n = n;
    g.successes = t.k;
    g.estimate = static_cast<double>(t.k) / static_cast<double>(n);
    auto ci = stats::wilson(t.k, n, level);
    g.ci_low = ci.low;
    g.ci_high = ci.high;
    if (previous > 0) g.conditional = static_cast<double>(t.k) / static_cast<double>(previous);
    previous = t.k;
    rows.push_back(g);
  }
  for (int s = 1; s < 3; ++s) {
    auto bad = kernels::implication_violations(ev.column(kStages[s - 1]), ev.column(kStages[s]), pop, ev.exec());
    if (bad > 0) {
      r.notes.push_back("MonotonicityWarning: " + std::to_string(bad) + " row(s) with " + kStages[s] + " but not " +
                        kStages[s - 1]);
    }
  }
  r.estimate = rows.back().estimate;
  r.successes = rows.back().successes;
  r.ci_low = rows.back().ci_low;
  r.ci_high = rows.back().ci_high;
  r.group_results = std::move(rows);
  return r;
}

StatResult compute_chi_square(const InfoTopic& topic, Evaluator& ev, const Mask& pop) {
  auto groups = ev.grouping(*topic.context.group_by);
  if (groups.multi()) {
    throw Error(ErrorCode::InvalidTopic, "chi-squared test needs a single-membership group_by");
  }
  auto outcome = ev.grouping(topic.subject);
  if (outcome.multi()) throw Error(ErrorCode::InvalidTopic, "chi-squared subject must be single-valued");
  const int rows = static_cast<int>(groups.labels.size());
  const int cols = static_cast<int>(outcome.labels.size());
  auto counts = kernels::contingency(groups.codes, rows, outcome.codes, cols, pop, ev.exec());
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) empty_slice(topic);
  auto cs = stats::chi_square_independence(counts, rows, cols);
  StatResult r;
  r.query = InfoQuery::ChiSquareIndependence;
  r.ci_level = topic.context.ci_level;
  r.estimate = cs.cramers_v;
  r.test_statistic = cs.statistic;
  r.p_value = cs.p_value;
  r.degrees_of_freedom = cs.df;
  r.n = cs.n;
  std::vector<GroupRow> out;
  for (int g = 0; g < rows; ++g) {
    GroupRow row;
    row.label = groups.labels[g];
    std::map<std::string, std::int64_t> cells;
    for (int c = 0; c < cols; ++c) {
      const auto v = counts[static_cast<std::size_t>(g) * cols + c];
      row.n += v;
      cells[outcome.labels[c]] = v;
    }
    if (row.n == 0) continue;
    row.estimate = static_cast<double>(row.n) / static_cast<double>(cs.n);
    row.counts = std::move(cells);
    out.push_back(std::move(row));
  }
  r.group_results = std::move(out);
  return r;
}

}  // namespace

void to_json(json& j, const GroupRow& g) {
  j = json{{"label", g.label},         {"n", g.n},
           {"successes", opt(g.successes)}, {"estimate", g.estimate},
           {"ci_low", opt(g.ci_low)},   {"ci_high", opt(g.ci_high)},
           {"conditional", opt(g.conditional)}};
  j["counts"] = g.counts ? json(*g.counts) : json();
}

void from_json(const json& j, GroupRow& g) {
  g.label = j.at("label").get<std::string>();
  g.n = j.at("n").get<std::int64_t>();
  g.successes = opt_get<std::int64_t>(j, "successes");
  g.estimate = j.at("estimate").get<double>();
  g.ci_low = opt_get<double>(j, "ci_low");
  g.ci_high = opt_get<double>(j, "ci_high");
  g.conditional = opt_get<double>(j, "conditional");
  g.counts = opt_get<std::map<std::string, std::int64_t>>(j, "counts");
}

void to_json(json& j, const StatResult& r) {
  j = json{{"query", to_token(r.query)},
           {"estimate", r.estimate},
           {"ci_low", opt(r.ci_low)},
           {"ci_high", opt(r.ci_high)},
           {"ci_level", r.ci_level},
           {"test_statistic", opt(r.test_statistic)},
           {"p_value", opt(r.p_value)},
           {"degrees_of_freedom", opt(r.degrees_of_freedom)},
           {"n", r.n},
           {"successes", opt(r.successes)},
           {"degenerate", r.degenerate},
           {"notes", r.notes}};
  j["group_results"] = r.group_results ? json(*r.group_results) : json();
}

void from_json(const json& j, StatResult& r) {
  r.query = parse_info_query(j.at("query").get<std::string>());
  r.estimate = j.at("estimate").get<double>();
  r.ci_low = opt_get<double>(j, "ci_low");
  r.ci_high = opt_get<double>(j, "ci_high");
  r.ci_level = j.at("ci_level").get<double>();
  r.test_statistic = opt_get<double>(j, "test_statistic");
  r.p_value = opt_get<double>(j, "p_value");
  r.degrees_of_freedom = opt_get<double>(j, "degrees_of_freedom");
  r.n = j.at("n").get<std::int64_t>();
  r.successes = opt_get<std::int64_t>(j, "successes");
  r.degenerate = j.value("degenerate", false);
  r.notes = j.value("notes", std::vector<std::string>{});
  r.group_results = opt_get<std::vector<GroupRow>>(j, "group_results");
}

StatResult rate_with_ci(std::int64_t k, std::int64_t n, double level) {
  auto ci = stats::wilson(k, n, level);
  StatResult r;
  r.query = InfoQuery::Rate;
  r.estimate = static_cast<double>(k) / static_cast<double>(n);
  r.ci_low = ci.low;
  r.ci_high = ci.high;
  r.ci_level = level;
  r.n = n;
  r.successes = k;
  return r;
}

StatResult two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2, double level) {
  auto t = stats::two_proportion(k1, n1, k2, n2, level);
  StatResult r;
  r.query = InfoQuery::TwoProportionTest;
  r.estimate = t.difference;
  r.ci_low = std::min(t.difference_ci.low, t.difference);
  r.ci_high = std::max(t.difference_ci.high, t.difference);
  r.ci_level = level;
  r.test_statistic = t.z;
  r.p_value = t.p_value;
  r.n = n1 + n2;
  r.degenerate = t.degenerate;
  if (t.degenerate) r.notes.push_back("pooled proportion is 0 or 1; z undefined");
  return r;
}

StatResult compute(const InfoTopic& topic, Evaluator& ev) {
  const double level = topic.context.ci_level;
  const Mask pop = ev.population(topic.slice, topic.context);
  switch (topic.query) {
    case InfoQuery::Rate: {
      auto t = kernels::tally_binary(binary_subject(ev, topic.subject), pop, ev.exec());
      if (t.n == 0) empty_slice(topic);
      return rate_with_ci(t.k, t.n, level);
    }
    case InfoQuery::Mean: {
      auto m = kernels::moments(numeric_subject(ev, topic.subject), pop, ev.exec());
      if (m.n == 0) empty_slice(topic);
      return mean_result(m, level);
    }
    case InfoQuery::Count: {
      (void)ev.column(topic.subject);
      StatResult r;
      r.query = InfoQuery::Count;
      r.ci_level = level;
      r.n = static_cast<std::int64_t>(kernels::count(pop, ev.exec()));
      r.estimate = static_cast<double>(r.n);
      return r;
    }
    case InfoQuery::TwoProportionTest: {
      const auto& y = binary_subject(ev, topic.subject);
      std::vector<kernels::BinaryTally> t;
      for (const auto& g : topic.context.groups) {
        Mask m = ev.evaluate(g.slice);
        kernels::mask_and(m, pop, ev.exec());
        t.push_back(kernels::tally_binary(y, m, ev.exec()));
      }
      for (std::size_t i = 0; i < 2; ++i) {
        if (t[i].n == 0) {
          throw Error(ErrorCode::DegenerateGroup, "group '" + topic.context.groups[i].label + "' is empty",
                      {{"group", topic.context.groups[i].label}});
        }
      }
      auto r = two_proportion_test(t[0].k, t[0].n, t[1].k, t[1].n, level);
      r.group_results = std::vector<GroupRow>{rate_row(topic.context.groups[0].label, t[0], level),
                                              rate_row(topic.context.groups[1].label, t[1], level)};
      return r;
    }
    case InfoQuery::ChiSquareIndependence: return compute_chi_square(topic, ev, pop);
    case InfoQuery::PearsonCorrelation: {
      const auto& x = numeric_subject(ev, *topic.context.covariate);
      const auto& y = numeric_subject(ev, topic.subject);
      auto pm = kernels::paired_moments(x, y, pop, ev.exec());
      auto c = stats::pearson(pm.n, pm.sxx, pm.syy, pm.sxy, level);
      StatResult r;
      r.query = InfoQuery::PearsonCorrelation;
      r.estimate = c.r;
      r.ci_level = level;
      if (c.ci) {
        r.ci_low = std::min(c.ci->low, c.r);
        r.ci_high = std::max(c.ci->high, c.r);
      }
      r.test_statistic = c.t;
      r.p_value = c.p_value;
      r.degrees_of_freedom = static_cast<double>(c.n - 2);
      r.n = c.n;
      if (!c.t) r.notes.push_back("perfect linear relation; t undefined");
      return r;
    }
    case InfoQuery::SegmentBreakdown: return compute_segment(topic, ev, pop);
    case InfoQuery::Funnel: return compute_funnel(topic, ev, pop);
  }
  throw Error(ErrorCode::InvalidTopic, "unknown query");
}

std::string render_report(const InfoTopic& topic, const StatResult& r) {
  std::ostringstream os;
  const std::string where = describe(topic.slice);
  const std::string lvl = pct(r.ci_level);
  auto interval = [&](const std::optional<double>& lo, const std::optional<double>& hi) {
    return lo && hi ? lvl + " interval [" + fmt(*lo) + ", " + fmt(*hi) + "]" : std::string("no interval");
  };
  switch (r.query) {
    case InfoQuery::Rate:
      os << "Rate of " << topic.subject << " over " << where << ": " << fmt(r.estimate) << " (" << *r.successes
         << " of " << r.n << "); " << interval(r.ci_low, r.ci_high) << ".";
      break;
    case InfoQuery::Mean:
      os << "Mean of " << topic.subject << " over " << where << ": " << fmt(r.estimate) << " (n = " << r.n << "); "
         << interval(r.ci_low, r.ci_high) << ".";
      break;
    case InfoQuery::Count:
      os << "Count of rows over " << where << ": " << r.n << ".";
      break;
    case InfoQuery::TwoProportionTest: {
      const auto& g = *r.group_results;
      os << "Rate of " << topic.subject << " over " << where << ": " << g[0].label << " " << fmt(g[0].estimate)
         << " (" << *g[0].successes << " of " << g[0].n << ") vs " << g[1].label << " " << fmt(g[1].estimate) << " ("
         << *g[1].successes << " of " << g[1].n << "); difference " << fmt(r.estimate) << ", "
         << interval(r.ci_low, r.ci_high);
      if (r.test_statistic) os << "; z = " << fmt(*r.test_statistic) << ", p = " << fmt_p(*r.p_value) << ".";
      else os << "; z undefined (pooled proportion is 0 or 1).";
      break;
    }
    case InfoQuery::ChiSquareIndependence:
      os << "Association of " << topic.subject << " with " << *topic.context.group_by << " over " << where
         << ": chi-squared = " << fmt(*r.test_statistic) << " on " << *r.degrees_of_freedom
         << " df, p = " << fmt_p(*r.p_value) << ", Cramer's V = " << fmt(r.estimate) << " (n = " << r.n << ").";
      break;
    case InfoQuery::PearsonCorrelation:
      os << "Correlation of " << *topic.context.covariate << " with " << topic.subject << " over " << where
         << ": r = " << fmt(r.estimate) << " (n = " << r.n << "); " << interval(r.ci_low, r.ci_high);
      if (r.test_statistic) os << "; t = " << fmt(*r.test_statistic) << " on " << *r.degrees_of_freedom << " df";
      os << ", p = " << fmt_p(*r.p_value) << ".";
      break;
    case InfoQuery::SegmentBreakdown:
      os << (r.successes ? "Rate" : "Mean") << " of " << topic.subject << " by "
         << *topic.context.group_by << " over " << where << ": overall " << fmt(r.estimate) << " (n = " << r.n
         << ").";
      for (const auto& g : *r.group_results) {
        os << "\n  " << g.label << ": " << fmt(g.estimate) << " (n = " << g.n << "), "
           << interval(g.ci_low, g.ci_high) << ".";
      }
      break;
    case InfoQuery::Funnel:
      os << "Funnel over " << where << " (n = " << r.n << "):";
      for (const auto& g : *r.group_results) {
        os << "\n  " << g.label << ": " << fmt(g.estimate) << " (" << *g.successes << " of " << g.n << ")";
        if (g.conditional) os << ", " << fmt(*g.conditional) << " of the previous stage";
        os << ".";
      }
      break;
  }
  for (const auto& note : r.notes) os << "\nNote: " << note << ".";
  return os.str();
}

Artifact resolve_info_topic(const dataset::DatasetContext& data, const std::vector<TopicId>& data_deps,
                            const InfoTopic& topic, Timestamp now, kernels::Exec exec) {
  validate_topic(topic);
  Evaluator ev(*data.table, data.catalog, topic.context.age_bins, exec);
  auto result = compute(topic, ev);
  Artifact a;
  a.topic_id = canonical_hash(topic);
  a.payload = json{{"layer", "information"},
                   {"query", to_token(topic.query)},
                   {"subject", topic.subject},
                   {"result", result}};
  a.report = render_report(topic, result);
  a.provenance.input_artifact_ids = data_deps;
  a.provenance.dataset_fingerprint = data.fingerprint;
  a.provenance.agent_version = std::string(kAgentVersion);
  a.created_at = now;
  return a;
}

StatResult stat_result_of(const Artifact& a) { return a.payload.at("result").get<StatResult>(); }

}  // namespace dikw::info
