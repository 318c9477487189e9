#include <doctest.h>

#include "dikw/common/clock.hpp"
#include "dikw/common/error.hpp"
#include "dikw/dataset/fingerprint.hpp"
#include "dikw/info/info_agent.hpp"
#include "dikw/info/stats.hpp"
#include "support.hpp"

using namespace dikw;
using namespace dikw::info;
using nlohmann::json;

namespace {

const Timestamp kNow = parse_rfc3339("2024-06-01T00:00:00Z");

StatResult run(const dataset::EncounterTable& t, const InfoTopic& topic) {
  validate_topic(topic);
  Evaluator ev(t, &testing::stage1(), topic.context.age_bins);
  return compute(topic, ev);
}

InfoTopic topic_of(InfoQuery q, const std::string& subject = "clicked") {
  InfoTopic t;
  t.query = q;
  t.subject = subject;
  return t;
}

Predicate eq(const std::string& col, json v) { return Predicate{col, PredicateOp::Eq, std::move(v)}; }

NamedSlice group(const std::string& label, Predicate p) { return NamedSlice{label, SliceSpec{{std::move(p)}}}; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

constexpr double kTol = 1e-9;

}  // namespace

TEST_SUITE("info") {
  TEST_CASE("rate of six clicks in ten rows") {
    auto r = run(testing::make_table(testing::variant_rows("default", 10, 6)), topic_of(InfoQuery::Rate));
    CHECK(r.estimate == 0.6);
    CHECK(r.n == 10);
    CHECK(*r.successes == 6);
  }

  TEST_CASE("Wilson intervals match the oracle") {
    for (const auto& w : testing::oracle_values().at("wilson")) {
      auto r = rate_with_ci(w.at("k"), w.at("n"), w.at("level"));
      CHECK(std::fabs(*r.ci_low - w.at("low").get<double>()) <= kTol);
      CHECK(std::fabs(*r.ci_high - w.at("high").get<double>()) <= kTol);
      CHECK(*r.ci_low <= r.estimate);
      CHECK(r.estimate <= *r.ci_high);
    }
  }

  TEST_CASE("rate boundaries and domain errors") {
    auto lo = rate_with_ci(0, 10, 0.95);
    CHECK(lo.estimate == 0.0);
    CHECK(*lo.ci_low == 0.0);
    auto hi = rate_with_ci(10, 10, 0.95);
    CHECK(hi.estimate == 1.0);
    CHECK(*hi.ci_high == 1.0);
    CHECK(code_of([] { rate_with_ci(11, 10, 0.95); }) == ErrorCode::DomainError);
    CHECK(code_of([] { rate_with_ci(1, 0, 0.95); }) == ErrorCode::DomainError);
    CHECK(code_of([] { rate_with_ci(1, 2, 1.0); }) == ErrorCode::DomainError);
  }

  TEST_CASE("two-proportion tests match the oracle") {
    for (const auto& t : testing::oracle_values().at("two_proportion")) {
      auto r = two_proportion_test(t.at("k1"), t.at("n1"), t.at("k2"), t.at("n2"), 0.95);
      CHECK(std::fabs(*r.test_statistic - t.at("z").get<double>()) <= kTol);
      CHECK(std::fabs(*r.p_value - t.at("p").get<double>()) <= kTol);
    }
    auto same = two_proportion_test(50, 100, 50, 100, 0.95);
    CHECK(*same.test_statistic == 0.0);
    CHECK(*same.p_value == 1.0);
    auto degen = two_proportion_test(0, 100, 0, 100, 0.95);
    CHECK(degen.degenerate);
    CHECK(degen.estimate == 0.0);
    CHECK_FALSE(degen.test_statistic.has_value());
    CHECK_FALSE(degen.p_value.has_value());
  }

  TEST_CASE("two-proportion topic on equal arms") {
    auto rows = testing::variant_rows("default", 100, 50);
    auto b = testing::variant_rows("salience", 100, 50, 100);
    rows.insert(rows.end(), b.begin(), b.end());
    auto t = topic_of(InfoQuery::TwoProportionTest);
    t.context.groups = {group("A", eq("variant", "default")), group("B", eq("variant", "salience"))};
    auto r = run(testing::make_table(rows), t);
    CHECK(*r.test_statistic == 0.0);
    CHECK(*r.p_value == 1.0);
    REQUIRE(r.group_results->size() == 2);
    CHECK((*r.group_results)[0].label == "A");
  }

  TEST_CASE("empty comparison group is degenerate") {
    auto t = topic_of(InfoQuery::TwoProportionTest);
    t.context.groups = {group("A", eq("variant", "default")), group("B", eq("variant", "salience"))};
    auto table = testing::make_table(testing::variant_rows("default", 5, 2));
    CHECK(code_of([&] { run(table, t); }) == ErrorCode::DegenerateGroup);
  }

  TEST_CASE("empty slice raises EmptySlice") {
    auto t = topic_of(InfoQuery::Rate);
    t.slice.predicates.push_back(eq("variant", "salience"));
    auto table = testing::make_table(testing::variant_rows("default", 5, 2));
    CHECK(code_of([&] { run(table, t); }) == ErrorCode::EmptySlice);
  }

  TEST_CASE("segment breakdown over two age bins") {
    auto rows = testing::variant_rows("default", 100, 50);
    for (auto& r : rows) r.age = 30;
    auto old = testing::variant_rows("default", 100, 56, 100);
    for (auto& r : old) r.age = 70;
    rows.insert(rows.end(), old.begin(), old.end());
    auto t = topic_of(InfoQuery::SegmentBreakdown);
    t.context.group_by = "age_band";
    auto r = run(testing::make_table(rows), t);
    REQUIRE(r.group_results->size() == 2);
    CHECK((*r.group_results)[0].label == "18-44");
    CHECK((*r.group_results)[0].estimate == 0.5);
    CHECK((*r.group_results)[1].label == "65+");
    CHECK((*r.group_results)[1].estimate == 0.56);
  }

  TEST_CASE("segment group with an all-null subject is excluded and noted") {
    auto rows = testing::variant_rows("default", 6, 3);
    for (int i = 0; i < 6; ++i) {
      rows[i].gender = i < 3 ? "F" : "M";
      if (i >= 3) rows[i].score = 1.5 * i;
    }
    auto t = topic_of(InfoQuery::SegmentBreakdown, "score");
    t.context.group_by = "gender";
    auto r = run(testing::make_table(rows, true), t);
    REQUIRE(r.group_results->size() == 1);
    CHECK((*r.group_results)[0].label == "M");
    REQUIRE(r.notes.size() == 1);
    CHECK(r.notes[0].find("'F' excluded") != std::string::npos);
  }

  TEST_CASE("strategy tag breakdown counts a row once per tag") {
    auto rows = testing::variant_rows("progressFeedback", 4, 2);
    auto more = testing::variant_rows("default", 4, 1, 10);
    rows.insert(rows.end(), more.begin(), more.end());
    auto t = topic_of(InfoQuery::SegmentBreakdown);
    t.context.group_by = "strategy_tags";
    auto r = run(testing::make_table(rows), t);
    std::map<std::string, std::int64_t> n;
    for (const auto& g : *r.group_results) n[g.label] = g.n;
    CHECK(n == std::map<std::string, std::int64_t>{{"default", 4}, {"progress", 4}, {"task_completion", 4}});
    CHECK(r.n == 8);
  }

  TEST_CASE("funnel of six, three and one") {
    auto rows = testing::variant_rows("default", 10, 6);
    for (int i = 0; i < 3; ++i) rows[i].authenticated = true;
    rows[0].redeemed = true;
    auto r = run(testing::make_table(rows), topic_of(InfoQuery::Funnel));
    const auto& g = *r.group_results;
    REQUIRE(g.size() == 3);
    CHECK(g[0].estimate == 0.6);
    CHECK(g[1].estimate == 0.3);
    CHECK(g[2].estimate == 0.1);
    CHECK(*g[0].conditional == 0.6);
    CHECK(*g[1].conditional == 0.5);
    CHECK(*g[2].conditional == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(r.notes.empty());
  }

  TEST_CASE("funnel flags a monotonicity break but still computes") {
    auto rows = testing::variant_rows("default", 10, 6);
    rows[8].authenticated = true;  // not clicked
    auto r = run(testing::make_table(rows), topic_of(InfoQuery::Funnel));
    REQUIRE(r.notes.size() == 1);
    CHECK(r.notes[0].rfind("MonotonicityWarning", 0) == 0);
    CHECK((*r.group_results)[1].estimate == 0.1);
  }

  TEST_CASE("pearson on identical series and constants") {
    auto rows = testing::variant_rows("default", 5, 2);
    for (int i = 0; i < 5; ++i) {
      rows[i].age = i + 20;
      rows[i].score = i + 20;
    }
    auto t = topic_of(InfoQuery::PearsonCorrelation, "score");
    t.context.covariate = "age";
    CHECK(run(testing::make_table(rows, true), t).estimate == 1.0);
    for (auto& r : rows) r.score = 3.0;
    auto table = testing::make_table(rows, true);
    CHECK(code_of([&] { run(table, t); }) == ErrorCode::DegenerateGroup);
  }

  TEST_CASE("pearson fixtures match the oracle") {
    for (const auto& o : testing::oracle_values().at("pearson")) {
      auto xs = o.at("x").get<std::vector<int>>();
      auto ys = o.at("y").get<std::vector<double>>();
      auto rows = testing::variant_rows("default", static_cast<int>(xs.size()), 1);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        rows[i].age = xs[i];
        rows[i].score = ys[i];
      }
      auto t = topic_of(InfoQuery::PearsonCorrelation, "score");
      t.context.covariate = "age";
      auto r = run(testing::make_table(rows, true), t);
      CHECK(std::fabs(r.estimate - o.at("r").get<double>()) <= 1e-12);
      CHECK(std::fabs(*r.test_statistic - o.at("t").get<double>()) <= kTol);
      CHECK(std::fabs(*r.p_value - o.at("p").get<double>()) <= kTol);
      CHECK(*r.degrees_of_freedom == static_cast<double>(xs.size() - 2));
    }
  }

  TEST_CASE("chi-squared tables match the oracle") {
    for (const auto& o : testing::oracle_values().at("chi_square")) {
      auto table = o.at("table").get<std::vector<std::vector<int>>>();
      std::vector<std::int64_t> flat;
      for (const auto& row : table) flat.insert(flat.end(), row.begin(), row.end());
      auto cs = stats::chi_square_independence(flat, static_cast<int>(table.size()),
                                               static_cast<int>(table[0].size()));
      CHECK(std::fabs(cs.statistic - o.at("statistic").get<double>()) <= kTol);
      CHECK(std::fabs(cs.p_value - o.at("p").get<double>()) <= kTol);
      CHECK(cs.df == o.at("df").get<double>());
      CHECK(std::fabs(cs.cramers_v - o.at("cramers_v").get<double>()) <= kTol);
    }
  }

  TEST_CASE("chi-squared topic on a table built from counts") {
    const auto& o = testing::oracle_values().at("chi_square")[0];
    auto table = o.at("table").get<std::vector<std::vector<int>>>();
    const char* genders[] = {"F", "M"};
    const char* drugs[] = {"a", "b", "c"};
    std::vector<testing::Row> rows;
    int id = 0;
    for (int g = 0; g < 2; ++g) {
      for (int d = 0; d < 3; ++d) {
        for (int k = 0; k < table[g][d]; ++k) {
          auto r = testing::variant_rows("default", 1, 0, id++)[0];
          r.gender = genders[g];
          r.drug_category = drugs[d];
          rows.push_back(r);
        }
      }
    }
    auto t = topic_of(InfoQuery::ChiSquareIndependence, "drug_category");
    t.context.group_by = "gender";
    auto r = run(testing::make_table(rows), t);
    CHECK(std::fabs(*r.test_statistic - o.at("statistic").get<double>()) <= kTol);
    CHECK(std::fabs(*r.p_value - o.at("p").get<double>()) <= kTol);
    CHECK(r.n == 120);
    CHECK((*r.group_results)[0].counts->at("b") == 20);
  }

  TEST_CASE("relative lift arithmetic") {
    CHECK(stats::relative_lift(0.6876, 0.6127) == doctest::Approx(0.1222).epsilon(0.0005 / 0.1222));
    CHECK(stats::absolute_lift(0.6572, 0.6127) == doctest::Approx(0.0445).epsilon(1e-9));
    CHECK(stats::relative_lift(0.3, 0.3) == 0.0);
    CHECK(code_of([] { stats::relative_lift(0.3, 0.0); }) == ErrorCode::DomainError);
  }

  TEST_CASE("a predicate and its negation partition a non-nullable column") {
    std::vector<testing::Row> rows;
    const char* variants[] = {"default", "salience", "authority"};
    for (int i = 0; i < 30; ++i) rows.push_back(testing::variant_rows(variants[i % 3], 1, i % 2, i)[0]);
    auto table = testing::make_table(rows);
    Evaluator ev(table, &testing::stage1(), {});
    for (const char* v : variants) {
      auto in = kernels::count(ev.evaluate(SliceSpec{{eq("variant", v)}}));
      auto out = kernels::count(ev.evaluate(SliceSpec{{Predicate{"variant", PredicateOp::Neq, v}}}));
      CHECK(in + out == table.row_count());
    }
    auto lt = kernels::count(ev.evaluate(SliceSpec{{Predicate{"clicked", PredicateOp::Lt, 1}}}));
    auto ge = kernels::count(ev.evaluate(SliceSpec{{Predicate{"clicked", PredicateOp::Ge, 1}}}));
    CHECK(lt + ge == table.row_count());
  }

  TEST_CASE("time window restricts on sent_at") {
    auto rows = testing::variant_rows("default", 4, 4);
    rows[0].sent_at = "2024-05-01T00:00:00Z";
    rows[1].sent_at = "2024-05-02T00:00:00Z";
    rows[2].sent_at = "2024-05-03T00:00:00Z";
    auto t = topic_of(InfoQuery::Count);
    t.context.time_window = TimeWindow{"2024-05-01T00:00:00Z", "2024-05-03T00:00:00Z"};
    CHECK(run(testing::make_table(rows), t).n == 2);
  }

  TEST_CASE("artifacts are byte-identical across runs and executors") {
    auto rows = testing::variant_rows("default", 40, 13);
    auto table = testing::make_table(rows);
    dataset::DatasetContext ctx{&table, &testing::stage1(), dataset::fingerprint(table).digest};
    auto t = topic_of(InfoQuery::Rate);
    auto a = serialize(resolve_info_topic(ctx, {}, t, kNow, kernels::Exec::Serial));
    auto b = serialize(resolve_info_topic(ctx, {}, t, kNow, kernels::Exec::Parallel));
    CHECK(a == b);
    CHECK(a == serialize(resolve_info_topic(ctx, {}, t, kNow)));
  }

  TEST_CASE("results carry no interpretive fields") {
    auto r = rate_with_ci(3, 10, 0.95);
    json j = r;
    for (const char* banned : {"conclusion", "significant", "significance", "recommendation", "verdict"}) {
      CHECK_FALSE(j.contains(banned));
    }
    auto back = j.get<StatResult>();
    CHECK(json(back) == j);
  }

  TEST_CASE("report sentence template") {
    auto t = topic_of(InfoQuery::Rate);
    auto r = rate_with_ci(6, 10, 0.95);
    CHECK(render_report(t, r) == "Rate of clicked over all rows: 0.6000 (6 of 10); 95% interval [0.3127, 0.8318].");
  }
}
