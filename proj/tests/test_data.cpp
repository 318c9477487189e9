#include <doctest.h>

#include "dikw/common/clock.hpp"
#include "dikw/common/error.hpp"
#include "dikw/data/data_agent.hpp"
#include "dikw/dataset/fingerprint.hpp"
#include "dikw/sim/simulator.hpp"
#include "support.hpp"

using namespace dikw;
using namespace dikw::data;
using nlohmann::json;

namespace {

const Timestamp kNow = parse_rfc3339("2024-06-01T00:00:00Z");

json resolve(const dataset::EncounterTable& t, const dataset::MessageCatalog* c, DataTopicKind kind,
             json params = json::object()) {
  dataset::DatasetContext ctx{&t, c, dataset::fingerprint(t).digest};
  return resolve_data_topic(ctx, DataTopic{kind, std::move(params)}, kNow).payload;
}

std::vector<testing::Row> uniform_rows(const std::vector<std::string>& variants, int per_variant) {
  std::vector<testing::Row> rows;
  int id = 0;
  for (int i = 0; i < per_variant; ++i) {
    for (const auto& v : variants) {
      auto r = testing::variant_rows(v, 1, 0, id++);
      rows.push_back(r[0]);
    }
  }
  return rows;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("missingness on a column without nulls") {
    auto t = testing::make_table(testing::variant_rows("default", 4, 1));
    auto m = check_missingness(t, {"clicked"});
    REQUIRE(m.size() == 1);
    CHECK(m[0].null_fraction == 0.0);
    CHECK(m[0].present_count == 4);
  }

  TEST_CASE("missingness with three of ten null") {
    auto rows = testing::variant_rows("default", 10, 5);
    for (int i = 0; i < 10; ++i) rows[i].age = 30 + i;
    rows[1].age.reset();
    rows[4].age.reset();
    rows[9].age.reset();
    auto m = check_missingness(testing::make_table(rows), {"age"});
    CHECK(m[0].null_count == 3);
    CHECK(m[0].null_fraction == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(m[0].null_rows == std::vector<std::int64_t>{1, 4, 9});
    CHECK(m[0].null_count + m[0].present_count == 10);
  }

  TEST_CASE("missingness map matches the independent cell scan") {
    auto t = dataset::ingest_file(testing::fixture("golden10.csv"),
                                  dataset::SchemaDescriptor::load(testing::fixture("golden10.schema.json")));
    const auto& expected = testing::oracle_values().at("missingness_golden10");
    auto m = check_missingness(t);
    REQUIRE(m.size() == expected.size());
    for (const auto& col : m) {
      INFO(col.column);
      const auto& e = expected.at(col.column);
      CHECK(col.null_rows == e.at("null_rows").get<std::vector<std::int64_t>>());
      CHECK(col.null_count == e.at("null_count").get<std::int64_t>());
      CHECK(col.null_fraction == e.at("null_fraction").get<double>());
    }
  }

  TEST_CASE("balance passes at 50/50 and fails at 90/10") {
    auto even = testing::variant_rows("default", 50, 0);
    auto more = testing::variant_rows("salience", 50, 0, 100);
    even.insert(even.end(), more.begin(), more.end());
    auto b = check_randomization_balance(testing::make_table(even), 0.05);
    CHECK(b.passed);

    auto skew = testing::variant_rows("default", 90, 0);
    auto few = testing::variant_rows("salience", 10, 0, 100);
    skew.insert(skew.end(), few.begin(), few.end());
    b = check_randomization_balance(testing::make_table(skew), 0.05);
    CHECK_FALSE(b.passed);
    CHECK(b.shares["default"] == doctest::Approx(0.9));
    CHECK(b.shares["salience"] == doctest::Approx(0.1));
    double total = 0;
    for (const auto& [_, s] : b.shares) total += s;
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }

  TEST_CASE("simulator assignment is balanced across 13 variants") {
    sim::GroundTruthModel model;
    model.seed = 11;
    auto t = sim::generate(model, testing::stage1(), 10000, sim::DemographicsMix::defaults());
    auto b = check_randomization_balance(t, 0.02);
    CHECK(b.passed);
    CHECK(b.shares.size() == 13);
    std::map<std::string, std::int64_t> recount;
    const auto& v = t.column("variant");
    for (std::size_t i = 0; i < t.row_count(); ++i) ++recount[v.texts()[i]];
    CHECK(recount == b.counts);
  }

  TEST_CASE("experiment dimensioning counts rows and variants") {
    std::vector<std::string> names;
    for (const auto& e : testing::stage1().entries()) names.push_back(e.name);
    auto rows = uniform_rows(names, 8);
    rows.resize(100);
    auto p = resolve(testing::make_table(rows), &testing::stage1(), DataTopicKind::ExperimentDimensioning);
    CHECK(p.at("findings").at("rows") == 100);
    CHECK(p.at("findings").at("variants") == 13);
    CHECK(p.at("findings").at("per_variant_counts").at("default") == 8);
    CHECK(p.at("findings").at("per_variant_counts").at("socialIdentity") == 7);
  }

  TEST_CASE("id uniqueness lists duplicates") {
    auto rows = testing::variant_rows("default", 5, 0);
    rows[3].patient_id = rows[1].patient_id;
    auto p = resolve(testing::make_table(rows), nullptr, DataTopicKind::IdUniqueness);
    CHECK(p.at("passed") == false);
    const auto& d = p.at("findings").at("duplicates");
    REQUIRE(d.size() == 1);
    CHECK(d[0].at("id") == rows[1].patient_id);
    CHECK(d[0].at("rows") == json::array({1, 3}));
  }

  TEST_CASE("format compliance on the shipped catalog") {
    auto t = testing::make_table(testing::variant_rows("default", 2, 1));
    auto p = resolve(t, &testing::stage2(), DataTopicKind::FormatCompliance, {{"limit", 160}});
    CHECK(p.at("passed") == true);
    CHECK(p.at("findings").at("max_char_count") == 84);
    CHECK(p.at("findings").at("max_entry") == "salience");
    CHECK(p.at("findings").at("count_mismatches").size() == testing::stage2().count_mismatches().size());

    auto tight = resolve(t, &testing::stage2(), DataTopicKind::FormatCompliance, {{"limit", 60}});
    CHECK(tight.at("passed") == false);
    CHECK_FALSE(tight.at("violations").empty());
  }

  TEST_CASE("data payloads never carry statistical fields") {
    auto t = testing::make_table(testing::variant_rows("default", 6, 3));
    for (auto kind : {DataTopicKind::SchemaVerification, DataTopicKind::MissingValueMap,
                      DataTopicKind::ExperimentDimensioning, DataTopicKind::IdUniqueness,
                      DataTopicKind::FormatCompliance, DataTopicKind::Provenance, DataTopicKind::ExperimentConfig}) {
      auto text = resolve(t, &testing::stage1(), kind).dump();
      INFO(to_token(kind));
      CHECK(text.find("p_value") == std::string::npos);
      CHECK(text.find("effect") == std::string::npos);
      CHECK(text.find("click_rate") == std::string::npos);
    }
  }

  TEST_CASE("passed equals an empty violation list") {
    auto t = testing::make_table(testing::variant_rows("default", 6, 3));
    for (auto kind : {DataTopicKind::SchemaVerification, DataTopicKind::IdUniqueness, DataTopicKind::ExperimentConfig}) {
      auto p = resolve(t, &testing::stage1(), kind);
      CHECK(p.at("passed") == p.at("violations").empty());
    }
  }

  TEST_CASE("resolution is deterministic") {
    auto t = testing::make_table(testing::variant_rows("default", 6, 3));
    dataset::DatasetContext ctx{&t, &testing::stage1(), dataset::fingerprint(t).digest};
    DataTopic topic{DataTopicKind::Provenance, {{"source_description", "fixture"}}};
    CHECK(serialize(resolve_data_topic(ctx, topic, kNow)) == serialize(resolve_data_topic(ctx, topic, kNow)));
  }

  TEST_CASE("balance on an empty table") {
    auto t = testing::make_table({});
    CHECK_THROWS_AS(check_randomization_balance(t, 0.05), Error);
  }
}
