#include <doctest.h>

#include "dikw/artifact/store.hpp"
#include "dikw/common/clock.hpp"
#include "dikw/common/error.hpp"
#include "dikw/dataset/fingerprint.hpp"
#include "dikw/info/info_agent.hpp"
#include "dikw/knowledge/knowledge_agent.hpp"
#include "dikw/llm/llm.hpp"
#include "dikw/sim/simulator.hpp"
#include "support.hpp"

using namespace dikw;
using namespace dikw::knowledge;
using nlohmann::json;

namespace {

const Timestamp kNow = parse_rfc3339("2024-06-01T00:00:00Z");

KnowledgeTopic tag_claim(const std::string& left, const std::string& right, Relation rel = Relation::Outperforms) {
  KnowledgeTopic k;
  k.claim.left = {DescriptorKind::Tag, left, ""};
  k.claim.right = {DescriptorKind::Tag, right, ""};
  k.claim.relation = rel;
  return k;
}

EvidenceItem item(bool match, std::optional<double> p, double effect = 0.1) {
  EvidenceItem e;
  e.direction_match = match;
  e.p_value = p;
  e.effect = effect;
  return e;
}

struct Harness {
  dataset::EncounterTable table;
  dataset::DatasetContext ctx;
  MemoryArtifactStore store;
  int calls = 0;

  explicit Harness(dataset::EncounterTable t) : table(std::move(t)) {
    ctx = {&table, &testing::stage1(), dataset::fingerprint(table).digest};
  }
  InfoResolver resolver() {
    return [this](const InfoTopic& t) {
      ++calls;
      auto a = info::resolve_info_topic(ctx, {}, t, kNow);
      store.publish(a);
      return a;
    };
  }
  Evaluation evaluate(const KnowledgeTopic& k, llm::Adapter* adapter = nullptr) {
    return evaluate_hypothesis(k, testing::stage1(), store, resolver(), adapter, ctx.fingerprint, kNow);
  }
};

dataset::EncounterTable planted(std::size_t n) {
  auto model = sim::GroundTruthModel::load(testing::fixture("planted_model.json"));
  return sim::generate(model, testing::stage1(), n, sim::DemographicsMix::defaults());
}

std::vector<std::string> labels_of(const InfoTopic& t) {
  return {t.context.groups[0].label, t.context.groups[1].label};
}

}  // namespace

TEST_SUITE("knowledge") {
  TEST_CASE("tag comparison expands to every variant pair") {
    auto ev = required_evidence(tag_claim("urgency", "social_proof"), testing::stage1());
    // urgency: timeliness, commitmentPrompt; social_proof: socialNorms, socialIdentity
    REQUIRE(ev.size() == 4);
    std::vector<std::vector<std::string>> pairs;
    for (const auto& t : ev) {
      CHECK(t.query == InfoQuery::TwoProportionTest);
      CHECK(t.subject == "clicked");
      pairs.push_back(labels_of(t));
    }
    std::vector<std::vector<std::string>> expected{{"timeliness", "socialNorms"},
                                                   {"timeliness", "socialIdentity"},
                                                   {"commitmentPrompt", "socialNorms"},
                                                   {"commitmentPrompt", "socialIdentity"}};
    CHECK(pairs == expected);
  }

  TEST_CASE("overlapping tags skip identical variants") {
    // progress: progressFeedback, goalReinforcement; task_completion: progressFeedback
    auto ev = required_evidence(tag_claim("progress", "task_completion"), testing::stage1());
    REQUIRE(ev.size() == 1);
    CHECK(labels_of(ev[0]) == std::vector<std::string>{"goalReinforcement", "progressFeedback"});
  }

  TEST_CASE("segment claims compare two segments and keep explicit evidence") {
    KnowledgeTopic k;
    k.claim.left = {DescriptorKind::Segment, "65+", "age_band"};
    k.claim.right = {DescriptorKind::Segment, "18-44", "age_band"};
    InfoTopic extra;
    extra.subject = "clicked";
    extra.query = InfoQuery::Funnel;
    k.required_evidence.push_back(extra);
    auto ev = required_evidence(k, testing::stage1());
    REQUIRE(ev.size() == 2);
    CHECK(labels_of(ev[0]) == std::vector<std::string>{"65+", "18-44"});
    CHECK(ev[1].query == InfoQuery::Funnel);
  }

  TEST_CASE("descriptor with no catalog variant") {
    auto k = tag_claim("reciprocity", "default");
    try {
      required_evidence(k, testing::stage1());
      FAIL("expected UnresolvableDescriptor");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnresolvableDescriptor);
    }
  }

  TEST_CASE("support score boundaries") {
    CHECK(empirical_support({item(true, 0.0)}).score == 1.0);
    CHECK(empirical_support({item(false, 0.0)}).score == 0.0);
    CHECK(empirical_support({item(true, 0.05), item(false, 0.05)}).score == 0.5);
    auto empty = empirical_support({});
    CHECK(empty.score == 0.5);
    CHECK(empty.neutral);
    auto zero = empirical_support({item(true, 1.0)});
    CHECK(zero.neutral);
    CHECK(empirical_support({item(true, std::nullopt, 3.0)}).score == 1.0);
  }

  TEST_CASE("bands follow the cutpoints") {
    CHECK(band_of(0.8) == Band::High);
    CHECK(band_of(0.7999) == Band::Medium);
    CHECK(band_of(0.6) == Band::Medium);
    CHECK(band_of(0.5999) == Band::Low);
  }

  TEST_CASE("score stays in range and is monotone under new evidence") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<EvidenceItem> ev;
      const int n = 1 + static_cast<int>(rng() % 6);
      double min_p = 1.0;
      for (int i = 0; i < n; ++i) {
        const double p = u(rng);
        min_p = std::min(min_p, p);
        ev.push_back(item(u(rng) < 0.5, p, u(rng) - 0.5));
      }
      const double base = empirical_support(ev).score;
      CHECK(base >= 0.0);
      CHECK(base <= 1.0);
      auto plus = ev;
      plus.push_back(item(true, min_p * 0.5));
      CHECK(empirical_support(plus).score >= base - 1e-15);
      auto minus = ev;
      minus.push_back(item(false, min_p * 0.5));
      CHECK(empirical_support(minus).score <= base + 1e-15);
    }
  }

  TEST_CASE("assessment follows the relation") {
    Claim c;
    info::StatResult r;
    r.query = InfoQuery::TwoProportionTest;
    r.estimate = 0.05;
    r.p_value = 0.01;
    c.relation = Relation::Outperforms;
    CHECK(assess(c, {}, r).direction_match);
    c.relation = Relation::Decreases;
    CHECK_FALSE(assess(c, {}, r).direction_match);
    c.relation = Relation::NoEffect;
    CHECK_FALSE(assess(c, {}, r).direction_match);
    r.p_value = 0.4;
    CHECK(assess(c, {}, r).direction_match);
    r.query = InfoQuery::Funnel;
    c.relation = Relation::Outperforms;
    CHECK_FALSE(assess(c, {}, r).scored);
  }

  TEST_CASE("cached evidence is reused and missing evidence resolved once each") {
    Harness h(planted(6000));
    auto k = tag_claim("urgency", "social_proof");
    auto topics = required_evidence(k, testing::stage1());
    // Pre-resolve two of the four.
    for (int i = 0; i < 2; ++i) h.store.publish(info::resolve_info_topic(h.ctx, {}, topics[i], kNow));
    auto ev = h.evaluate(k);
    CHECK(ev.resolver_calls == 2);
    CHECK(h.calls == 2);
    auto again = h.evaluate(k);
    CHECK(again.resolver_calls == 0);
    CHECK(serialize(again.artifact) == serialize(ev.artifact));
  }

  TEST_CASE("provenance equals the evidence set and resolves") {
    Harness h(planted(6000));
    auto ev = h.evaluate(tag_claim("urgency", "default"));
    std::vector<TopicId> ids;
    for (const auto& e : ev.claim.evidence) ids.push_back(e.artifact_id);
    CHECK(ev.artifact.provenance.input_artifact_ids == ids);
    CHECK(validate_artifact(ev.artifact, h.store).empty());
    CHECK(claim_of(ev.artifact).support_score == ev.claim.support_score);
  }

  TEST_CASE("resolver failures become EvidenceResolutionFailure") {
    Harness h(testing::make_table(testing::variant_rows("timeliness", 5, 2)));
    try {
      h.evaluate(tag_claim("urgency", "social_proof"));
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EvidenceResolutionFailure);
      CHECK(e.detail().at("cause").at("code") == "DegenerateGroup");
    }
  }

  TEST_CASE("canned rationale quotes the hypothesis") {
    Harness h(planted(6000));
    llm::Config cfg;
    cfg.mode = llm::Mode::Canned;
    llm::Adapter adapter(cfg, llm::PromptLibrary::shipped(), make_clock("fixed:2024-06-01T00:00:00Z"));
    auto ev = h.evaluate(tag_claim("urgency", "social_proof"), &adapter);
    CHECK(ev.claim.rationale_source == RationaleSource::Canned);
    CHECK(ev.claim.theoretical_rationale.find(ev.claim.hypothesis) != std::string::npos);
    auto ev2 = h.evaluate(tag_claim("urgency", "social_proof"), &adapter);
    CHECK(serialize(ev2.artifact) == serialize(ev.artifact));
  }

  TEST_CASE("planted direction scores high and its reverse low") {
    Harness h(planted(sim::kDefaultRows));
    auto fwd = h.evaluate(tag_claim("urgency", "social_proof"));
    auto rev = h.evaluate(tag_claim("social_proof", "urgency"));
    CHECK(fwd.claim.support_score >= 0.8);
    CHECK(fwd.claim.confidence_band == Band::High);
    CHECK(rev.claim.support_score <= 0.2);
  }
}
