#include "dikw/wisdom/wisdom_agent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <regex>
#include <sstream>

#include "dikw/common/enum_tokens.hpp"
#include "dikw/common/error.hpp"
#include "dikw/common/text.hpp"

namespace dikw::wisdom {

using knowledge::Band;
using knowledge::KnowledgeClaim;
using nlohmann::json;

namespace {

constexpr TokenTable<Mode, 2> kModes{{
    {Mode::Exploitation, "exploitation"},
    {Mode::Exploration, "exploration"},
}};

// Order in which tags claim the framing clause. Authority is realized by the
// attribution, so it frames only when alone.
constexpr std::array<StrategyTag, 15> kPriority{
    StrategyTag::TaskCompletion, StrategyTag::Urgency,    StrategyTag::Progress,    StrategyTag::SocialProof,
    StrategyTag::Commitment,     StrategyTag::Reciprocity, StrategyTag::GainFraming, StrategyTag::Personalization,
    StrategyTag::Efficiency,     StrategyTag::Clarity,    StrategyTag::Identity,    StrategyTag::Emotion,
    StrategyTag::FutureSelf,     StrategyTag::Default,    StrategyTag::Authority,
};

using Phrases = std::array<const char*, 3>;

const Phrases& framing(StrategyTag t) {
  static const Phrases kTaskCompletion{"Final step from your visit", "Complete your visit", "Finish your visit"};
  static const Phrases kUrgency{"New prescription ready now", "Your new Rx is ready today", "Prescription info ready now"};
  static const Phrases kProgress{"One step left on your visit", "You are almost done", "Your visit is nearly complete"};
  static const Phrases kSocialProof{"Most patients review their Rx", "Patients like you check their Rx",
                                    "Most patients find this useful"};
  static const Phrases kCommitment{"Ready to review your prescription?", "Can you check your prescription?",
                                   "Will you look at your Rx?"};
  static const Phrases kReciprocity{"Your prescription is prepared", "We prepared your prescription",
                                    "Your Rx was prepared for you"};
  static const Phrases kGainFraming{"Better health starts here", "Stay on track with your Rx",
                                    "Get the most from your Rx"};
  static const Phrases kPersonalization{"Your prescription is ready", "Your personal Rx details",
                                        "Your visit summary is ready"};
  static const Phrases kEfficiency{"Quick prescription review", "Fast Rx check", "A short prescription review"};
  static const Phrases kClarity{"New prescription details", "Your new Rx details", "New prescription information"};
  static const Phrases kIdentity{"As a valued patient", "As one of our patients", "For our valued patients"};
  static const Phrases kEmotion{"Your health matters", "We care about your health", "Your wellbeing matters"};
  static const Phrases kFutureSelf{"Your future self will thank you", "Invest in your future health",
                                   "Plan ahead for your health"};
  static const Phrases kDefault{"Your prescription details", "Your Rx details", "Prescription details"};
  static const Phrases kAuthority{"New prescription details sent", "Your doctor sent new Rx details",
                                  "Prescription details from your doctor"};
  switch (t) {
    case StrategyTag::TaskCompletion: return kTaskCompletion;
    case StrategyTag::Urgency: return kUrgency;
    case StrategyTag::Progress: return kProgress;
    case StrategyTag::SocialProof: return kSocialProof;
    case StrategyTag::Commitment: return kCommitment;
    case StrategyTag::Reciprocity: return kReciprocity;
    case StrategyTag::GainFraming: return kGainFraming;
    case StrategyTag::Personalization: return kPersonalization;
    case StrategyTag::Efficiency: return kEfficiency;
    case StrategyTag::Clarity: return kClarity;
    case StrategyTag::Identity: return kIdentity;
    case StrategyTag::Emotion: return kEmotion;
    case StrategyTag::FutureSelf: return kFutureSelf;
    case StrategyTag::Default: return kDefault;
    case StrategyTag::Authority: return kAuthority;
  }
  throw Error(ErrorCode::UnknownTag, "no framing for tag");
}

const Phrases& call_to_action(Register r) {
  static const Phrases kAction{"review prescription", "review your Rx", "tap to review"};
  static const Phrases kFormal{"please review your prescription", "kindly review the details below",
                               "please review the details"};
  static const Phrases kPersonal{"review your Rx for your health", "see your Rx details", "check your prescription"};
  switch (r) {
    case Register::ActionOriented: return kAction;
    case Register::Formal: return kFormal;
    case Register::PersonalHealth: return kPersonal;
  }
  return kAction;
}

std::string attribution(Register r, const std::string& provider, int which) {
  const std::string dr = "Dr. " + provider;
  switch (r) {
    case Register::Formal: return which == 0 ? dr + "'s office: " : "From " + dr + "'s office: ";
    case Register::PersonalHealth: return which == 0 ? "Hi, it's " + dr + "'s office. " : "Hi, " + dr + "'s office. ";
    case Register::ActionOriented: break;
  }
  return which == 0 ? dr + ": " : "From " + dr + ": ";
}

const char* modifier(StrategyTag t) {
  switch (t) {
    case StrategyTag::Urgency: return " today";
    case StrategyTag::Efficiency: return " in one tap";
    case StrategyTag::Personalization: return " for you";
    case StrategyTag::Clarity: return " below";
    case StrategyTag::Progress: return " to finish";
    default: return "";
  }
}

std::string lower_first(std::string_view s) {
  std::string out(s);
  if (!out.empty() && out[0] >= 'A' && out[0] <= 'Z') out[0] = static_cast<char>(out[0] - 'A' + 'a');
  return out;
}

StrategyTag primary_of(const std::set<StrategyTag>& tags) {
  for (auto t : kPriority) {
    if (tags.count(t)) return t;
  }
  return StrategyTag::Clarity;
}

std::string tag_list(const std::set<StrategyTag>& tags) {
  std::string out;
  for (auto t : tags) {
    if (!out.empty()) out += ", ";
    out += display_name(t);
  }
  return out;
}

struct Slot {
  Mode mode;
  int index;  // within the mode
  std::vector<const KnowledgeClaim*> traced;
  std::set<StrategyTag> tags;
};

std::optional<std::string> draft_schema(const json& j) {
  if (!j.contains("text") || !j.at("text").is_string() || j.at("text").get<std::string>().empty()) {
    return std::string("missing non-empty string field 'text'");
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_token(Mode m) { return token_of(kModes, m); }
Mode parse_mode(std::string_view text) { return parse_token(kModes, text, "generation mode"); }

bool ConstraintReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ConstraintCheck& c) { return c.passed; });
}

ConstraintReport check_text_constraints(std::string_view text, const ConstraintSet& constraints) {
  ConstraintReport r;
  const auto n = text::scalar_count(text);
  ConstraintCheck len{"max_chars", n <= static_cast<std::size_t>(constraints.max_chars),
                      std::to_string(n) + " of " + std::to_string(constraints.max_chars) + " chars", {}, {}};
  if (!len.passed) len.position = static_cast<std::size_t>(constraints.max_chars);
  r.checks.push_back(len);

  ConstraintCheck forbidden{"forbidden_tokens", true, "no forbidden token", {}, {}};
  for (const auto& token : constraints.forbidden_tokens) {
    if (auto m = text::find_folded(text, token)) {
      forbidden.passed = false;
      forbidden.offending = token;
      forbidden.position = m->scalar_offset;
      forbidden.detail = "contains '" + token + "' at " + std::to_string(m->scalar_offset);
      break;
    }
  }
  r.checks.push_back(forbidden);

  ConstraintCheck prefix{"required_prefix", true, "matches " + constraints.required_prefix_pattern, {}, {}};
  const std::regex re(constraints.required_prefix_pattern, std::regex::ECMAScript);
  const std::string s(text);
  if (!std::regex_search(s, re, std::regex_constants::match_continuous)) {
    prefix.passed = false;
    prefix.detail = "does not start with the required attribution";
    prefix.offending = s.substr(0, std::min<std::size_t>(s.size(), 24));
    prefix.position = 0;
  }
  r.checks.push_back(prefix);
  return r;
}

ConstraintReport check_constraints(const MessageCandidate& c, const ConstraintSet& constraints) {
  auto r = check_text_constraints(c.text, constraints);
  const auto traced = static_cast<int>(c.traced_claims.size());
  r.checks.push_back(ConstraintCheck{"min_claims_traced", traced >= constraints.min_claims_traced,
                                     std::to_string(traced) + " traced, minimum " +
                                         std::to_string(constraints.min_claims_traced),
                                     {}, {}});
  return r;
}

std::set<StrategyTag> positive_tags(const Claim& claim, const dataset::MessageCatalog& catalog) {
  const Descriptor* side = nullptr;
  switch (claim.relation) {
    case Relation::Outperforms:
    case Relation::Increases: side = &claim.left; break;
    case Relation::Decreases: side = &claim.right; break;
    case Relation::NoEffect: return {};
  }
  if (side->kind == DescriptorKind::Tag) return {parse_strategy_tag(side->value)};
  if (side->kind == DescriptorKind::Variant) {
    if (const auto* e = catalog.find(side->value)) return e->strategy_tags;
  }
  return {};
}

std::vector<KnowledgeClaim> select_claims(const std::vector<KnowledgeClaim>& claims, Mode mode,
                                          const dataset::MessageCatalog& catalog) {
  const auto known = catalog.tag_combinations();
  std::vector<KnowledgeClaim> out;
  for (const auto& c : claims) {
    const bool high = c.confidence_band == Band::High;
    bool keep = false;
    if (mode == Mode::Exploitation) {
      keep = high;
    } else if (!high) {
      keep = true;
    } else {
      const auto tags = positive_tags(c.topic.claim, catalog);
      keep = !tags.empty() && !known.count(tags);
    }
    if (keep) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const KnowledgeClaim& a, const KnowledgeClaim& b) {
    if (a.support_score != b.support_score) return a.support_score > b.support_score;
    return a.id.hash < b.id.hash;
  });
  return out;
}

Register register_for(const std::optional<ContextSpec>& segment, const DesignRuleConfig& rules) {
  if (segment) {
    for (const auto& p : segment->restrict_to.predicates) {
      if (p.column != "age_band" || p.op != PredicateOp::Eq || !p.value.is_string()) continue;
      for (const auto& l : rules.linguistic_map) {
        if (l.age_band == p.value.get<std::string>()) return l.register_;
      }
    }
  }
  return Register::ActionOriented;
}

std::set<StrategyTag> apply_combination_rules(std::set<StrategyTag> tags, const DesignRuleConfig& rules) {
  for (const auto& rule : rules.combination_rules) {
    const bool touches = std::any_of(rule.tags_combined.begin(), rule.tags_combined.end(),
                                     [&](StrategyTag t) { return tags.count(t) > 0; });
    if (touches) tags.insert(rule.tags_combined.begin(), rule.tags_combined.end());
  }
  return tags;
}

std::string template_fallback(const std::set<StrategyTag>& tags_in, const DesignRuleConfig& rules, Register reg,
                              const std::string& provider_name, int variant) {
  (void)rules;
  const std::set<StrategyTag> tags = tags_in.empty() ? std::set<StrategyTag>{StrategyTag::Clarity} : tags_in;
  const auto primary = primary_of(tags);
  const int v = std::abs(variant);
  const int f = v % 3, c = (v / 3) % 3, a = (v / 9) % 2;
  std::string out = attribution(reg, provider_name, a) + framing(primary)[f] + " - " + call_to_action(reg)[c];
  int added = 0;
  for (auto t : kPriority) {
    if (t == primary || !tags.count(t) || added == 2) continue;
    const std::string m = modifier(t);
    if (m.empty() || out.find(m) != std::string::npos) continue;
    out += m;
    ++added;
  }
  return out;
}

int exploitation_quota(const WisdomTopic& topic) {
  return static_cast<int>(std::lround(topic.portfolio_size * topic.exploitation_fraction));
}

Portfolio generate_portfolio(const std::vector<KnowledgeClaim>& claims, const WisdomTopic& topic,
                             const dataset::MessageCatalog& catalog, llm::Adapter* adapter,
                             std::vector<std::string>* exchange_ids) {
  validate_topic(topic);
  Portfolio pf;
  pf.exploitation_quota = exploitation_quota(topic);
  pf.exploration_quota = topic.portfolio_size - pf.exploitation_quota;
  pf.register_ = register_for(topic.target_segment, topic.rules);

  const auto exploit = select_claims(claims, Mode::Exploitation, catalog);
  const auto explore = select_claims(claims, Mode::Exploration, catalog);
  if (pf.exploitation_quota > 0 && exploit.empty()) {
    throw Error(ErrorCode::InsufficientClaims, "no High-confidence claim for the exploitation quota",
                {{"mode", "exploitation"}, {"quota", pf.exploitation_quota}});
  }
  if (pf.exploration_quota > 0 && explore.empty()) {
    throw Error(ErrorCode::InsufficientClaims, "no eligible claim for the exploration quota",
                {{"mode", "exploration"}, {"quota", pf.exploration_quota}});
  }

  // Slot i of a mode traces min(m, 2 + i % 3) claims from a window rotating
  // over that mode's selection.
  std::vector<Slot> slots;
  auto plan = [&](Mode mode, int quota, const std::vector<KnowledgeClaim>& pool) {
    const int m = static_cast<int>(pool.size());
    for (int i = 0; i < quota; ++i) {
      Slot s{mode, i, {}, {}};
      const int k = std::min(m, 2 + i % 3);
      for (int j = 0; j < k; ++j) s.traced.push_back(&pool[(i + j) % m]);
      for (const auto* c : s.traced) {
        auto t = positive_tags(c->topic.claim, catalog);
        s.tags.insert(t.begin(), t.end());
      }
      if (s.tags.empty()) s.tags.insert(StrategyTag::Clarity);
      if (mode == Mode::Exploitation) s.tags = apply_combination_rules(s.tags, topic.rules);
      slots.push_back(std::move(s));
    }
  };
  plan(Mode::Exploitation, pf.exploitation_quota, exploit);
  plan(Mode::Exploration, pf.exploration_quota, explore);

  auto draft_text = [&](const Slot& s, int attempt) {
    const int variant = static_cast<int>((topic.seed + static_cast<std::uint64_t>(s.index) +
                                          static_cast<std::uint64_t>(attempt) * 5u) % 18u);
    return template_fallback(s.tags, topic.rules, pf.register_, topic.provider_name, variant);
  };
  auto rationale_of = [&](const Slot& s) {
    std::ostringstream os;
    os << "Traces " << s.traced.size() << " claim(s): ";
    for (std::size_t i = 0; i < s.traced.size(); ++i) os << (i ? "; " : "") << s.traced[i]->hypothesis;
    os << ". Tags: " << tag_list(s.tags) << ". Register: " << to_token(pf.register_) << ".";
    return os.str();
  };

  struct Draft {
    std::string text;
    std::string rationale;
    std::vector<std::string> exchanges;
  };
  auto realize = [&](const Slot& s, int attempt) {
    Draft d{draft_text(s, attempt), rationale_of(s), {}};
    if (!adapter) return d;
    llm::Request req;
    req.layer = Layer::Wisdom;
    req.params = llm::kWisdomParams;
    std::ostringstream os;
    os << "Objective: " << topic.objective << "\nGeneration: " << to_token(s.mode) << "\nStrategy tags: "
       << tag_list(s.tags) << "\nRegister: " << to_token(pf.register_) << "\nKnowledge claims:";
    for (const auto* c : s.traced) os << "\n- " << c->hypothesis << " (support " << c->support_score << ")";
    os << "\nTemplate draft: " << d.text << "\nConstraints: at most " << topic.constraints.max_chars
       << " characters; begin with the provider attribution; avoid loss framing and misleading urgency."
       << "\nReturn a JSON object with string fields \"text\" and \"rationale\".";
    if (attempt > 0) os << "\nAttempt " << attempt + 1 << ": the previous draft failed a constraint.";
    req.user_content = os.str();
    req.hints = json{{"draft", d.text}, {"rationale", d.rationale}};
    auto reply = adapter->complete_json(req, draft_schema);
    d.text = reply.value.at("text").get<std::string>();
    if (reply.value.contains("rationale") && reply.value.at("rationale").is_string()) {
      d.rationale = reply.value.at("rationale").get<std::string>();
    }
    d.exchanges = std::move(reply.exchange_ids);
    return d;
  };

  // First drafts are independent per slot and run concurrently; the join
  // below enforces constraints, uniqueness and quotas in slot order.
  std::vector<std::future<Draft>> first;
  first.reserve(slots.size());
  for (const auto& s : slots) {
    first.push_back(std::async(adapter ? std::launch::async : std::launch::deferred,
                               [&realize, &s] { return realize(s, 0); }));
  }

  std::set<std::string> texts, names;
  Shortfall shortfall;
  for (std::size_t si = 0; si < slots.size(); ++si) {
    const auto& s = slots[si];
    std::optional<MessageCandidate> accepted;
    std::string last_failure;
    for (int attempt = 0; attempt <= kRetryBudget && !accepted; ++attempt) {
      Draft d = attempt == 0 ? first[si].get() : realize(s, attempt);
      if (exchange_ids) exchange_ids->insert(exchange_ids->end(), d.exchanges.begin(), d.exchanges.end());
      MessageCandidate c;
      c.text = d.text;
      c.char_count = static_cast<int>(text::scalar_count(c.text));
      c.strategy_tags = s.tags;
      c.generation = s.mode;
      for (const auto* k : s.traced) {
        c.traced_claims.push_back(k->id);
        c.predicted_rank_basis += k->support_score;
      }
      c.rationale = d.rationale;
      char idx[16];
      std::snprintf(idx, sizeof idx, "%02d", s.index + 1);
      c.name = lower_first(display_name(primary_of(s.tags))) +
               (s.mode == Mode::Exploitation ? "Exploit" : "Explore") + idx;
      c.constraint_report = check_constraints(c, topic.constraints);
      if (!c.constraint_report.passed()) {
        for (const auto& chk : c.constraint_report.checks) {
          if (!chk.passed) last_failure = chk.constraint + ": " + chk.detail;
        }
        continue;
      }
      if (texts.count(c.text) || names.count(c.name)) {
        last_failure = "duplicate text or name";
        continue;
      }
      accepted = std::move(c);
    }
    if (!accepted) {
      (s.mode == Mode::Exploitation ? shortfall.exploitation_missing : shortfall.exploration_missing)++;
      shortfall.reasons.push_back(std::string(to_token(s.mode)) + " slot " + std::to_string(s.index + 1) + ": " +
                                  last_failure);
      continue;
    }
    texts.insert(accepted->text);
    names.insert(accepted->name);
    pf.candidates.push_back(std::move(*accepted));
  }
  if (shortfall.exploitation_missing + shortfall.exploration_missing > 0) pf.shortfall = shortfall;
  return pf;
}

void to_json(json& j, const ConstraintCheck& c) {
  j = json{{"constraint", c.constraint}, {"passed", c.passed}, {"detail", c.detail}};
  j["offending"] = c.offending ? json(*c.offending) : json();
  j["position"] = c.position ? json(*c.position) : json();
}

void from_json(const json& j, ConstraintCheck& c) {
  c.constraint = j.at("constraint").get<std::string>();
  c.passed = j.at("passed").get<bool>();
  c.detail = j.value("detail", std::string());
  if (j.contains("offending") && !j.at("offending").is_null()) c.offending = j.at("offending").get<std::string>();
  if (j.contains("position") && !j.at("position").is_null()) c.position = j.at("position").get<std::size_t>();
}

void to_json(json& j, const MessageCandidate& c) {
  j = json{{"name", c.name},
           {"text", c.text},
           {"char_count", c.char_count},
           {"strategy_tags", c.strategy_tags},
           {"generation", to_token(c.generation)},
           {"traced_claims", c.traced_claims},
           {"rationale", c.rationale},
           {"predicted_rank_basis", c.predicted_rank_basis},
           {"constraint_report", c.constraint_report.checks},
           {"rejected_by_review", c.rejected_by_review}};
}

void from_json(const json& j, MessageCandidate& c) {
  c.name = j.at("name").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.char_count = j.at("char_count").get<int>();
  c.strategy_tags = j.at("strategy_tags").get<std::set<StrategyTag>>();
  c.generation = parse_mode(j.at("generation").get<std::string>());
  c.traced_claims = j.at("traced_claims").get<std::vector<TopicId>>();
  c.rationale = j.value("rationale", std::string());
  c.predicted_rank_basis = j.value("predicted_rank_basis", 0.0);
  c.constraint_report.checks = j.at("constraint_report").get<std::vector<ConstraintCheck>>();
  c.rejected_by_review = j.value("rejected_by_review", false);
}

Artifact resolve_wisdom_topic(const WisdomTopic& topic, const std::vector<KnowledgeClaim>& claims,
                              const dataset::MessageCatalog& catalog, llm::Adapter* adapter,
                              const Digest& dataset_fingerprint, Timestamp now) {
  std::vector<std::string> exchanges;
  auto pf = generate_portfolio(claims, topic, catalog, adapter, &exchanges);
  Artifact a;
  a.topic_id = canonical_hash(topic);
  json shortfall;
  if (pf.shortfall) {
    shortfall = json{{"exploitation_missing", pf.shortfall->exploitation_missing},
                     {"exploration_missing", pf.shortfall->exploration_missing},
                     {"reasons", pf.shortfall->reasons}};
  }
  std::vector<TopicId> pool;
  for (const auto& c : claims) pool.push_back(c.id);
  std::sort(pool.begin(), pool.end());
  a.payload = json{{"layer", "wisdom"},
                   {"objective", topic.objective},
                   {"register", to_token(pf.register_)},
                   {"quotas", {{"exploitation", pf.exploitation_quota}, {"exploration", pf.exploration_quota}}},
                   {"candidates", pf.candidates},
                   {"shortfall", shortfall},
                   {"claim_pool", pool},
                   {"predicted_rank_basis_note",
                    "sum of traced support scores; an ordering aid for display, not a performance prediction"}};
  std::ostringstream report;
  int exploit = 0, explore = 0;
  for (const auto& c : pf.candidates) (c.generation == Mode::Exploitation ? exploit : explore)++;
  report << "Portfolio for: " << topic.objective << "\n" << pf.candidates.size() << " candidate(s): " << exploit
         << " exploitation (quota " << pf.exploitation_quota << "), " << explore << " exploration (quota "
         << pf.exploration_quota << "); register " << to_token(pf.register_) << ".";
  if (pf.shortfall) {
    report << "\nConstraintShortfall: " << pf.shortfall->exploitation_missing << " exploitation and "
           << pf.shortfall->exploration_missing << " exploration slot(s) dropped after " << kRetryBudget
           << " retries.";
    for (const auto& r : pf.shortfall->reasons) report << "\n  " << r;
  }
  for (const auto& c : pf.candidates) report << "\n" << c.name << " (" << c.char_count << "): " << c.text;
  a.report = report.str();
  a.provenance.input_artifact_ids = pool;
  a.provenance.dataset_fingerprint = dataset_fingerprint;
  a.provenance.agent_version = std::string(kAgentVersion);
  a.provenance.llm_exchange_ids = exchanges;
  a.created_at = now;
  return a;
}

std::vector<MessageCandidate> candidates_of(const Artifact& a) {
  return a.payload.at("candidates").get<std::vector<MessageCandidate>>();
}

std::string portfolio_markdown(const std::vector<MessageCandidate>& candidates) {
  auto cell = [](std::string s) {
    std::string out;
    for (char ch : s) {
      if (ch == '|') out += "\\|";
      else if (ch == '\n') out += ' ';
      else out += ch;
    }
    return out;
  };
  std::ostringstream os;
  os << "| # | Name | Message | Chars | Generation | Status | Traced claims | Rationale |\n";
  os << "|---|------|---------|-------|------------|--------|---------------|-----------|\n";
  int i = 0;
  for (const auto& c : candidates) {
    std::string traced;
    for (const auto& t : c.traced_claims) traced += (traced.empty() ? "" : ", ") + t.hash.hex().substr(0, 12);
    os << "| " << ++i << " | " << cell(c.name) << " | \"" << cell(c.text) << "\" | " << c.char_count << " | "
       << to_token(c.generation) << " | " << (c.rejected_by_review ? "rejected" : "active") << " | " << traced
       << " | " << cell(c.rationale) << " |\n";
  }
  return os.str();
}

}  // namespace dikw::wisdom
