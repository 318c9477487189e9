#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/artifact.hpp"
#include "dikw/artifact/topics.hpp"
#include "dikw/dataset/catalog.hpp"
#include "dikw/knowledge/knowledge_agent.hpp"
#include "dikw/llm/llm.hpp"

namespace dikw::wisdom {

inline constexpr std::string_view kAgentVersion = "wisdom-agent/1";
inline constexpr int kRetryBudget = 3;

enum class Mode { Exploitation, Exploration };
std::string_view to_token(Mode m);
Mode parse_mode(std::string_view text);

struct ConstraintCheck {
  std::string constraint;  // max_chars | forbidden_tokens | required_prefix | min_claims_traced
  bool passed = true;
  std::string detail;
  std::optional<std::string> offending;
  std::optional<std::size_t> position;  // Unicode-scalar offset
};

struct ConstraintReport {
  std::vector<ConstraintCheck> checks;
  bool passed() const;
};

struct MessageCandidate {
  std::string name;
  std::string text;
  int char_count = 0;
  std::set<StrategyTag> strategy_tags;
  Mode generation = Mode::Exploitation;
  std::vector<TopicId> traced_claims;
  std::string rationale;
  double predicted_rank_basis = 0.0;
  ConstraintReport constraint_report;
  bool rejected_by_review = false;
};

// Length, forbidden tokens (NFC + case folding, substring) and the prefix
// pattern. Used on its own for catalog messages, which trace no claims.
ConstraintReport check_text_constraints(std::string_view text, const ConstraintSet& constraints);
// Text checks plus the traced-claims minimum.
ConstraintReport check_constraints(const MessageCandidate& c, const ConstraintSet& constraints);

// Tags a claim argues for: the winning side of Outperforms/Increases
// (left) or Decreases (right); a variant stands for its catalog tags.
std::set<StrategyTag> positive_tags(const Claim& claim, const dataset::MessageCatalog& catalog);

// Exploitation: High claims. Exploration: Medium/Low claims, plus High
// claims whose positive tag set is absent from the catalog. Both ordered by
// support_score descending, then topic hash ascending.
std::vector<knowledge::KnowledgeClaim> select_claims(const std::vector<knowledge::KnowledgeClaim>& claims, Mode mode,
                                                     const dataset::MessageCatalog& catalog);

// Register for a target segment via the linguistic map (age_band equality in
// restrict_to); ActionOriented when universal or unmapped.
Register register_for(const std::optional<ContextSpec>& segment, const DesignRuleConfig& rules);

// [attribution][framing][ - call to action][modifier]. `variant` picks among
// the phrasings. UnknownTag for tags the grammar cannot realize; empty tags
// fall back to Clarity.
std::string template_fallback(const std::set<StrategyTag>& tags, const DesignRuleConfig& rules, Register reg,
                              const std::string& provider_name, int variant = 0);

// Adds the remaining tags of any combination rule the set touches.
std::set<StrategyTag> apply_combination_rules(std::set<StrategyTag> tags, const DesignRuleConfig& rules);

struct Shortfall {
  int exploitation_missing = 0;
  int exploration_missing = 0;
  std::vector<std::string> reasons;
};

struct Portfolio {
  std::vector<MessageCandidate> candidates;
  int exploitation_quota = 0;
  int exploration_quota = 0;
  std::optional<Shortfall> shortfall;
  Register register_ = Register::ActionOriented;
};

// `adapter` null means template text only. InsufficientClaims when a mode
// with a nonzero quota has no eligible claim.
Portfolio generate_portfolio(const std::vector<knowledge::KnowledgeClaim>& claims, const WisdomTopic& topic,
                             const dataset::MessageCatalog& catalog, llm::Adapter* adapter,
                             std::vector<std::string>* exchange_ids = nullptr);

int exploitation_quota(const WisdomTopic& topic);

void to_json(nlohmann::json& j, const ConstraintCheck& c);
void from_json(const nlohmann::json& j, ConstraintCheck& c);
void to_json(nlohmann::json& j, const MessageCandidate& c);
void from_json(const nlohmann::json& j, MessageCandidate& c);

Artifact resolve_wisdom_topic(const WisdomTopic& topic, const std::vector<knowledge::KnowledgeClaim>& claims,
                              const dataset::MessageCatalog& catalog, llm::Adapter* adapter,
                              const Digest& dataset_fingerprint, Timestamp now);

std::vector<MessageCandidate> candidates_of(const Artifact& a);

// Markdown table: name, message, chars, generation, status, traced claims,
// rationale.
std::string portfolio_markdown(const std::vector<MessageCandidate>& candidates);

}  // namespace dikw::wisdom
