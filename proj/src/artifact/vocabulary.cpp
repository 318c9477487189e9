#include "dikw/artifact/vocabulary.hpp"

#include "dikw/common/enum_tokens.hpp"

namespace dikw {

namespace {

constexpr TokenTable<Layer, 4> kLayers{{
    {Layer::Data, "data"},
    {Layer::Information, "information"},
    {Layer::Knowledge, "knowledge"},
    {Layer::Wisdom, "wisdom"},
}};

constexpr TokenTable<StrategyTag, kStrategyTagCount> kTags{{
    {StrategyTag::Authority, "authority"},
    {StrategyTag::Urgency, "urgency"},
    {StrategyTag::SocialProof, "social_proof"},
    {StrategyTag::GainFraming, "gain_framing"},
    {StrategyTag::TaskCompletion, "task_completion"},
    {StrategyTag::Efficiency, "efficiency"},
    {StrategyTag::Personalization, "personalization"},
    {StrategyTag::Reciprocity, "reciprocity"},
    {StrategyTag::Clarity, "clarity"},
    {StrategyTag::Identity, "identity"},
    {StrategyTag::Emotion, "emotion"},
    {StrategyTag::Progress, "progress"},
    {StrategyTag::FutureSelf, "future_self"},
    {StrategyTag::Commitment, "commitment"},
    {StrategyTag::Default, "default"},
}};

constexpr TokenTable<StrategyTag, kStrategyTagCount> kTagDisplay{{
    {StrategyTag::Authority, "Authority"},
    {StrategyTag::Urgency, "Urgency"},
    {StrategyTag::SocialProof, "SocialProof"},
    {StrategyTag::GainFraming, "GainFraming"},
    {StrategyTag::TaskCompletion, "TaskCompletion"},
    {StrategyTag::Efficiency, "Efficiency"},
    {StrategyTag::Personalization, "Personalization"},
    {StrategyTag::Reciprocity, "Reciprocity"},
    {StrategyTag::Clarity, "Clarity"},
    {StrategyTag::Identity, "Identity"},
    {StrategyTag::Emotion, "Emotion"},
    {StrategyTag::Progress, "Progress"},
    {StrategyTag::FutureSelf, "FutureSelf"},
    {StrategyTag::Commitment, "Commitment"},
    {StrategyTag::Default, "Default"},
}};

}  // namespace

std::string_view to_token(Layer layer) { return token_of(kLayers, layer); }
Layer parse_layer(std::string_view text) { return parse_token(kLayers, text, "layer"); }

std::string TopicId::str() const { return std::string(to_token(layer)) + "/" + hash.hex(); }

TopicId TopicId::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw Error(ErrorCode::MalformedInput, "topic id must be '<layer>/<hex>'", {{"value", std::string(text)}});
  }
  return TopicId{parse_layer(text.substr(0, slash)), Digest::from_hex(text.substr(slash + 1))};
}

void to_json(nlohmann::json& j, const TopicId& id) { j = id.str(); }
void from_json(const nlohmann::json& j, TopicId& id) { id = TopicId::parse(j.get<std::string>()); }

std::string_view to_token(StrategyTag tag) { return token_of(kTags, tag); }
StrategyTag parse_strategy_tag(std::string_view text) {
  return parse_token(kTags, text, "strategy tag", ErrorCode::UnknownTag);
}
std::string_view display_name(StrategyTag tag) { return token_of(kTagDisplay, tag); }

void to_json(nlohmann::json& j, StrategyTag tag) { j = std::string(to_token(tag)); }
void from_json(const nlohmann::json& j, StrategyTag& tag) { tag = parse_strategy_tag(j.get<std::string>()); }

}  // namespace dikw
