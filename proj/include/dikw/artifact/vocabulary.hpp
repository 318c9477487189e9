#pragma once

#include <compare>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dikw/common/digest.hpp"

namespace dikw {

enum class Layer { Data = 0, Information = 1, Knowledge = 2, Wisdom = 3 };

std::string_view to_token(Layer layer);
Layer parse_layer(std::string_view text);
constexpr int rank(Layer layer) { return static_cast<int>(layer); }

// Identity of a topic: its layer plus the digest of the canonical body.
// Rendered as "<layer>/<hex>", which is also its relative artifact path.
struct TopicId {
  Layer layer = Layer::Data;
  Digest hash;

  std::string str() const;
  static TopicId parse(std::string_view text);

  auto operator<=>(const TopicId&) const = default;
};

void to_json(nlohmann::json& j, const TopicId& id);
void from_json(const nlohmann::json& j, TopicId& id);

enum class StrategyTag {
  Authority,
  Urgency,
  SocialProof,
  GainFraming,
  TaskCompletion,
  Efficiency,
  Personalization,
  Reciprocity,
  Clarity,
  Identity,
  Emotion,
  Progress,
  FutureSelf,
  Commitment,
  Default,
};

inline constexpr std::size_t kStrategyTagCount = 15;

std::string_view to_token(StrategyTag tag);
StrategyTag parse_strategy_tag(std::string_view text);
// CamelCase display form, e.g. "SocialProof".
std::string_view display_name(StrategyTag tag);

void to_json(nlohmann::json& j, StrategyTag tag);
void from_json(const nlohmann::json& j, StrategyTag& tag);

}  // namespace dikw

template <>
struct std::hash<dikw::TopicId> {
  std::size_t operator()(const dikw::TopicId& id) const noexcept {
    std::size_t h = static_cast<std::size_t>(id.layer);
    for (int i = 0; i < 8; ++i) h = (h << 8) ^ id.hash.bytes[i];
    return h;
  }
};
