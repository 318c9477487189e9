#include "dikw/dataset/catalog.hpp"

#include <unordered_set>

#include "dikw/common/enum_tokens.hpp"
#include "dikw/common/text.hpp"
#include "dikw/dataset/ingest.hpp"

namespace dikw::dataset {

namespace {

constexpr TokenTable<Generation, 4> kGenerations{{
    {Generation::Baseline, "baseline"},
    {Generation::Exploitation, "exploitation"},
    {Generation::Exploration, "exploration"},
    {Generation::LastRound, "last_round"},
}};

}  // namespace

std::string_view to_token(Generation g) { return token_of(kGenerations, g); }
Generation parse_generation(std::string_view text) { return parse_token(kGenerations, text, "generation"); }

MessageCatalog::MessageCatalog(std::vector<CatalogEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> names;
  for (auto& e : entries_) {
    if (!names.insert(e.name).second) {
      throw Error(ErrorCode::DuplicateName, "duplicate catalog name '" + e.name + "'", {{"name", e.name}});
    }
    if (e.text.empty()) {
      throw Error(ErrorCode::EmptyText, "catalog entry '" + e.name + "' has empty text", {{"name", e.name}});
    }
    e.char_count = static_cast<int>(text::scalar_count(e.text));
  }
}

const CatalogEntry* MessageCatalog::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<std::string> MessageCatalog::variants_with(StrategyTag tag) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.strategy_tags.count(tag)) out.push_back(e.name);
  }
  return out;
}

std::set<std::set<StrategyTag>> MessageCatalog::tag_combinations() const {
  std::set<std::set<StrategyTag>> out;
  for (const auto& e : entries_) out.insert(e.strategy_tags);
  return out;
}

std::vector<const CatalogEntry*> MessageCatalog::count_mismatches() const {
  std::vector<const CatalogEntry*> out;
  for (const auto& e : entries_) {
    if (e.paper_char_count && *e.paper_char_count != e.char_count) out.push_back(&e);
  }
  return out;
}

void to_json(nlohmann::json& j, const CatalogEntry& e) {
  j = nlohmann::json{{"name", e.name},
                     {"text", e.text},
                     {"char_count", e.char_count},
                     {"strategy_tags", e.strategy_tags},
                     {"generation", to_token(e.generation)},
                     {"rejected_by_review", e.rejected_by_review}};
  j["paper_char_count"] = e.paper_char_count ? nlohmann::json(*e.paper_char_count) : nlohmann::json();
}

void from_json(const nlohmann::json& j, CatalogEntry& e) {
  e.name = j.at("name").get<std::string>();
  e.text = j.at("text").get<std::string>();
  if (j.contains("paper_char_count") && !j.at("paper_char_count").is_null()) {
    e.paper_char_count = j.at("paper_char_count").get<int>();
  }
  e.strategy_tags.clear();
  if (j.contains("strategy_tags")) {
    for (const auto& t : j.at("strategy_tags")) e.strategy_tags.insert(t.get<StrategyTag>());
  }
  e.generation = parse_generation(j.value("generation", std::string("baseline")));
  e.rejected_by_review = j.value("rejected_by_review", false);
}

MessageCatalog catalog_from_json(const nlohmann::json& j) {
  const auto& list = j.is_object() ? j.at("entries") : j;
  if (!list.is_array()) throw Error(ErrorCode::MalformedInput, "catalog must be a list of entries");
  try {
    return MessageCatalog(list.get<std::vector<CatalogEntry>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("malformed catalog: ") + e.what());
  }
}

nlohmann::json catalog_to_json(const MessageCatalog& c) { return nlohmann::json{{"entries", c.entries()}}; }

MessageCatalog load_catalog(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, "cannot parse catalog " + path.string() + ": " + e.what());
  }
  return catalog_from_json(j);
}

std::vector<std::string> unknown_variants(const EncounterTable& t, const MessageCatalog& c) {
  std::vector<std::string> out;
  for (const auto& level : t.column("variant").levels()) {
    if (!c.find(level)) out.push_back(level);
  }
  return out;
}

void require_catalog_variants(const EncounterTable& t, const MessageCatalog& c) {
  auto missing = unknown_variants(t, c);
  if (!missing.empty()) {
    throw Error(ErrorCode::MalformedInput, "variants not in catalog: " + nlohmann::json(missing).dump(),
                {{"variants", missing}});
  }
}

}  // namespace dikw::dataset
