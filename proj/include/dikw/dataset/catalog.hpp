#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/vocabulary.hpp"
#include "dikw/dataset/table.hpp"

namespace dikw::dataset {

enum class Generation { Baseline, Exploitation, Exploration, LastRound };

std::string_view to_token(Generation g);
Generation parse_generation(std::string_view text);

struct CatalogEntry {
  std::string name;
  std::string text;
  int char_count = 0;                    // recomputed, Unicode scalars
  std::optional<int> paper_char_count;   // as printed, informational
  std::set<StrategyTag> strategy_tags;
  Generation generation = Generation::Baseline;
  bool rejected_by_review = false;
};

class MessageCatalog {
 public:
  MessageCatalog() = default;
  // Recomputes char_count; throws DuplicateName / EmptyText.
  explicit MessageCatalog(std::vector<CatalogEntry> entries);

  const std::vector<CatalogEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const CatalogEntry* find(std::string_view name) const;

  // Names carrying `tag`, in catalog order.
  std::vector<std::string> variants_with(StrategyTag tag) const;
  // Tag sets already realized by some entry (used to judge novelty).
  std::set<std::set<StrategyTag>> tag_combinations() const;

  // Entries whose printed count differs from the recomputed one.
  std::vector<const CatalogEntry*> count_mismatches() const;

 private:
  std::vector<CatalogEntry> entries_;
};

void to_json(nlohmann::json& j, const CatalogEntry& e);
void from_json(const nlohmann::json& j, CatalogEntry& e);

// Accepts either a bare JSON list of entries or {"entries": [...]}.
MessageCatalog catalog_from_json(const nlohmann::json& j);
nlohmann::json catalog_to_json(const MessageCatalog& c);
MessageCatalog load_catalog(const std::filesystem::path& path);

// Variant labels present in the table but absent from the catalog.
std::vector<std::string> unknown_variants(const EncounterTable& t, const MessageCatalog& c);
// Throws MalformedInput listing the unknown variants, if any.
void require_catalog_variants(const EncounterTable& t, const MessageCatalog& c);

}  // namespace dikw::dataset
