#pragma once

#include "dikw/common/digest.hpp"
#include "dikw/dataset/catalog.hpp"
#include "dikw/dataset/table.hpp"

namespace dikw::dataset {

// Everything an agent reads about the experiment. Non-owning.
struct DatasetContext {
  const EncounterTable* table = nullptr;
  const MessageCatalog* catalog = nullptr;
  Digest fingerprint;
};

}  // namespace dikw::dataset
