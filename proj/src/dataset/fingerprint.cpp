#include "dikw/dataset/fingerprint.hpp"

namespace dikw::dataset {

DatasetFingerprint fingerprint(const EncounterTable& t) {
  Sha256 h;
  std::string header = "dikw-table-v1\n";
  DatasetFingerprint out;
  for (const auto& c : t.columns()) {
    header += c.name() + ":" + std::string(to_token(c.type())) + "\n";
    out.column_names.push_back(c.name());
  }
  header += "\n";
  h.update(header);
  std::string buf;
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    buf.clear();
    for (const auto& c : t.columns()) {
      if (c.is_null(r)) {
        buf += 'N';
      } else {
        auto v = c.render(r);
        buf += 'V';
        buf += std::to_string(v.size());
        buf += ':';
        buf += v;
      }
    }
    h.update(buf);
  }
  out.digest = h.finish();
  out.row_count = t.row_count();
  return out;
}

void to_json(nlohmann::json& j, const DatasetFingerprint& f) {
  j = nlohmann::json{{"digest", f.digest.hex()}, {"row_count", f.row_count}, {"column_names", f.column_names}};
}

}  // namespace dikw::dataset
