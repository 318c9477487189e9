#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/dataset/catalog.hpp"
#include "dikw/dataset/ingest.hpp"
#include "dikw/dataset/table.hpp"

namespace dikw::testing {

inline std::filesystem::path source_root() { return DIKW_SOURCE_ROOT; }
inline std::filesystem::path fixture(const std::string& name) { return source_root() / "data" / "fixtures" / name; }
inline std::filesystem::path catalog_path(const std::string& stage) {
  return source_root() / "data" / "catalog" / (stage + ".json");
}

inline const dataset::MessageCatalog& stage1() {
  static const auto c = dataset::load_catalog(catalog_path("stage1"));
  return c;
}
inline const dataset::MessageCatalog& stage2() {
  static const auto c = dataset::load_catalog(catalog_path("stage2"));
  return c;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  return nlohmann::json::parse(dataset::read_text_file(p));
}

inline const nlohmann::json& oracle_values() {
  static const auto j = read_json(source_root() / "tests" / "golden" / "oracle_values.json");
  return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> seq{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dikw-test-" + std::to_string(rd()) + "-" + std::to_string(seq++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// One encounter row; empty optionals become empty CSV cells.
struct Row {
  std::string patient_id;
  std::string variant;
  bool clicked = false;
  bool authenticated = false;
  bool opted_out = false;
  bool redeemed = false;
  std::optional<int> age;
  std::optional<std::string> gender;
  std::optional<std::string> state;
  std::optional<std::string> drug_category;
  std::optional<std::string> sent_at;
  std::optional<double> score;  // optional extra float column
};

inline std::string rows_to_csv(const std::vector<Row>& rows, bool with_score = false) {
  std::ostringstream os;
  os << "patient_id,variant,clicked,authenticated,opted_out,redeemed,age,gender,state,drug_category,sent_at";
  if (with_score) os << ",score";
  os << "\n";
  auto b = [](bool v) { return v ? "true" : "false"; };
  for (const auto& r : rows) {
    os << r.patient_id << ',' << r.variant << ',' << b(r.clicked) << ',' << b(r.authenticated) << ','
       << b(r.opted_out) << ',' << b(r.redeemed) << ',' << (r.age ? std::to_string(*r.age) : "") << ','
       << r.gender.value_or("") << ',' << r.state.value_or("") << ',' << r.drug_category.value_or("") << ','
       << r.sent_at.value_or("");
    if (with_score) {
      os << ',';
      if (r.score) {
        std::ostringstream v;
        v.precision(17);
        v << *r.score;
        os << v.str();
      }
    }
    os << "\n";
  }
  return os.str();
}

inline dataset::EncounterTable make_table(const std::vector<Row>& rows, bool with_score = false) {
  dataset::SchemaDescriptor d;
  if (with_score) d.extra_columns.emplace("score", dataset::ColumnSpec{"score", dataset::ColumnType::Float, true});
  return dataset::ingest(rows_to_csv(rows, with_score), d);
}

// Rows with `clicks` of `n` clicked for one variant, funnel kept monotone.
inline std::vector<Row> variant_rows(const std::string& variant, int n, int clicks, int start_id = 0) {
  std::vector<Row> out;
  for (int i = 0; i < n; ++i) {
    Row r;
    r.patient_id = "P" + std::to_string(start_id + i);
    r.variant = variant;
    r.clicked = i < clicks;
    out.push_back(r);
  }
  return out;
}

template <class F>
double seconds_of(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace dikw::testing
