#include "dikw/data/data_agent.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "dikw/common/error.hpp"

namespace dikw::data {

using dataset::EncounterTable;
using dataset::MessageCatalog;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Outcome {
  json findings = json::object();
  json violations = json::array();
  std::vector<std::string> lines;
};

Outcome schema_verification(const EncounterTable& t, const MessageCatalog* catalog) {
  Outcome o;
  json cols = json::array();
  for (const auto& c : t.schema()) {
    cols.push_back({{"name", c.name}, {"type", dataset::to_token(c.type)}, {"nullable", c.nullable}});
    o.lines.push_back("column " + c.name + ": " + std::string(dataset::to_token(c.type)) +
                      (c.nullable ? ", nullable" : ""));
  }
  o.findings["columns"] = cols;
  o.findings["row_count"] = t.row_count();
  std::vector<std::string> unknown;
  if (catalog) unknown = dataset::unknown_variants(t, *catalog);
  o.findings["unknown_variants"] = unknown;
  for (const auto& v : unknown) {
    o.violations.push_back({{"rule", "variant_in_catalog"}, {"variant", v}});
    o.lines.push_back("variant '" + v + "' is not in the message catalog");
  }
  o.lines.push_back("all required columns present with expected types");
  return o;
}

Outcome missing_value_map(const EncounterTable& t, const DataTopic& topic) {
  Outcome o;
  std::vector<std::string> only;
  if (topic.params.contains("columns")) only = topic.params.at("columns").get<std::vector<std::string>>();
  json per = json::object();
  for (const auto& m : check_missingness(t, only)) {
    per[m.column] = {{"null_count", m.null_count},
                     {"present_count", m.present_count},
                     {"null_fraction", m.null_fraction},
                     {"null_rows", m.null_rows}};
    o.lines.push_back(m.column + ": " + std::to_string(m.null_count) + " null of " + std::to_string(t.row_count()) +
                      " (" + fmt(m.null_fraction) + ")");
  }
  o.findings["columns"] = per;
  o.findings["row_count"] = t.row_count();
  return o;
}

Outcome experiment_dimensioning(const EncounterTable& t) {
  Outcome o;
  const auto& variant = t.column("variant");
  std::map<std::string, std::int64_t> counts;
  for (const auto& level : variant.levels()) counts[level] = 0;
  for (auto c : variant.codes()) {
    if (c >= 0) ++counts[variant.levels()[c]];
  }
  o.findings["rows"] = t.row_count();
  o.findings["variants"] = counts.size();
  o.findings["columns"] = t.columns().size();
  o.findings["per_variant_counts"] = counts;
  o.lines.push_back("rows: " + std::to_string(t.row_count()));
  o.lines.push_back("variants: " + std::to_string(counts.size()));
  for (const auto& [v, n] : counts) o.lines.push_back("variant " + v + ": " + std::to_string(n) + " rows");
  return o;
}

Outcome id_uniqueness(const EncounterTable& t, const DataTopic& topic) {
  Outcome o;
  const std::string id_col = topic.params.value("id_column", std::string("patient_id"));
  const auto& col = t.column(id_col);
  std::unordered_map<std::string, std::vector<std::int64_t>> seen;
  std::vector<std::string> order;
  std::int64_t nulls = 0;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    if (col.is_null(i)) {
      ++nulls;
      continue;
    }
    auto key = col.render(i);
    auto& rows = seen[key];
    if (rows.size() == 1) order.push_back(key);
    rows.push_back(static_cast<std::int64_t>(i));
  }
  std::sort(order.begin(), order.end());
  json dups = json::array();
  for (const auto& id : order) {
    dups.push_back({{"id", id}, {"rows", seen[id]}});
    o.violations.push_back({{"rule", "duplicate_id"}, {"id", id}, {"rows", seen[id]}});
    o.lines.push_back("duplicate " + id_col + " '" + id + "' at rows " + json(seen[id]).dump());
  }
  o.findings["id_column"] = id_col;
  o.findings["distinct_ids"] = seen.size();
  o.findings["null_ids"] = nulls;
  o.findings["duplicates"] = dups;
  if (order.empty()) o.lines.push_back(id_col + ": " + std::to_string(seen.size()) + " distinct ids, no duplicates");
  if (nulls > 0) {
    o.violations.push_back({{"rule", "null_id"}, {"count", nulls}});
    o.lines.push_back(id_col + ": " + std::to_string(nulls) + " null ids");
  }
  return o;
}

Outcome format_compliance(const MessageCatalog* catalog, const DataTopic& topic) {
  if (!catalog) throw Error(ErrorCode::MalformedInput, "format compliance needs a message catalog");
  Outcome o;
  const int limit = topic.params.value("limit", kDefaultSmsLimit);
  json entries = json::array();
  json mismatches = json::array();
  int max_count = 0;
  std::string max_name;
  for (const auto& e : catalog->entries()) {
    const bool ok = e.char_count <= limit;
    entries.push_back({{"name", e.name},
                       {"char_count", e.char_count},
                       {"paper_char_count", e.paper_char_count ? json(*e.paper_char_count) : json()},
                       {"within_limit", ok}});
    if (e.char_count > max_count) {
      max_count = e.char_count;
      max_name = e.name;
    }
    if (!ok) {
      o.violations.push_back({{"rule", "char_limit"}, {"name", e.name}, {"char_count", e.char_count}, {"limit", limit}});
      o.lines.push_back(e.name + ": " + std::to_string(e.char_count) + " chars exceeds limit " + std::to_string(limit));
    }
    if (e.paper_char_count && *e.paper_char_count != e.char_count) {
      mismatches.push_back({{"name", e.name}, {"char_count", e.char_count}, {"paper_char_count", *e.paper_char_count}});
      o.lines.push_back(e.name + ": recomputed " + std::to_string(e.char_count) + " chars, printed " +
                        std::to_string(*e.paper_char_count));
    }
  }
  o.findings["limit"] = limit;
  o.findings["entries"] = entries;
  o.findings["max_char_count"] = max_count;
  o.findings["max_entry"] = max_name;
  o.findings["count_mismatches"] = mismatches;
  o.lines.insert(o.lines.begin(), std::to_string(catalog->size()) + " catalog entries, longest " + max_name + " at " +
                                      std::to_string(max_count) + " chars, limit " + std::to_string(limit));
  return o;
}

Outcome provenance(const dataset::DatasetContext& data, const DataTopic& topic) {
  Outcome o;
  const auto desc = topic.params.value("source_description", std::string("unspecified source"));
  std::vector<std::string> names;
  for (const auto& c : data.table->columns()) names.push_back(c.name());
  o.findings["source_description"] = desc;
  o.findings["dataset_fingerprint"] = data.fingerprint.hex();
  o.findings["digest_algorithm"] = Digest::kAlgorithm;
  o.findings["row_count"] = data.table->row_count();
  o.findings["column_names"] = names;
  o.findings["catalog_entries"] = data.catalog ? data.catalog->size() : 0;
  o.lines.push_back("source: " + desc);
  o.lines.push_back("fingerprint " + std::string(Digest::kAlgorithm) + ":" + data.fingerprint.hex());
  o.lines.push_back("rows: " + std::to_string(data.table->row_count()) + ", columns: " + std::to_string(names.size()));
  return o;
}

Outcome experiment_config(const EncounterTable& t, const DataTopic& topic) {
  Outcome o;
  const double tol = topic.params.value("balance_tolerance", kDefaultBalanceTolerance);
  auto b = check_randomization_balance(t, tol);
  o.findings["shares"] = b.shares;
  o.findings["counts"] = b.counts;
  o.findings["expected_share"] = b.expected_share;
  o.findings["tolerance"] = b.tolerance;
  o.findings["out_of_tolerance"] = b.out_of_tolerance;
  o.lines.push_back("expected share " + fmt(b.expected_share) + " per variant, tolerance " + fmt(tol));
  for (const auto& [v, s] : b.shares) o.lines.push_back("variant " + v + ": share " + fmt(s));
  for (const auto& v : b.out_of_tolerance) {
    o.violations.push_back({{"rule", "balance"}, {"variant", v}, {"share", b.shares[v]}});
    o.lines.push_back("variant " + v + " share outside tolerance");
  }
  return o;
}

}  // namespace

std::vector<ColumnMissingness> check_missingness(const EncounterTable& t, const std::vector<std::string>& only) {
  std::vector<ColumnMissingness> out;
  auto scan = [&](const dataset::Column& c) {
    ColumnMissingness m;
    m.column = c.name();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.is_null(i)) {
        ++m.null_count;
        m.null_rows.push_back(static_cast<std::int64_t>(i));
      } else {
        ++m.present_count;
      }
    }
    m.null_fraction = c.size() ? static_cast<double>(m.null_count) / static_cast<double>(c.size()) : 0.0;
    out.push_back(std::move(m));
  };
  if (only.empty()) {
    for (const auto& c : t.columns()) scan(c);
  } else {
    for (const auto& name : only) scan(t.column(name));
  }
  return out;
}

BalanceReport check_randomization_balance(const EncounterTable& t, double tolerance) {
  const auto& variant = t.column("variant");
  BalanceReport b;
  b.tolerance = tolerance;
  std::int64_t total = 0;
  for (const auto& level : variant.levels()) b.counts[level] = 0;
  for (auto c : variant.codes()) {
    if (c < 0) continue;
    ++b.counts[variant.levels()[c]];
    ++total;
  }
  if (total == 0) throw Error(ErrorCode::EmptyTable, "no rows with a variant assignment");
  b.expected_share = 1.0 / static_cast<double>(b.counts.size());
  for (const auto& [v, n] : b.counts) {
    const double s = static_cast<double>(n) / static_cast<double>(total);
    b.shares[v] = s;
    if (std::abs(s - b.expected_share) > tolerance) b.out_of_tolerance.push_back(v);
  }
  b.passed = b.out_of_tolerance.empty();
  return b;
}

Artifact resolve_data_topic(const dataset::DatasetContext& data, const DataTopic& topic, Timestamp now) {
  validate_topic(topic);
  const auto& t = *data.table;
  Outcome o;
  switch (topic.kind) {
    case DataTopicKind::SchemaVerification: o = schema_verification(t, data.catalog); break;
    case DataTopicKind::MissingValueMap: o = missing_value_map(t, topic); break;
    case DataTopicKind::ExperimentDimensioning: o = experiment_dimensioning(t); break;
    case DataTopicKind::IdUniqueness: o = id_uniqueness(t, topic); break;
    case DataTopicKind::FormatCompliance: o = format_compliance(data.catalog, topic); break;
    case DataTopicKind::Provenance: o = provenance(data, topic); break;
    case DataTopicKind::ExperimentConfig: o = experiment_config(t, topic); break;
    default: throw Error(ErrorCode::UnsupportedKind, "unsupported data topic kind");
  }
  const bool passed = o.violations.empty();
  Artifact a;
  a.topic_id = canonical_hash(topic);
  a.payload = json{{"layer", "data"},
                   {"kind", to_token(topic.kind)},
                   {"findings", o.findings},
                   {"violations", o.violations},
                   {"passed", passed}};
  std::ostringstream report;
  report << to_token(topic.kind) << ": " << (passed ? "passed" : "failed") << " ("
         << o.violations.size() << " violation(s))";
  for (const auto& line : o.lines) report << "\n" << line;
  a.report = report.str();
  a.provenance.dataset_fingerprint = data.fingerprint;
  a.provenance.agent_version = std::string(kAgentVersion);
  a.created_at = now;
  return a;
}

}  // namespace dikw::data
