#include "dikw/info/slice.hpp"

#include <algorithm>
#include <sstream>

#include "dikw/common/clock.hpp"
#include "dikw/common/error.hpp"
#include "dikw/dataset/ingest.hpp"

namespace dikw::info {

using dataset::Column;
using dataset::ColumnSpec;
using dataset::ColumnType;
using kernels::Cmp;
using kernels::Mask;

namespace {

[[noreturn]] void bad_predicate(const Predicate& p, const std::string& why) {
  throw Error(ErrorCode::InvalidTopic, "predicate on '" + p.column + "': " + why, {{"column", p.column}});
}

std::vector<nlohmann::json> values_of(const Predicate& p) {
  if (p.op == PredicateOp::In) return std::vector<nlohmann::json>(p.value.begin(), p.value.end());
  return {p.value};
}

double numeric_value(const Column& col, const Predicate& p, const nlohmann::json& v) {
  if (col.type() == ColumnType::Bool) {
    if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      if (auto b = dataset::coerce_bool(v.get<std::string>())) return *b ? 1.0 : 0.0;
    }
    bad_predicate(p, "value is not a boolean");
  }
  if (col.type() == ColumnType::Date && v.is_string()) {
    return static_cast<double>(parse_rfc3339(v.get<std::string>()).time_since_epoch().count());
  }
  if (v.is_number()) return v.get<double>();
  bad_predicate(p, "value is not numeric");
}

Cmp cmp_of(PredicateOp op) {
  switch (op) {
    case PredicateOp::Eq: return Cmp::Eq;
    case PredicateOp::Neq: return Cmp::Neq;
    case PredicateOp::Lt: return Cmp::Lt;
    case PredicateOp::Le: return Cmp::Le;
    case PredicateOp::Gt: return Cmp::Gt;
    case PredicateOp::Ge: return Cmp::Ge;
    default: return Cmp::Eq;
  }
}

std::string render_value(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

bool is_derived_metric(std::string_view name) {
  return name == kAgeBand || name == kCharCount || name == kStrategyTags;
}

Mask Grouping::members(std::size_t g) const {
  if (multi()) return memberships[g];
  Mask m(codes.size(), 0);
  for (std::size_t i = 0; i < codes.size(); ++i) m[i] = codes[i] == static_cast<std::int32_t>(g) ? 1 : 0;
  return m;
}

Evaluator::Evaluator(const dataset::EncounterTable& table, const dataset::MessageCatalog* catalog,
                     std::vector<AgeBin> age_bins, kernels::Exec exec)
    : table_(table), catalog_(catalog), age_bins_(std::move(age_bins)), exec_(exec) {
  if (age_bins_.empty()) age_bins_ = default_age_bins();
}

bool Evaluator::knows(std::string_view name) const {
  if (table_.has_column(name)) return true;
  if (name == kAgeBand) return true;
  return (name == kCharCount || name == kStrategyTags) && catalog_ != nullptr;
}

const Column& Evaluator::column(std::string_view name) {
  if (const auto* c = table_.find(name)) return *c;
  if (auto it = derived_.find(name); it != derived_.end()) return *it->second;
  const auto n = table_.row_count();
  if (name == kAgeBand) {
    const auto& age = table_.column("age");
    auto col = std::make_unique<Column>(ColumnSpec{std::string(kAgeBand), ColumnType::Categorical, true});
    col->reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const AgeBin* hit = nullptr;
      if (!age.is_null(i)) {
        const auto a = age.ints()[i];
        for (const auto& b : age_bins_) {
          if (a >= b.lo && (!b.hi || a <= *b.hi)) {
            hit = &b;
            break;
          }
        }
      }
      if (hit) col->push_text(hit->label);
      else col->push_null();
    }
    col->finalize();
    return *derived_.emplace(std::string(name), std::move(col)).first->second;
  }
  if (name == kCharCount && catalog_) {
    const auto& variant = table_.column("variant");
    std::vector<std::int64_t> by_code;
    std::vector<bool> known;
    for (const auto& level : variant.levels()) {
      const auto* e = catalog_->find(level);
      by_code.push_back(e ? e->char_count : 0);
      known.push_back(e != nullptr);
    }
    auto col = std::make_unique<Column>(ColumnSpec{std::string(kCharCount), ColumnType::Int, true});
    col->reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = variant.codes()[i];
      if (c >= 0 && known[c]) col->push_int(by_code[c]);
      else col->push_null();
    }
    return *derived_.emplace(std::string(name), std::move(col)).first->second;
  }
  throw Error(ErrorCode::MissingColumn, "no column or derived metric '" + std::string(name) + "'",
              {{"column", std::string(name)}});
}

std::vector<std::uint8_t> Evaluator::variant_codes_with_tags(const std::set<StrategyTag>& tags) const {
  const auto& levels = table_.column("variant").levels();
  std::vector<std::uint8_t> allowed(levels.size(), 0);
  for (std::size_t c = 0; c < levels.size(); ++c) {
    const auto* e = catalog_ ? catalog_->find(levels[c]) : nullptr;
    if (!e) continue;
    for (auto t : tags) {
      if (e->strategy_tags.count(t)) allowed[c] = 1;
    }
  }
  return allowed;
}

void Evaluator::apply(const Predicate& p, Mask& m) {
  if (p.column == kStrategyTags) {
    if (!catalog_) bad_predicate(p, "strategy_tags needs a message catalog");
    std::set<StrategyTag> tags;
    for (const auto& v : values_of(p)) {
      if (!v.is_string()) bad_predicate(p, "tag values must be strings");
      tags.insert(parse_strategy_tag(v.get<std::string>()));
    }
    switch (p.op) {
      case PredicateOp::Eq:
      case PredicateOp::In: kernels::mask_codes(table_.column("variant"), variant_codes_with_tags(tags), false, m, exec_); return;
      case PredicateOp::Neq: kernels::mask_codes(table_.column("variant"), variant_codes_with_tags(tags), true, m, exec_); return;
      case PredicateOp::NotNull: kernels::mask_not_null(table_.column("variant"), m, exec_); return;
      default: bad_predicate(p, "ordering comparison on strategy_tags");
    }
  }
  const auto& col = column(p.column);
  if (p.op == PredicateOp::NotNull) {
    kernels::mask_not_null(col, m, exec_);
    return;
  }
  const auto values = values_of(p);
  if (col.is_numeric()) {
    if (p.op != PredicateOp::In) {
      kernels::mask_compare(col, cmp_of(p.op), numeric_value(col, p, p.value), m, exec_);
      return;
    }
    Mask any(m.size(), 0);
    for (const auto& v : values) {
      Mask hit = m;
      kernels::mask_compare(col, Cmp::Eq, numeric_value(col, p, v), hit, exec_);
      for (std::size_t i = 0; i < any.size(); ++i) any[i] |= hit[i];
    }
    m = std::move(any);
    return;
  }
  if (p.op != PredicateOp::Eq && p.op != PredicateOp::Neq && p.op != PredicateOp::In) {
    bad_predicate(p, "ordering comparison on a non-numeric column");
  }
  std::set<std::string> wanted;
  for (const auto& v : values) wanted.insert(render_value(v));
  const bool negate = p.op == PredicateOp::Neq;
  if (col.type() == ColumnType::Categorical) {
    const auto& levels = col.levels();
    std::vector<std::uint8_t> allowed(levels.size(), 0);
    for (std::size_t c = 0; c < levels.size(); ++c) allowed[c] = wanted.count(levels[c]) ? 1 : 0;
    kernels::mask_codes(col, allowed, negate, m, exec_);
  } else {
    kernels::mask_text(col, wanted, negate, m, exec_);
  }
}

Mask Evaluator::evaluate(const SliceSpec& slice) {
  Mask m = kernels::full_mask(table_.row_count());
  for (const auto& p : slice.predicates) apply(p, m);
  return m;
}

Mask Evaluator::population(const SliceSpec& slice, const ContextSpec& context) {
  Mask m = evaluate(slice);
  for (const auto& p : context.restrict_to.predicates) apply(p, m);
  if (context.time_window) {
    const auto& sent = table_.column("sent_at");
    if (context.time_window->from) {
      kernels::mask_compare(sent, Cmp::Ge,
                            static_cast<double>(parse_rfc3339(*context.time_window->from).time_since_epoch().count()),
                            m, exec_);
    }
    if (context.time_window->to) {
      kernels::mask_compare(sent, Cmp::Lt,
                            static_cast<double>(parse_rfc3339(*context.time_window->to).time_since_epoch().count()),
                            m, exec_);
    }
  }
  return m;
}

Grouping Evaluator::grouping(std::string_view name) {
  Grouping g;
  if (name == kStrategyTags) {
    g.overlapping = true;
    if (!catalog_) throw Error(ErrorCode::MissingColumn, "strategy_tags needs a message catalog");
    std::map<std::string, StrategyTag> tags;
    for (const auto& level : table_.column("variant").levels()) {
      if (const auto* e = catalog_->find(level)) {
        for (auto t : e->strategy_tags) tags.emplace(std::string(to_token(t)), t);
      }
    }
    for (const auto& [label, tag] : tags) {
      g.labels.push_back(label);
      Mask m = kernels::full_mask(table_.row_count());
      kernels::mask_codes(table_.column("variant"), variant_codes_with_tags({tag}), false, m, exec_);
      g.memberships.push_back(std::move(m));
    }
    return g;
  }
  const auto& col = column(name);
  const auto n = table_.row_count();
  if (col.type() == ColumnType::Categorical) {
    g.labels = col.levels();
    g.codes = col.codes();
    return g;
  }
  // Bool, Int, Text: group by rendered value.
  std::vector<std::string> rendered(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!col.is_null(i)) rendered[i] = col.render(i);
  }
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < n; ++i) {
    if (!col.is_null(i)) distinct.insert(rendered[i]);
  }
  g.labels.assign(distinct.begin(), distinct.end());
  g.codes.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (col.is_null(i)) continue;
    g.codes[i] = static_cast<std::int32_t>(std::lower_bound(g.labels.begin(), g.labels.end(), rendered[i]) -
                                           g.labels.begin());
  }
  return g;
}

std::string describe(const SliceSpec& slice) {
  if (slice.predicates.empty()) return "all rows";
  std::ostringstream os;
  for (std::size_t i = 0; i < slice.predicates.size(); ++i) {
    const auto& p = slice.predicates[i];
    if (i) os << " and ";
    os << p.column;
    switch (p.op) {
      case PredicateOp::Eq: os << " = " << render_value(p.value); break;
      case PredicateOp::Neq: os << " != " << render_value(p.value); break;
      case PredicateOp::Lt: os << " < " << render_value(p.value); break;
      case PredicateOp::Le: os << " <= " << render_value(p.value); break;
      case PredicateOp::Gt: os << " > " << render_value(p.value); break;
      case PredicateOp::Ge: os << " >= " << render_value(p.value); break;
      case PredicateOp::In: {
        os << " in {";
        for (std::size_t k = 0; k < p.value.size(); ++k) os << (k ? ", " : "") << render_value(p.value[k]);
        os << "}";
        break;
      }
      case PredicateOp::NotNull: os << " is present"; break;
    }
  }
  return os.str();
}

}  // namespace dikw::info
