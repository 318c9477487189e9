#include "dikw/sim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "dikw/common/clock.hpp"
#include "dikw/common/error.hpp"
#include "dikw/dataset/ingest.hpp"

namespace dikw::sim {

using nlohmann::json;

namespace {

enum Stream : std::uint32_t {
  kVariant,
  kAgeNull,
  kAgeBand,
  kAgeValue,
  kGender,
  kState,
  kDrug,
  kClick,
  kAuth,
  kRedeem,
  kOptOut,
  kSentAt,
  kStreams,
};

struct Categorical {
  std::vector<std::string> labels;
  std::vector<double> cumulative;  // normalized, last == 1

  explicit Categorical(const std::map<std::string, double>& weights) {
    double total = 0.0;
    for (const auto& [label, w] : weights) {
      if (!(w >= 0.0)) throw Error(ErrorCode::MalformedInput, "negative weight for '" + label + "'");
      total += w;
    }
    if (weights.empty()) return;
    if (total <= 0.0) throw Error(ErrorCode::MalformedInput, "weights sum to zero");
    double acc = 0.0;
    for (const auto& [label, w] : weights) {
      acc += w / total;
      labels.push_back(label);
      cumulative.push_back(acc);
    }
    cumulative.back() = 1.0;
  }

  bool empty() const { return labels.empty(); }

  int pick(double u) const {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), labels.size() - 1));
  }
};

std::map<std::string, double> weights_from(const json& j, const char* key) {
  std::map<std::string, double> out;
  if (!j.contains(key)) return out;
  for (const auto& [k, v] : j.at(key).items()) out[k] = v.get<double>();
  return out;
}

std::vector<double> band_probabilities(const DemographicsMix& mix) {
  double total = 0.0;
  for (const auto& b : mix.age_bands) total += b.weight;
  std::vector<double> p;
  for (const auto& b : mix.age_bands) p.push_back(total > 0 ? b.weight / total : 0.0);
  return p;
}

struct Row {
  std::int32_t variant = 0;
  std::int32_t age = -1;
  std::int32_t gender = -1, state = -1, drug = -1;
  std::uint8_t clicked = 0, auth = 0, redeemed = 0, opted_out = 0;
  std::int64_t sent_at = 0;
};

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::uint64_t seed, std::uint64_t row, std::uint32_t stream) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(row * kStreams + stream));
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GroundTruthModel GroundTruthModel::from_json(const json& j) {
  GroundTruthModel m;
  m.seed = j.value("seed", std::uint64_t{0});
  m.default_base_logit = j.value("default_base_logit", 0.0);
  m.base_logit = weights_from(j, "base_logit");
  if (j.contains("strategy_effects")) {
    for (const auto& [k, v] : j.at("strategy_effects").items()) m.strategy_effects[parse_strategy_tag(k)] = v.get<double>();
  }
  m.age_effect = weights_from(j, "age_effect");
  if (j.contains("funnel")) {
    const auto& f = j.at("funnel");
    m.auth_given_click = f.value("auth_given_click", m.auth_given_click);
    m.redeem_given_auth = f.value("redeem_given_auth", m.redeem_given_auth);
  }
  m.opt_out = j.value("opt_out", m.opt_out);
  if (j.contains("variants")) m.variants = j.at("variants").get<std::vector<std::string>>();
  m.start = j.value("start", m.start);
  m.span_days = j.value("span_days", m.span_days);
  for (double p : {m.auth_given_click, m.redeem_given_auth, m.opt_out}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::MalformedInput, "funnel probabilities must lie in [0,1]");
  }
  if (m.span_days < 1) throw Error(ErrorCode::MalformedInput, "span_days must be >= 1");
  parse_rfc3339(m.start);
  return m;
}

GroundTruthModel GroundTruthModel::load(const std::filesystem::path& path) {
  return from_json(json::parse(dataset::read_text_file(path)));
}

json GroundTruthModel::to_json() const {
  json effects = json::object();
  for (const auto& [t, v] : strategy_effects) effects[std::string(to_token(t))] = v;
  return json{{"seed", seed},
              {"default_base_logit", default_base_logit},
              {"base_logit", base_logit},
              {"strategy_effects", effects},
              {"age_effect", age_effect},
              {"funnel", {{"auth_given_click", auth_given_click}, {"redeem_given_auth", redeem_given_auth}}},
              {"opt_out", opt_out},
              {"variants", variants},
              {"start", start},
              {"span_days", span_days}};
}

DemographicsMix DemographicsMix::defaults() {
  DemographicsMix m;
  m.age_bands = {{"18-44", 18, 44, 0.40}, {"45-64", 45, 64, 0.35}, {"65+", 65, 90, 0.25}};
  m.gender = {{"F", 0.55}, {"M", 0.45}};
  m.state = {{"CA", 0.30}, {"FL", 0.20}, {"NY", 0.25}, {"TX", 0.25}};
  m.drug_category = {{"cardiovascular", 0.30}, {"diabetes", 0.25}, {"mental_health", 0.20}, {"respiratory", 0.25}};
  return m;
}

DemographicsMix DemographicsMix::from_json(const json& j) {
  DemographicsMix m;
  for (const auto& b : j.value("age_bands", json::array())) {
    AgeBandWeight w{b.at("label").get<std::string>(), b.at("lo").get<int>(), b.at("hi").get<int>(),
                    b.value("weight", 1.0)};
    if (w.hi < w.lo || w.weight < 0) throw Error(ErrorCode::MalformedInput, "bad age band '" + w.label + "'");
    m.age_bands.push_back(w);
  }
  m.age_null_fraction = j.value("age_null_fraction", 0.0);
  if (!(m.age_null_fraction >= 0.0 && m.age_null_fraction <= 1.0)) {
    throw Error(ErrorCode::MalformedInput, "age_null_fraction must lie in [0,1]");
  }
  m.gender = weights_from(j, "gender");
  m.state = weights_from(j, "state");
  m.drug_category = weights_from(j, "drug_category");
  return m;
}

DemographicsMix DemographicsMix::load(const std::filesystem::path& path) {
  return from_json(json::parse(dataset::read_text_file(path)));
}

json DemographicsMix::to_json() const {
  json bands = json::array();
  for (const auto& b : age_bands) bands.push_back({{"label", b.label}, {"lo", b.lo}, {"hi", b.hi}, {"weight", b.weight}});
  return json{{"age_bands", bands},
              {"age_null_fraction", age_null_fraction},
              {"gender", gender},
              {"state", state},
              {"drug_category", drug_category}};
}

std::vector<std::string> assigned_variants(const GroundTruthModel& model, const dataset::MessageCatalog& catalog) {
  std::vector<std::string> out = model.variants;
  if (out.empty()) {
    for (const auto& e : catalog.entries()) out.push_back(e.name);
  }
  for (const auto& v : out) {
    if (!catalog.find(v)) throw Error(ErrorCode::MalformedInput, "model variant '" + v + "' is not in the catalog");
  }
  if (out.empty()) throw Error(ErrorCode::MalformedInput, "no variants to assign");
  return out;
}

double variant_logit(const GroundTruthModel& model, const dataset::MessageCatalog& catalog,
                     const std::string& variant) {
  auto it = model.base_logit.find(variant);
  double logit = it == model.base_logit.end() ? model.default_base_logit : it->second;
  if (const auto* e = catalog.find(variant)) {
    for (auto t : e->strategy_tags) {
      auto eff = model.strategy_effects.find(t);
      if (eff != model.strategy_effects.end()) logit += eff->second;
    }
  }
  return logit;
}

namespace {

double age_delta(const GroundTruthModel& model, const std::string& band) {
  auto it = model.age_effect.find(band);
  return it == model.age_effect.end() ? 0.0 : it->second;
}

}  // namespace

dataset::EncounterTable generate(const GroundTruthModel& model, const dataset::MessageCatalog& catalog,
                                 std::size_t n, const DemographicsMix& mix, kernels::Exec exec) {
  using dataset::Column;
  using dataset::ColumnType;
  if (n < 1) throw Error(ErrorCode::DomainError, "n must be >= 1");
  const auto variants = assigned_variants(model, catalog);
  std::vector<double> logits;
  for (const auto& v : variants) logits.push_back(variant_logit(model, catalog, v));
  const auto band_p = band_probabilities(mix);
  std::map<std::string, double> band_weights;
  for (std::size_t b = 0; b < mix.age_bands.size(); ++b) band_weights[std::to_string(100000 + b)] = band_p[b];
  const Categorical bands(band_weights);  // keys sort in band order
  std::vector<double> band_delta;
  for (const auto& b : mix.age_bands) band_delta.push_back(age_delta(model, b.label));
  const Categorical gender(mix.gender), state(mix.state), drug(mix.drug_category);
  const std::int64_t start = parse_rfc3339(model.start).time_since_epoch().count();
  const std::int64_t span = static_cast<std::int64_t>(model.span_days) * 86400;
  const std::uint64_t seed = model.seed;
  const auto v_count = static_cast<double>(variants.size());

  std::vector<Row> rows(n);
  const auto total = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::Parallel)
  for (std::int64_t i = 0; i < total; ++i) {
    const auto r = static_cast<std::uint64_t>(i);
    Row row;
    row.variant = static_cast<std::int32_t>(std::min(v_count - 1, std::floor(uniform(seed, r, kVariant) * v_count)));
    double logit = logits[row.variant];
    const bool age_null = bands.empty() || uniform(seed, r, kAgeNull) < mix.age_null_fraction;
    if (!age_null) {
      const int b = bands.pick(uniform(seed, r, kAgeBand));
      const auto& band = mix.age_bands[b];
      const double width = band.hi - band.lo + 1;
      row.age = band.lo + static_cast<std::int32_t>(std::min(width - 1, std::floor(uniform(seed, r, kAgeValue) * width)));
      logit += band_delta[b];
    }
    if (!gender.empty()) row.gender = gender.pick(uniform(seed, r, kGender));
    if (!state.empty()) row.state = state.pick(uniform(seed, r, kState));
    if (!drug.empty()) row.drug = drug.pick(uniform(seed, r, kDrug));
    row.clicked = uniform(seed, r, kClick) < logistic(logit);
    row.auth = row.clicked && uniform(seed, r, kAuth) < model.auth_given_click;
    row.redeemed = row.auth && uniform(seed, r, kRedeem) < model.redeem_given_auth;
    row.opted_out = uniform(seed, r, kOptOut) < model.opt_out;
    row.sent_at = start + static_cast<std::int64_t>(std::floor(uniform(seed, r, kSentAt) * static_cast<double>(span)));
    rows[i] = row;
  }

  std::vector<Column> cols;
  for (const auto& spec : dataset::required_columns()) cols.emplace_back(spec);
  for (auto& c : cols) c.reserve(n);
  auto push_label = [](Column& c, const Categorical& cat, std::int32_t idx) {
    if (idx < 0) c.push_null();
    else c.push_text(cat.labels[idx]);
  };
  char id[32];
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i];
    std::snprintf(id, sizeof id, "P%08zu", i + 1);
    cols[0].push_text(id);
    cols[1].push_text(variants[row.variant]);
    cols[2].push_bool(row.clicked);
    cols[3].push_bool(row.auth);
    cols[4].push_bool(row.opted_out);
    cols[5].push_bool(row.redeemed);
    if (row.age < 0) cols[6].push_null();
    else cols[6].push_int(row.age);
    push_label(cols[7], gender, row.gender);
    push_label(cols[8], state, row.state);
    push_label(cols[9], drug, row.drug);
    cols[10].push_date(row.sent_at);
  }
  return dataset::EncounterTable(std::move(cols));
}

const VariantExpectation& OracleReport::at(const std::string& variant) const {
  for (const auto& v : variants) {
    if (v.variant == variant) return v;
  }
  throw Error(ErrorCode::NotFound, "variant '" + variant + "' not in oracle report");
}

json OracleReport::to_json() const {
  json vs = json::array();
  for (const auto& v : variants) {
    vs.push_back({{"variant", v.variant},
                  {"click", v.click},
                  {"authenticated", v.authenticated},
                  {"redeemed", v.redeemed}});
  }
  json dirs = json::array();
  for (const auto& [pair, d] : directions) dirs.push_back({{"a", pair.first}, {"b", pair.second}, {"direction", d}});
  return json{{"variants", vs}, {"directions", dirs}};
}

OracleReport oracle(const GroundTruthModel& model, const dataset::MessageCatalog& catalog, const DemographicsMix& mix) {
  OracleReport rep;
  const auto variants = assigned_variants(model, catalog);
  const auto band_p = band_probabilities(mix);
  const double null_w = mix.age_bands.empty() ? 1.0 : mix.age_null_fraction;
  for (const auto& v : variants) {
    const double base = variant_logit(model, catalog, v);
    double click = null_w * logistic(base);
    for (std::size_t b = 0; b < mix.age_bands.size(); ++b) {
      click += (1.0 - null_w) * band_p[b] * logistic(base + age_delta(model, mix.age_bands[b].label));
    }
    const double auth = click * model.auth_given_click;
    rep.variants.push_back({v, click, auth, auth * model.redeem_given_auth});
  }
  for (std::size_t a = 0; a < rep.variants.size(); ++a) {
    for (std::size_t b = a + 1; b < rep.variants.size(); ++b) {
      const double d = rep.variants[a].click - rep.variants[b].click;
      rep.directions[{rep.variants[a].variant, rep.variants[b].variant}] = (d > 0) - (d < 0);
    }
  }
  return rep;
}

double expected_click_in_band(const GroundTruthModel& model, const dataset::MessageCatalog& catalog,
                              const std::string& variant, const std::string& band) {
  return logistic(variant_logit(model, catalog, variant) + age_delta(model, band));
}

}  // namespace dikw::sim
