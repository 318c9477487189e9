#include "dikw/kernels/kernels.hpp"

#include <algorithm>

namespace dikw::kernels {

using dataset::Column;
using dataset::ColumnType;

namespace {

std::size_t chunks_for(std::size_t n) { return (n + kChunk - 1) / kChunk; }

bool compare(double a, Cmp cmp, double b) {
  switch (cmp) {
    case Cmp::Eq: return a == b;
    case Cmp::Neq: return a != b;
    case Cmp::Lt: return a < b;
    case Cmp::Le: return a <= b;
    case Cmp::Gt: return a > b;
    case Cmp::Ge: return a >= b;
  }
  return false;
}

// Applies keep(row) to every set row of m.
template <class Keep>
void refine(Mask& m, Exec exec, Keep keep) {
  const auto n = static_cast<std::int64_t>(m.size());
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) {
      if (m[i] && !keep(i)) m[i] = 0;
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (m[i] && !keep(i)) m[i] = 0;
  }
}

// Per-chunk partial sums, combined in chunk order.
template <class F>
double chunked_sum(std::size_t n, Exec exec, F term) {
  const auto nc = static_cast<std::int64_t>(chunks_for(n));
  std::vector<double> partial(nc, 0.0);
  auto run = [&](std::int64_t c) {
    const std::size_t b = c * kChunk, e = std::min(n, b + kChunk);
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += term(i);
    partial[c] = s;
  };
  if (exec == Exec::Serial) {
    for (std::int64_t c = 0; c < nc; ++c) run(c);
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < nc; ++c) run(c);
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

}  // namespace

Mask full_mask(std::size_t n) { return Mask(n, 1); }

std::size_t count(const Mask& m, Exec exec) {
  const auto n = static_cast<std::int64_t>(m.size());
  std::int64_t total = 0;
  if (exec == Exec::Serial) {
    for (auto v : m) total += v ? 1 : 0;
    return static_cast<std::size_t>(total);
  }
#pragma omp parallel for reduction(+ : total) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) total += m[i] ? 1 : 0;
  return static_cast<std::size_t>(total);
}

void mask_and(Mask& m, const Mask& other, Exec exec) {
  refine(m, exec, [&](std::int64_t i) { return other[i] != 0; });
}

void mask_compare(const Column& col, Cmp cmp, double value, Mask& m, Exec exec) {
  const auto& valid = col.valid();
  if (col.type() == ColumnType::Float) {
    const auto& v = col.reals();
    refine(m, exec, [&](std::int64_t i) { return valid[i] && compare(v[i], cmp, value); });
  } else {
    const auto& v = col.ints();
    refine(m, exec, [&](std::int64_t i) { return valid[i] && compare(static_cast<double>(v[i]), cmp, value); });
  }
}

void mask_codes(const Column& col, const std::vector<std::uint8_t>& allowed, bool negate, Mask& m, Exec exec) {
  const auto& codes = col.codes();
  refine(m, exec, [&](std::int64_t i) {
    const auto c = codes[i];
    if (c < 0) return false;
    const bool hit = static_cast<std::size_t>(c) < allowed.size() && allowed[c];
    return hit != negate;
  });
}

void mask_text(const Column& col, const std::set<std::string>& values, bool negate, Mask& m, Exec exec) {
  const auto& valid = col.valid();
  const auto& texts = col.texts();
  refine(m, exec, [&](std::int64_t i) { return valid[i] && (values.count(texts[i]) > 0) != negate; });
}

void mask_not_null(const Column& col, Mask& m, Exec exec) {
  const auto& valid = col.valid();
  refine(m, exec, [&](std::int64_t i) { return valid[i] != 0; });
}

BinaryTally tally_binary(const Column& y, const Mask& m, Exec exec) {
  const auto& valid = y.valid();
  const bool real = y.type() == ColumnType::Float;
  const auto n = static_cast<std::int64_t>(m.size());
  std::int64_t tn = 0, tk = 0;
  auto hit = [&](std::int64_t i) { return real ? y.reals()[i] != 0.0 : y.ints()[i] != 0; };
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) {
      if (!m[i] || !valid[i]) continue;
      ++tn;
      if (hit(i)) ++tk;
    }
    return {tn, tk};
  }
#pragma omp parallel for reduction(+ : tn, tk) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (!m[i] || !valid[i]) continue;
    ++tn;
    if (hit(i)) ++tk;
  }
  return {tn, tk};
}

std::vector<BinaryTally> tally_by_group(const std::vector<std::int32_t>& codes, int groups, const Column& y,
                                        const Mask& m, Exec exec) {
  const auto& valid = y.valid();
  const bool real = y.type() == ColumnType::Float;
  const auto n = static_cast<std::int64_t>(m.size());
  auto hit = [&](std::int64_t i) { return real ? y.reals()[i] != 0.0 : y.ints()[i] != 0; };
  std::vector<BinaryTally> out(groups);
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) {
      const auto g = codes[i];
      if (!m[i] || !valid[i] || g < 0) continue;
      ++out[g].n;
      if (hit(i)) ++out[g].k;
    }
    return out;
  }
#pragma omp parallel
  {
    std::vector<BinaryTally> local(groups);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const auto g = codes[i];
      if (!m[i] || !valid[i] || g < 0) continue;
      ++local[g].n;
      if (hit(i)) ++local[g].k;
    }
#pragma omp critical(dikw_tally_by_group)
    for (int g = 0; g < groups; ++g) {
      out[g].n += local[g].n;
      out[g].k += local[g].k;
    }
  }
  return out;
}

std::vector<std::int64_t> contingency(const std::vector<std::int32_t>& a, int rows, const std::vector<std::int32_t>& b,
                                      int cols, const Mask& m, Exec exec) {
  const auto n = static_cast<std::int64_t>(m.size());
  const std::size_t cells = static_cast<std::size_t>(rows) * cols;
  std::vector<std::int64_t> out(cells, 0);
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) {
      if (m[i] && a[i] >= 0 && b[i] >= 0) ++out[static_cast<std::size_t>(a[i]) * cols + b[i]];
    }
    return out;
  }
#pragma omp parallel
  {
    std::vector<std::int64_t> local(cells, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      if (m[i] && a[i] >= 0 && b[i] >= 0) ++local[static_cast<std::size_t>(a[i]) * cols + b[i]];
    }
#pragma omp critical(dikw_contingency)
    for (std::size_t c = 0; c < cells; ++c) out[c] += local[c];
  }
  return out;
}

std::int64_t implication_violations(const Column& antecedent, const Column& consequent, const Mask& m, Exec exec) {
  const auto& av = antecedent.valid();
  const auto& cv = consequent.valid();
  const auto& a = antecedent.ints();
  const auto& c = consequent.ints();
  const auto n = static_cast<std::int64_t>(m.size());
  std::int64_t bad = 0;
  auto violated = [&](std::int64_t i) { return m[i] && cv[i] && c[i] != 0 && !(av[i] && a[i] != 0); };
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) bad += violated(i) ? 1 : 0;
    return bad;
  }
#pragma omp parallel for reduction(+ : bad) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) bad += violated(i) ? 1 : 0;
  return bad;
}

Moments moments(const Column& y, const Mask& m, Exec exec) {
  const auto& valid = y.valid();
  const std::size_t n = m.size();
  auto present = [&](std::size_t i) { return m[i] && valid[i]; };
  Moments out;
  out.n = static_cast<std::int64_t>(
      chunked_sum(n, exec, [&](std::size_t i) { return present(i) ? 1.0 : 0.0; }));
  if (out.n == 0) return out;
  const double sum = chunked_sum(n, exec, [&](std::size_t i) { return present(i) ? y.number(i) : 0.0; });
  out.mean = sum / static_cast<double>(out.n);
  out.m2 = chunked_sum(n, exec, [&](std::size_t i) {
    if (!present(i)) return 0.0;
    const double d = y.number(i) - out.mean;
    return d * d;
  });
  return out;
}

PairedMoments paired_moments(const Column& x, const Column& y, const Mask& m, Exec exec) {
  const auto& xv = x.valid();
  const auto& yv = y.valid();
  const std::size_t n = m.size();
  auto present = [&](std::size_t i) { return m[i] && xv[i] && yv[i]; };
  PairedMoments out;
  out.n = static_cast<std::int64_t>(
      chunked_sum(n, exec, [&](std::size_t i) { return present(i) ? 1.0 : 0.0; }));
  if (out.n == 0) return out;
  const double cnt = static_cast<double>(out.n);
  out.mean_x = chunked_sum(n, exec, [&](std::size_t i) { return present(i) ? x.number(i) : 0.0; }) / cnt;
  out.mean_y = chunked_sum(n, exec, [&](std::size_t i) { return present(i) ? y.number(i) : 0.0; }) / cnt;
  out.sxx = chunked_sum(n, exec, [&](std::size_t i) {
    if (!present(i)) return 0.0;
    const double d = x.number(i) - out.mean_x;
    return d * d;
  });
  out.syy = chunked_sum(n, exec, [&](std::size_t i) {
    if (!present(i)) return 0.0;
    const double d = y.number(i) - out.mean_y;
    return d * d;
  });
  out.sxy = chunked_sum(n, exec, [&](std::size_t i) {
    if (!present(i)) return 0.0;
    return (x.number(i) - out.mean_x) * (y.number(i) - out.mean_y);
  });
  return out;
}

}  // namespace dikw::kernels
