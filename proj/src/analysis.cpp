#include "sommab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace sommab {

namespace {

constexpr int kMaxTheoremL = 152;

void require_positive_h(double H) {
  if (!(H > 0.0) || !std::isfinite(H))
    throw ValidationError(fmt::format("complexity H={} must be positive and finite", H));
}

void require_theorem_premise(Shape shape, std::int64_t n, double H, int l, int r) {
  require_positive_h(H);
  if (l < 1 || l > kMaxTheoremL)
    throw ValidationError(fmt::format("l={} outside [1, {}]", l, kMaxTheoremL));
  if (r < 1) throw ValidationError(fmt::format("order r={} must be >= 1", r));
  if (r > shape.bandits)
    throw ValidationError(fmt::format("order r={} exceeds bandit count {}", r, shape.bandits));
  if (n < static_cast<std::int64_t>(l) * shape.pairs)
    throw ValidationError(fmt::format("horizon n={} below l*MK={}", n,
                                      static_cast<std::int64_t>(l) * shape.pairs));
}

double r_numerator(Shape shape, std::int64_t n, int r) {
  return static_cast<double>(static_cast<std::int64_t>(r) * n - shape.pairs + 1);
}

// Compact rendering of a coefficient: 90 rather than 90.000000.
std::string coefficient(double x) { return fmt::format("{:g}", x); }

}  // namespace

double Complexity::max_bandit() const {
  return *std::max_element(per_bandit.begin(), per_bandit.end());
}

double Complexity::max_arm() const {
  double best = 0.0;
  for (const auto& row : per_arm)
    for (const double h : row) best = std::max(best, h);
  return best;
}

Complexity complexity(const GapTable& gaps, double b) {
  Complexity out;
  for (std::size_t m = 0; m < gaps.delta.size(); ++m) {
    auto& row = out.per_arm.emplace_back();
    double bandit_total = 0.0;
    for (std::size_t k = 0; k < gaps.delta[m].size(); ++k) {
      const double d = gaps.delta[m][k];
      if (!(d > 0.0))
        throw DomainError(fmt::format("gap of arm ({},{}) is {}; complexity undefined", m, k, d));
      const double h = b * b / (d * d);
      row.push_back(h);
      bandit_total += h;
    }
    out.per_bandit.push_back(bandit_total);
    out.H += bandit_total;
  }
  return out;
}

ExponentConstants exponent_constants(int l) {
  if (l < 1) throw ValidationError(fmt::format("l={} must be >= 1", l));
  ExponentConstants k;
  k.l = l;
  const double ratio = l == 1 ? 2.0 : std::min(static_cast<double>(l) / (l - 1), 2.0);
  k.rho = std::sqrt(ratio);
  k.c = 1.0 / (2.0 * std::sqrt(3.0 * k.rho + k.rho * k.rho) + 2.0 * k.rho + 1.0);
  k.qc = 3.0 * (1.0 + 5.0 * k.c) * (1.0 + k.c) / 4.0;
  return k;
}

BoundValue union_bound(Shape shape, std::int64_t n, double exponent) {
  const double log_prefactor =
      std::log(2.0 * static_cast<double>(shape.pairs) * static_cast<double>(n));
  const double log_value = log_prefactor - exponent;
  return {std::exp(log_value), log_value};
}

double proposition_cap(Shape shape, std::int64_t n, double H) {
  require_positive_h(H);
  if (n <= shape.pairs)
    throw ValidationError(fmt::format("proposition needs n={} > MK={}", n, shape.pairs));
  return 4.0 * static_cast<double>(n - shape.pairs) / (9.0 * H);
}

BoundValue proposition_bound(Shape shape, std::int64_t n, double H, double a) {
  const double cap = proposition_cap(shape, n, H);
  if (!(a > 0.0) || a > cap)
    throw ValidationError(fmt::format("a={} outside (0, {}]", a, cap), cap);
  return union_bound(shape, n, a / 64.0);
}

double theorem_cap(Shape shape, std::int64_t n, double H, int l, int r) {
  require_theorem_premise(shape, n, H, l, r);
  const auto k = exponent_constants(l);
  const double denominator = (1.0 + 2.0 * k.c) * (1.0 + 2.0 * k.c) * H - k.qc;
  if (!(denominator > 0.0))
    throw ValidationError(fmt::format("(1+2c)^2 H - Qc = {} is not positive", denominator));
  const double numerator = r_numerator(shape, n, r);
  if (!(numerator > 0.0))
    throw ValidationError(fmt::format("rn - MK + 1 = {} is not positive", numerator));
  return numerator / denominator;
}

BoundValue theorem_bound(Shape shape, std::int64_t n, double H, int l, int r, double a) {
  const double cap = theorem_cap(shape, n, H, l, r);
  if (!(a > 0.0) || a > cap)
    throw ValidationError(fmt::format("a={} outside (0, {}]", a, cap), cap);
  const double c = exponent_constants(l).c;
  return union_bound(shape, n, 2.0 * a * c * c);
}

BoundValue theorem_bound_at_cap(Shape shape, std::int64_t n, double H, int l, int r) {
  theorem_cap(shape, n, H, l, r);
  const auto k = exponent_constants(l);
  const double inv = 1.0 / k.c + 2.0;
  const double denominator = inv * inv * H - k.qc / (k.c * k.c);
  return union_bound(shape, n, 2.0 * r_numerator(shape, n, r) / denominator);
}

BoundValue simplified_bound_l1(Shape shape, std::int64_t n, double H, int r) {
  require_theorem_premise(shape, n, H, 1, r);
  const double denominator = 59.0 * H - 50.0;
  if (!(denominator > 0.0)) throw ValidationError("59H - 50 is not positive");
  return union_bound(shape, n, r_numerator(shape, n, r) / denominator);
}

BoundValue simplified_bound_l152(Shape shape, std::int64_t n, double H, int r) {
  require_theorem_premise(shape, n, H, kMaxTheoremL, r);
  const double denominator = 41.0 * H - 36.0;
  if (!(denominator > 0.0)) throw ValidationError("41H - 36 is not positive");
  return union_bound(shape, n, r_numerator(shape, n, r) / denominator);
}

double recommended_a(Shape shape, std::int64_t n, double H, int l, int r, BoundFamily family) {
  if (family == BoundFamily::Proposition) return proposition_cap(shape, n, H);
  return theorem_cap(shape, n, H, l, r);
}

BoundValue static_bound(Shape shape, std::int64_t n, double H) {
  require_positive_h(H);
  const double log_value =
      std::log(static_cast<double>(shape.pairs)) - static_cast<double>(n) / H;
  return {std::exp(log_value), log_value};
}

BoundValue uniform_bound(Shape shape, std::int64_t n, double max_arm_complexity) {
  require_positive_h(max_arm_complexity);
  const double rate = static_cast<double>(shape.pairs) * max_arm_complexity;
  const double log_value = std::log(static_cast<double>(shape.pairs)) -
                           static_cast<double>(n) / rate;
  return {std::exp(log_value), log_value};
}

BoundValue uniform_ucbe_bound(Shape shape, std::int64_t n, double max_bandit_complexity) {
  require_positive_h(max_bandit_complexity);
  const double rate = 18.0 * shape.bandits * max_bandit_complexity;
  return union_bound(shape, n, static_cast<double>(n - shape.pairs) / rate);
}

namespace {

std::vector<ExponentRow> build_table(Shape shape, std::int64_t n, double H,
                                     std::optional<double> max_bandit,
                                     std::optional<double> max_arm, int l, int r) {
  std::vector<ExponentRow> rows;
  const double nd = static_cast<double>(n);
  const double mk = static_cast<double>(shape.pairs);
  const double theorem_num = r_numerator(shape, n, r);

  rows.push_back({"static", "H", nd, H, static_bound(shape, n, H)});
  if (max_arm) {
    const double ratio = mk * *max_arm / H;
    rows.push_back({"uniform", coefficient(ratio) + "H", nd, mk * *max_arm,
                    uniform_bound(shape, n, *max_arm)});
  }
  if (max_bandit) {
    const double ratio = 18.0 * shape.bandits * *max_bandit / H;
    rows.push_back({"uniform-ucbe", coefficient(ratio) + "H", nd - mk,
                    18.0 * shape.bandits * *max_bandit,
                    uniform_ucbe_bound(shape, n, *max_bandit)});
  }
  rows.push_back({"gape-proposition", "144H", nd - mk, 144.0 * H,
                  union_bound(shape, n, (nd - mk) / (144.0 * H))});
  rows.push_back({"gape-theorem-l1", "59H-50", theorem_num, 59.0 * H - 50.0,
                  simplified_bound_l1(shape, n, H, r)});
  if (n >= kMaxTheoremL * shape.pairs)
    rows.push_back({"gape-theorem-l152", "41H-36", theorem_num, 41.0 * H - 36.0,
                    simplified_bound_l152(shape, n, H, r)});

  const auto k = exponent_constants(l);
  const double inv = 1.0 / k.c + 2.0;
  const double half_denominator = (inv * inv * H - k.qc / (k.c * k.c)) / 2.0;
  rows.push_back({fmt::format("gape-theorem-exact-l{}", l),
                  fmt::format("{:.6g}H-{:.6g}", inv * inv / 2.0, k.qc / (2.0 * k.c * k.c)),
                  theorem_num, half_denominator, theorem_bound_at_cap(shape, n, H, l, r)});
  return rows;
}

}  // namespace

std::vector<ExponentRow> exponent_table(Shape shape, std::int64_t n, double H,
                                        double max_bandit_complexity,
                                        double max_arm_complexity, int l, int r) {
  return build_table(shape, n, H, max_bandit_complexity, max_arm_complexity, l, r);
}

void write_exponent_csv(std::ostream& out, const std::vector<ExponentRow>& rows) {
  out << "strategy,rate_denominator,bound,log_bound\n";
  for (const auto& row : rows)
    out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", row.strategy, row.denominator,
                       row.bound.value, row.bound.log_value);
}

BoundReport bound_report(const BoundInputs& in) {
  if (in.bandits < 1 || in.arms < 2)
    throw ValidationError(fmt::format("need M >= 1 and K >= 2 (got M={}, K={})", in.bandits,
                                      in.arms));
  if (!(in.b > 0.0)) throw ValidationError("b must be positive");
  const Shape shape = Shape::uniform(in.bandits, in.arms);

  BoundReport report;
  report.inputs = in;
  report.constants = exponent_constants(in.l);
  report.r_order_cap = theorem_cap(shape, in.n, in.H, in.l, in.r);
  report.theorem_cap = theorem_cap(shape, in.n, in.H, in.l, 1);
  report.a = in.a.value_or(report.r_order_cap);
  report.theorem_bound = theorem_bound(shape, in.n, in.H, in.l, in.r, report.a);
  report.theorem_bound_at_cap = theorem_bound_at_cap(shape, in.n, in.H, in.l, 1);
  report.r_order_bound_at_cap = theorem_bound_at_cap(shape, in.n, in.H, in.l, in.r);
  report.proposition_cap = proposition_cap(shape, in.n, in.H);
  report.proposition_bound = proposition_bound(shape, in.n, in.H, report.proposition_cap);
  report.simplified_l1 = simplified_bound_l1(shape, in.n, in.H, in.r);
  if (in.n >= kMaxTheoremL * shape.pairs)
    report.simplified_l152 = simplified_bound_l152(shape, in.n, in.H, in.r);
  else
    report.simplified_l152 = {std::nan(""), std::nan("")};
  report.table = build_table(shape, in.n, in.H, in.max_bandit_complexity,
                             in.max_arm_complexity, in.l, in.r);
  return report;
}

}  // namespace sommab
