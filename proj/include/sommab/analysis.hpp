#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sommab/core.hpp"

namespace sommab {

/// Problem size as it enters the bounds: M bandits and MK bandit-arm pairs.
/// Ragged instances count sum_m K_m pairs.
struct Shape {
  int bandits = 1;
  std::int64_t pairs = 2;

  static Shape uniform(int bandits, int arms_per_bandit) {
    return {bandits, static_cast<std::int64_t>(bandits) * arms_per_bandit};
  }
  static Shape of(const SommabInstance& instance) {
    return {instance.bandits(), static_cast<std::int64_t>(instance.total_arms())};
  }
};

struct Complexity {
  double H = 0.0;
  std::vector<double> per_bandit;             ///< H_m
  std::vector<std::vector<double>> per_arm;   ///< H_mk

  double max_bandit() const;
  double max_arm() const;
};

/// H_mk = b^2 / Delta_mk^2 and its sums. Throws DomainError on a zero gap.
Complexity complexity(const GapTable& gaps, double b);

struct ExponentConstants {
  int l = 1;
  double rho = 0.0;
  double c = 0.0;
  double qc = 0.0;
};

/// rho = sqrt(min(l/(l-1), 2)) (rho = sqrt 2 for l = 1),
/// c = 1 / (2 sqrt(3 rho + rho^2) + 2 rho + 1), Qc = 3 (1 + 5c)(1 + c) / 4.
ExponentConstants exponent_constants(int l);

/// A bound kept in both linear and log domain; `value` may underflow to 0
/// while `log_value` stays exact.
struct BoundValue {
  double value = 0.0;
  double log_value = 0.0;
};

/// 2 MK n exp(-exponent), evaluated in the log domain.
BoundValue union_bound(Shape shape, std::int64_t n, double exponent);

/// 4 (n - MK) / (9H).
double proposition_cap(Shape shape, std::int64_t n, double H);

/// 2 MK n exp(-a/64), for 0 < a <= proposition_cap.
BoundValue proposition_bound(Shape shape, std::int64_t n, double H, double a);

/// (rn - MK + 1) / ((1 + 2c)^2 H - Qc). Validates l in [1, 152],
/// n >= l MK and a positive denominator.
double theorem_cap(Shape shape, std::int64_t n, double H, int l, int r = 1);

/// 2 MK n exp(-2 a c^2), for 0 < a <= theorem_cap.
BoundValue theorem_bound(Shape shape, std::int64_t n, double H, int l, int r, double a);

/// 2 MK n exp(-2 (rn - MK + 1) / ((1/c + 2)^2 H - Qc/c^2)).
BoundValue theorem_bound_at_cap(Shape shape, std::int64_t n, double H, int l, int r = 1);

/// 2 MK n exp(-(rn - MK + 1) / (59H - 50)), valid for l = 1.
BoundValue simplified_bound_l1(Shape shape, std::int64_t n, double H, int r = 1);

/// 2 MK n exp(-(rn - MK + 1) / (41H - 36)), valid for l = 152.
BoundValue simplified_bound_l152(Shape shape, std::int64_t n, double H, int r = 1);

enum class BoundFamily { Proposition, Theorem };

/// Largest admissible exploration parameter of the chosen analysis.
double recommended_a(Shape shape, std::int64_t n, double H, int l, int r, BoundFamily family);

BoundValue static_bound(Shape shape, std::int64_t n, double H);
BoundValue uniform_bound(Shape shape, std::int64_t n, double max_arm_complexity);
BoundValue uniform_ucbe_bound(Shape shape, std::int64_t n, double max_bandit_complexity);

struct ExponentRow {
  std::string strategy;
  std::string form;         ///< symbolic denominator, e.g. "144H"
  double numerator = 0.0;   ///< e.g. n - MK
  double denominator = 0.0; ///< evaluated rate denominator
  BoundValue bound;
};

/// Exponential rates of every strategy, weakest guarantee last.
std::vector<ExponentRow> exponent_table(Shape shape, std::int64_t n, double H,
                                        double max_bandit_complexity,
                                        double max_arm_complexity, int l, int r = 1);

/// CSV rows (strategy, rate-denominator, bound-value, log-bound).
void write_exponent_csv(std::ostream& out, const std::vector<ExponentRow>& rows);

struct BoundInputs {
  int bandits = 2;
  int arms = 2;
  std::int64_t n = 0;
  int l = 1;
  int r = 1;
  double H = 1.0;
  double b = 1.0;
  std::optional<double> a;  ///< defaults to the theorem cap
  std::optional<double> max_bandit_complexity;
  std::optional<double> max_arm_complexity;
};

struct BoundReport {
  BoundInputs inputs;
  ExponentConstants constants;
  double a = 0.0;
  double proposition_cap = 0.0;
  BoundValue proposition_bound;  ///< at the proposition cap
  double theorem_cap = 0.0;      ///< with n in the numerator
  double r_order_cap = 0.0;      ///< with rn in the numerator
  BoundValue theorem_bound;      ///< at `a`
  BoundValue theorem_bound_at_cap;
  BoundValue r_order_bound_at_cap;
  BoundValue simplified_l152;
  BoundValue simplified_l1;
  std::vector<ExponentRow> table;
};

/// Every closed-form bound for one setting. Throws ValidationError on
/// out-of-range inputs.
BoundReport bound_report(const BoundInputs& inputs);

}  // namespace sommab
