#pragma once

#include <Eigen/Core>
#include <set>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "crest/core/context.hpp"

namespace crest {

// Context distribution: per-variable rules applied on top of the schema's
// uniform box. Every sample consumes exactly one uniform draw per variable,
// whatever the rules, so samplers with equal seeds stay aligned coordinate by
// coordinate (that pairing is what shift experiments rely on).
class ContextSampler {
 public:
  explicit ContextSampler(SchemaPtr schema)
      : schema_(std::move(schema)), rules_(checked_dim(schema_)) {}

  static ContextSampler full(SchemaPtr schema) { return ContextSampler(std::move(schema)); }

  // Pin every variable outside `relevant` to its schema midpoint.
  ContextSampler& pin_irrelevant(const std::set<int>& relevant) {
    for (int i = 0; i < schema_->dimension(); ++i)
      if (!relevant.count(i)) rules_[i].kind = Rule::Pinned;
    return *this;
  }

  // Restrict a group's variables to a fraction [lo, hi] of their range.
  ContextSampler& restrict_group(std::string_view group, double lo, double hi) {
    if (!(0.0 <= lo && lo < hi && hi <= 1.0))
      throw std::invalid_argument("restrict_group: need 0 <= lo < hi <= 1");
    for (int i = 0; i < schema_->dimension(); ++i)
      if (schema_->variable(i).group == group) {
        rules_[i].kind = Rule::Fraction;
        rules_[i].lo = lo;
        rules_[i].hi = hi;
      }
    return *this;
  }

  // Snap a group's variables to the nearer of two values (two-point support).
  ContextSampler& discretize_group(std::string_view group, double a, double b) {
    for (int i = 0; i < schema_->dimension(); ++i)
      if (schema_->variable(i).group == group) {
        rules_[i].kind = Rule::Choice;
        rules_[i].lo = a;
        rules_[i].hi = b;
      }
    return *this;
  }

  const SchemaPtr& schema_ptr() const { return schema_; }

  // One uniform per variable, in index order.
  Eigen::VectorXd draw_uniforms(Rng& rng) const {
    Eigen::VectorXd u(schema_->dimension());
    for (int i = 0; i < u.size(); ++i) u[i] = rng.uniform();
    return u;
  }

  ContextVector materialize(const Eigen::VectorXd& u) const {
    if (u.size() != schema_->dimension())
      throw std::invalid_argument("uniform vector length mismatch");
    Eigen::VectorXd values(u.size());
    for (int i = 0; i < u.size(); ++i) {
      const auto& v = schema_->variable(i);
      const auto& r = rules_[i];
      switch (r.kind) {
        case Rule::Uniform:
          values[i] = v.lower + u[i] * (v.upper - v.lower);
          break;
        case Rule::Pinned:
          values[i] = schema_->midpoint(i);
          break;
        case Rule::Fraction:
          values[i] = v.lower + (r.lo + u[i] * (r.hi - r.lo)) * (v.upper - v.lower);
          break;
        case Rule::Choice:
          values[i] = u[i] < 0.5 ? r.lo : r.hi;
          break;
      }
    }
    return ContextVector(schema_, std::move(values));
  }

  ContextVector sample(Rng& rng) const { return materialize(draw_uniforms(rng)); }

 private:
  struct Rule {
    enum Kind { Uniform, Pinned, Fraction, Choice } kind = Uniform;
    double lo = 0.0, hi = 1.0;
  };

  static int checked_dim(const SchemaPtr& s) {
    if (!s) throw std::invalid_argument("sampler requires a schema");
    return s->dimension();
  }

  SchemaPtr schema_;
  std::vector<Rule> rules_;
};

}  // namespace crest
