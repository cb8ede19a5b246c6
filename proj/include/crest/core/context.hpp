#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crest/core/rng.hpp"

namespace crest {

struct ContextVariable {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  std::string group;
};

// Ordered, named, bounded context variables. Definition order is the
// canonical index order everywhere (sampling, interventions, policies).
class ContextSchema {
 public:
  ContextSchema() = default;

  explicit ContextSchema(std::vector<ContextVariable> vars) : vars_(std::move(vars)) {
    for (int i = 0; i < dimension(); ++i) {
      const auto& v = vars_[i];
      if (!(v.lower < v.upper))
        throw std::invalid_argument("schema variable '" + v.name + "': lower must be < upper");
      if (v.name.empty()) throw std::invalid_argument("schema variable with empty name");
      if (!index_.emplace(v.name, i).second)
        throw std::invalid_argument("schema has duplicate variable name '" + v.name + "'");
    }
  }

  int dimension() const { return static_cast<int>(vars_.size()); }

  const ContextVariable& variable(int i) const { return vars_.at(i); }

  const std::vector<ContextVariable>& variables() const { return vars_; }

  int index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end())
      throw std::out_of_range("schema has no variable named '" + std::string(name) + "'");
    return it->second;
  }

  bool has(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  double midpoint(int i) const {
    const auto& v = vars_.at(i);
    return 0.5 * (v.lower + v.upper);
  }

  Eigen::VectorXd midpoints() const {
    Eigen::VectorXd m(dimension());
    for (int i = 0; i < dimension(); ++i) m[i] = midpoint(i);
    return m;
  }

  double clamp(int i, double value) const {
    const auto& v = vars_.at(i);
    return std::clamp(value, v.lower, v.upper);
  }

  friend bool operator==(const ContextSchema& a, const ContextSchema& b) {
    if (a.dimension() != b.dimension()) return false;
    for (int i = 0; i < a.dimension(); ++i) {
      const auto& x = a.vars_[i];
      const auto& y = b.vars_[i];
      if (x.name != y.name || x.lower != y.lower || x.upper != y.upper || x.group != y.group)
        return false;
    }
    return true;
  }

 private:
  std::vector<ContextVariable> vars_;
  std::unordered_map<std::string, int> index_;
};

using SchemaPtr = std::shared_ptr<const ContextSchema>;

// Immutable context instance; values are clamped to schema bounds once, at
// construction.
class ContextVector {
 public:
  ContextVector(SchemaPtr schema, Eigen::VectorXd values)
      : schema_(std::move(schema)), values_(std::move(values)) {
    if (!schema_) throw std::invalid_argument("context requires a schema");
    if (values_.size() != schema_->dimension())
      throw std::invalid_argument("context value count does not match schema dimension");
    for (int i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw std::invalid_argument("context value must be finite");
      values_[i] = schema_->clamp(i, values_[i]);
    }
  }

  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int i) const { return values_[i]; }
  int dimension() const { return static_cast<int>(values_.size()); }
  const ContextSchema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }

 private:
  SchemaPtr schema_;
  Eigen::VectorXd values_;
};

// Single-variable replacement: set variable `index` to `value`.
struct Intervention {
  int index = 0;
  double value = 0.0;
};

inline void validate(const Intervention& iv, const ContextSchema& schema) {
  if (iv.index < 0 || iv.index >= schema.dimension())
    throw std::out_of_range("intervention index out of range");
  const auto& v = schema.variable(iv.index);
  if (!(iv.value >= v.lower && iv.value <= v.upper))
    throw std::invalid_argument("intervention value outside bounds of '" + v.name + "'");
}

inline bool is_null_intervention(const ContextVector& c, const Intervention& iv) {
  validate(iv, c.schema());
  return c[iv.index] == iv.value;
}

// Returns a context identical to `c` except at iv.index.
inline ContextVector apply_intervention(const ContextVector& c, const Intervention& iv) {
  validate(iv, c.schema());
  Eigen::VectorXd values = c.values();
  values[iv.index] = iv.value;
  return ContextVector(c.schema_ptr(), std::move(values));
}

// Uniform sample within bounds, one draw per variable in index order.
inline ContextVector sample_context(const SchemaPtr& schema, Rng& rng) {
  if (!schema) throw std::invalid_argument("sample_context requires a schema");
  Eigen::VectorXd values(schema->dimension());
  for (int i = 0; i < schema->dimension(); ++i) {
    const auto& v = schema->variable(i);
    values[i] = rng.uniform(v.lower, v.upper);
  }
  return ContextVector(schema, std::move(values));
}

}  // namespace crest
