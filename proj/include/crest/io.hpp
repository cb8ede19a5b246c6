#pragma once

// JSON conversions for the library's persistable types.

#include <json.hpp>

#include "crest/core/context.hpp"
#include "crest/core/types.hpp"
#include "crest/nn/network.hpp"

namespace crest {

using json = nlohmann::json;

inline json to_json(const ContextSchema& schema) {
  json vars = json::array();
  for (const auto& v : schema.variables())
    vars.push_back({{"name", v.name}, {"lower", v.lower}, {"upper", v.upper}, {"group", v.group}});
  return json{{"variables", vars}};
}

inline ContextSchema schema_from_json(const json& j) {
  std::vector<ContextVariable> vars;
  for (const auto& v : j.at("variables"))
    vars.push_back({v.at("name").get<std::string>(), v.at("lower").get<double>(),
                    v.at("upper").get<double>(), v.value("group", std::string{})});
  return ContextSchema(std::move(vars));
}

// Structure graphs are persisted by variable/parameter name so files stay
// readable and robust to index shuffles.
inline json to_json(const StructureGraph& g, const ContextSchema& schema,
                    const std::vector<std::string>& param_names) {
  json relevant = json::array();
  for (int v : g.relevant) relevant.push_back(schema.variable(v).name);
  json parents = json::object();
  for (std::size_t j = 0; j < g.parents.size(); ++j) {
    json names = json::array();
    for (int v : g.parents[j]) names.push_back(schema.variable(v).name);
    parents[param_names.at(j)] = names;
  }
  return json{{"relevant", relevant}, {"parents", parents}};
}

inline StructureGraph structure_from_json(const json& j, const ContextSchema& schema,
                                          const std::vector<std::string>& param_names) {
  StructureGraph g;
  for (const auto& name : j.at("relevant")) g.relevant.insert(schema.index_of(name.get<std::string>()));
  g.parents.resize(param_names.size());
  const auto& parents = j.at("parents");
  for (std::size_t jj = 0; jj < param_names.size(); ++jj) {
    if (!parents.contains(param_names[jj])) continue;
    for (const auto& name : parents.at(param_names[jj]))
      g.parents[jj].insert(schema.index_of(name.get<std::string>()));
  }
  validate(g, schema.dimension());
  return g;
}

inline json to_json(const nn::NetworkSpec& spec) {
  json heads = json::array();
  for (const auto& h : spec.heads)
    heads.push_back({{"input_indices", h.input_indices},
                     {"hidden_widths", h.hidden_widths},
                     {"output_dim", h.output_dim}});
  return json{{"heads", heads},
              {"hidden_scale", spec.hidden_scale},
              {"output_scale", spec.output_scale}};
}

inline nn::NetworkSpec network_spec_from_json(const json& j) {
  nn::NetworkSpec spec;
  for (const auto& h : j.at("heads"))
    spec.heads.push_back({h.at("input_indices").get<std::vector<int>>(),
                          h.at("hidden_widths").get<std::vector<int>>(),
                          h.at("output_dim").get<int>()});
  spec.hidden_scale = j.at("hidden_scale").get<double>();
  spec.output_scale = j.at("output_scale").get<double>();
  return spec;
}

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.size();
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const auto cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw std::runtime_error("ragged weight matrix in file");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace detail

inline constexpr int kWeightsFormatVersion = 1;

// Weights are stored layer-major per head with the spec embedded, so a file is
// self-describing.
inline json weights_to_json(const nn::NetworkSpec& spec, const nn::NetworkWeights& w) {
  json heads = json::array();
  for (const auto& h : w.heads) {
    json layers = json::array();
    for (const auto& l : h.layers)
      layers.push_back({{"w", detail::matrix_to_json(l.W)}, {"b", detail::vector_to_json(l.b)}});
    heads.push_back(std::move(layers));
  }
  return json{{"format", "network-weights"},
              {"version", kWeightsFormatVersion},
              {"spec", to_json(spec)},
              {"heads", heads},
              {"log_std", detail::vector_to_json(w.log_std)}};
}

struct LoadedNetwork {
  nn::NetworkSpec spec;
  nn::NetworkWeights weights;
};

inline LoadedNetwork weights_from_json(const json& j) {
  if (j.value("format", std::string{}) != "network-weights")
    throw std::runtime_error("not a network weights file");
  if (j.at("version").get<int>() != kWeightsFormatVersion)
    throw std::runtime_error("unsupported weights file version");
  LoadedNetwork out;
  out.spec = network_spec_from_json(j.at("spec"));
  const auto& heads = j.at("heads");
  if (heads.size() != out.spec.heads.size())
    throw std::runtime_error("weight file head count does not match its spec");
  for (std::size_t h = 0; h < heads.size(); ++h) {
    nn::HeadWeights hw;
    const auto dims = out.spec.heads[h].layer_dims();
    if (heads[h].size() + 1 != dims.size())
      throw std::runtime_error("weight file layer count does not match its spec");
    for (std::size_t k = 0; k < heads[h].size(); ++k) {
      nn::LayerWeights lw;
      lw.W = detail::matrix_from_json(heads[h][k].at("w"));
      lw.b = detail::vector_from_json(heads[h][k].at("b"));
      if (lw.W.rows() != dims[k + 1] || lw.W.cols() != dims[k] || lw.b.size() != dims[k + 1])
        throw std::runtime_error("weight tensor shape does not match its spec");
      hw.layers.push_back(std::move(lw));
    }
    out.weights.heads.push_back(std::move(hw));
  }
  out.weights.log_std = detail::vector_from_json(j.at("log_std"));
  if (out.weights.log_std.size() > 0 && out.weights.log_std.size() != out.spec.output_dim())
    throw std::runtime_error("log_std length does not match spec output dimension");
  return out;
}

}  // namespace crest
