#include <catch2/catch_amalgamated.hpp>

#include "crest/core/context.hpp"
#include "crest/io.hpp"
#include "crest/nn/adam.hpp"
#include "crest/nn/builder.hpp"
#include "crest/nn/network.hpp"
#include "support.hpp"

using namespace crest;
using namespace crest::nn;

namespace {

NetworkSpec small_spec() {
  NetworkSpec s;
  s.heads.push_back({{0, 2}, {6, 6}, 2});
  s.heads.push_back({{1}, {4}, 1});
  s.heads.push_back({{}, {3}, 1});  // constant-input head
  return s;
}

}  // namespace

TEST_CASE("orthogonal init has scaled orthonormal rows and zero biases", "[nn]") {
  NetworkSpec spec;
  spec.heads.push_back({{0, 1, 2, 3, 4, 5, 6, 7}, {8, 8}, 3});
  Rng rng(3);
  NetworkWeights w = init_weights(spec, rng);

  const auto& hidden0 = w.heads[0].layers[0].W;  // 8x8 square
  Eigen::MatrixXd gram = hidden0 * hidden0.transpose();
  REQUIRE((gram - 2.0 * Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);

  const auto& out = w.heads[0].layers.back().W;  // 3x8: orthonormal rows * 0.01
  Eigen::MatrixXd gout = out * out.transpose();
  REQUIRE((gout - 1e-4 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  for (const auto& l : w.heads[0].layers) REQUIRE(l.b.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(w.log_std.size() == 3);
  REQUIRE(w.log_std.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("init is deterministic in the seed", "[nn]") {
  NetworkSpec spec = small_spec();
  Rng r1(11), r2(11), r3(12);
  NetworkWeights a = init_weights(spec, r1);
  NetworkWeights b = init_weights(spec, r2);
  NetworkWeights c = init_weights(spec, r3);
  REQUIRE(a.heads[0].layers[0].W == b.heads[0].layers[0].W);
  REQUIRE(a.heads[0].layers[0].W != c.heads[0].layers[0].W);
}

TEST_CASE("tall orthogonal init has orthonormal columns", "[nn]") {
  NetworkSpec spec;
  spec.heads.push_back({{0, 1}, {16}, 1});  // first layer 16x2: tall
  Rng rng(5);
  NetworkWeights w = init_weights(spec, rng);
  const auto& tall = w.heads[0].layers[0].W;
  Eigen::MatrixXd gram = tall.transpose() * tall;
  REQUIRE((gram - 2.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("zero weights produce zero outputs", "[nn]") {
  NetworkSpec spec = small_spec();
  NetworkWeights w = zeros_like(spec);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  REQUIRE(forward(spec, w, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer equals a matrix product", "[nn]") {
  NetworkSpec spec;
  spec.heads.push_back({{0, 1, 2}, {}, 2});
  Rng rng(9);
  NetworkWeights w = init_weights(spec, rng);
  w.heads[0].layers[0].b = Eigen::Vector2d(0.3, -0.7);
  Eigen::Vector3d x(0.2, -0.4, 1.1);
  Eigen::VectorXd y = forward(spec, w, Eigen::VectorXd(x));
  Eigen::Vector2d expect = w.heads[0].layers[0].W * x + w.heads[0].layers[0].b;
  REQUIRE((y - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("batched forward matches a naive reference on random nets", "[nn]") {
  Rng rng(21);
  NetworkSpec spec = small_spec();
  for (int trial = 0; trial < 20; ++trial) {
    Rng wr(derive_seed(21, trial));
    NetworkWeights w = init_weights(spec, wr);
    Eigen::MatrixXd x(4, 3);
    for (int i = 0; i < 12; ++i) x(i / 3, i % 3) = rng.uniform(-2.0, 2.0);
    Eigen::MatrixXd y = forward(spec, w, x);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd ref = test_support::reference_forward(spec, w, x.row(i));
      REQUIRE((y.row(i).transpose() - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("outputs are bit-identical under changes to non-input coordinates", "[nn]") {
  NetworkSpec spec;
  spec.heads.push_back({{0, 2}, {8, 8, 8}, 2});
  Rng rng(31);
  NetworkWeights w = init_weights(spec, rng);
  Eigen::VectorXd x(5);
  x << 0.1, -0.8, 0.4, 2.0, -3.0;
  Eigen::VectorXd y1 = forward(spec, w, x);
  x[1] = 99.0;
  x[3] = -7.0;
  x[4] = 0.0;
  Eigen::VectorXd y2 = forward(spec, w, x);
  REQUIRE(y1 == y2);
}

TEST_CASE("constant-input heads ignore the context entirely", "[nn]") {
  NetworkSpec spec;
  spec.heads.push_back({{}, {4}, 1});
  Rng rng(17);
  NetworkWeights w = init_weights(spec, rng);
  Eigen::VectorXd a = Eigen::VectorXd::Random(3);
  Eigen::VectorXd b = Eigen::VectorXd::Random(3);
  REQUIRE(forward(spec, w, a) == forward(spec, w, b));
}

TEST_CASE("backward matches central finite differences", "[nn]") {
  Rng rng(41);
  NetworkSpec spec = small_spec();
  for (int trial = 0; trial < 5; ++trial) {
    Rng wr(derive_seed(41, trial));
    NetworkWeights w = init_weights(spec, wr);
    Eigen::MatrixXd x(3, 3), r(3, spec.output_dim());
    for (int i = 0; i < x.size(); ++i) x(i / 3, i % 3) = rng.uniform(-1.5, 1.5);
    for (int i = 0; i < r.size(); ++i) r(i / r.cols(), i % r.cols()) = rng.uniform(-1.0, 1.0);
    REQUIRE(test_support::gradient_check(spec, w, x, r) < 1e-4);
  }
}

TEST_CASE("zero upstream gradient yields zero weight gradients", "[nn]") {
  NetworkSpec spec = small_spec();
  Rng rng(43);
  NetworkWeights w = init_weights(spec, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  ForwardCache cache;
  forward(spec, w, x, &cache);
  NetworkWeights g = backward(spec, w, cache, Eigen::MatrixXd::Zero(4, spec.output_dim()));
  for (const auto& h : g.heads)
    for (const auto& l : h.layers) {
      REQUIRE(l.W.cwiseAbs().maxCoeff() == 0.0);
      REQUIRE(l.b.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("linear layer gradient is the classic outer product", "[nn]") {
  NetworkSpec spec;
  spec.heads.push_back({{0, 1}, {}, 1});
  Rng rng(47);
  NetworkWeights w = init_weights(spec, rng);
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 2.0, 3.0, 4.0;
  Eigen::MatrixXd dy(2, 1);
  dy << 0.5, -1.5;
  ForwardCache cache;
  forward(spec, w, x, &cache);
  NetworkWeights g = backward(spec, w, cache, dy);
  Eigen::MatrixXd expect = dy.transpose() * x;
  REQUIRE((g.heads[0].layers[0].W - expect).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(g.heads[0].layers[0].b[0] == Catch::Approx(-1.0));
}

namespace {

ContextSchema blocks_like_schema(int n_blocks) {
  std::vector<ContextVariable> vars;
  for (int b = 0; b < n_blocks; ++b) {
    const std::string p = "b" + std::to_string(b) + "_";
    vars.push_back({p + "x", -0.25, 0.25, "pose"});
    vars.push_back({p + "z", -0.25, 0.25, "pose"});
    vars.push_back({p + "yaw", -3.14, 3.14, "pose"});
    vars.push_back({p + "h", 0.04, 0.10, "size"});
    vars.push_back({p + "cr", 0.0, 1.0, "color"});
    vars.push_back({p + "cg", 0.0, 1.0, "color"});
    vars.push_back({p + "cb", 0.0, 1.0, "color"});
  }
  return ContextSchema(std::move(vars));
}

}  // namespace

TEST_CASE("architecture sizing matches the reference configurations", "[nn]") {
  // two-block stacking: context 14, params 3
  ContextSchema schema = blocks_like_schema(2);
  StructureGraph g;
  g.relevant = {0, 1, 7, 8, 10};          // x0 z0 x1 z1 h1
  g.parents = {{0, 7}, {10}, {1, 8}};     // dx: x0 x1; dy: h1; dz: z0 z1

  BuiltPolicy mlp = build_policy(ArchKind::MLP, schema, g, 3);
  REQUIRE(mlp.actor.heads.size() == 1);
  REQUIRE(mlp.actor.heads[0].input_dim() == 14);
  REQUIRE(mlp.actor.heads[0].hidden_widths == std::vector<int>{24, 24, 24});
  REQUIRE(mlp.actor.heads[0].output_dim == 3);
  REQUIRE(mlp.critic.heads[0].input_dim() == 14);

  BuiltPolicy rmlp = build_policy(ArchKind::RMLP, schema, g, 3);
  REQUIRE(rmlp.actor.heads[0].input_indices == std::vector<int>{0, 1, 7, 8, 10});
  REQUIRE(rmlp.actor.heads[0].hidden_widths == std::vector<int>{24, 24, 24});
  REQUIRE(count_params(rmlp.actor) == 1419);
  REQUIRE(rmlp.critic.heads[0].input_dim() == 5);

  BuiltPolicy pmlp = build_policy(ArchKind::PMLP, schema, g, 3);
  REQUIRE(pmlp.actor.heads.size() == 3);
  REQUIRE(pmlp.actor.heads[0].input_indices == std::vector<int>{0, 7});
  REQUIRE(pmlp.actor.heads[1].input_indices == std::vector<int>{10});
  REQUIRE(pmlp.actor.heads[2].input_indices == std::vector<int>{1, 8});
  for (const auto& h : pmlp.actor.heads) {
    REQUIRE(h.hidden_widths == std::vector<int>{8, 8, 8});
    REQUIRE(h.output_dim == 1);
  }
  REQUIRE(pmlp.critic.heads[0].input_dim() == 5);
  REQUIRE(pmlp.warnings.empty());
}

TEST_CASE("crate-sized reduced architectures reproduce the reference widths", "[nn]") {
  // 80-dim context; relevant set of 6; parent sizes 3,1,3,2,2
  std::vector<ContextVariable> vars;
  for (int i = 0; i < 80; ++i) vars.push_back({"c" + std::to_string(i), 0.0, 1.0, ""});
  ContextSchema schema{std::move(vars)};
  StructureGraph g;
  g.relevant = {0, 1, 2, 3, 5, 6};
  g.parents = {{0, 3, 5}, {1}, {2, 3, 5}, {3, 6}, {3, 6}};

  BuiltPolicy mlp = build_policy(ArchKind::MLP, schema, g, 5);
  REQUIRE(mlp.actor.heads[0].input_dim() == 80);
  REQUIRE(mlp.actor.heads[0].hidden_widths == std::vector<int>{40, 40, 40});

  BuiltPolicy pmlp = build_policy(ArchKind::PMLP, schema, g, 5);
  REQUIRE(pmlp.actor.heads.size() == 5);
  REQUIRE(pmlp.actor.heads[0].hidden_widths == std::vector<int>{8, 8, 8});

  BuiltPolicy pmlpr = build_policy(ArchKind::PMLP_R, schema, g, 5);
  REQUIRE(pmlpr.actor.heads.size() == 5);
  for (const auto& h : pmlpr.actor.heads)
    REQUIRE(h.hidden_widths == std::vector<int>{24, 24, 24});

  BuiltPolicy rmlp = build_policy(ArchKind::RMLP, schema, g, 5);
  const int rmlp_total = total_policy_params(rmlp);
  const int pmlpr_total = total_policy_params(pmlpr);
  const int pmlp_total = total_policy_params(pmlp);
  REQUIRE(std::abs(pmlpr_total - rmlp_total) < std::abs(pmlp_total - rmlp_total));
}

TEST_CASE("empty parent sets fall back to constant-input heads with a warning", "[nn]") {
  ContextSchema schema({{"a", 0.0, 1.0, ""}, {"b", 0.0, 1.0, ""}});
  StructureGraph g;
  g.relevant = {0};
  g.parents = {{0}, {}};
  BuiltPolicy p = build_policy(ArchKind::PMLP, schema, g, 2);
  REQUIRE(p.actor.heads[1].input_indices.empty());
  REQUIRE(p.actor.heads[1].input_dim() == 1);
  REQUIRE_FALSE(p.warnings.empty());

  Rng rng(7);
  NetworkWeights w = init_weights(p.actor, rng);
  Eigen::Vector2d x1(0.1, 0.9), x2(0.1, 0.2);
  Eigen::VectorXd y1 = forward(p.actor, w, Eigen::VectorXd(x1));
  Eigen::VectorXd y2 = forward(p.actor, w, Eigen::VectorXd(x2));
  REQUIRE(y1[1] == y2[1]);
}

TEST_CASE("build_policy validates its inputs", "[nn]") {
  ContextSchema schema({{"a", 0.0, 1.0, ""}});
  StructureGraph g;
  g.relevant = {0};
  g.parents = {{0}};
  REQUIRE_THROWS_AS(build_policy(ArchKind::MLP, schema, g, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(build_policy(ArchKind::PMLP, schema, g, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(arch_from_string("transformer"), std::invalid_argument);
}

TEST_CASE("weights JSON round trip is exact", "[nn]") {
  NetworkSpec spec = small_spec();
  Rng rng(61);
  NetworkWeights w = init_weights(spec, rng);
  w.log_std.setConstant(-0.37);
  json j = weights_to_json(spec, w);
  // through text, as a file would go
  json j2 = json::parse(j.dump());
  LoadedNetwork back = weights_from_json(j2);
  REQUIRE(back.spec.heads.size() == spec.heads.size());
  for (std::size_t h = 0; h < w.heads.size(); ++h)
    for (std::size_t k = 0; k < w.heads[h].layers.size(); ++k) {
      REQUIRE(back.weights.heads[h].layers[k].W == w.heads[h].layers[k].W);
      REQUIRE(back.weights.heads[h].layers[k].b == w.heads[h].layers[k].b);
    }
  REQUIRE(back.weights.log_std == w.log_std);

  json bad = j2;
  bad["version"] = 999;
  REQUIRE_THROWS_AS(weights_from_json(bad), std::runtime_error);
}

TEST_CASE("adam drives a quadratic to its minimum", "[nn]") {
  NetworkSpec spec;
  spec.heads.push_back({{0, 1}, {}, 2});
  NetworkWeights w = zeros_like(spec);
  Eigen::MatrixXd target(2, 2);
  target << 0.7, -0.3, 0.2, 0.9;
  AdamState st = make_adam(spec);
  for (int it = 0; it < 4000; ++it) {
    NetworkWeights g = zeros_like(spec);
    g.heads[0].layers[0].W = w.heads[0].layers[0].W - target;
    adam_step(w, g, st, 1e-2);
  }
  REQUIRE((w.heads[0].layers[0].W - target).cwiseAbs().maxCoeff() < 1e-4);
}
