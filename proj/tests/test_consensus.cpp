// Copyright 2026 The compgossip Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "compgossip/consensus.hpp"

using namespace compgossip;

namespace {

std::shared_ptr<const GossipMatrix> shared(const TopologyKind& kind) {
  return std::make_shared<const GossipMatrix>(build_gossip_matrix(kind));
}

ConsensusConfig make_config(GossipScheme scheme, std::shared_ptr<const GossipMatrix> matrix,
                            CompressionSpec compression, std::uint64_t iters) {
  ConsensusConfig config;
  config.scheme = scheme;
  config.matrix = std::move(matrix);
  config.compression = std::move(compression);
  config.max_iters = iters;
  return config;
}

double max_relative_drift(const ConsensusRun& run, const Eigen::MatrixXd& initial) {
  const double scale = initial.rowwise().mean().norm();
  double worst = 0.0;
  for (const auto& rec : run.records) worst = std::max(worst, rec.aux / scale);
  return worst;
}

}  // namespace

TEST_CASE("choco_gamma examples") {
  CHECK(choco_gamma(1.0, 1.0, 1.0) == doctest::Approx(1.0 / 15.0).epsilon(1e-15));
  CHECK(choco_gamma(1.0, 1.0, 2.0) == doctest::Approx(1.0 / 33.0).epsilon(1e-15));
  // 16 (2/3) + 4/9 + 4 (16/9) + 2 (2/3)(16/9) - 8 (2/3)(0.01) = 20.5393...
  const double denominator = 32.0 / 3.0 + 4.0 / 9.0 + 64.0 / 9.0 + 64.0 / 27.0 - 0.16 / 3.0;
  CHECK(choco_gamma(2.0 / 3.0, 0.01, 4.0 / 3.0) == doctest::Approx((4.0 / 9.0) * 0.01 / denominator).epsilon(1e-14));
  CHECK(choco_gamma(2.0 / 3.0, 0.01, 4.0 / 3.0) == doctest::Approx(2.16388e-4).epsilon(1e-5));
  CHECK(choco_rate(1.0, 1.0) == doctest::Approx(1.0 / 82.0));
}

TEST_CASE("choco_gamma rejects out-of-range constants") {
  CHECK_THROWS_AS(choco_gamma(0.0, 0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(choco_gamma(1.5, 0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(choco_gamma(0.5, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(choco_gamma(0.5, 0.5, 2.5), std::invalid_argument);
}

TEST_CASE("exact gossip on a complete graph averages in one step") {
  auto matrix = shared(FullyConnected{6});
  const Eigen::MatrixXd initial = gaussian_initial(4, 6, 1);
  NetworkState state(initial);
  step_exact(state, 1.0, *matrix);
  CHECK(consensus_error(state.x) < 1e-28);
  CHECK((state.x.col(3) - initial.rowwise().mean()).norm() < 1e-14);

  const ConsensusRun run = run_consensus(make_config(GossipScheme::kExact, matrix, {}, 3), initial);
  CHECK(run.records[1].value < 1e-28);
}

TEST_CASE("consensus states are fixed points of every scheme") {
  auto matrix = shared(Ring{5});
  const Eigen::MatrixXd equal = Eigen::VectorXd::LinSpaced(3, -1.0, 2.0).replicate(1, 5);
  const RoundStreams streams{1, 0};

  NetworkState exact(equal);
  step_exact(exact, 0.7, *matrix);
  CHECK((exact.x - equal).cwiseAbs().maxCoeff() < 1e-15);

  NetworkState q2(equal);
  step_q2(q2, 1.0, CompressionSpec::identity(), *matrix, streams);
  CHECK((q2.x - equal).cwiseAbs().maxCoeff() < 1e-15);

  NetworkState choco(equal);
  choco.x_hat = equal;
  choco.s = equal * matrix->weights();
  const auto bits = step_choco(choco, 0.3, CompressionSpec::top_k(1), *matrix, streams);
  CHECK((choco.x - equal).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((choco.x_hat - equal).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(bits == 5 * 2 * (32 + 2));
}

TEST_CASE("exact gossip on ring(4) contracts by (1 - delta)^2 per step") {
  auto matrix = shared(Ring{4});
  Eigen::MatrixXd initial = Eigen::MatrixXd::Zero(1, 4);
  initial(0, 0) = 1.0;
  NetworkState state(initial);
  double previous = consensus_error(state.x);
  for (int t = 0; t < 20 && previous > 1e-12; ++t) {
    step_exact(state, 1.0, *matrix);
    const double error = consensus_error(state.x);
    CHECK(error <= previous / 9.0 * (1.0 + 1e-9));
    previous = error;
  }
}

TEST_CASE("identity compression reduces every scheme to exact gossip") {
  auto matrix = shared(Ring{8});
  const Eigen::MatrixXd initial = gaussian_initial(6, 8, 3);
  NetworkState exact(initial);
  NetworkState q1(initial);
  NetworkState q2(initial);
  NetworkState choco(initial);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const RoundStreams streams{5, t};
    step_exact(exact, 1.0, *matrix);
    step_q1(q1, 1.0, CompressionSpec::identity(), *matrix, streams);
    step_q2(q2, 1.0, CompressionSpec::identity(), *matrix, streams);
    step_choco(choco, 1.0, CompressionSpec::identity(), *matrix, streams);
    CHECK((q1.x - exact.x).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((q2.x - exact.x).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((choco.x - exact.x).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("exact, q2 and choco preserve the average; q1 does not") {
  auto matrix = shared(Ring{6});
  const std::size_t d = 10;
  Eigen::MatrixXd initial = gaussian_initial(d, 6, 4);
  initial.array() += 1.0;
  const auto unbiased = CompressionSpec::rand_k(5, true);

  const auto exact = run_consensus(make_config(GossipScheme::kExact, matrix, {}, 1000), initial);
  CHECK(max_relative_drift(exact, initial) <= 1e-10);

  auto q2_config = make_config(GossipScheme::kQ2, matrix, unbiased, 1000);
  q2_config.gamma = 0.2;
  CHECK(max_relative_drift(run_consensus(q2_config, initial), initial) <= 1e-10);

  for (const auto& spec : {CompressionSpec::top_k(2), CompressionSpec::rand_k(3), CompressionSpec::qsgd(4)}) {
    const auto choco = run_consensus(make_config(GossipScheme::kChoco, matrix, spec, 1000), initial);
    CAPTURE(describe(spec));
    CHECK(max_relative_drift(choco, initial) <= 1e-10);
  }

  auto q1_config = make_config(GossipScheme::kQ1, matrix, unbiased, 101);
  q1_config.gamma = 0.2;
  CHECK(run_consensus(q1_config, initial).records.back().aux / initial.rowwise().mean().norm() >= 1e-6);
}

TEST_CASE("neighbour sums track x_hat W") {
  auto matrix = shared(Torus{3, 3});
  const Eigen::MatrixXd initial = gaussian_initial(12, 9, 6);
  for (const auto& spec : {CompressionSpec::top_k(3), CompressionSpec::rand_k(2), CompressionSpec::qsgd(8),
                           CompressionSpec::rand_gossip(0.5)}) {
    auto config = make_config(GossipScheme::kChoco, matrix, spec, 300);
    config.check_invariants = true;
    CAPTURE(describe(spec));
    const ConsensusRun run = run_consensus(config, initial);
    const auto& state = run.final_state;
    CHECK((state.s - state.x_hat * matrix->weights()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("deterministic compression obeys the Lyapunov bound") {
  auto matrix = shared(Ring{8});
  const std::size_t d = 16;
  const Eigen::MatrixXd initial = gaussian_initial(d, 8, 7);
  const auto spec = CompressionSpec::top_k(2);
  const auto run = run_consensus(make_config(GossipScheme::kChoco, matrix, spec, 2000), initial);
  CHECK(run.gamma == doctest::Approx(choco_gamma(matrix->delta(), 0.125, matrix->beta())));
  const double rate = 1.0 - choco_rate(matrix->delta(), 0.125);
  const double e0 = run.records.front().spread;
  for (const auto& rec : run.records) {
    CHECK(rec.spread <= std::pow(rate, static_cast<double>(rec.iter)) * e0 + 1e-9);
    CHECK(rec.spread >= rec.value);
  }
}

TEST_CASE("bit accounting is per directed edge") {
  auto matrix = shared(Ring{4});
  const Eigen::MatrixXd initial = gaussian_initial(3, 4, 8);
  const auto exact = run_consensus(make_config(GossipScheme::kExact, matrix, {}, 5), initial);
  for (const auto& rec : exact.records) CHECK(rec.bits == 768 * rec.iter);

  auto ring5 = shared(Ring{5});
  const auto choco = run_consensus(make_config(GossipScheme::kChoco, ring5, CompressionSpec::top_k(1),
                                               4), gaussian_initial(8, 5, 8));
  for (const auto& rec : choco.records) CHECK(rec.bits == 350 * rec.iter);

  const auto single = run_consensus(make_config(GossipScheme::kExact, shared(Ring{1}), {}, 3),
                                    gaussian_initial(3, 1, 1));
  CHECK(single.records.back().bits == 0);
  CHECK(single.records.back().value == 0.0);
}

TEST_CASE("bits are nondecreasing and iterations increase") {
  auto matrix = shared(Ring{6});
  auto config = make_config(GossipScheme::kChoco, matrix, CompressionSpec::rand_gossip(0.3), 200);
  config.eval_every = 7;
  const auto run = run_consensus(config, gaussian_initial(5, 6, 9));
  REQUIRE(run.records.size() == 29);
  for (std::size_t i = 1; i < run.records.size(); ++i) {
    CHECK(run.records[i].iter == run.records[i - 1].iter + 7);
    CHECK(run.records[i].bits >= run.records[i - 1].bits);
  }
}

TEST_CASE("target error stops the run") {
  auto matrix = shared(Ring{6});
  auto config = make_config(GossipScheme::kExact, matrix, {}, 100000);
  config.target_error = 1e-8;
  config.eval_every = 1000;
  const auto run = run_consensus(config, gaussian_initial(5, 6, 10));
  const auto hit = iterations_to(run.records, 1e-8);
  REQUIRE(hit.has_value());
  CHECK(*hit == run.records.back().iter);
  CHECK(*hit < 1000);
  CHECK_FALSE(iterations_to(run.records, -1.0).has_value());
}

TEST_CASE("runs are reproducible and seed dependent") {
  auto matrix = shared(Ring{5});
  const Eigen::MatrixXd initial = gaussian_initial(10, 5, 11);
  auto config = make_config(GossipScheme::kChoco, matrix, CompressionSpec::rand_k(2), 50);
  const auto a = run_consensus(config, initial);
  const auto b = run_consensus(config, initial);
  CHECK(a.final_state.x == b.final_state.x);
  config.seed = 2;
  const auto c = run_consensus(config, initial);
  CHECK(a.final_state.x != c.final_state.x);
}

TEST_CASE("an oversized consensus stepsize is reported as divergence") {
  auto matrix = shared(Ring{6});
  auto config = make_config(GossipScheme::kChoco, matrix, CompressionSpec::rand_k(1), 5000);
  config.gamma = 1.0;
  CHECK_THROWS_AS(run_consensus(config, gaussian_initial(100, 6, 12)), DivergenceError);
}

TEST_CASE("invalid consensus configurations") {
  auto matrix = shared(Ring{4});
  const Eigen::MatrixXd initial = gaussian_initial(3, 4, 1);
  ConsensusConfig no_matrix;
  CHECK_THROWS_AS(run_consensus(no_matrix, initial), std::invalid_argument);
  CHECK_THROWS_AS(run_consensus(make_config(GossipScheme::kExact, matrix, {}, 5), gaussian_initial(3, 5, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_consensus(make_config(GossipScheme::kQ1, matrix, CompressionSpec::rand_k(1), 5), initial),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_consensus(make_config(GossipScheme::kQ2, matrix, CompressionSpec::top_k(1), 5), initial),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_consensus(make_config(GossipScheme::kChoco, matrix, CompressionSpec::rand_k(4), 5), initial),
                  std::invalid_argument);
  auto bad_gamma = make_config(GossipScheme::kExact, matrix, {}, 5);
  bad_gamma.gamma = 1.5;
  CHECK_THROWS_AS(run_consensus(bad_gamma, initial), std::invalid_argument);
  auto bad_eval = make_config(GossipScheme::kExact, matrix, {}, 5);
  bad_eval.eval_every = 0;
  CHECK_THROWS_AS(run_consensus(bad_eval, initial), std::invalid_argument);
}

TEST_CASE("gaussian initial values are per-node streams") {
  const Eigen::MatrixXd a = gaussian_initial(4, 3, 5);
  const Eigen::MatrixXd b = gaussian_initial(4, 5, 5);
  CHECK(a == b.leftCols(3));
  CHECK(a != gaussian_initial(4, 3, 6));
}

TEST_CASE("initial values file") {
  const std::string path = "consensus_initial_test.csv";
  {
    std::ofstream out(path);
    out << "1,2,3\n\n4 5 6\n";
  }
  const Eigen::MatrixXd x = read_initial(path, 3, 2);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(2, 1) == 6.0);
  CHECK_THROWS_AS(read_initial(path, 3, 3), std::invalid_argument);
  CHECK_THROWS_AS(read_initial(path, 2, 2), std::invalid_argument);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_initial(path, 3, 2), std::invalid_argument);
}

TEST_CASE("node view") {
  NetworkState state(gaussian_initial(3, 4, 1));
  const NodeState node = state.node(2);
  CHECK(node.x == state.x.col(2));
  CHECK(node.x_hat.isZero(0.0));
  CHECK(node.s.isZero(0.0));
  CHECK(state.dim() == 3);
  CHECK(state.nodes() == 4);
}
