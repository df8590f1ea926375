// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "oracles.hpp"
#include "veridex/decision.hpp"
#include "veridex/errors.hpp"
#include "veridex/model.hpp"

using namespace veridex;
using veridex::ad::Tensor;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

std::vector<double> fixture_vector(std::size_t d) {
  std::vector<double> s(d);
  for (std::size_t k = 0; k < d; ++k) s[k] = std::sin(static_cast<double>(k + 1));
  return s;
}

ModelConfig toy_config(Variant v = Variant::kFull) {
  ModelConfig c;
  c.d = 8;
  c.experts = 3;
  c.top_k = 2;
  c.citizens = 3;
  c.classes = 2;
  c.variant = v;
  return c;
}

// Closed-form voting step evaluated with plain loops.
std::vector<double> closed_form(const std::optional<Tensor>& we, const std::vector<double>& e,
                                const std::optional<Tensor>& wc, const std::vector<double>& dbar) {
  const std::size_t c = e.empty() ? dbar.size() : e.size();
  std::vector<double> z(c, 0.0);
  if (!e.empty()) {
    for (std::size_t i = 0; i < c; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < c; ++k) acc += (we ? we->at(i, k) : (i == k ? 1.0 : 0.0)) * e[k];
      z[i] += acc;
    }
  }
  if (!dbar.empty()) {
    std::vector<double> zc(c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < c; ++k) acc += (wc ? wc->at(i, k) : (i == k ? 1.0 : 0.0)) * dbar[k];
      zc[i] = acc;
    }
    if (e.empty()) {
      z = zc;
    } else {
      for (std::size_t i = 0; i < c; ++i) z[i] = z[i] + zc[i];
    }
  }
  return ad::softmax_values(z);
}

}  // namespace

TEST_CASE("expert decide examples") {
  LinearHead zero{Tensor::zeros({4, 3}), Tensor::zeros({3})};
  for (double p : expert_decide(std::vector<double>{1, 2, 3, 4}, zero)) CHECK(std::abs(p - 1.0 / 3.0) <= 1e-15);

  LinearHead fixed{Tensor::matrix(1, 2, {5.0, -5.0}), Tensor::zeros({2})};
  const auto p = expert_decide(std::vector<double>{1.0}, fixed);
  const double want = 1.0 / (1.0 + std::exp(-10.0));
  CHECK(std::abs(p[0] - want) <= 1e-15);
  CHECK(std::abs(p[0] - 0.99995) <= 1e-5);
  CHECK(std::abs(p[1] - 0.00005) <= 1e-5);

  Rng rng(1);
  LinearHead h = init_linear_head(6, 4, rng);
  const auto q = expert_decide(random_vec(6, rng), h);
  double total = 0.0;
  for (double x : q) total += x;
  CHECK(std::abs(total - 1.0) <= 1e-12);
  CHECK_THROWS_AS(expert_decide(std::vector<double>(5, 0.0), h), DimensionError);
}

TEST_CASE("citizen decide matches the head oracle") {
  Rng rng(2);
  LinearHead h = init_linear_head(8, 3, rng);
  h.bias = Tensor::vector(random_vec(3, rng));
  const auto row = random_vec(8, rng);
  const auto want = oracle::softmax(oracle::add(oracle::vecmat(row, oracle::to_mat(h.weight)), oracle::to_vec(h.bias)));
  CHECK(oracle::max_abs_diff(citizen_decide(row, h), want) <= 1e-12);
  CHECK(citizen_decide(row, h) == citizen_decide(row, h));
  LinearHead zero{Tensor::zeros({8, 2}), Tensor::zeros({2})};
  CHECK(citizen_decide(row, zero) == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(citizen_decide(std::vector<double>(4, 0.0), h), DimensionError);
}

TEST_CASE("collective vote examples") {
  VotingWeights strong{Tensor::matrix(2, 2, {50, 0, 0, 50}), Tensor::zeros({2, 2})};
  const Tensor d = Tensor::matrix(2, 2, {0.9, 0.1, 0.8, 0.2});
  CHECK(collective_vote(std::vector<double>{0.0, 1.0}, d, strong).label == 1);

  VotingWeights id = identity_voting(2, true, true, false);
  const Verdict u = collective_vote(std::vector<double>{0.5, 0.5}, Tensor::matrix(2, 2, {0.5, 0.5, 0.5, 0.5}), id);
  CHECK(u.probabilities == std::vector<double>{0.5, 0.5});
  CHECK(u.label == 0);
  CHECK(u.label_name() == "non-rumor");

  CHECK_THROWS(collective_vote(std::vector<double>{0.5, 0.5}, Tensor::zeros({0, 2}), id));
}

TEST_CASE("collective vote matches mean-affine-softmax") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto e = oracle::softmax(random_vec(3, rng));
    oracle::Mat rows;
    std::vector<double> flat;
    for (int j = 0; j < 3; ++j) {
      rows.push_back(oracle::softmax(random_vec(3, rng)));
      flat.insert(flat.end(), rows.back().begin(), rows.back().end());
    }
    VotingWeights w{Tensor::matrix(3, 3, random_vec(9, rng)), Tensor::matrix(3, 3, random_vec(9, rng))};
    oracle::Vec mean(3, 0.0);
    for (const auto& r : rows)
      for (std::size_t k = 0; k < 3; ++k) mean[k] += r[k] / 3.0;
    const auto want = oracle::softmax(
        oracle::add(oracle::matvec(oracle::to_mat(*w.expert), e), oracle::matvec(oracle::to_mat(*w.citizen), mean)));
    const Verdict v = collective_vote(e, Tensor::matrix(3, 3, flat), w);
    CHECK(oracle::max_abs_diff(v.probabilities, want) <= 1e-12);
    CHECK(oracle::max_abs_diff(collective_vote(e, rows, w).probabilities, want) <= 1e-12);
  }
}

TEST_CASE("verdict label ties go to the lower class and shifts keep it") {
  const Verdict v = make_verdict(std::vector<double>{0.4, 0.4, 0.2}, {});
  CHECK(v.label == 0);
  CHECK(v.confidence == 0.4);
  VotingWeights id = identity_voting(3, true, true, false);
  const std::vector<double> e{0.2, 0.5, 0.3};
  const Tensor d = Tensor::matrix(1, 3, {0.1, 0.3, 0.6});
  const auto base = collective_vote(e, d, id);
  const Tensor shifted = Tensor::matrix(1, 3, {7.1, 7.3, 7.6});
  CHECK(collective_vote(std::vector<double>{5.2, 5.5, 5.3}, shifted, id).label == base.label);
}

TEST_CASE("forward probabilities form a distribution and repeat exactly") {
  const EccwModel m = EccwModel::initialize(toy_config(), 11);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_vec(8, rng);
    const Verdict a = forward_full(s, m);
    double total = 0.0;
    for (double p : a.probabilities) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    CHECK(forward_full(s, m).probabilities == a.probabilities);
  }
}

TEST_CASE("large parameters stay finite") {
  EccwModel m = EccwModel::initialize(toy_config(), 12);
  for (auto& p : m.parameters())
    for (double& x : p.tensor->values()) x *= 1e3;
  const Verdict v = forward_full(fixture_vector(8), m);
  for (double p : v.probabilities) CHECK(std::isfinite(p));
}

TEST_CASE("forward matches the composed oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EccwModel m = EccwModel::initialize(toy_config(), seed);
    Rng rng(seed);
    for (auto& p : m.parameters())
      if (p.name.find("bias") != std::string::npos)
        for (double& x : p.tensor->values()) x = rng.uniform(-0.5, 0.5);
    const auto s = random_vec(8, rng);
    CHECK(oracle::max_abs_diff(forward_full(s, m).probabilities, oracle::forward(m, s)) <= 1e-10);
  }
}

TEST_CASE("seed 42 toy verdict golden") {
  ModelConfig c;
  c.d = 8;
  c.experts = 2;
  c.top_k = 2;
  c.citizens = 2;
  c.classes = 2;
  const EccwModel m = EccwModel::initialize(c, 42);
  const auto s = fixture_vector(8);
  const auto probs = oracle::forward(m, s);
  nlohmann::ordered_json j;
  j["input"] = s;
  j["probabilities"] = probs;
  CHECK(oracle::matches_golden("forward_seed42.json", j.dump(2) + "\n"));

  const auto golden = nlohmann::json::parse(oracle::read_file(oracle::source_dir() / "tests/golden/forward_seed42.json"));
  const auto locked = golden["probabilities"].get<std::vector<double>>();
  const Verdict v = forward_full(s, m);
  CHECK(oracle::max_abs_diff(v.probabilities, locked) <= 1e-12);
  CHECK(v.label == (locked[1] > locked[0] ? 1u : 0u));
}

TEST_CASE("ablation variants reduce to their closed forms") {
  Rng rng(5);
  const auto s = random_vec(8, rng);
  EccwModel full = EccwModel::initialize(toy_config(), 21);
  for (const Variant v : kAllVariants) {
    EccwModel m = EccwModel::initialize(toy_config(v), 21);
    if (m.voting.expert) m.voting.expert = Tensor::matrix(2, 2, {1.3, -0.2, 0.4, 0.9});
    if (m.voting.citizen && v != Variant::kNoWeightedVoting) m.voting.citizen = Tensor::matrix(2, 2, {0.7, 0.3, -0.6, 1.1});
    ad::Tape tape;
    const ForwardTrace t = forward_trace(tape.input(Tensor::vector(s)), m);
    std::vector<double> e, dbar;
    if (t.expert_dist) e.assign(t.expert_dist->value().values().begin(), t.expert_dist->value().values().end());
    if (t.citizen_mean) dbar.assign(t.citizen_mean->value().values().begin(), t.citizen_mean->value().values().end());
    const auto got = std::vector<double>(t.probabilities.value().values().begin(), t.probabilities.value().values().end());
    CAPTURE(variant_name(v));
    switch (v) {
      case Variant::kFull:
        CHECK(!e.empty());
        CHECK(!dbar.empty());
        break;
      case Variant::kNoCitizen:
        CHECK(dbar.empty());
        CHECK(!m.citizen);
        CHECK(m.parameter_count("citizen.") == 0);
        break;
      case Variant::kNoExpert:
        CHECK(e.empty());
        CHECK(!m.expert);
        CHECK(m.parameter_count("expert.") == 0);
        break;
      case Variant::kNoWeightedVoting:
        CHECK(m.voting.expert->values().size() == 4);
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t k = 0; k < 2; ++k) CHECK(m.voting.citizen->at(i, k) == (i == k ? 1.0 : 0.0));
        CHECK(!m.voting.citizen->requires_grad());
        break;
    }
    if (v == Variant::kNoWeightedVoting) {
      m.voting.expert = Tensor::identity(2);
      ad::Tape t2;
      const auto p2 = forward_trace(t2.input(Tensor::vector(s)), m).probabilities.value();
      std::vector<double> z(2);
      for (std::size_t i = 0; i < 2; ++i) z[i] = e[i] + dbar[i];
      CHECK(std::vector<double>(p2.values().begin(), p2.values().end()) == ad::softmax_values(z));
    } else {
      CHECK(got == closed_form(m.voting.expert, e, m.voting.citizen, dbar));
    }
  }
  // Kept branches share their initial weights with the full model.
  const EccwModel nc = EccwModel::initialize(toy_config(Variant::kNoCitizen), 21);
  CHECK(nc.expert->router.weight == full.expert->router.weight);
  const EccwModel ne = EccwModel::initialize(toy_config(Variant::kNoExpert), 21);
  CHECK(ne.citizen->encoder.output_weight == full.citizen->encoder.output_weight);
}

TEST_CASE("toy model gradients match finite differences") {
  EccwModel m = EccwModel::initialize(toy_config(), 31);
  Rng rng(6);
  for (auto& p : m.parameters())
    if (p.name.find("bias") != std::string::npos)
      for (double& x : p.tensor->values()) x = rng.uniform(-0.3, 0.3);
  const auto r = oracle::check_model_gradients(m, random_vec(8, rng), 1);
  CAPTURE(r.worst_name);
  CHECK(r.checked == m.parameter_count());
  CHECK(r.worst < 1e-4);
}
