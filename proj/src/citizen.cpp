// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/citizen.hpp"

#include <cmath>

#include "veridex/errors.hpp"
#include "veridex/expert.hpp"

namespace veridex {

using ad::Tape;
using ad::Tensor;
using ad::Var;

CitizenMlp init_citizen_mlp(std::size_t d, std::size_t hidden, Rng& rng) {
  CitizenMlp mlp;
  mlp.hidden_weight = glorot_uniform(d, hidden, rng);
  mlp.hidden_bias = Tensor::zeros({hidden}, true);
  mlp.output_weight = glorot_uniform(hidden, d, rng);
  mlp.output_bias = Tensor::zeros({d}, true);
  return mlp;
}

LstmCell init_lstm_cell(std::size_t d, std::size_t hidden, Rng& rng) {
  LstmCell cell;
  cell.input_weight = glorot_uniform(d, 4 * hidden, rng);
  cell.recurrent_weight = glorot_uniform(hidden, 4 * hidden, rng);
  cell.bias = Tensor::zeros({4 * hidden}, true);
  return cell;
}

SequenceEncoder init_sequence_encoder(std::size_t d, std::size_t hidden, Rng& rng) {
  SequenceEncoder enc;
  enc.forward = init_lstm_cell(d, hidden, rng);
  enc.backward = init_lstm_cell(d, hidden, rng);
  enc.output_weight = glorot_uniform(2 * hidden, d, rng);
  enc.output_bias = Tensor::zeros({d}, true);
  return enc;
}

Tensor full_adjacency(std::size_t n) {
  return Tensor::matrix(n, n, std::vector<double>(n * n, 1.0));
}

void validate_adjacency(const Tensor& adjacency, std::size_t n) {
  if (adjacency.rank() != 2 || adjacency.shape()[0] != n || adjacency.shape()[1] != n) {
    throw DimensionError("adjacency must be " + std::to_string(n) + "x" + std::to_string(n) +
                         ", got " + ad::shape_to_string(adjacency.shape()));
  }
  for (std::size_t r = 0; r < n; ++r) {
    bool connected = false;
    for (std::size_t c = 0; c < n; ++c) {
      const double a = adjacency.at(r, c);
      if (a != 0.0 && a != 1.0) throw DataError("adjacency entries must be 0 or 1");
      if (a != adjacency.at(c, r)) throw DataError("adjacency must be symmetric");
      connected = connected || a != 0.0;
    }
    if (!connected) throw DataError("isolated citizen " + std::to_string(r) + " in adjacency");
  }
}

GraphAttention init_graph_attention(std::size_t d, Tensor adjacency, bool scaled, Rng& rng) {
  GraphAttention ga;
  ga.query = glorot_uniform(d, d, rng);
  ga.key = glorot_uniform(d, d, rng);
  ga.value = glorot_uniform(d, d, rng);
  validate_adjacency(adjacency, adjacency.rank() == 2 ? adjacency.shape()[0] : 0);
  ga.adjacency = std::move(adjacency);
  ga.scaled = scaled;
  return ga;
}

// ---------------------------------------------------------------------------

namespace {

Var mlp_forward(Var x, const CitizenMlp& mlp) {
  Tape& tape = *x.tape;
  Var h = ad::relu(ad::add(ad::matmul(x, tape.parameter(mlp.hidden_weight)),
                           tape.parameter(mlp.hidden_bias)));
  return ad::add(ad::matmul(h, tape.parameter(mlp.output_weight)), tape.parameter(mlp.output_bias));
}

struct CellVars {
  Var input_weight;
  Var recurrent_weight;
  Var bias;
  std::size_t hidden;
};

CellVars bind(Tape& tape, const LstmCell& cell) {
  return {tape.parameter(cell.input_weight), tape.parameter(cell.recurrent_weight),
          tape.parameter(cell.bias), cell.hidden()};
}

// Returns (h, c) after one step.
std::pair<Var, Var> cell_step(Var x, Var h, Var c, const CellVars& cell) {
  const std::size_t n = cell.hidden;
  Var gates = ad::add(ad::add(ad::matmul(x, cell.input_weight), ad::matmul(h, cell.recurrent_weight)),
                      cell.bias);
  Var in = ad::sigmoid(ad::slice(gates, 0, n));
  Var forget = ad::sigmoid(ad::slice(gates, n, n));
  Var candidate = ad::tanh(ad::slice(gates, 2 * n, n));
  Var out = ad::sigmoid(ad::slice(gates, 3 * n, n));
  Var c_next = ad::add(ad::mul(forget, c), ad::mul(in, candidate));
  Var h_next = ad::mul(out, ad::tanh(c_next));
  return {h_next, c_next};
}

void check_cell(const LstmCell& cell, std::size_t d) {
  const std::size_t h = cell.hidden();
  if (cell.input_weight.shape() != ad::Shape{d, 4 * h} || cell.recurrent_weight.shape() != ad::Shape{h, 4 * h} ||
      cell.bias.shape() != ad::Shape{4 * h}) {
    throw DimensionError("LSTM cell parameter shapes inconsistent with input size " + std::to_string(d));
  }
}

// Hidden sequences aligned to positions: forward[t], backward[t].
std::pair<std::vector<Var>, std::vector<Var>> run_bidirectional(Var readings, const SequenceEncoder& enc) {
  Tape& tape = *readings.tape;
  const Tensor& p = readings.value();
  if (p.rank() != 2) throw DimensionError("encode_sequence: readings must be an n x d matrix");
  const std::size_t n = p.shape()[0], d = p.shape()[1];
  check_cell(enc.forward, d);
  check_cell(enc.backward, d);
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t t = 0; t < n; ++t) rows.push_back(ad::row(readings, t));

  std::vector<Var> fwd(n), bwd(n);
  {
    const CellVars cell = bind(tape, enc.forward);
    Var h = tape.input(Tensor::zeros({cell.hidden}));
    Var c = tape.input(Tensor::zeros({cell.hidden}));
    for (std::size_t t = 0; t < n; ++t) {
      std::tie(h, c) = cell_step(rows[t], h, c, cell);
      fwd[t] = h;
    }
  }
  {
    const CellVars cell = bind(tape, enc.backward);
    Var h = tape.input(Tensor::zeros({cell.hidden}));
    Var c = tape.input(Tensor::zeros({cell.hidden}));
    for (std::size_t t = n; t-- > 0;) {
      std::tie(h, c) = cell_step(rows[t], h, c, cell);
      bwd[t] = h;
    }
  }
  return {std::move(fwd), std::move(bwd)};
}

}  // namespace

Var diversify(Var s, const CitizenResolver& resolver, CitizenNoise noise) {
  if (resolver.mlps.empty()) throw ConfigError("citizen resolver needs at least one MLP");
  Tape& tape = *s.tape;
  const std::size_t d = s.size();
  std::vector<Var> rows;
  rows.reserve(resolver.mlps.size());
  for (const CitizenMlp& mlp : resolver.mlps) {
    if (mlp.hidden_weight.shape()[0] != d || mlp.output_weight.shape()[1] != d) {
      throw DimensionError("diversify: input has " + std::to_string(d) +
                           " components, citizen MLP expects " +
                           std::to_string(mlp.hidden_weight.shape()[0]));
    }
    Var x = s;
    if (noise.rng && noise.stddev > 0.0) {
      std::vector<double> eps(d);
      for (double& e : eps) e = noise.stddev * noise.rng->normal();
      x = ad::add(s, tape.input(Tensor::vector(std::move(eps))));
    }
    rows.push_back(mlp_forward(x, mlp));
  }
  return ad::stack_rows(rows);
}

Var encode_sequence(Var readings, const SequenceEncoder& enc) {
  Tape& tape = *readings.tape;
  auto [fwd, bwd] = run_bidirectional(readings, enc);
  Var w = tape.parameter(enc.output_weight);
  Var b = tape.parameter(enc.output_bias);
  std::vector<Var> out;
  out.reserve(fwd.size());
  for (std::size_t t = 0; t < fwd.size(); ++t) {
    out.push_back(ad::add(ad::matmul(ad::concat(fwd[t], bwd[t]), w), b));
  }
  return ad::stack_rows(out);
}

Var attention_weights(Var encoded, const GraphAttention& ga) {
  Tape& tape = *encoded.tape;
  const Tensor& m = encoded.value();
  if (m.rank() != 2) throw DimensionError("graph_attend: expected an n x d matrix");
  const std::size_t n = m.shape()[0], d = m.shape()[1];
  validate_adjacency(ga.adjacency, n);
  if (ga.query.shape() != ad::Shape{d, d}) {
    throw DimensionError("graph_attend: projections must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  Var q = ad::matmul(encoded, tape.parameter(ga.query));
  Var k = ad::matmul(encoded, tape.parameter(ga.key));
  Var scores = ad::matmul(q, ad::transpose(k));
  if (ga.scaled) scores = ad::scale(scores, 1.0 / std::sqrt(static_cast<double>(d)));
  return ad::masked_softmax_rows(scores, ga.adjacency);
}

Var graph_attend(Var encoded, const GraphAttention& ga) {
  Tape& tape = *encoded.tape;
  Var weights = attention_weights(encoded, ga);
  Var v = ad::matmul(encoded, tape.parameter(ga.value));
  return ad::matmul(weights, v);
}

Var fuse_cognition(Var initial, Var attended) {
  if (initial.shape() != attended.shape()) {
    throw DimensionError("fuse_cognition: " + ad::shape_to_string(initial.shape()) + " vs " +
                         ad::shape_to_string(attended.shape()));
  }
  return ad::concat(initial, attended, 1);
}

// ---------------------------------------------------------------------------

LstmState lstm_cell_step(std::span<const double> x, const LstmState& state, const LstmCell& cell) {
  Tape tape;
  const CellVars vars = bind(tape, cell);
  check_cell(cell, x.size());
  auto [h, c] = cell_step(tape.input(Tensor::vector({x.begin(), x.end()})),
                          tape.input(Tensor::vector(state.hidden)),
                          tape.input(Tensor::vector(state.cell)), vars);
  return {{h.value().values().begin(), h.value().values().end()},
          {c.value().values().begin(), c.value().values().end()}};
}

Tensor diversify(std::span<const double> s, const CitizenResolver& resolver) {
  Tape tape;
  return diversify(tape.input(Tensor::vector({s.begin(), s.end()})), resolver).value();
}

BidirectionalStates encode_hidden(const Tensor& readings, const SequenceEncoder& enc) {
  Tape tape;
  auto [fwd, bwd] = run_bidirectional(tape.input(readings), enc);
  return {ad::stack_rows(fwd).value(), ad::stack_rows(bwd).value()};
}

Tensor encode_sequence(const Tensor& readings, const SequenceEncoder& enc) {
  Tape tape;
  return encode_sequence(tape.input(readings), enc).value();
}

Tensor attention_weights(const Tensor& encoded, const GraphAttention& ga) {
  Tape tape;
  return attention_weights(tape.input(encoded), ga).value();
}

Tensor graph_attend(const Tensor& encoded, const GraphAttention& ga) {
  Tape tape;
  return graph_attend(tape.input(encoded), ga).value();
}

Tensor fuse_cognition(const Tensor& initial, const Tensor& attended) {
  Tape tape;
  return fuse_cognition(tape.input(initial), tape.input(attended)).value();
}

CitizenCognition perceive(std::span<const double> s, const CitizenResolver& resolver,
                          const SequenceEncoder& encoder, const GraphAttention& attention) {
  Tape tape;
  Var p = diversify(tape.input(Tensor::vector({s.begin(), s.end()})), resolver);
  Var m = encode_sequence(p, encoder);
  Var n = graph_attend(m, attention);
  Var c = fuse_cognition(p, n);
  return {p.value(), m.value(), n.value(), c.value()};
}

}  // namespace veridex
