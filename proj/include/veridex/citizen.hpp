// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Citizen branch. n independently initialized MLPs give n readings P of the
// same claim; a bidirectional LSTM runs over the readings as a sequence (M);
// masked self-attention over the citizen graph lets them exchange
// information (N); each citizen's final cognition is [P_j, N_j].

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "veridex/autodiff.hpp"
#include "veridex/random.hpp"

namespace veridex {

// Single hidden layer with ReLU: d -> hidden -> d.
struct CitizenMlp {
  ad::Tensor hidden_weight;  // d x hidden
  ad::Tensor hidden_bias;    // hidden
  ad::Tensor output_weight;  // hidden x d
  ad::Tensor output_bias;    // d
};

struct CitizenResolver {
  std::vector<CitizenMlp> mlps;

  std::size_t citizens() const { return mlps.size(); }
};

// Gate blocks are laid out [input | forget | candidate | output].
struct LstmCell {
  ad::Tensor input_weight;      // d x 4h
  ad::Tensor recurrent_weight;  // h x 4h
  ad::Tensor bias;              // 4h

  std::size_t input_dim() const { return input_weight.shape()[0]; }
  std::size_t hidden() const { return recurrent_weight.shape()[0]; }
};

struct SequenceEncoder {
  LstmCell forward;
  LstmCell backward;
  ad::Tensor output_weight;  // 2h x d
  ad::Tensor output_bias;    // d
};

struct GraphAttention {
  ad::Tensor query;      // d x d
  ad::Tensor key;        // d x d
  ad::Tensor value;      // d x d
  ad::Tensor adjacency;  // n x n, entries 0 or 1, symmetric, no empty rows
  bool scaled = true;    // divide scores by sqrt(d)
};

struct CitizenCognition {
  ad::Tensor initial;   // P: n x d
  ad::Tensor encoded;   // M: n x d
  ad::Tensor attended;  // N: n x d
  ad::Tensor fused;     // C: n x 2d
};

CitizenMlp init_citizen_mlp(std::size_t d, std::size_t hidden, Rng& rng);
LstmCell init_lstm_cell(std::size_t d, std::size_t hidden, Rng& rng);
SequenceEncoder init_sequence_encoder(std::size_t d, std::size_t hidden, Rng& rng);
GraphAttention init_graph_attention(std::size_t d, ad::Tensor adjacency, bool scaled, Rng& rng);
ad::Tensor full_adjacency(std::size_t n);
// Throws if `adjacency` is not an n x n symmetric 0/1 matrix, or
// DataError("isolated citizen ...") if a row has no neighbour.
void validate_adjacency(const ad::Tensor& adjacency, std::size_t n);

// Additive Gaussian input noise applied per citizen before its MLP.
struct CitizenNoise {
  Rng* rng = nullptr;
  double stddev = 0.0;
};

ad::Var diversify(ad::Var s, const CitizenResolver& resolver, CitizenNoise noise = {});
ad::Var encode_sequence(ad::Var readings, const SequenceEncoder& encoder);
ad::Var attention_weights(ad::Var encoded, const GraphAttention& attention);
ad::Var graph_attend(ad::Var encoded, const GraphAttention& attention);
ad::Var fuse_cognition(ad::Var initial, ad::Var attended);

struct LstmState {
  std::vector<double> hidden;
  std::vector<double> cell;
};

// One step of `cell` from the given state.
LstmState lstm_cell_step(std::span<const double> x, const LstmState& state, const LstmCell& cell);

// Per-position hidden states of both directions (n x h each). Row t of
// `backward` is the state after the backward cell consumed rows n-1..t.
struct BidirectionalStates {
  ad::Tensor forward;
  ad::Tensor backward;
};

ad::Tensor diversify(std::span<const double> s, const CitizenResolver& resolver);
BidirectionalStates encode_hidden(const ad::Tensor& readings, const SequenceEncoder& encoder);
ad::Tensor encode_sequence(const ad::Tensor& readings, const SequenceEncoder& encoder);
ad::Tensor attention_weights(const ad::Tensor& encoded, const GraphAttention& attention);
ad::Tensor graph_attend(const ad::Tensor& encoded, const GraphAttention& attention);
ad::Tensor fuse_cognition(const ad::Tensor& initial, const ad::Tensor& attended);
CitizenCognition perceive(std::span<const double> s, const CitizenResolver& resolver,
                          const SequenceEncoder& encoder, const GraphAttention& attention);

}  // namespace veridex
