// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations written with plain loops over std::vector and no
// use of the autodiff engine. Tests compare the library against these.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "veridex/autodiff.hpp"
#include "veridex/knowledge_store.hpp"
#include "veridex/model.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Mat to_mat(const veridex::ad::Tensor& t);
Vec to_vec(const veridex::ad::Tensor& t);

Mat matmul(const Mat& a, const Mat& b);
Vec vecmat(const Vec& x, const Mat& w);      // x (1 x k) times w (k x n)
Vec matvec(const Mat& w, const Vec& x);      // w (m x k) times x (k)
Vec add(const Vec& a, const Vec& b);
Vec relu(const Vec& x);
// exp / sum evaluated in long double.
Vec softmax(const Vec& x);
double max_abs_diff(const Vec& a, const Vec& b);
double max_abs_diff(const Mat& a, const Mat& b);

Vec route(const Vec& s, const Mat& w, std::size_t top_k);
Vec expert(const Vec& s, const Mat& wi, const Mat& wo);
// Sum over every expert with weight gate[e] (zeros included).
Vec dense_mixture(const Vec& s, const Vec& gate, const std::vector<Mat>& wi, const std::vector<Mat>& wo);

struct LstmWeights {
  Mat wx;  // d x 4h
  Mat wh;  // h x 4h
  Vec b;   // 4h
};
// Gate by gate: i, f, g, o.
void lstm_step(const Vec& x, Vec& h, Vec& c, const LstmWeights& w);

// Dense attention with an explicit mask loop.
Mat attention(const Mat& m, const Mat& wq, const Mat& wk, const Mat& wv, const Mat& adjacency, bool scaled);

// Whole model from its parameter tensors.
Vec forward(const veridex::EccwModel& model, const Vec& s);

// Chunk ids of the top_n cosine matches, scanning in insertion order.
std::vector<std::string> brute_force_top(const std::vector<veridex::KnowledgeChunk>& chunks, const Vec& query,
                                         std::size_t top_n);

// Central differences for every element of every trainable parameter.
// Returns the worst relative error |a - n| / max(|a|, |n|, 1e-6).
struct GradCheck {
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
};
GradCheck check_model_gradients(veridex::EccwModel& model, const Vec& s, std::size_t label, double step = 1e-5);

// Generic version over a scalar function of a list of tensors.
GradCheck check_gradients(std::vector<veridex::ad::Tensor*> params,
                          const std::function<veridex::ad::Var(veridex::ad::Tape&)>& loss, double step = 1e-5);

std::filesystem::path source_dir();
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);
// Compares against tests/golden/<name>; rewrites it when VERIDEX_UPDATE_GOLDEN=1.
bool matches_golden(const std::string& name, const std::string& actual);

}  // namespace oracle
