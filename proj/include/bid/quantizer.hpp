#pragma once

#include <cstdint>
#include <vector>

#include "bid/mat.hpp"
#include "bid/params.hpp"

namespace bid {

struct QuantizerConfig {
  int K_class = 64;        // class codebook size (pre-action classes)
  int K_residual = 256;    // residual codebook size, shared by all RVQ layers
  int num_rvq_layers = 4;  // L
  int code_dim = 16;       // d, the quantization bottleneck
  int feature_dim = 256;   // D
  double ema_decay = 0.99;
  double ema_epsilon = 1e-5;
  double dead_code_threshold = 1.0;  // uses per window below which a code is dead
  int dead_code_interval = 256;      // batches per usage window; 0 disables reinit

  void validate() const;
};

// Non-owning view over one codebook's arrays. The arrays live in a
// ParamStore (serialized with the checkpoint) or in test-local Mats.
struct Codebook {
  Mat<float>* entries = nullptr;           // K x d
  Mat<float>* ema_cluster_size = nullptr;  // 1 x K
  Mat<float>* ema_sum = nullptr;           // K x d
  float decay = 0.99f;
  float epsilon = 1e-5f;
  bool trainable = true;

  int size() const { return entries->rows; }
  int dim() const { return entries->cols; }
};

// Creates "name", "name.ema_size", "name.ema_sum" in the store (adam=false;
// codebooks train by EMA only). Entries start uniform in
// [-1/sqrt(d), 1/sqrt(d)]; accumulators start at one phantom count of the
// initial entry so untouched codes hold their value.
void create_codebook(ParamStore& store, const std::string& name, int k, int d,
                     std::uint64_t seed);
Codebook codebook_view(ParamStore& store, const std::string& name, const QuantizerConfig& cfg,
                       bool trainable);

struct NearestCode {
  int index = 0;
  double distance_sq = 0;
};

// Exhaustive argmin over squared L2 distance; ties break to the lowest
// index.
NearestCode nearest_code(const float* f, const Mat<float>& entries);

// Per-frame code indices and vectors for one sequence, frame-major.
struct LatentBundle {
  std::vector<int> class_indices;         // T, into the class codebook
  std::vector<std::vector<int>> residual_indices;  // L x T, into the residual codebook
  Mat<float> z0;                          // T x d
  std::vector<Mat<float>> residuals;      // L mats, T x d
  Mat<float> z_sum;                       // T x d, z0 + sum of residuals
  double commitment = 0;                  // mean over frames of |f - z_sum|^2

  int length() const { return z0.rows; }
};

// Layer 0 quantizes f with the class codebook; layers 1..L quantize the
// remaining residual with the shared residual codebook. layers == 0 leaves
// z_sum = z0 (the no-RVQ ablation).
LatentBundle rvq_quantize(const Mat<float>& f, const Codebook& class_cb,
                          const Codebook& residual_cb, int layers);

// z_sum for externally fixed index assignments (same summation order as
// rvq_quantize).
Mat<float> codes_from_indices(const std::vector<int>& class_indices,
                              const std::vector<std::vector<int>>& residual_indices,
                              const Codebook& class_cb, const Codebook& residual_cb);

// EMA re-estimation from one batch of assignments:
//   size_k <- decay*size_k + (1-decay)*count_k
//   sum_k  <- decay*sum_k  + (1-decay)*sum of assigned features
//   entry_k <- sum_k / (size_k + epsilon)
// feats is N x d with indices[i] the code assigned to row i.
void ema_update(Codebook& cb, const std::vector<int>& indices, const Mat<float>& feats);

struct UsageStats {
  std::vector<std::int64_t> counts;
  double perplexity = 1.0;
  std::vector<int> dead_codes;
};

UsageStats usage_stats(const std::vector<std::int64_t>& counts, double dead_threshold);
UsageStats usage_stats(const std::vector<int>& index_history, int num_codes,
                       double dead_threshold);

// Replaces each dead entry with a seeded random candidate row and resets its
// accumulators; live codes are untouched.
void reinit_dead_codes(Codebook& cb, const std::vector<int>& dead_codes,
                       const Mat<float>& candidates, std::uint64_t seed);

}  // namespace bid
