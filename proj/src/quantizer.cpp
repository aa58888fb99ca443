#include "bid/quantizer.hpp"

#include <cmath>
#include <stdexcept>

#include "bid/errors.hpp"
#include "bid/kernels.hpp"
#include "bid/rng.hpp"

namespace bid {

void QuantizerConfig::validate() const {
  if (K_class < 1 || K_residual < 1) throw std::invalid_argument("quantizer: codebook sizes");
  if (num_rvq_layers < 0) throw std::invalid_argument("quantizer: negative layer count");
  if (code_dim < 1 || feature_dim < 1 || code_dim > feature_dim)
    throw std::invalid_argument("quantizer: need 1 <= code_dim <= feature_dim");
  if (ema_decay <= 0 || ema_decay >= 1)
    throw std::invalid_argument("quantizer: ema_decay must be in (0, 1)");
}

void create_codebook(ParamStore& store, const std::string& name, int k, int d,
                     std::uint64_t seed) {
  Mat<float>& entries = store.create(name, k, d, /*adam=*/false);
  Mat<float>& size = store.create(name + ".ema_size", 1, k, /*adam=*/false);
  Mat<float>& sum = store.create(name + ".ema_sum", k, d, /*adam=*/false);
  std::mt19937_64 g(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& x : entries.v) x = static_cast<float>(rng::uniform(g, -bound, bound));
  for (auto& x : size.v) x = 1.0f;
  sum.v = entries.v;
}

Codebook codebook_view(ParamStore& store, const std::string& name, const QuantizerConfig& cfg,
                       bool trainable) {
  Codebook cb;
  cb.entries = &store.value(name);
  cb.ema_cluster_size = &store.value(name + ".ema_size");
  cb.ema_sum = &store.value(name + ".ema_sum");
  cb.decay = static_cast<float>(cfg.ema_decay);
  cb.epsilon = static_cast<float>(cfg.ema_epsilon);
  cb.trainable = trainable;
  return cb;
}

NearestCode nearest_code(const float* f, const Mat<float>& entries) {
  if (entries.rows < 1) throw std::invalid_argument("nearest_code: empty codebook");
  for (int c = 0; c < entries.cols; ++c)
    if (!std::isfinite(f[c])) throw NumericalError("nearest_code: non-finite input");
  NearestCode best;
  best.index = 0;
  best.distance_sq = kernels::l2sq(f, entries.row(0), entries.cols);
  for (int kidx = 1; kidx < entries.rows; ++kidx) {
    const double dist = kernels::l2sq(f, entries.row(kidx), entries.cols);
    if (dist < best.distance_sq) {
      best.distance_sq = dist;
      best.index = kidx;
    }
  }
  return best;
}

LatentBundle rvq_quantize(const Mat<float>& f, const Codebook& class_cb,
                          const Codebook& residual_cb, int layers) {
  if (layers < 0) throw std::invalid_argument("rvq_quantize: negative layer count");
  if (class_cb.dim() != f.cols || (layers > 0 && residual_cb.dim() != f.cols))
    throw std::invalid_argument("rvq_quantize: code dimension mismatch");
  const int t = f.rows, d = f.cols;

  LatentBundle b;
  b.class_indices.resize(t);
  b.z0 = Mat<float>(t, d);
  for (int i = 0; i < t; ++i) {
    const NearestCode nc = nearest_code(f.row(i), *class_cb.entries);
    b.class_indices[i] = nc.index;
    std::copy_n(class_cb.entries->row(nc.index), d, b.z0.row(i));
  }

  b.z_sum = b.z0;
  Mat<float> residual = f;
  for (std::size_t i = 0; i < residual.size(); ++i) residual.v[i] -= b.z0.v[i];

  b.residual_indices.resize(layers);
  b.residuals.reserve(layers);
  for (int l = 0; l < layers; ++l) {
    Mat<float> rl(t, d);
    b.residual_indices[l].resize(t);
    for (int i = 0; i < t; ++i) {
      const NearestCode nc = nearest_code(residual.row(i), *residual_cb.entries);
      b.residual_indices[l][i] = nc.index;
      std::copy_n(residual_cb.entries->row(nc.index), d, rl.row(i));
    }
    for (std::size_t i = 0; i < residual.size(); ++i) {
      b.z_sum.v[i] += rl.v[i];
      residual.v[i] -= rl.v[i];
    }
    b.residuals.push_back(std::move(rl));
  }

  double acc = 0;
  for (int i = 0; i < t; ++i) acc += kernels::l2sq(f.row(i), b.z_sum.row(i), d);
  b.commitment = acc / t;
  return b;
}

Mat<float> codes_from_indices(const std::vector<int>& class_indices,
                              const std::vector<std::vector<int>>& residual_indices,
                              const Codebook& class_cb, const Codebook& residual_cb) {
  const int t = static_cast<int>(class_indices.size());
  const int d = class_cb.dim();
  Mat<float> z(t, d);
  for (int i = 0; i < t; ++i)
    std::copy_n(class_cb.entries->row(class_indices[i]), d, z.row(i));
  for (const auto& layer : residual_indices) {
    for (int i = 0; i < t; ++i)
      kernels::axpy(1.0f, residual_cb.entries->row(layer[i]), z.row(i), d);
  }
  return z;
}

void ema_update(Codebook& cb, const std::vector<int>& indices, const Mat<float>& feats) {
  if (!cb.trainable) throw std::invalid_argument("ema_update: codebook is frozen");
  if (static_cast<int>(indices.size()) != feats.rows)
    throw std::invalid_argument("ema_update: index/feature count mismatch");
  const int k = cb.size(), d = cb.dim();

  std::vector<float> counts(k, 0.0f);
  Mat<float> sums(k, d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= k) throw std::invalid_argument("ema_update: index out of range");
    counts[idx] += 1.0f;
    kernels::axpy(1.0f, feats.row(static_cast<int>(i)), sums.row(idx), d);
  }

  const float decay = cb.decay, one_minus = 1.0f - cb.decay;
  for (int kidx = 0; kidx < k; ++kidx) {
    float& size = cb.ema_cluster_size->at(0, kidx);
    size = decay * size + one_minus * counts[kidx];
    float* sum = cb.ema_sum->row(kidx);
    const float* batch = sums.row(kidx);
    float* entry = cb.entries->row(kidx);
    const float denom = size + cb.epsilon;
    for (int c = 0; c < d; ++c) {
      sum[c] = decay * sum[c] + one_minus * batch[c];
      entry[c] = sum[c] / denom;
    }
  }
}

UsageStats usage_stats(const std::vector<std::int64_t>& counts, double dead_threshold) {
  if (counts.empty()) throw std::invalid_argument("usage_stats: empty history");
  UsageStats s;
  s.counts = counts;
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  double entropy = 0;
  if (total > 0) {
    for (auto c : counts) {
      if (c <= 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(total);
      entropy -= p * std::log(p);
    }
  }
  s.perplexity = std::exp(entropy);
  for (std::size_t kidx = 0; kidx < counts.size(); ++kidx)
    if (static_cast<double>(counts[kidx]) < dead_threshold)
      s.dead_codes.push_back(static_cast<int>(kidx));
  return s;
}

UsageStats usage_stats(const std::vector<int>& index_history, int num_codes,
                       double dead_threshold) {
  if (index_history.empty()) throw std::invalid_argument("usage_stats: empty history");
  std::vector<std::int64_t> counts(num_codes, 0);
  for (int idx : index_history) {
    if (idx < 0 || idx >= num_codes)
      throw std::invalid_argument("usage_stats: index out of range");
    counts[idx] += 1;
  }
  return usage_stats(counts, dead_threshold);
}

void reinit_dead_codes(Codebook& cb, const std::vector<int>& dead_codes,
                       const Mat<float>& candidates, std::uint64_t seed) {
  if (candidates.rows < 1) throw std::invalid_argument("reinit_dead_codes: no candidates");
  if (candidates.cols != cb.dim())
    throw std::invalid_argument("reinit_dead_codes: candidate dimension mismatch");
  std::mt19937_64 g(seed);
  for (int kidx : dead_codes) {
    const int pick = static_cast<int>(rng::below(g, candidates.rows));
    std::copy_n(candidates.row(pick), cb.dim(), cb.entries->row(kidx));
    cb.ema_cluster_size->at(0, kidx) = 1.0f;
    std::copy_n(candidates.row(pick), cb.dim(), cb.ema_sum->row(kidx));
  }
}

}  // namespace bid
