#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bid/kernels.hpp"
#include "bid/params.hpp"
#include "bid/rng.hpp"
#include "bid/tape.hpp"

namespace bid {

// Supplies tape leaves for named parameters. Training binds views straight
// into the float store; the gradient checks bind double copies supplied by
// the harness.
template <class T>
class ParamSource {
 public:
  virtual ~ParamSource() = default;
  virtual typename Tape<T>::Id leaf(Tape<T>& tape, const std::string& name) = 0;
};

class StoreSource final : public ParamSource<float> {
 public:
  StoreSource(ParamStore& store, bool train) : store_(&store), train_(train) {}

  Tape<float>::Id leaf(Tape<float>& tape, const std::string& name) override {
    const auto id = tape.view(&store_->value(name), train_);
    if (train_) bound_.emplace_back(name, id);
    return id;
  }

  // Adds this tape's parameter gradients into the accumulator.
  void collect(const Tape<float>& tape, GradBuffers& grads) const {
    for (const auto& [name, id] : bound_) {
      const Mat<float>& g = tape.grad_of(id);
      if (g.empty()) continue;
      Mat<float>* acc = grads.find(name);
      if (acc) kernels::axpy(1.0f, g.data(), acc->data(), g.size());
    }
  }

 private:
  ParamStore* store_;
  bool train_;
  std::vector<std::pair<std::string, Tape<float>::Id>> bound_;
};

// Binds leaves from a caller-owned vector of mats aligned with a name list;
// used by grad checks to perturb parameters.
template <class T>
class VecSource final : public ParamSource<T> {
 public:
  VecSource(const std::vector<std::string>& names, const std::vector<Mat<T>>* values)
      : values_(values), ids_(names.size(), -1) {
    for (std::size_t i = 0; i < names.size(); ++i) index_.emplace(names[i], i);
  }

  typename Tape<T>::Id leaf(Tape<T>& tape, const std::string& name) override {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("VecSource: unknown parameter " + name);
    if (ids_[it->second] < 0) ids_[it->second] = tape.own((*values_)[it->second], true);
    return ids_[it->second];
  }

  // -1 where a parameter was never bound by the forward pass.
  const std::vector<typename Tape<T>::Id>& leaf_ids() const { return ids_; }
  void reset() { std::fill(ids_.begin(), ids_.end(), -1); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  const std::vector<Mat<T>>* values_;
  std::vector<typename Tape<T>::Id> ids_;
};

// 1-D convolution layer; weights are fan-in-scaled uniform at init.
struct ConvLayer {
  std::string name;
  int in_ch = 0;
  int out_ch = 0;
  int k = 1;
  int dilation = 1;

  ConvLayer() = default;
  ConvLayer(std::string n, int in, int out, int kernel, int dil = 1)
      : name(std::move(n)), in_ch(in), out_ch(out), k(kernel), dilation(dil) {}

  void create(ParamStore& store, std::mt19937_64& g) const {
    Mat<float>& w = store.create(name + ".w", out_ch, in_ch * k);
    Mat<float>& b = store.create(name + ".b", 1, out_ch);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * k);
    for (auto& x : w.v) x = static_cast<float>(rng::uniform(g, -bound, bound));
    for (auto& x : b.v) x = static_cast<float>(rng::uniform(g, -bound, bound));
  }

  template <class T>
  typename Tape<T>::Id apply(Tape<T>& tape, ParamSource<T>& src,
                             typename Tape<T>::Id x) const {
    return tape.conv1d(x, src.leaf(tape, name + ".w"), src.leaf(tape, name + ".b"), k,
                       dilation);
  }
};

// Pre-activation residual block: x + c2(relu(c1(relu(x)))) with a dilated
// k=3 inner convolution and a 1x1 output convolution.
struct ResBlock {
  ConvLayer c1;
  ConvLayer c2;

  ResBlock() = default;
  ResBlock(const std::string& name, int channels, int dilation)
      : c1(name + ".c1", channels, channels, 3, dilation),
        c2(name + ".c2", channels, channels, 1, 1) {}

  void create(ParamStore& store, std::mt19937_64& g) const {
    c1.create(store, g);
    c2.create(store, g);
  }

  template <class T>
  typename Tape<T>::Id apply(Tape<T>& tape, ParamSource<T>& src,
                             typename Tape<T>::Id x) const {
    auto h = tape.relu(x);
    h = c1.apply(tape, src, h);
    h = tape.relu(h);
    h = c2.apply(tape, src, h);
    return tape.add(x, h);
  }
};

}  // namespace bid
