#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bid/kernels.hpp"
#include "bid/mat.hpp"

namespace bid {

// Eager computation graph over Mat<T>. Each op computes its value on the
// spot and records a backward closure; backward() replays the closures in
// reverse creation order, which is a valid topological order because ops
// only consume already-created nodes. One backward pass per forward pass.
//
// Leaves can view external storage (parameters, batch inputs); views must
// outlive the tape. T is float for training and double for the
// finite-difference gradient checks.
template <class T>
class Tape {
 public:
  using Id = std::int32_t;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- leaves ---------------------------------------------------------

  Id view(const Mat<T>* m, bool needs_grad) {
    Node n;
    n.view = m;
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id own(Mat<T> m, bool needs_grad) {
    Node n;
    n.value = std::move(m);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  // --- ops ------------------------------------------------------------

  // Cross-correlation with stride 1 and zero "same" padding
  // dilation*(k-1)/2, so time length is preserved. x: Cin x T,
  // w: Cout x (Cin*k), b: 1 x Cout.
  Id conv1d(Id xid, Id wid, Id bid, int k, int dilation) {
    const Mat<T>& x = val(xid);
    const Mat<T>& w = val(wid);
    const Mat<T>& b = val(bid);
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("conv1d: kernel size must be odd");
    if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
    const int cin = x.rows, t = x.cols, cout = w.rows;
    if (w.cols != cin * k) throw std::invalid_argument("conv1d: weight shape mismatch");
    if (b.rows != 1 || b.cols != cout) throw std::invalid_argument("conv1d: bias shape mismatch");

    Mat<T> y(cout, t);
    for (int o = 0; o < cout; ++o) {
      T* yr = y.row(o);
      const T bo = b.at(0, o);
      for (int c = 0; c < t; ++c) yr[c] = bo;
      for (int i = 0; i < cin; ++i) {
        const T* xr = x.row(i);
        for (int kk = 0; kk < k; ++kk) {
          const int off = (kk - (k - 1) / 2) * dilation;
          const int lo = off < 0 ? -off : 0;
          const int hi = off > 0 ? t - off : t;
          if (lo < hi)
            kernels::axpy(w.at(o, i * k + kk), xr + lo + off, yr + lo,
                          static_cast<std::size_t>(hi - lo));
        }
      }
    }

    const Id yid = result(std::move(y), needs(xid) || needs(wid) || needs(bid));
    record(yid, [this, xid, wid, bid, yid, k, dilation] {
      const Mat<T>& gy = nodes_[yid].grad;
      const Mat<T>& x = val(xid);
      const Mat<T>& w = val(wid);
      const int cin = x.rows, t = x.cols, cout = w.rows;
      if (needs(bid)) {
        Mat<T>& gb = ensure_grad(bid);
        for (int o = 0; o < cout; ++o) {
          const T* gr = gy.row(o);
          T acc = 0;
          for (int c = 0; c < t; ++c) acc += gr[c];
          gb.at(0, o) += acc;
        }
      }
      for (int o = 0; o < cout; ++o) {
        const T* gr = gy.row(o);
        for (int i = 0; i < cin; ++i) {
          for (int kk = 0; kk < k; ++kk) {
            const int off = (kk - (k - 1) / 2) * dilation;
            const int lo = off < 0 ? -off : 0;
            const int hi = off > 0 ? t - off : t;
            if (lo >= hi) continue;
            const auto n = static_cast<std::size_t>(hi - lo);
            if (needs(wid))
              ensure_grad(wid).at(o, i * k + kk) += kernels::dot(gr + lo, x.row(i) + lo + off, n);
            if (needs(xid))
              kernels::axpy(w.at(o, i * k + kk), gr + lo, ensure_grad(xid).row(i) + lo + off, n);
          }
        }
      }
    });
    return yid;
  }

  // Per-frame affine map: a 1x1 convolution.
  Id linear(Id x, Id w, Id b) { return conv1d(x, w, b, 1, 1); }

  Id relu(Id xid) {
    const Mat<T>& x = val(xid);
    Mat<T> y(x.rows, x.cols);
    kernels::relu(x.data(), y.data(), x.size());
    const Id yid = result(std::move(y), needs(xid));
    record(yid, [this, xid, yid] {
      if (!needs(xid)) return;
      const Mat<T>& x = val(xid);
      const Mat<T>& gy = nodes_[yid].grad;
      kernels::relu_bwd(x.data(), gy.data(), ensure_grad(xid).data(), x.size());
    });
    return yid;
  }

  Id add(Id aid, Id bid) {
    const Mat<T>& a = val(aid);
    const Mat<T>& b = val(bid);
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Mat<T> y = a;
    kernels::axpy(T(1), b.data(), y.data(), y.size());
    const Id yid = result(std::move(y), needs(aid) || needs(bid));
    record(yid, [this, aid, bid, yid] {
      const Mat<T>& gy = nodes_[yid].grad;
      if (needs(aid)) kernels::axpy(T(1), gy.data(), ensure_grad(aid).data(), gy.size());
      if (needs(bid)) kernels::axpy(T(1), gy.data(), ensure_grad(bid).data(), gy.size());
    });
    return yid;
  }

  Id concat_rows(Id aid, Id bid) {
    const Mat<T>& a = val(aid);
    const Mat<T>& b = val(bid);
    if (a.cols != b.cols) throw std::invalid_argument("concat_rows: column mismatch");
    const int arows = a.rows;
    Mat<T> y(a.rows + b.rows, a.cols);
    std::copy(a.v.begin(), a.v.end(), y.v.begin());
    std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.size());
    const Id yid = result(std::move(y), needs(aid) || needs(bid));
    record(yid, [this, aid, bid, yid, arows] {
      const Mat<T>& gy = nodes_[yid].grad;
      if (needs(aid)) {
        Mat<T>& ga = ensure_grad(aid);
        kernels::axpy(T(1), gy.data(), ga.data(), ga.size());
      }
      if (needs(bid)) {
        Mat<T>& gb = ensure_grad(bid);
        kernels::axpy(T(1), gy.row(arows), gb.data(), gb.size());
      }
    });
    return yid;
  }

  // Zeroes whole time columns where keep[t] == 0.
  Id mask_cols(Id xid, std::vector<std::uint8_t> keep) {
    const Mat<T>& x = val(xid);
    if (static_cast<int>(keep.size()) != x.cols)
      throw std::invalid_argument("mask_cols: mask length mismatch");
    Mat<T> y = x;
    for (int r = 0; r < y.rows; ++r) {
      T* yr = y.row(r);
      for (int c = 0; c < y.cols; ++c)
        if (!keep[c]) yr[c] = T(0);
    }
    const Id yid = result(std::move(y), needs(xid));
    record(yid, [this, xid, yid, keep = std::move(keep)] {
      if (!needs(xid)) return;
      const Mat<T>& gy = nodes_[yid].grad;
      Mat<T>& gx = ensure_grad(xid);
      for (int r = 0; r < gy.rows; ++r) {
        const T* gr = gy.row(r);
        T* gxr = gx.row(r);
        for (int c = 0; c < gy.cols; ++c)
          if (keep[c]) gxr[c] += gr[c];
      }
    });
    return yid;
  }

  // Forward value is q; the backward gradient passes unchanged to x. The
  // quantizer trains by EMA only, so no gradient reaches the codes.
  Id straight_through(Id xid, Mat<T> q) {
    const Mat<T>& x = val(xid);
    if (!x.same_shape(q)) throw std::invalid_argument("straight_through: shape mismatch");
    const Id yid = result(std::move(q), needs(xid));
    record(yid, [this, xid, yid] {
      if (!needs(xid)) return;
      const Mat<T>& gy = nodes_[yid].grad;
      kernels::axpy(T(1), gy.data(), ensure_grad(xid).data(), gy.size());
    });
    return yid;
  }

  // x plus a constant offset; the smooth stand-in for straight_through
  // used by the finite-difference checks.
  Id add_const(Id xid, Mat<T> offset) {
    const Mat<T>& x = val(xid);
    if (!x.same_shape(offset)) throw std::invalid_argument("add_const: shape mismatch");
    Mat<T> y = x;
    kernels::axpy(T(1), offset.data(), y.data(), y.size());
    const Id yid = result(std::move(y), needs(xid));
    record(yid, [this, xid, yid] {
      if (!needs(xid)) return;
      const Mat<T>& gy = nodes_[yid].grad;
      kernels::axpy(T(1), gy.data(), ensure_grad(xid).data(), gy.size());
    });
    return yid;
  }

  Id stop_gradient(Id xid) {
    Mat<T> y = val(xid);
    return result(std::move(y), false);
  }

  // Mean squared error over rows x valid_cols elements; columns at or past
  // valid_cols are padding and contribute nothing.
  Id mse_loss(Id pid, Mat<T> target, int valid_cols) {
    const Mat<T>& p = val(pid);
    if (!p.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
    if (valid_cols < 1 || valid_cols > p.cols)
      throw std::invalid_argument("mse_loss: bad valid_cols");
    double acc = 0;
    for (int r = 0; r < p.rows; ++r) {
      const T* pr = p.row(r);
      const T* tr = target.row(r);
      for (int c = 0; c < valid_cols; ++c) {
        const double d = static_cast<double>(pr[c]) - static_cast<double>(tr[c]);
        acc += d * d;
      }
    }
    const double denom = static_cast<double>(p.rows) * valid_cols;
    Mat<T> y(1, 1);
    y.at(0, 0) = static_cast<T>(acc / denom);
    const Id yid = result(std::move(y), needs(pid));
    record(yid, [this, pid, yid, target = std::move(target), denom, valid_cols] {
      if (!needs(pid)) return;
      const T g = nodes_[yid].grad.at(0, 0);
      const Mat<T>& p = val(pid);
      Mat<T>& gp = ensure_grad(pid);
      const T scale = static_cast<T>(2.0 / denom) * g;
      for (int r = 0; r < p.rows; ++r) {
        const T* pr = p.row(r);
        const T* tr = target.row(r);
        T* gr = gp.row(r);
        for (int c = 0; c < valid_cols; ++c) gr[c] += scale * (pr[c] - tr[c]);
      }
    });
    return yid;
  }

  // Squared L2 norm per frame (summed over rows), averaged over the valid
  // columns. This is the commitment loss shape: per-frame distance to the
  // stop-gradient code, mean over frames.
  Id frame_sq_loss(Id fid, Mat<T> target, int valid_cols) {
    const Mat<T>& f = val(fid);
    if (!f.same_shape(target)) throw std::invalid_argument("frame_sq_loss: shape mismatch");
    if (valid_cols < 1 || valid_cols > f.cols)
      throw std::invalid_argument("frame_sq_loss: bad valid_cols");
    double acc = 0;
    for (int r = 0; r < f.rows; ++r) {
      const T* fr = f.row(r);
      const T* tr = target.row(r);
      for (int c = 0; c < valid_cols; ++c) {
        const double d = static_cast<double>(fr[c]) - static_cast<double>(tr[c]);
        acc += d * d;
      }
    }
    Mat<T> y(1, 1);
    y.at(0, 0) = static_cast<T>(acc / valid_cols);
    const Id yid = result(std::move(y), needs(fid));
    record(yid, [this, fid, yid, target = std::move(target), valid_cols] {
      if (!needs(fid)) return;
      const T g = nodes_[yid].grad.at(0, 0);
      const Mat<T>& f = val(fid);
      Mat<T>& gf = ensure_grad(fid);
      const T scale = static_cast<T>(2.0 / valid_cols) * g;
      for (int r = 0; r < f.rows; ++r) {
        const T* fr = f.row(r);
        const T* tr = target.row(r);
        T* gr = gf.row(r);
        for (int c = 0; c < valid_cols; ++c) gr[c] += scale * (fr[c] - tr[c]);
      }
    });
    return yid;
  }

  // Softmax cross-entropy per time column against integer labels, averaged
  // over the valid columns. logits: C x T.
  Id cross_entropy(Id lid, std::vector<int> labels, int valid_cols) {
    const Mat<T>& l = val(lid);
    if (static_cast<int>(labels.size()) != l.cols)
      throw std::invalid_argument("cross_entropy: label length mismatch");
    if (valid_cols < 1 || valid_cols > l.cols)
      throw std::invalid_argument("cross_entropy: bad valid_cols");
    for (int c = 0; c < valid_cols; ++c)
      if (labels[c] < 0 || labels[c] >= l.rows)
        throw std::invalid_argument("cross_entropy: label out of range");

    Mat<T> probs(l.rows, l.cols);
    double acc = 0;
    for (int c = 0; c < valid_cols; ++c) {
      double m = static_cast<double>(l.at(0, c));
      for (int r = 1; r < l.rows; ++r) m = std::max(m, static_cast<double>(l.at(r, c)));
      double z = 0;
      for (int r = 0; r < l.rows; ++r) z += std::exp(static_cast<double>(l.at(r, c)) - m);
      const double lse = m + std::log(z);
      for (int r = 0; r < l.rows; ++r)
        probs.at(r, c) = static_cast<T>(std::exp(static_cast<double>(l.at(r, c)) - lse));
      acc += lse - static_cast<double>(l.at(labels[c], c));
    }
    Mat<T> y(1, 1);
    y.at(0, 0) = static_cast<T>(acc / valid_cols);
    const Id yid = result(std::move(y), needs(lid));
    record(yid,
           [this, lid, yid, labels = std::move(labels), probs = std::move(probs), valid_cols] {
             if (!needs(lid)) return;
             const T g = nodes_[yid].grad.at(0, 0);
             Mat<T>& gl = ensure_grad(lid);
             const T scale = static_cast<T>(1.0 / valid_cols) * g;
             for (int c = 0; c < valid_cols; ++c) {
               for (int r = 0; r < gl.rows; ++r) {
                 T p = probs.at(r, c);
                 if (r == labels[c]) p -= T(1);
                 gl.at(r, c) += scale * p;
               }
             }
           });
    return yid;
  }

  // Weighted sum of scalar nodes (loss assembly for checks and logging).
  Id scalar_combine(const std::vector<std::pair<Id, T>>& terms) {
    double acc = 0;
    bool any = false;
    for (const auto& [id, w] : terms) {
      if (val(id).size() != 1) throw std::invalid_argument("scalar_combine: non-scalar term");
      acc += static_cast<double>(w) * static_cast<double>(val(id).at(0, 0));
      any = any || needs(id);
    }
    Mat<T> y(1, 1);
    y.at(0, 0) = static_cast<T>(acc);
    const Id yid = result(std::move(y), any);
    record(yid, [this, yid, terms] {
      const T g = nodes_[yid].grad.at(0, 0);
      for (const auto& [id, w] : terms)
        if (needs(id)) ensure_grad(id).at(0, 0) += w * g;
    });
    return yid;
  }

  // --- execution -------------------------------------------------------

  const Mat<T>& val(Id id) const {
    const Node& n = nodes_[id];
    return n.view ? *n.view : n.value;
  }

  // Empty if no gradient reached the node.
  const Mat<T>& grad_of(Id id) const { return nodes_[id].grad; }

  bool needs(Id id) const { return nodes_[id].needs_grad; }

  void add_seed(Id id, T weight) {
    Mat<T>& g = ensure_grad(id);
    if (g.size() != 1) throw std::invalid_argument("add_seed: not a scalar node");
    g.at(0, 0) += weight;
  }

  void backward() {
    for (auto i = static_cast<std::int64_t>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && !n.grad.empty()) n.back();
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<T> value;
    const Mat<T>* view = nullptr;
    Mat<T> grad;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Id result(Mat<T> value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  void record(Id id, std::function<void()> back) {
    if (nodes_[id].needs_grad) nodes_[id].back = std::move(back);
  }

  Mat<T>& ensure_grad(Id id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
      const Mat<T>& v = val(id);
      n.grad = Mat<T>(v.rows, v.cols);
    }
    return n.grad;
  }

  std::vector<Node> nodes_;
};

}  // namespace bid
