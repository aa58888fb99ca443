#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "bid/layers.hpp"
#include "bid/motion.hpp"
#include "bid/quantizer.hpp"

namespace bid {

struct ModelConfig {
  int joints = 75;       // input channels J
  int feature_dim = 256; // D
  int enc_blocks = 2;
  int dec_blocks = 2;
  int num_classes = 4;   // classifier emits num_classes + 1 (background last)
  QuantizerConfig quant;

  int background_label() const { return num_classes; }
  void validate() const;
};

struct MaskSpec {
  double mask_ratio = 0.4;
  int span_len = 8;
  bool bernoulli = false;  // per-frame coin flips instead of contiguous spans
};

// keep[t] == 1 for visible frames. Span mode places round(ratio*T) zeros as
// shuffled span_len-aligned blocks, truncating the last span to hit the
// count exactly.
std::vector<std::uint8_t> make_mask(int t, const MaskSpec& spec, std::uint64_t seed);

struct LossWeights {
  double lambda_bound = 1.0;
  double lambda_com = 0.05;
};

double total_loss(double interior, double boundary, double commitment, const LossWeights& w);

// Maximal runs of equal indices as 1-based segments labeled by the code id;
// the segments tile [1, T].
std::vector<ActionSegment> segments_from_codes(const std::vector<int>& class_indices);

// boundary_map[i] = end frame (1-based) of the segment containing frame i+1.
// Segments must tile [1, t].
std::vector<int> boundary_frame_map(const std::vector<ActionSegment>& segments, int t);

struct BoundaryTargets {
  Mat<float> target;              // T x J, row i = input row boundary_map[i]-1
  std::vector<int> boundary_map;  // T, 1-based
};

BoundaryTargets boundary_targets(const Mat<float>& frames_tj,
                                 const std::vector<ActionSegment>& segments);

// The BID network: temporal-convolutional encoder, 16-d projection pair
// around the quantizer, two decoders sharing one architecture, and the
// fine-tuning classifier head. All layers preserve T.
class BidNet {
 public:
  explicit BidNet(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  // Parameter creation; call order fixes the init stream.
  void init_pretrain_params(ParamStore& store, std::mt19937_64& g) const;
  void init_classifier_params(ParamStore& store, std::mt19937_64& g) const;
  // Encoder + classifier only (the fine-tune store); copies nothing.
  std::vector<std::string> pretrain_param_names(const ParamStore& store) const;

  template <class T>
  typename Tape<T>::Id encode(Tape<T>& tape, ParamSource<T>& src,
                              typename Tape<T>::Id s) const {
    auto h = enc_in_.apply(tape, src, s);
    h = tape.relu(h);
    for (const auto& blk : enc_blocks_) h = apply_block(tape, src, blk, h);
    return h;
  }

  template <class T>
  typename Tape<T>::Id project_down(Tape<T>& tape, ParamSource<T>& src,
                                    typename Tape<T>::Id f) const {
    return proj_down_.apply(tape, src, f);
  }

  template <class T>
  typename Tape<T>::Id project_up(Tape<T>& tape, ParamSource<T>& src,
                                  typename Tape<T>::Id z) const {
    return proj_up_.apply(tape, src, z);
  }

  // input is the 2D-channel concatenation (features || codes).
  template <class T>
  typename Tape<T>::Id decode_interior(Tape<T>& tape, ParamSource<T>& src,
                                       typename Tape<T>::Id input) const {
    return apply_decoder(tape, src, dec_u_, input);
  }

  template <class T>
  typename Tape<T>::Id decode_boundary(Tape<T>& tape, ParamSource<T>& src,
                                       typename Tape<T>::Id input) const {
    return apply_decoder(tape, src, dec_b_, input);
  }

  template <class T>
  typename Tape<T>::Id classify(Tape<T>& tape, ParamSource<T>& src,
                                typename Tape<T>::Id f) const {
    auto h = cls_rb_.apply(tape, src, f);
    return cls_out_.apply(tape, src, h);
  }

 private:
  struct Block {
    ConvLayer pre;
    ResBlock rb9;
    ResBlock rb3;
    ResBlock rb1;
  };

  struct Decoder {
    ConvLayer fuse;  // 2D -> D pointwise
    std::vector<Block> blocks;
    ConvLayer out1;  // D -> D pointwise
    ConvLayer out2;  // D -> J pointwise
  };

  static Block make_block(const std::string& prefix, int channels);
  static void create_block(const Block& b, ParamStore& store, std::mt19937_64& g);
  Decoder make_decoder(const std::string& prefix) const;
  static void create_decoder(const Decoder& d, ParamStore& store, std::mt19937_64& g);

  template <class T>
  static typename Tape<T>::Id apply_block(Tape<T>& tape, ParamSource<T>& src, const Block& b,
                                          typename Tape<T>::Id x) {
    auto h = b.pre.apply(tape, src, x);
    h = b.rb9.apply(tape, src, h);
    h = b.rb3.apply(tape, src, h);
    return b.rb1.apply(tape, src, h);
  }

  template <class T>
  static typename Tape<T>::Id apply_decoder(Tape<T>& tape, ParamSource<T>& src,
                                            const Decoder& d, typename Tape<T>::Id input) {
    auto h = d.fuse.apply(tape, src, input);
    for (const auto& blk : d.blocks) h = apply_block(tape, src, blk, h);
    h = d.out1.apply(tape, src, h);
    h = tape.relu(h);
    return d.out2.apply(tape, src, h);
  }

  ModelConfig cfg_;
  ConvLayer enc_in_;
  std::vector<Block> enc_blocks_;
  ConvLayer proj_down_;
  ConvLayer proj_up_;
  Decoder dec_u_;
  Decoder dec_b_;
  ResBlock cls_rb_;
  ConvLayer cls_out_;
};

// Which loss terms and quantizer pieces a run uses; the ablation variants
// toggle these.
struct StepOptions {
  LossWeights weights;
  int rvq_layers = 4;
  bool use_interior = true;
  bool use_boundary = true;
  int valid_cols = 0;  // frames that count toward losses; 0 means all
};

// Linearization data for the finite-difference surrogate: the decoder path
// sees z = f_low + offset (identity gradient, matching straight-through)
// while the commitment target stays the frozen code value.
template <class T>
struct FrozenCodes {
  Mat<T> z_value;          // d x T
  Mat<T> offset;           // d x T, z_value - f_low at the linearization point
  Mat<T> boundary_target;  // J x T
};

template <class T>
struct PretrainNodes {
  typename Tape<T>::Id interior = -1;
  typename Tape<T>::Id boundary = -1;
  typename Tape<T>::Id commitment = -1;
  LatentBundle bundle;   // live mode only
  Mat<float> f_low_fm;   // live mode only: projected features, T x d frame-major
};

// One sequence's pretraining forward. s_cm is J x T channels-major. In live
// mode (float) the quantizer runs for real and the bundle is returned; with
// frozen codes the quantization is replaced by the smooth surrogate so the
// whole graph is finite-difference checkable.
template <class T>
PretrainNodes<T> pretrain_forward(Tape<T>& tape, ParamSource<T>& src, const BidNet& net,
                                  const Mat<T>& s_cm, const std::vector<std::uint8_t>& keep,
                                  const StepOptions& opt, const Codebook* class_cb,
                                  const Codebook* residual_cb,
                                  const FrozenCodes<T>* frozen) {
  const int t_len = s_cm.cols;
  const int valid = opt.valid_cols > 0 ? opt.valid_cols : t_len;
  const auto sid = tape.view(&s_cm, false);
  const auto f = net.encode(tape, src, sid);
  const auto fl = net.project_down(tape, src, f);

  PretrainNodes<T> out;
  typename Tape<T>::Id zq = -1;
  Mat<T> boundary_target;  // J x T

  if (frozen != nullptr) {
    zq = tape.add_const(fl, frozen->offset);
    out.commitment = tape.frame_sq_loss(fl, frozen->z_value, valid);
    boundary_target = frozen->boundary_target;
  } else {
    if constexpr (std::is_same_v<T, float>) {
      const Mat<float>& fl_val = tape.val(fl);
      out.f_low_fm = fl_val.transposed();  // T x d
      const Mat<float>& f_low_fm = out.f_low_fm;
      out.bundle = rvq_quantize(f_low_fm, *class_cb, *residual_cb, opt.rvq_layers);
      Mat<float> z_cm = out.bundle.z_sum.transposed();  // d x T
      out.commitment = tape.frame_sq_loss(fl, z_cm, valid);
      zq = tape.straight_through(fl, std::move(z_cm));
      if (opt.use_boundary) {
        std::vector<int> codes(out.bundle.class_indices.begin(),
                               out.bundle.class_indices.begin() + valid);
        const auto segs = segments_from_codes(codes);
        const auto bmap = boundary_frame_map(segs, valid);
        boundary_target = Mat<T>(s_cm.rows, t_len);
        for (int c = 0; c < valid; ++c) {
          const int srccol = bmap[c] - 1;
          for (int r = 0; r < s_cm.rows; ++r)
            boundary_target.at(r, c) = s_cm.at(r, srccol);
        }
      }
    } else {
      throw std::invalid_argument("pretrain_forward: live quantization requires float");
    }
  }

  const auto z_up = net.project_up(tape, src, zq);

  if (opt.use_interior) {
    const auto f_masked = tape.mask_cols(f, keep);
    const auto cat = tape.concat_rows(f_masked, z_up);
    const auto s_pred = net.decode_interior(tape, src, cat);
    out.interior = tape.mse_loss(s_pred, s_cm, valid);
  }

  if (opt.use_boundary) {
    const auto cat = tape.concat_rows(f, z_up);
    const auto se_pred = net.decode_boundary(tape, src, cat);
    out.boundary = tape.mse_loss(se_pred, std::move(boundary_target), valid);
  }

  return out;
}

// Frame-classification forward; returns the cross-entropy loss node and
// optionally the logits node.
template <class T>
typename Tape<T>::Id finetune_forward(Tape<T>& tape, ParamSource<T>& src, const BidNet& net,
                                      const Mat<T>& s_cm, std::vector<int> labels,
                                      int valid_cols, typename Tape<T>::Id* logits_out) {
  const auto sid = tape.view(&s_cm, false);
  const auto f = net.encode(tape, src, sid);
  const auto logits = net.classify(tape, src, f);
  if (logits_out) *logits_out = logits;
  const int valid = valid_cols > 0 ? valid_cols : s_cm.cols;
  return tape.cross_entropy(logits, std::move(labels), valid);
}

// Column-wise softmax (inference path).
Mat<float> softmax_cols(const Mat<float>& logits);

// Inference helpers over a float store. s_cm is J x T.
Mat<float> predict_probs(const BidNet& net, ParamStore& store, const Mat<float>& s_cm);
std::vector<int> code_track(const BidNet& net, ParamStore& store, const Mat<float>& s_cm);

// J x T channels-major view of a motion sequence (transposed copy).
Mat<float> to_channels_major(const MotionSequence& seq);

}  // namespace bid
