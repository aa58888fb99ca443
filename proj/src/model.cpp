#include "bid/model.hpp"

#include <cmath>
#include <stdexcept>

#include "bid/errors.hpp"

namespace bid {

void ModelConfig::validate() const {
  if (joints < 1) throw std::invalid_argument("model: joints must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("model: feature_dim must be >= 1");
  if (enc_blocks < 1 || dec_blocks < 1) throw std::invalid_argument("model: block counts");
  if (num_classes < 1) throw std::invalid_argument("model: num_classes must be >= 1");
  quant.validate();
  if (quant.feature_dim != feature_dim)
    throw std::invalid_argument("model: quantizer feature_dim must match model feature_dim");
}

std::vector<std::uint8_t> make_mask(int t, const MaskSpec& spec, std::uint64_t seed) {
  if (t < 1) throw std::invalid_argument("make_mask: T must be >= 1");
  if (spec.mask_ratio < 0.0 || spec.mask_ratio >= 1.0)
    throw std::invalid_argument("make_mask: mask_ratio must be in [0, 1)");
  if (spec.span_len < 1) throw std::invalid_argument("make_mask: span_len must be >= 1");

  std::vector<std::uint8_t> keep(t, 1);
  std::mt19937_64 g(seed);

  if (spec.bernoulli) {
    for (int i = 0; i < t; ++i)
      if (rng::unit(g) < spec.mask_ratio) keep[i] = 0;
    return keep;
  }

  const int target = static_cast<int>(std::llround(spec.mask_ratio * t));
  if (target == 0) return keep;

  const int n_blocks = (t + spec.span_len - 1) / spec.span_len;
  std::vector<int> blocks(n_blocks);
  for (int i = 0; i < n_blocks; ++i) blocks[i] = i;
  rng::shuffle(blocks.begin(), blocks.end(), g);

  int remaining = target;
  for (int bi = 0; bi < n_blocks && remaining > 0; ++bi) {
    const int start = blocks[bi] * spec.span_len;
    const int stop = std::min(start + spec.span_len, t);
    for (int i = start; i < stop && remaining > 0; ++i) {
      keep[i] = 0;
      --remaining;
    }
  }
  return keep;
}

double total_loss(double interior, double boundary, double commitment, const LossWeights& w) {
  if (!std::isfinite(interior) || !std::isfinite(boundary) || !std::isfinite(commitment))
    throw NumericalError("total_loss: non-finite component");
  return interior + w.lambda_bound * boundary + w.lambda_com * commitment;
}

std::vector<ActionSegment> segments_from_codes(const std::vector<int>& class_indices) {
  if (class_indices.empty()) throw std::invalid_argument("segments_from_codes: empty input");
  std::vector<ActionSegment> out;
  int begin = 1;
  for (std::size_t i = 1; i <= class_indices.size(); ++i) {
    if (i == class_indices.size() || class_indices[i] != class_indices[i - 1]) {
      ActionSegment s;
      s.begin = begin;
      s.end = static_cast<int>(i);
      s.label = class_indices[i - 1];
      out.push_back(s);
      begin = static_cast<int>(i) + 1;
    }
  }
  return out;
}

std::vector<int> boundary_frame_map(const std::vector<ActionSegment>& segments, int t) {
  std::vector<int> map(t, 0);
  int expected = 1;
  for (const ActionSegment& s : segments) {
    if (s.begin != expected || s.end < s.begin || s.end > t)
      throw std::invalid_argument("boundary_frame_map: segments do not tile [1, T]");
    for (int i = s.begin; i <= s.end; ++i) map[i - 1] = s.end;
    expected = s.end + 1;
  }
  if (expected != t + 1)
    throw std::invalid_argument("boundary_frame_map: segments do not tile [1, T]");
  return map;
}

BoundaryTargets boundary_targets(const Mat<float>& frames_tj,
                                 const std::vector<ActionSegment>& segments) {
  BoundaryTargets bt;
  bt.boundary_map = boundary_frame_map(segments, frames_tj.rows);
  bt.target = Mat<float>(frames_tj.rows, frames_tj.cols);
  for (int i = 0; i < frames_tj.rows; ++i) {
    const float* src = frames_tj.row(bt.boundary_map[i] - 1);
    std::copy_n(src, frames_tj.cols, bt.target.row(i));
  }
  return bt;
}

BidNet::BidNet(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.feature_dim;
  enc_in_ = ConvLayer("enc.in", cfg_.joints, d, 3, 1);
  for (int b = 0; b < cfg_.enc_blocks; ++b)
    enc_blocks_.push_back(make_block("enc.blk" + std::to_string(b), d));
  proj_down_ = ConvLayer("proj.down", d, cfg_.quant.code_dim, 1, 1);
  proj_up_ = ConvLayer("proj.up", cfg_.quant.code_dim, d, 1, 1);
  dec_u_ = make_decoder("dec_u");
  dec_b_ = make_decoder("dec_b");
  cls_rb_ = ResBlock("cls.rb", d, 1);
  cls_out_ = ConvLayer("cls.out", d, cfg_.num_classes + 1, 1, 1);
}

BidNet::Block BidNet::make_block(const std::string& prefix, int channels) {
  Block b;
  b.pre = ConvLayer(prefix + ".pre", channels, channels, 3, 1);
  b.rb9 = ResBlock(prefix + ".rb9", channels, 9);
  b.rb3 = ResBlock(prefix + ".rb3", channels, 3);
  b.rb1 = ResBlock(prefix + ".rb1", channels, 1);
  return b;
}

void BidNet::create_block(const Block& b, ParamStore& store, std::mt19937_64& g) {
  b.pre.create(store, g);
  b.rb9.create(store, g);
  b.rb3.create(store, g);
  b.rb1.create(store, g);
}

BidNet::Decoder BidNet::make_decoder(const std::string& prefix) const {
  Decoder d;
  const int w = cfg_.feature_dim;
  d.fuse = ConvLayer(prefix + ".fuse", 2 * w, w, 1, 1);
  for (int b = 0; b < cfg_.dec_blocks; ++b)
    d.blocks.push_back(make_block(prefix + ".blk" + std::to_string(b), w));
  d.out1 = ConvLayer(prefix + ".out1", w, w, 1, 1);
  d.out2 = ConvLayer(prefix + ".out2", w, cfg_.joints, 1, 1);
  return d;
}

void BidNet::create_decoder(const Decoder& d, ParamStore& store, std::mt19937_64& g) {
  d.fuse.create(store, g);
  for (const auto& b : d.blocks) create_block(b, store, g);
  d.out1.create(store, g);
  d.out2.create(store, g);
}

void BidNet::init_pretrain_params(ParamStore& store, std::mt19937_64& g) const {
  enc_in_.create(store, g);
  for (const auto& b : enc_blocks_) create_block(b, store, g);
  proj_down_.create(store, g);
  proj_up_.create(store, g);
  create_decoder(dec_u_, store, g);
  create_decoder(dec_b_, store, g);
  create_codebook(store, "codebook_class", cfg_.quant.K_class, cfg_.quant.code_dim, g());
  create_codebook(store, "codebook_residual", cfg_.quant.K_residual, cfg_.quant.code_dim, g());
}

void BidNet::init_classifier_params(ParamStore& store, std::mt19937_64& g) const {
  cls_rb_.create(store, g);
  cls_out_.create(store, g);
}

std::vector<std::string> BidNet::pretrain_param_names(const ParamStore& store) const {
  std::vector<std::string> names;
  for (const auto& n : store.names())
    if (store.entry(n).adam) names.push_back(n);
  return names;
}

Mat<float> softmax_cols(const Mat<float>& logits) {
  Mat<float> p(logits.rows, logits.cols);
  for (int c = 0; c < logits.cols; ++c) {
    double m = logits.at(0, c);
    for (int r = 1; r < logits.rows; ++r) m = std::max(m, static_cast<double>(logits.at(r, c)));
    double z = 0;
    for (int r = 0; r < logits.rows; ++r) z += std::exp(static_cast<double>(logits.at(r, c)) - m);
    for (int r = 0; r < logits.rows; ++r)
      p.at(r, c) = static_cast<float>(std::exp(static_cast<double>(logits.at(r, c)) - m) / z);
  }
  return p;
}

Mat<float> predict_probs(const BidNet& net, ParamStore& store, const Mat<float>& s_cm) {
  Tape<float> tape;
  StoreSource src(store, /*train=*/false);
  const auto sid = tape.view(&s_cm, false);
  const auto f = net.encode(tape, src, sid);
  const auto logits = net.classify(tape, src, f);
  return softmax_cols(tape.val(logits));
}

std::vector<int> code_track(const BidNet& net, ParamStore& store, const Mat<float>& s_cm) {
  Tape<float> tape;
  StoreSource src(store, /*train=*/false);
  const auto sid = tape.view(&s_cm, false);
  const auto f = net.encode(tape, src, sid);
  const auto fl = net.project_down(tape, src, f);
  const Mat<float> f_low = tape.val(fl).transposed();
  const Mat<float>& entries = store.value("codebook_class");
  std::vector<int> codes(f_low.rows);
  for (int i = 0; i < f_low.rows; ++i) codes[i] = nearest_code(f_low.row(i), entries).index;
  return codes;
}

Mat<float> to_channels_major(const MotionSequence& seq) { return seq.frames.transposed(); }

}  // namespace bid
