#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bid/mat.hpp"

namespace bid {

// T x J joint values over time, frame-major. Values are float so the
// on-disk format round-trips bit-exactly.
struct MotionSequence {
  Mat<float> frames;           // rows = T, cols = J
  int frame_rate = 30;         // metadata only

  int length() const { return frames.rows; }
  int joints() const { return frames.cols; }
};

// 1-based inclusive frame interval with a class label. The background id
// (= number of action classes) never appears in stored segment lists; it
// fills the gaps.
struct ActionSegment {
  int begin = 1;
  int end = 1;
  int label = 0;

  int length() const { return end - begin + 1; }
  bool operator==(const ActionSegment& o) const {
    return begin == o.begin && end == o.end && label == o.label;
  }
};

struct AnnotatedSequence {
  MotionSequence sequence;
  std::vector<ActionSegment> segments;  // sorted by begin, non-overlapping
};

// Throws DataError if segments violate the 1 <= begin <= end <= T ordering
// or overlap.
void validate_annotations(const AnnotatedSequence& a);

// Per-frame labels (0-based index into the T frames); gaps get
// background_label.
std::vector<int> frame_labels(const AnnotatedSequence& a, int background_label);

// Deterministic per-class flow field: each class is a set of per-joint
// sinusoids (class-specific frequency, amplitude, offset and a phase wave
// travelling across joints) plus seeded Gaussian noise. Same arguments,
// same output.
MotionSequence generate_action_clip(int class_id, int duration, int joints, std::uint64_t seed,
                                    double noise_std = 0.01, int frame_rate = 30);
int generator_class_count();

// Concatenates per-class clips with transition_len linearly blended frames
// between consecutive clips. Blended frames are background; the returned
// segments tile exactly the non-transition frames.
AnnotatedSequence synthesize_sequence(const std::vector<int>& class_list,
                                      const std::vector<int>& durations, int transition_len,
                                      std::uint64_t seed, int joints, double noise_std = 0.01,
                                      int frame_rate = 30);

// Sequence file: 16-byte header ("BIDS", version u16, T u32, J u32,
// frame_rate u16), T*J little-endian f32 frame-major, then one text line
// "begin end label" per segment.
void write_sequence(const std::string& path, const AnnotatedSequence& a);
AnnotatedSequence read_sequence(const std::string& path);

}  // namespace bid
