#include "bid/motion.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "bid/errors.hpp"
#include "bid/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "sequence files assume a little-endian host");

namespace bid {

void validate_annotations(const AnnotatedSequence& a) {
  const int t = a.sequence.length();
  int prev_end = 0;
  for (const ActionSegment& s : a.segments) {
    if (s.begin < 1 || s.end < s.begin || s.end > t)
      throw DataError("annotation out of range: " + std::to_string(s.begin) + ".." +
                      std::to_string(s.end) + " in T=" + std::to_string(t));
    if (s.begin <= prev_end) throw DataError("annotations overlap or are unsorted");
    if (s.label < 0) throw DataError("negative segment label");
    prev_end = s.end;
  }
}

std::vector<int> frame_labels(const AnnotatedSequence& a, int background_label) {
  std::vector<int> labels(a.sequence.length(), background_label);
  for (const ActionSegment& s : a.segments)
    for (int t = s.begin; t <= s.end; ++t) labels[t - 1] = s.label;
  return labels;
}

namespace {

struct JointWave {
  double freq;
  double amp;
  double offset;
  double phase;
  double amp2;  // second harmonic
};

// Class parameters depend only on class_id, so two classes differ by
// construction while the same class stays coherent across seeds.
std::vector<JointWave> class_waves(int class_id, int joints) {
  std::mt19937_64 g(rng::mix(0xb1d0c1a5'5e5e5e5eULL, static_cast<std::uint64_t>(class_id)));
  const double base_freq = 0.4 + 0.37 * (class_id % 8) + rng::uniform(g, -0.05, 0.05);
  const double wave_speed = rng::uniform(g, 0.15, 0.9) * (class_id % 2 == 0 ? 1.0 : -1.0);
  const double base_amp = rng::uniform(g, 0.35, 0.8);
  std::vector<JointWave> waves(joints);
  for (int j = 0; j < joints; ++j) {
    JointWave& w = waves[j];
    w.freq = base_freq * rng::uniform(g, 0.9, 1.1);
    w.amp = base_amp * rng::uniform(g, 0.6, 1.2);
    w.offset = rng::uniform(g, -0.4, 0.4);
    w.phase = wave_speed * j + rng::uniform(g, -0.3, 0.3);
    w.amp2 = w.amp * rng::uniform(g, 0.0, 0.35);
  }
  return waves;
}

constexpr int kGeneratorClasses = 32;

constexpr std::uint16_t kSequenceVersion = 1;
constexpr char kMagic[4] = {'B', 'I', 'D', 'S'};

}  // namespace

int generator_class_count() { return kGeneratorClasses; }

MotionSequence generate_action_clip(int class_id, int duration, int joints, std::uint64_t seed,
                                    double noise_std, int frame_rate) {
  if (class_id < 0 || class_id >= kGeneratorClasses)
    throw std::invalid_argument("generate_action_clip: unknown class id " +
                                std::to_string(class_id));
  if (duration < 1) throw std::invalid_argument("generate_action_clip: duration must be >= 1");
  if (joints < 1) throw std::invalid_argument("generate_action_clip: joints must be >= 1");

  const std::vector<JointWave> waves = class_waves(class_id, joints);
  std::mt19937_64 noise(rng::mix(seed, static_cast<std::uint64_t>(class_id),
                                 static_cast<std::uint64_t>(joints)));

  MotionSequence seq;
  seq.frame_rate = frame_rate;
  seq.frames = Mat<float>(duration, joints);
  const double tau = 2.0 * std::numbers::pi;
  for (int t = 0; t < duration; ++t) {
    float* row = seq.frames.row(t);
    const double time = static_cast<double>(t) / frame_rate;
    for (int j = 0; j < joints; ++j) {
      const JointWave& w = waves[j];
      double v = w.offset + w.amp * std::sin(tau * w.freq * time + w.phase) +
                 w.amp2 * std::sin(tau * 2.0 * w.freq * time + 2.0 * w.phase);
      if (noise_std > 0) v += noise_std * rng::gaussian(noise);
      row[j] = static_cast<float>(v);
    }
  }
  return seq;
}

AnnotatedSequence synthesize_sequence(const std::vector<int>& class_list,
                                      const std::vector<int>& durations, int transition_len,
                                      std::uint64_t seed, int joints, double noise_std,
                                      int frame_rate) {
  if (class_list.empty()) throw std::invalid_argument("synthesize_sequence: empty class list");
  if (class_list.size() != durations.size())
    throw std::invalid_argument("synthesize_sequence: class/duration length mismatch");
  if (transition_len < 0)
    throw std::invalid_argument("synthesize_sequence: negative transition length");

  const int n = static_cast<int>(class_list.size());
  int total = transition_len * (n - 1);
  for (int d : durations) {
    if (d < 1) throw std::invalid_argument("synthesize_sequence: duration must be >= 1");
    total += d;
  }

  AnnotatedSequence out;
  out.sequence.frame_rate = frame_rate;
  out.sequence.frames = Mat<float>(total, joints);

  std::vector<MotionSequence> clips(n);
  for (int i = 0; i < n; ++i)
    clips[i] = generate_action_clip(class_list[i], durations[i],
                                    joints, rng::mix(seed, static_cast<std::uint64_t>(i)),
                                    noise_std, frame_rate);

  int cursor = 0;  // 0-based write position
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      // Linear blend from the previous clip's last frame to this clip's
      // first frame; these frames stay unlabeled (background).
      const float* a = clips[i - 1].frames.row(clips[i - 1].length() - 1);
      const float* b = clips[i].frames.row(0);
      for (int x = 1; x <= transition_len; ++x) {
        const double w = static_cast<double>(x) / (transition_len + 1);
        float* row = out.sequence.frames.row(cursor++);
        for (int j = 0; j < joints; ++j)
          row[j] = static_cast<float>((1.0 - w) * a[j] + w * b[j]);
      }
    }
    ActionSegment seg;
    seg.begin = cursor + 1;
    for (int t = 0; t < clips[i].length(); ++t) {
      std::memcpy(out.sequence.frames.row(cursor++), clips[i].frames.row(t),
                  sizeof(float) * joints);
    }
    seg.end = cursor;
    seg.label = class_list[i];
    out.segments.push_back(seg);
  }
  validate_annotations(out);
  return out;
}

void write_sequence(const std::string& path, const AnnotatedSequence& a) {
  validate_annotations(a);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  const auto t = static_cast<std::uint32_t>(a.sequence.length());
  const auto j = static_cast<std::uint32_t>(a.sequence.joints());
  const auto fps = static_cast<std::uint16_t>(a.sequence.frame_rate);
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kSequenceVersion), 2);
  out.write(reinterpret_cast<const char*>(&t), 4);
  out.write(reinterpret_cast<const char*>(&j), 4);
  out.write(reinterpret_cast<const char*>(&fps), 2);
  out.write(reinterpret_cast<const char*>(a.sequence.frames.data()),
            static_cast<std::streamsize>(a.sequence.frames.size() * sizeof(float)));
  for (const ActionSegment& s : a.segments)
    out << s.begin << ' ' << s.end << ' ' << s.label << '\n';
  if (!out) throw DataError("write failed: " + path);
}

AnnotatedSequence read_sequence(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);

  char magic[4];
  std::uint16_t version = 0, fps = 0;
  std::uint32_t t = 0, j = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 2);
  in.read(reinterpret_cast<char*>(&t), 4);
  in.read(reinterpret_cast<char*>(&j), 4);
  in.read(reinterpret_cast<char*>(&fps), 2);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("sequence file: bad header in " + path);
  if (version != kSequenceVersion) throw DataError("sequence file: unsupported version");
  if (t < 1 || j < 1) throw DataError("sequence file: bad dimensions");

  AnnotatedSequence a;
  a.sequence.frame_rate = fps;
  a.sequence.frames = Mat<float>(static_cast<int>(t), static_cast<int>(j));
  in.read(reinterpret_cast<char*>(a.sequence.frames.data()),
          static_cast<std::streamsize>(a.sequence.frames.size() * sizeof(float)));
  if (!in) throw DataError("sequence file: truncated payload in " + path);

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ActionSegment s;
    if (!(ls >> s.begin >> s.end >> s.label))
      throw DataError("sequence file: malformed annotation line \"" + line + "\"");
    std::string extra;
    if (ls >> extra) throw DataError("sequence file: trailing tokens in annotation line");
    a.segments.push_back(s);
  }
  validate_annotations(a);
  return a;
}

}  // namespace bid
