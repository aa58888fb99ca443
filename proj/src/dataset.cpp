#include "bid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bid/errors.hpp"
#include "bid/rng.hpp"

namespace fs = std::filesystem;

namespace bid {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("manifest: unknown split \"" + name + "\"");
}

std::vector<const ManifestEntry*> DatasetManifest::split_entries(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(&e);
  return out;
}

std::string DatasetManifest::resolve(const ManifestEntry& e) const {
  if (root.empty() || fs::path(e.path).is_absolute()) return e.path;
  return (fs::path(root) / e.path).string();
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "# seed=" << m.seed << "\n";
  for (const auto& e : m.entries)
    out << e.path << ' ' << split_name(e.split) << ' ' << (e.labeled ? 1 : 0) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("seed=");
      if (pos != std::string::npos) m.seed = std::stoull(line.substr(pos + 5));
      continue;
    }
    std::istringstream ls(line);
    ManifestEntry e;
    std::string split;
    int labeled = 0;
    if (!(ls >> e.path >> split >> labeled))
      throw DataError("manifest: malformed line \"" + line + "\"");
    e.split = split_from_name(split);
    e.labeled = labeled != 0;
    m.entries.push_back(e);
  }
  return m;
}

void DataConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("data: need at least 2 action classes");
  if (num_classes > generator_class_count())
    throw std::invalid_argument("data: generator supports at most " +
                                std::to_string(generator_class_count()) + " classes");
  if (train_count < 1 || test_count < 0 || val_count < 0)
    throw std::invalid_argument("data: bad split counts");
  if (label_fraction < 0.0 || label_fraction > 1.0)
    throw std::invalid_argument("data: label_fraction must be in [0, 1]");
  if (min_segments < 1 || max_segments < min_segments)
    throw std::invalid_argument("data: bad segment count range");
  if (min_duration < 1) throw std::invalid_argument("data: min_duration must be >= 1");
  const int worst = max_segments * min_duration + (max_segments - 1) * transition_len;
  if (target_length < worst)
    throw std::invalid_argument("data: target_length too short for the segment layout");
  if (joints < 1) throw std::invalid_argument("data: joints must be >= 1");
}

namespace {

// Segment count, classes and durations for one sequence; durations are
// padded so the whole sequence is exactly cfg.target_length frames.
AnnotatedSequence make_sequence(const DataConfig& cfg, std::uint64_t seq_seed) {
  std::mt19937_64 g(seq_seed);
  const int n = cfg.min_segments +
                static_cast<int>(rng::below(g, cfg.max_segments - cfg.min_segments + 1));
  std::vector<int> classes(n);
  for (int i = 0; i < n; ++i)
    classes[i] = static_cast<int>(rng::below(g, cfg.num_classes));

  const int budget = cfg.target_length - (n - 1) * cfg.transition_len;
  std::vector<int> durations(n, cfg.min_duration);
  int spare = budget - n * cfg.min_duration;
  // Random proportional split of the spare frames; remainder to the last.
  std::vector<double> w(n);
  double wsum = 0;
  for (int i = 0; i < n; ++i) {
    w[i] = rng::unit(g) + 0.1;
    wsum += w[i];
  }
  int used = 0;
  for (int i = 0; i + 1 < n; ++i) {
    const int extra = static_cast<int>(std::floor(spare * w[i] / wsum));
    durations[i] += extra;
    used += extra;
  }
  durations[n - 1] += spare - used;

  return synthesize_sequence(classes, durations, cfg.transition_len,
                             rng::mix(seq_seed, 0x5e9ULL), cfg.joints, cfg.noise_std,
                             cfg.frame_rate);
}

}  // namespace

DatasetManifest build_dataset(const DataConfig& cfg, std::uint64_t seed,
                              const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);

  DatasetManifest m;
  m.seed = seed;
  m.root = out_dir;

  const int labeled_count =
      static_cast<int>(std::ceil(cfg.label_fraction * cfg.train_count - 1e-9));
  std::vector<int> train_idx(cfg.train_count);
  for (int i = 0; i < cfg.train_count; ++i) train_idx[i] = i;
  std::mt19937_64 label_rng(rng::mix(seed, 0x1abe1ULL));
  rng::shuffle(train_idx.begin(), train_idx.end(), label_rng);
  std::vector<bool> labeled(cfg.train_count, false);
  for (int i = 0; i < labeled_count; ++i) labeled[train_idx[i]] = true;

  const auto emit = [&](Split split, int count, std::uint64_t salt,
                        const std::vector<bool>* label_flags) {
    for (int i = 0; i < count; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d.bids", split_name(split), i);
      const AnnotatedSequence seq = make_sequence(cfg, rng::mix(seed, salt, i));
      write_sequence((fs::path(out_dir) / name).string(), seq);
      ManifestEntry e;
      e.path = name;
      e.split = split;
      e.labeled = label_flags ? (*label_flags)[i] : true;
      m.entries.push_back(e);
    }
  };
  emit(Split::train, cfg.train_count, 0x7121aULL, &labeled);
  emit(Split::val, cfg.val_count, 0x7a11dULL, nullptr);
  emit(Split::test, cfg.test_count, 0x7e57ULL, nullptr);

  write_manifest((fs::path(out_dir) / "manifest.txt").string(), m);
  return m;
}

}  // namespace bid
