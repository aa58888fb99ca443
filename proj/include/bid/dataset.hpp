#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bid/motion.hpp"

namespace bid {

enum class Split { train, val, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
  std::string path;  // relative to the manifest file
  Split split = Split::train;
  bool labeled = true;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::string root;  // directory of the manifest file, set on load

  std::vector<const ManifestEntry*> split_entries(Split s) const;
  std::string resolve(const ManifestEntry& e) const;
};

// Line-oriented text: "# seed=<n>" comment, then "path split labeled(0|1)"
// per sequence.
void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

struct DataConfig {
  int num_classes = 4;
  int train_count = 200;
  int val_count = 0;
  int test_count = 50;
  int joints = 75;
  int target_length = 120;     // every sequence is exactly this long
  int min_segments = 2;
  int max_segments = 4;
  int min_duration = 16;
  int transition_len = 6;
  double label_fraction = 1.0;  // fraction of train sequences with visible labels
  double noise_std = 0.01;
  int frame_rate = 30;

  void validate() const;
};

// Writes one sequence file per entry under out_dir plus "manifest.txt", and
// returns the manifest. Deterministic in (config, seed); exactly
// ceil(label_fraction * train_count) train sequences are flagged labeled.
DatasetManifest build_dataset(const DataConfig& cfg, std::uint64_t seed,
                              const std::string& out_dir);

}  // namespace bid
