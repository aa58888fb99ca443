#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "bid/mat.hpp"

namespace bid {

// One named parameter array. Entries created with adam=true carry first and
// second moment buffers plus a step count; EMA-trained arrays (codebooks and
// their accumulators) are stored with adam=false and never see the
// optimizer.
struct ParamEntry {
  Mat<float> value;
  bool adam = true;
  Mat<float> m;
  Mat<float> v;
  std::uint64_t step = 0;
};

// Insertion-ordered named parameter container. Iteration and serialization
// follow creation order so training runs and checkpoint bytes are
// reproducible.
class ParamStore {
 public:
  Mat<float>& create(const std::string& name, int rows, int cols, bool adam = true);
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;
  Mat<float>& value(const std::string& name) { return entry(name).value; }
  const Mat<float>& value(const std::string& name) const { return entry(name).value; }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t count() const { return order_.size(); }
  std::size_t total_values() const;

  // Container format (little-endian):
  //   "BIDP" u16 version=1 u32 n_entries
  //   per entry: u16 name_len, name bytes, u8 flags (bit0 = adam state),
  //              u32 rows, u32 cols, f32[rows*cols] value,
  //              adam only: u64 step, f32[] m, f32[] v
  void save(std::ostream& out) const;
  static ParamStore load(std::istream& in);
  void save_file(const std::string& path) const;
  static ParamStore load_file(const std::string& path);

  bool operator==(const ParamStore& o) const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, ParamEntry> index_;
};

// Gradient buffers aligned with a store's entry order.
class GradBuffers {
 public:
  explicit GradBuffers(const ParamStore& store);
  Mat<float>& of(std::size_t entry_index) { return bufs_[entry_index]; }
  Mat<float>* find(const std::string& name);
  void zero();
  // this += other, entry by entry
  void accumulate(const GradBuffers& other);
  void scale(float s);
  std::size_t count() const { return bufs_.size(); }
  bool any_nonfinite() const;

 private:
  std::vector<Mat<float>> bufs_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace bid
