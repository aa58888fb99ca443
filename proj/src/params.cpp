#include "bid/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "bid/errors.hpp"
#include "bid/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialized containers assume a little-endian host");

namespace bid {

namespace {

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_pod(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof(T));
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw DataError("param container: truncated");
}

template <class T>
T read_pod(std::istream& in) {
  T v;
  read_bytes(in, &v, sizeof(T));
  return v;
}

void write_mat(std::ostream& out, const Mat<float>& m) {
  write_bytes(out, m.data(), m.size() * sizeof(float));
}

void read_mat(std::istream& in, Mat<float>& m) {
  read_bytes(in, m.data(), m.size() * sizeof(float));
}

}  // namespace

Mat<float>& ParamStore::create(const std::string& name, int rows, int cols, bool adam) {
  if (has(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  ParamEntry e;
  e.value = Mat<float>(rows, cols);
  e.adam = adam;
  if (adam) {
    e.m = Mat<float>(rows, cols);
    e.v = Mat<float>(rows, cols);
  }
  order_.push_back(name);
  return index_.emplace(name, std::move(e)).first->second.value;
}

ParamEntry& ParamStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
  return it->second;
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
  return it->second;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += entry(name).value.size();
  return n;
}

void ParamStore::save(std::ostream& out) const {
  write_bytes(out, "BIDP", 4);
  write_pod<std::uint16_t>(out, 1);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(order_.size()));
  for (const auto& name : order_) {
    const ParamEntry& e = entry(name);
    write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    write_bytes(out, name.data(), name.size());
    write_pod<std::uint8_t>(out, e.adam ? 1 : 0);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rows));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.cols));
    write_mat(out, e.value);
    if (e.adam) {
      write_pod<std::uint64_t>(out, e.step);
      write_mat(out, e.m);
      write_mat(out, e.v);
    }
  }
}

ParamStore ParamStore::load(std::istream& in) {
  char magic[4];
  read_bytes(in, magic, 4);
  if (std::memcmp(magic, "BIDP", 4) != 0) throw DataError("param container: bad magic");
  if (read_pod<std::uint16_t>(in) != 1) throw DataError("param container: unsupported version");
  const auto n = read_pod<std::uint32_t>(in);
  ParamStore store;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = read_pod<std::uint16_t>(in);
    std::string name(len, '\0');
    read_bytes(in, name.data(), len);
    const auto flags = read_pod<std::uint8_t>(in);
    const auto rows = static_cast<int>(read_pod<std::uint32_t>(in));
    const auto cols = static_cast<int>(read_pod<std::uint32_t>(in));
    if (rows < 1 || cols < 1) throw DataError("param container: bad shape for " + name);
    store.create(name, rows, cols, (flags & 1) != 0);
    ParamEntry& e = store.entry(name);
    read_mat(in, e.value);
    if (e.adam) {
      e.step = read_pod<std::uint64_t>(in);
      read_mat(in, e.m);
      read_mat(in, e.v);
    }
  }
  return store;
}

void ParamStore::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  save(out);
  if (!out) throw DataError("write failed: " + path);
}

ParamStore ParamStore::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  return load(in);
}

bool ParamStore::operator==(const ParamStore& o) const {
  if (order_ != o.order_) return false;
  for (const auto& name : order_) {
    const ParamEntry& a = entry(name);
    const ParamEntry& b = o.entry(name);
    if (a.adam != b.adam || a.step != b.step || !(a.value == b.value) || !(a.m == b.m) ||
        !(a.v == b.v))
      return false;
  }
  return true;
}

GradBuffers::GradBuffers(const ParamStore& store) {
  bufs_.reserve(store.count());
  for (std::size_t i = 0; i < store.names().size(); ++i) {
    const auto& name = store.names()[i];
    const Mat<float>& v = store.value(name);
    bufs_.emplace_back(v.rows, v.cols);
    index_.emplace(name, i);
  }
}

Mat<float>* GradBuffers::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &bufs_[it->second];
}

void GradBuffers::zero() {
  for (auto& b : bufs_) b.zero();
}

void GradBuffers::accumulate(const GradBuffers& other) {
  for (std::size_t i = 0; i < bufs_.size(); ++i)
    kernels::axpy(1.0f, other.bufs_[i].data(), bufs_[i].data(), bufs_[i].size());
}

void GradBuffers::scale(float s) {
  for (auto& b : bufs_)
    for (auto& x : b.v) x *= s;
}

bool GradBuffers::any_nonfinite() const {
  for (const auto& b : bufs_)
    if (!b.all_finite()) return true;
  return false;
}

}  // namespace bid
