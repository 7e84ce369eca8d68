#include "dcdm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dcdm/errors.hpp"

namespace dcdm {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'D', 'M', 'C', 'K', 'P', 'T'};
// refuse absurd lengths from corrupted files before allocating
constexpr std::uint64_t kMaxString = std::uint64_t(1) << 32;
constexpr std::uint64_t kMaxElements = std::uint64_t(1) << 34;

template <typename U>
void put_uint(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = char((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double x) { put_uint(out, std::bit_cast<std::uint64_t>(x)); }

void put_string(std::ostream& out, const std::string& s) {
  put_uint<std::uint64_t>(out, s.size());
  out.write(s.data(), std::streamsize(s.size()));
}

void put_arrays(std::ostream& out, const std::vector<std::string>& names, const std::vector<Matrix>& arrays) {
  put_uint<std::uint32_t>(out, std::uint32_t(arrays.size()));
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    put_string(out, names.at(i));
    put_uint<std::uint32_t>(out, std::uint32_t(arrays[i].rows()));
    put_uint<std::uint32_t>(out, std::uint32_t(arrays[i].cols()));
    for (Index k = 0; k < arrays[i].size(); ++k) put_f64(out, arrays[i].data()[k]);
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, std::streamsize(n));
    if (std::size_t(in_.gcount()) != n) throw ValidationError("checkpoint: file is truncated");
  }

  template <typename U>
  U uint() {
    std::array<char, sizeof(U)> b;
    bytes(b.data(), b.size());
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= U(static_cast<unsigned char>(b[i])) << (8 * i);
    return value;
  }

  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  std::string string() {
    const auto n = uint<std::uint64_t>();
    if (n > kMaxString) throw ValidationError("checkpoint: corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  void arrays(std::vector<std::string>& names, std::vector<Matrix>& out) {
    const auto count = uint<std::uint32_t>();
    names.clear();
    out.clear();
    for (std::uint32_t i = 0; i < count; ++i) {
      names.push_back(string());
      const auto rows = uint<std::uint32_t>(), cols = uint<std::uint32_t>();
      if (std::uint64_t(rows) * cols > kMaxElements) throw ValidationError("checkpoint: corrupt array shape");
      Matrix m(rows, cols);
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = f64();
      out.push_back(std::move(m));
    }
  }

 private:
  std::istream& in_;
};

std::vector<std::string> prefixed(const std::string& prefix, const std::vector<std::string>& names,
                                  std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(prefix + names.at(i));
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const TrainState& s = ckpt.state;
  if (ckpt.names.size() != s.parameters.size()) {
    throw DimensionError("checkpoint: " + std::to_string(ckpt.names.size()) + " names for " +
                         std::to_string(s.parameters.size()) + " arrays");
  }
  out.write(kMagic, sizeof kMagic);
  put_uint<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, ckpt.config);
  put_string(out, s.rng);
  put_uint<std::uint64_t>(out, std::uint64_t(std::int64_t(s.epoch)));
  put_uint<std::uint64_t>(out, std::uint64_t(std::int64_t(s.best_epoch)));
  put_uint<std::uint64_t>(out, std::uint64_t(s.adam.step));
  put_f64(out, s.best_val);
  put_arrays(out, ckpt.names, s.parameters);
  put_arrays(out, prefixed("best/", ckpt.names, s.best_parameters.size()), s.best_parameters);
  put_arrays(out, prefixed("adam.m/", ckpt.names, s.adam.m.size()), s.adam.m);
  put_arrays(out, prefixed("adam.v/", ckpt.names, s.adam.v.size()), s.adam.v);
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (in.gcount() != std::streamsize(sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw VersionError("checkpoint: not a checkpoint file (bad magic)");
  }
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint: format version " + std::to_string(version) + ", this build reads version " +
                       std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  TrainState& s = ckpt.state;
  ckpt.config = r.string();
  s.rng = r.string();
  s.epoch = int(std::int64_t(r.uint<std::uint64_t>()));
  s.best_epoch = int(std::int64_t(r.uint<std::uint64_t>()));
  s.adam.step = std::int64_t(r.uint<std::uint64_t>());
  s.best_val = r.f64();
  std::vector<std::string> ignored;
  r.arrays(ckpt.names, s.parameters);
  r.arrays(ignored, s.best_parameters);
  r.arrays(ignored, s.adam.m);
  r.arrays(ignored, s.adam.v);
  if (in.peek() != std::char_traits<char>::eof()) throw ValidationError("checkpoint: trailing bytes after the last section");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

void restore_parameters(ParameterSet& params, const Checkpoint& ckpt, bool best) {
  const std::vector<Matrix>& arrays = best ? ckpt.state.best_parameters : ckpt.state.parameters;
  if (arrays.size() != ckpt.names.size()) throw DimensionError("checkpoint: missing best parameters");
  if (arrays.size() != params.size()) {
    throw DimensionError("checkpoint holds " + std::to_string(arrays.size()) + " tensors, model has " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const auto id = params.find(ckpt.names[i]);
    if (!id) throw DimensionError("checkpoint tensor '" + ckpt.names[i] + "' is not in the model");
    const std::string what = "checkpoint tensor " + ckpt.names[i];
    require_same_shape(params[*id], arrays[i], what.c_str());
    params[*id] = arrays[i];
  }
}

}  // namespace dcdm
