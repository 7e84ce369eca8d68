#pragma once

// Binary checkpoint container. All integers and floats are little-endian.
//
//   magic    8 bytes  "DCDMCKPT"
//   version  u32      kCheckpointVersion
//   config   string   effective run configuration (key = value text)
//   rng      string   trainer engine state as text
//   epoch, best_epoch, adam_step               i64 each
//   best_val                                   f64
//   4 array sections in order: params, best, adam.m, adam.v
//     count  u32, then per array: name (string), rows u32, cols u32,
//            rows*cols f64 in column-major order
//
// string = u64 byte length followed by the bytes.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcdm/train.hpp"

namespace dcdm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config;
  std::vector<std::string> names;  // parameter tensor names, model order
  TrainState state;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint arrays into `params` by name, checking shapes.
void restore_parameters(ParameterSet& params, const Checkpoint& ckpt, bool best = false);

}  // namespace dcdm
