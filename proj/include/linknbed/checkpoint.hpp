#pragma once

// Checkpoint file: little-endian, versioned header, length-prefixed arrays.
//
//   magic u32 "LNBK" | version u32
//   config echo      u64 length + bytes (canonical key=value text)
//   vocab digests    5 x u64 (entities+tags, relations, types, keys, values)
//   next_epoch i32 | seed u64
//   parameter arrays u32 count, then per array: i32 rows, i32 cols, f32 data
//   optimizer        i64 step, then per array first and second moments
//
// Save -> load -> save is byte-identical; loading against a dataset whose
// digests differ is refused by verify_digests.

#include <array>
#include <bit>
#include <fstream>
#include <string>

#include "linknbed/adam.hpp"
#include "linknbed/common.hpp"
#include "linknbed/model.hpp"
#include "linknbed/trainer.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format requires a little-endian host");

struct Checkpoint {
  std::string config_echo;
  std::array<uint64_t, 5> digests{};
  int32_t next_epoch = 0;
  uint64_t seed = 0;
  ParamSet<float> params;
  Adam<float> optimizer;
};

namespace detail {

constexpr uint32_t kCheckpointMagic = 0x4c4e424b;  // "LNBK"
constexpr uint32_t kCheckpointVersion = 1;

inline void write_matrix(std::ostream& out, const Matrix<float>& m) {
  write_pod(out, m.rows);
  write_pod(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.data.data()),
            std::streamsize(m.data.size() * sizeof(float)));
}

inline bool read_matrix(std::istream& in, Matrix<float>& m) {
  int32_t rows = 0, cols = 0;
  if (!read_pod(in, rows) || !read_pod(in, cols)) return false;
  if (rows < 0 || cols < 0) return false;
  m = Matrix<float>(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          std::streamsize(m.data.size() * sizeof(float)));
  return bool(in);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint: " + path);
  detail::write_pod(out, detail::kCheckpointMagic);
  detail::write_pod(out, detail::kCheckpointVersion);
  detail::write_pod(out, uint64_t(ck.config_echo.size()));
  out.write(ck.config_echo.data(), std::streamsize(ck.config_echo.size()));
  for (uint64_t d : ck.digests) detail::write_pod(out, d);
  detail::write_pod(out, ck.next_epoch);
  detail::write_pod(out, ck.seed);
  detail::write_pod(out, uint32_t(ParamSet<float>::kArrayCount));
  for (size_t i = 0; i < ParamSet<float>::kArrayCount; ++i)
    detail::write_matrix(out, ck.params.array(i));
  detail::write_pod(out, int64_t(ck.optimizer.step_count()));
  for (size_t i = 0; i < ParamSet<float>::kArrayCount; ++i) {
    detail::write_matrix(out, ck.optimizer.first_moment(i));
    detail::write_matrix(out, ck.optimizer.second_moment(i));
  }
  if (!out) throw ValidationError("short write on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path,
                                  const AdamHyper<float>& hyper) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  uint32_t magic = 0, version = 0;
  if (!detail::read_pod(in, magic) || magic != detail::kCheckpointMagic)
    throw ValidationError("not a checkpoint file: " + path);
  if (!detail::read_pod(in, version) || version != detail::kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version in " + path);
  Checkpoint ck;
  uint64_t echo_len = 0;
  if (!detail::read_pod(in, echo_len))
    throw ValidationError("truncated checkpoint: " + path);
  ck.config_echo.resize(size_t(echo_len));
  in.read(ck.config_echo.data(), std::streamsize(echo_len));
  for (uint64_t& d : ck.digests) {
    if (!detail::read_pod(in, d)) throw ValidationError("truncated checkpoint: " + path);
  }
  if (!detail::read_pod(in, ck.next_epoch) || !detail::read_pod(in, ck.seed))
    throw ValidationError("truncated checkpoint: " + path);
  uint32_t n_arrays = 0;
  if (!detail::read_pod(in, n_arrays) || n_arrays != ParamSet<float>::kArrayCount)
    throw ValidationError("checkpoint array count mismatch in " + path);
  for (size_t i = 0; i < ParamSet<float>::kArrayCount; ++i) {
    if (!detail::read_matrix(in, ck.params.array(i)))
      throw ValidationError("truncated checkpoint arrays: " + path);
  }
  int64_t step = 0;
  if (!detail::read_pod(in, step))
    throw ValidationError("truncated checkpoint optimizer: " + path);
  ck.optimizer = Adam<float>(param_shapes(ck.params), hyper);
  ck.optimizer.set_step_count(step);
  for (size_t i = 0; i < ParamSet<float>::kArrayCount; ++i) {
    if (!detail::read_matrix(in, ck.optimizer.first_moment(i)) ||
        !detail::read_matrix(in, ck.optimizer.second_moment(i)))
      throw ValidationError("truncated checkpoint optimizer: " + path);
  }
  return ck;
}

inline void verify_digests(const Checkpoint& ck, const Vocab& vocab,
                           const std::string& what) {
  if (ck.digests != vocab.digests())
    throw ValidationError(what + ": checkpoint was built from a different dataset "
                                 "(vocabulary digest mismatch)");
}

}  // namespace linknbed
