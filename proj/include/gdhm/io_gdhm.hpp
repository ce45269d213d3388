#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdhm/common.hpp"
#include "gdhm/head_model.hpp"

namespace gdhm {

// "GDHM" container: magic, u32 version, u32 chunk count, then named chunks
// {u32 name_len, name, u8 dtype, u8 ndim, u64 dims[], raw little-endian
// payload}. Model files use f32/i32 chunks; checkpoints additionally use
// f64/i64/u8 so optimizer state round-trips bit-exactly.
enum class Dtype : uint8_t { f32 = 0, i32 = 1, f64 = 2, i64 = 3, u8 = 4 };

size_t dtype_size(Dtype d);

struct Chunk {
  std::string name;
  Dtype dtype = Dtype::f32;
  std::vector<uint64_t> shape;
  std::vector<uint8_t> payload;

  uint64_t elements() const;

  // Conversions between stored payloads and double/int working buffers.
  std::vector<double> as_doubles() const;  // f32 or f64
  std::vector<int32_t> as_ints() const;    // i32
  std::vector<int64_t> as_longs() const;   // i64
};

struct GdhmFile {
  uint32_t version = 1;
  std::vector<Chunk> chunks;

  const Chunk* find(const std::string& name) const;
  const Chunk& require(const std::string& name) const;
  bool has(const std::string& name) const { return find(name) != nullptr; }

  Chunk& add(const std::string& name, Dtype dtype, std::vector<uint64_t> shape);
  void add_f32(const std::string& name, std::vector<uint64_t> shape, const double* data);
  void add_f64(const std::string& name, std::vector<uint64_t> shape, const double* data);
  void add_i32(const std::string& name, std::vector<uint64_t> shape, const int32_t* data);
  void add_i64(const std::string& name, std::vector<uint64_t> shape, const int64_t* data);
  void add_u8(const std::string& name, std::vector<uint64_t> shape, const uint8_t* data);

  void write(const std::string& path) const;
  static GdhmFile read(const std::string& path);
};

// Head model container on top of GdhmFile (f32/i32 payloads).
void save_model(const std::string& path, const HeadModel& model);
HeadModel load_model(const std::string& path);

}  // namespace gdhm
