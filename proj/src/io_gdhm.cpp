#include "gdhm/io_gdhm.hpp"

#include <cstring>
#include <fstream>
#include <iostream>

namespace gdhm {

namespace {

constexpr char kMagic[4] = {'G', 'D', 'H', 'M'};
constexpr uint32_t kVersion = 1;

void read_exact(std::istream& in, void* buf, size_t n, const std::string& what) {
  in.read(static_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw data_error("gdhm: truncated file while reading " + what);
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T v;
  read_exact(in, &v, sizeof(T), what);
  return v;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32:
    case Dtype::i32:
      return 4;
    case Dtype::f64:
    case Dtype::i64:
      return 8;
    case Dtype::u8:
      return 1;
  }
  throw data_error("gdhm: unknown dtype tag");
}

uint64_t Chunk::elements() const {
  uint64_t n = 1;
  for (uint64_t d : shape) n *= d;
  return n;
}

std::vector<double> Chunk::as_doubles() const {
  const uint64_t n = elements();
  std::vector<double> out(n);
  if (dtype == Dtype::f32) {
    const float* p = reinterpret_cast<const float*>(payload.data());
    for (uint64_t i = 0; i < n; ++i) out[i] = p[i];
  } else if (dtype == Dtype::f64) {
    std::memcpy(out.data(), payload.data(), n * sizeof(double));
  } else {
    throw data_error("gdhm: chunk '" + name + "' is not a float chunk");
  }
  return out;
}

std::vector<int32_t> Chunk::as_ints() const {
  if (dtype != Dtype::i32) throw data_error("gdhm: chunk '" + name + "' is not i32");
  std::vector<int32_t> out(elements());
  std::memcpy(out.data(), payload.data(), out.size() * sizeof(int32_t));
  return out;
}

std::vector<int64_t> Chunk::as_longs() const {
  if (dtype != Dtype::i64) throw data_error("gdhm: chunk '" + name + "' is not i64");
  std::vector<int64_t> out(elements());
  std::memcpy(out.data(), payload.data(), out.size() * sizeof(int64_t));
  return out;
}

const Chunk* GdhmFile::find(const std::string& name) const {
  for (const auto& c : chunks)
    if (c.name == name) return &c;
  return nullptr;
}

const Chunk& GdhmFile::require(const std::string& name) const {
  const Chunk* c = find(name);
  if (!c) throw data_error("gdhm: missing chunk '" + name + "'");
  return *c;
}

Chunk& GdhmFile::add(const std::string& name, Dtype dtype, std::vector<uint64_t> shape) {
  for (const auto& c : chunks)
    if (c.name == name) throw data_error("gdhm: duplicate chunk '" + name + "'");
  Chunk c;
  c.name = name;
  c.dtype = dtype;
  c.shape = std::move(shape);
  c.payload.resize(c.elements() * dtype_size(dtype));
  chunks.push_back(std::move(c));
  return chunks.back();
}

void GdhmFile::add_f32(const std::string& name, std::vector<uint64_t> shape,
                       const double* data) {
  Chunk& c = add(name, Dtype::f32, std::move(shape));
  float* p = reinterpret_cast<float*>(c.payload.data());
  for (uint64_t i = 0; i < c.elements(); ++i) p[i] = static_cast<float>(data[i]);
}

void GdhmFile::add_f64(const std::string& name, std::vector<uint64_t> shape,
                       const double* data) {
  Chunk& c = add(name, Dtype::f64, std::move(shape));
  std::memcpy(c.payload.data(), data, c.payload.size());
}

void GdhmFile::add_i32(const std::string& name, std::vector<uint64_t> shape,
                       const int32_t* data) {
  Chunk& c = add(name, Dtype::i32, std::move(shape));
  std::memcpy(c.payload.data(), data, c.payload.size());
}

void GdhmFile::add_i64(const std::string& name, std::vector<uint64_t> shape,
                       const int64_t* data) {
  Chunk& c = add(name, Dtype::i64, std::move(shape));
  std::memcpy(c.payload.data(), data, c.payload.size());
}

void GdhmFile::add_u8(const std::string& name, std::vector<uint64_t> shape,
                      const uint8_t* data) {
  Chunk& c = add(name, Dtype::u8, std::move(shape));
  std::memcpy(c.payload.data(), data, c.payload.size());
}

void GdhmFile::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("gdhm: cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_pod(out, version);
  write_pod(out, static_cast<uint32_t>(chunks.size()));
  for (const auto& c : chunks) {
    write_pod(out, static_cast<uint32_t>(c.name.size()));
    out.write(c.name.data(), static_cast<std::streamsize>(c.name.size()));
    write_pod(out, static_cast<uint8_t>(c.dtype));
    write_pod(out, static_cast<uint8_t>(c.shape.size()));
    for (uint64_t d : c.shape) write_pod(out, d);
    out.write(reinterpret_cast<const char*>(c.payload.data()),
              static_cast<std::streamsize>(c.payload.size()));
  }
  if (!out) throw data_error("gdhm: write failed: " + path);
}

GdhmFile GdhmFile::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("gdhm: cannot open: " + path);
  char magic[4];
  read_exact(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw data_error("gdhm: malformed header (bad magic) in " + path);
  GdhmFile f;
  f.version = read_pod<uint32_t>(in, "version");
  if (f.version != kVersion)
    throw data_error("gdhm: unsupported version " + std::to_string(f.version));
  const uint32_t count = read_pod<uint32_t>(in, "chunk count");
  for (uint32_t i = 0; i < count; ++i) {
    const std::string which = "chunk " + std::to_string(i) + " of " + std::to_string(count);
    Chunk c;
    const uint32_t name_len = read_pod<uint32_t>(in, which + " (name length)");
    if (name_len > 4096) throw data_error("gdhm: implausible chunk name length");
    c.name.resize(name_len);
    read_exact(in, c.name.data(), name_len, which + " (name)");
    const uint8_t dtype = read_pod<uint8_t>(in, "chunk '" + c.name + "' dtype");
    if (dtype > static_cast<uint8_t>(Dtype::u8)) {
      throw data_error("gdhm: chunk '" + c.name + "' has unknown dtype tag " +
                       std::to_string(dtype));
    }
    c.dtype = static_cast<Dtype>(dtype);
    const uint8_t ndim = read_pod<uint8_t>(in, "chunk '" + c.name + "' rank");
    c.shape.resize(ndim);
    for (int d = 0; d < ndim; ++d)
      c.shape[d] = read_pod<uint64_t>(in, "chunk '" + c.name + "' shape");
    const uint64_t bytes = c.elements() * dtype_size(c.dtype);
    if (bytes > (1ull << 33)) throw data_error("gdhm: implausible chunk size");
    c.payload.resize(bytes);
    read_exact(in, c.payload.data(), bytes, "chunk '" + c.name + "' payload");
    f.chunks.push_back(std::move(c));
  }
  return f;
}

namespace {

MatX3d to_matx3(const Chunk& c, const std::string& what) {
  if (c.shape.size() != 2 || c.shape[1] != 3)
    throw data_error("gdhm: chunk '" + what + "' must have shape [*,3]");
  auto v = c.as_doubles();
  MatX3d m(c.shape[0], 3);
  std::memcpy(m.data(), v.data(), v.size() * sizeof(double));
  return m;
}

MatX3i to_mati3(const Chunk& c, const std::string& what) {
  if (c.shape.size() != 2 || c.shape[1] != 3)
    throw data_error("gdhm: chunk '" + what + "' must have shape [*,3]");
  auto v = c.as_ints();
  MatX3i m(c.shape[0], 3);
  for (size_t i = 0; i < v.size(); ++i) m.data()[i] = v[i];
  return m;
}

}  // namespace

void save_model(const std::string& path, const HeadModel& m) {
  GdhmFile f;
  const uint64_t V = m.num_vertices(), F = m.num_faces(), Vt = m.num_uv();
  const uint64_t J = m.num_joints();
  f.add_f32("template_vertices", {V, 3}, m.template_vertices.data());
  f.add_i32("faces", {F, 3}, m.faces.data());
  {
    std::vector<double> uv(m.uv_coords.data(), m.uv_coords.data() + Vt * 2);
    f.add_f32("uv_coords", {Vt, 2}, uv.data());
  }
  f.add_i32("uv_faces", {F, 3}, m.uv_faces.data());
  {
    std::vector<double> flat(m.shape_basis.size() * V * 3);
    for (size_t k = 0; k < m.shape_basis.size(); ++k)
      std::memcpy(flat.data() + k * V * 3, m.shape_basis[k].data(), V * 3 * sizeof(double));
    f.add_f32("shape_basis", {m.shape_basis.size(), V, 3}, flat.data());
  }
  {
    std::vector<double> flat(m.expr_basis.size() * V * 3);
    for (size_t k = 0; k < m.expr_basis.size(); ++k)
      std::memcpy(flat.data() + k * V * 3, m.expr_basis[k].data(), V * 3 * sizeof(double));
    f.add_f32("expr_basis", {m.expr_basis.size(), V, 3}, flat.data());
  }
  {
    std::vector<int32_t> parents(m.joint_parents.begin(), m.joint_parents.end());
    f.add_i32("joint_parents", {J}, parents.data());
  }
  {
    // row-major copies (Eigen MatrixXd is column-major)
    std::vector<double> reg(J * V);
    for (uint64_t j = 0; j < J; ++j)
      for (uint64_t v = 0; v < V; ++v) reg[j * V + v] = m.joint_regressor(j, v);
    f.add_f32("joint_regressor", {J, V}, reg.data());
    std::vector<double> sw(V * J);
    for (uint64_t v = 0; v < V; ++v)
      for (uint64_t j = 0; j < J; ++j) sw[v * J + j] = m.skin_weights(v, j);
    f.add_f32("skin_weights", {V, J}, sw.data());
  }
  f.write(path);
}

HeadModel load_model(const std::string& path) {
  const GdhmFile f = GdhmFile::read(path);
  for (const auto& c : f.chunks) {
    static const char* known[] = {"template_vertices", "faces",         "uv_coords",
                                  "uv_faces",          "shape_basis",   "expr_basis",
                                  "joint_parents",     "joint_regressor", "skin_weights"};
    bool ok = false;
    for (const char* k : known) ok = ok || c.name == k;
    if (!ok) std::cerr << "gdhm: skipping unknown chunk '" << c.name << "'\n";
  }

  HeadModel m;
  m.template_vertices = to_matx3(f.require("template_vertices"), "template_vertices");
  m.faces = to_mati3(f.require("faces"), "faces");
  {
    const Chunk& c = f.require("uv_coords");
    if (c.shape.size() != 2 || c.shape[1] != 2)
      throw data_error("gdhm: uv_coords must have shape [*,2]");
    auto v = c.as_doubles();
    m.uv_coords.resize(c.shape[0], 2);
    std::memcpy(m.uv_coords.data(), v.data(), v.size() * sizeof(double));
  }
  m.uv_faces = to_mati3(f.require("uv_faces"), "uv_faces");

  const uint64_t V = m.template_vertices.rows();
  auto load_basis = [&](const char* name, std::vector<MatX3d>& out) {
    const Chunk& c = f.require(name);
    if (c.shape.size() != 3 || c.shape[1] != V || c.shape[2] != 3)
      throw data_error(std::string("gdhm: ") + name + " shape mismatch");
    auto v = c.as_doubles();
    out.resize(c.shape[0]);
    for (uint64_t k = 0; k < c.shape[0]; ++k) {
      out[k].resize(V, 3);
      std::memcpy(out[k].data(), v.data() + k * V * 3, V * 3 * sizeof(double));
    }
  };
  load_basis("shape_basis", m.shape_basis);
  load_basis("expr_basis", m.expr_basis);

  {
    const Chunk& c = f.require("joint_parents");
    auto p = c.as_ints();
    m.joint_parents.assign(p.begin(), p.end());
  }
  const uint64_t J = m.joint_parents.size();
  {
    const Chunk& c = f.require("joint_regressor");
    if (c.shape.size() != 2 || c.shape[0] != J || c.shape[1] != V)
      throw data_error("gdhm: joint_regressor shape mismatch");
    auto v = c.as_doubles();
    m.joint_regressor.resize(J, V);
    for (uint64_t j = 0; j < J; ++j)
      for (uint64_t x = 0; x < V; ++x) m.joint_regressor(j, x) = v[j * V + x];
  }
  {
    const Chunk& c = f.require("skin_weights");
    if (c.shape.size() != 2 || c.shape[0] != V || c.shape[1] != J)
      throw data_error("gdhm: skin_weights shape mismatch");
    auto v = c.as_doubles();
    m.skin_weights.resize(V, J);
    for (uint64_t x = 0; x < V; ++x)
      for (uint64_t j = 0; j < J; ++j) m.skin_weights(x, j) = v[x * J + j];
  }

  m.validate();
  return m;
}

}  // namespace gdhm
