#include "vut/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vut/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes native buffers and assumes little-endian");

namespace vut {

namespace {

constexpr char kMagic[8] = {'V', 'U', 'T', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint64_t read_u64(std::istream& is, const char* what) {
  uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw DataError(std::string("truncated checkpoint: ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  write_u64(os, ckpt.config_text.size());
  os.write(ckpt.config_text.data(), std::streamsize(ckpt.config_text.size()));
  write_u64(os, ckpt.entries.size());
  for (const auto& [name, t] : ckpt.entries) {  // std::map: already sorted
    if (!t.defined()) throw DataError("undefined tensor in checkpoint entry " + name);
    write_u64(os, name.size());
    os.write(name.data(), std::streamsize(name.size()));
    char dt = t.dtype() == DType::F32 ? 0 : 1;
    os.write(&dt, 1);
    write_u64(os, t.shape().size());
    for (int64_t d : t.shape()) write_u64(os, uint64_t(d));
    dispatch_dtype(t.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto v = t.template data<T>();
      os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(T)));
    });
  }
  if (!os) throw DataError("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path);

  Checkpoint ckpt;
  uint64_t config_len = read_u64(is, "config length");
  ckpt.config_text.resize(config_len);
  if (config_len && !is.read(ckpt.config_text.data(), std::streamsize(config_len)))
    throw DataError("truncated checkpoint: config blob");

  uint64_t count = read_u64(is, "entry count");
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t name_len = read_u64(is, "entry name length");
    std::string name(name_len, '\0');
    if (name_len && !is.read(name.data(), std::streamsize(name_len)))
      throw DataError("truncated checkpoint: entry name");
    char dt_byte = 0;
    if (!is.read(&dt_byte, 1)) throw DataError("truncated checkpoint: dtype");
    if (dt_byte != 0 && dt_byte != 1) throw DataError("unknown dtype byte in checkpoint entry " + name);
    DType dt = dt_byte == 0 ? DType::F32 : DType::F64;
    uint64_t rank = read_u64(is, "rank");
    if (rank > 8) throw DataError("implausible tensor rank in checkpoint entry " + name);
    Shape shape(rank);
    for (auto& d : shape) d = int64_t(read_u64(is, "dimension"));
    Tensor t = Tensor::zeros(shape, dt);
    dispatch_dtype(dt, [&](auto tag) {
      using T = decltype(tag);
      auto v = t.template mutable_data<T>();
      if (!is.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(T))))
        throw DataError("truncated checkpoint: values of entry " + name);
    });
    if (!ckpt.entries.emplace(std::move(name), std::move(t)).second)
      throw DataError("duplicate entry name in checkpoint: " + path);
  }
  return ckpt;
}

}  // namespace vut
