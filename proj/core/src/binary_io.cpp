#include "awe/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include <unistd.h>

#include "awe/error.hpp"

namespace awe {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

template <class U>
void put(std::vector<std::uint8_t>& out, U v) {
  std::uint8_t buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) { put(bytes_, v); }
void ByteWriter::u32(std::uint32_t v) { put(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { put(bytes_, v); }
void ByteWriter::f32(float v) { put(bytes_, v); }
void ByteWriter::f64(double v) { put(bytes_, v); }

void ByteWriter::raw(std::span<const std::uint8_t> data) {
  bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void ByteWriter::short_string(std::string_view s) {
  if (s.size() > 0xffff) throw InvalidInput("string longer than 65535 bytes");
  u16(static_cast<std::uint16_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::f32_array(std::span<const float> values) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  bytes_.insert(bytes_.end(), p, p + values.size_bytes());
}

void ByteReader::need(std::size_t n, const char* what) {
  if (remaining() < n) {
    throw DataError(std::string("truncated input reading ") + what + " at byte offset " +
                    std::to_string(pos_));
  }
}

namespace {

template <class U>
U get(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  U v;
  std::memcpy(&v, bytes.data() + pos, sizeof(U));
  pos += sizeof(U);
  return v;
}

}  // namespace

std::uint8_t ByteReader::u8() {
  need(1, "u8");
  return bytes_[pos_++];
}
std::uint16_t ByteReader::u16() {
  need(2, "u16");
  return get<std::uint16_t>(bytes_, pos_);
}
std::uint32_t ByteReader::u32() {
  need(4, "u32");
  return get<std::uint32_t>(bytes_, pos_);
}
std::uint64_t ByteReader::u64() {
  need(8, "u64");
  return get<std::uint64_t>(bytes_, pos_);
}
float ByteReader::f32() {
  need(4, "f32");
  return get<float>(bytes_, pos_);
}
double ByteReader::f64() {
  need(8, "f64");
  return get<double>(bytes_, pos_);
}

std::string ByteReader::short_string() {
  const std::uint16_t n = u16();
  need(n, "string");
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::f32_array(std::span<float> out) {
  need(out.size_bytes(), "float array");
  std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n, "raw bytes");
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void atomic_write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path() && !fs::exists(path.parent_path())) {
    throw DataError("output directory does not exist: " + path.parent_path().string());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot rename temporary file onto " + path.string());
  }
}

void atomic_write_file(const std::filesystem::path& path, std::string_view text) {
  atomic_write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace awe
