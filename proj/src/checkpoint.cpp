#include "fexgan/checkpoint.hpp"

#include <boost/crc.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fexgan/errors.hpp"

namespace fexgan {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

using Crc64Xz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true>;

std::uint8_t dtype_tag(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    default: throw DomainError(std::string("unsupported checkpoint dtype ") + c10::toString(t));
  }
}

torch::ScalarType tag_dtype(std::uint8_t tag) {
  switch (tag) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    default: throw IntegrityError("unknown dtype tag " + std::to_string(tag));
  }
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > end_ - pos_) throw IntegrityError("checkpoint truncated at byte " + std::to_string(pos_));
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    const auto* p = take(n);
    return {reinterpret_cast<const char*>(p), n};
  }
  bool done() const { return pos_ == end_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

const torch::Tensor& CheckpointData::get(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return r.value;
  }
  throw IntegrityError("checkpoint has no record '" + name + "'");
}

bool CheckpointData::has(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return true;
  }
  return false;
}

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
  Crc64Xz crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
  Writer w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put(data.version);
  w.put_string(data.config_text);
  for (const auto& rec : data.records) {
    auto t = rec.value.detach().to(torch::kCPU).contiguous();
    w.put_string(rec.name);
    w.put(dtype_tag(t.scalar_type()));
    w.put(static_cast<std::uint32_t>(t.dim()));
    for (int64_t d : t.sizes()) w.put(static_cast<std::uint64_t>(d));
    w.put_bytes(t.data_ptr(), t.numel() * t.element_size());
  }
  const auto crc = crc64(w.bytes());
  w.put(crc);
  return std::move(w.bytes());
}

CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 4 + 8) throw IntegrityError("checkpoint truncated (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw IntegrityError("not a checkpoint (bad magic)");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (crc64(bytes.first(body)) != stored) throw IntegrityError("checkpoint CRC mismatch");

  Reader r(bytes, body);
  r.take(8);
  CheckpointData out;
  out.version = version;
  out.config_text = r.get_string();
  while (!r.done()) {
    TensorRecord rec;
    rec.name = r.get_string();
    const auto dtype = tag_dtype(r.get<std::uint8_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw IntegrityError("implausible rank for record '" + rec.name + "'");
    std::vector<int64_t> shape;
    std::uint64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = r.get<std::uint64_t>();
      shape.push_back(static_cast<int64_t>(d));
      numel *= d;
    }
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    const std::size_t n = numel * static_cast<std::size_t>(t.element_size());
    std::memcpy(t.data_ptr(), r.take(n), n);
    rec.value = t;
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  const auto bytes = encode_checkpoint(data);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const IntegrityError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  }
}

std::string file_checksum(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed for " + path.string());
  }
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return ss.str();
}

}  // namespace fexgan
