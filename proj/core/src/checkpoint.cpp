#include "sfd/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace sfd {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

void append_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void append_f64(std::vector<unsigned char>& out, double v) {
  append_u64(out, std::bit_cast<std::uint64_t>(v));
}

// Cursor over a byte buffer; every read checks remaining length.
struct Reader {
  const std::vector<unsigned char>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw format_error("archive: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t n) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i)
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

std::size_t ArchiveEntry::numel() const {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

const ArchiveEntry* Archive::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

void Archive::put(const std::string& name, std::vector<std::size_t> shape,
                  std::vector<double> data) {
  if (name.empty())
    throw contract_error("archive: entry name must be non-empty");
  if (find(name) != nullptr)
    throw contract_error("archive: duplicate entry '" + name + "'");
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  if (n != data.size())
    throw contract_error("archive: shape/data mismatch for '" + name + "'");
  entries_.push_back({name, std::move(shape), std::move(data)});
}

void Archive::put_tensor(const std::string& name, const Tensor& t) {
  std::vector<double> data(t.values().begin(), t.values().end());
  put(name, t.shape(), std::move(data));
}

void Archive::put_scalar(const std::string& name, double v) { put(name, {}, {v}); }

void Archive::put_u64(const std::string& name, std::uint64_t v) {
  put(name, {}, {std::bit_cast<double>(v)});
}

void Archive::put_text(const std::string& name, const std::string& text) {
  std::vector<double> data(text.size());
  for (std::size_t i = 0; i < text.size(); ++i)
    data[i] = static_cast<double>(static_cast<unsigned char>(text[i]));
  put(name, {text.size()}, std::move(data));
}

bool Archive::contains(const std::string& name) const { return find(name) != nullptr; }

const ArchiveEntry& Archive::get(const std::string& name) const {
  const ArchiveEntry* e = find(name);
  if (e == nullptr)
    throw format_error("archive: missing entry '" + name + "'");
  return *e;
}

double Archive::get_scalar(const std::string& name) const {
  const ArchiveEntry& e = get(name);
  if (e.data.size() != 1)
    throw format_error("archive: '" + name + "' is not a scalar");
  return e.data[0];
}

std::uint64_t Archive::get_u64(const std::string& name) const {
  return std::bit_cast<std::uint64_t>(get_scalar(name));
}

std::string Archive::get_text(const std::string& name) const {
  const ArchiveEntry& e = get(name);
  std::string s;
  s.reserve(e.data.size());
  for (double d : e.data) s.push_back(static_cast<char>(static_cast<unsigned char>(d)));
  return s;
}

Tensor Archive::get_tensor(const std::string& name) const {
  const ArchiveEntry& e = get(name);
  return Tensor::from(e.shape, e.data);
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<unsigned char> Archive::serialize() const {
  std::vector<unsigned char> body;
  for (const auto& e : entries_) {
    append_u32(body, static_cast<std::uint32_t>(e.name.size()));
    body.insert(body.end(), e.name.begin(), e.name.end());
    append_u32(body, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t ext : e.shape) append_u64(body, static_cast<std::uint64_t>(ext));
    for (double d : e.data) append_f64(body, d);
  }

  std::vector<unsigned char> out;
  out.reserve(12 + body.size() + 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  append_u32(out, kVersion);
  append_u32(out, static_cast<std::uint32_t>(entries_.size()));
  out.insert(out.end(), body.begin(), body.end());
  append_u32(out, crc32_ieee(body.data(), body.size()));
  return out;
}

Archive Archive::deserialize(const std::vector<unsigned char>& bytes) {
  Reader r{bytes};
  const std::string magic = r.text(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw format_error("archive: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw format_error("archive: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();

  const std::size_t body_begin = r.pos;
  Archive a;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.text(name_len);
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape[k] = static_cast<std::size_t>(r.u64());
      numel *= shape[k];
    }
    r.need(numel * 8);
    std::vector<double> data(numel);
    for (std::size_t k = 0; k < numel; ++k) data[k] = r.f64();
    a.put(name, std::move(shape), std::move(data));
  }
  const std::size_t body_end = r.pos;
  const std::uint32_t stored = r.u32();
  if (r.pos != bytes.size())
    throw format_error("archive: trailing bytes after checksum");
  const std::uint32_t actual =
      crc32_ieee(bytes.data() + body_begin, body_end - body_begin);
  if (stored != actual)
    throw format_error("archive: checksum mismatch");
  return a;
}

void Archive::save(const std::string& path) const {
  const std::vector<unsigned char> bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw format_error("archive: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw format_error("archive: write failed for '" + path + "'");
}

Archive Archive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw format_error("archive: cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace sfd
