#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sfd/error.hpp"
#include "sfd/tensor.hpp"

namespace sfd {

// ---------------------------------------------------------------------------
// Archive: ordered name -> f64 array store with a pinned binary layout.
//
// File layout (all integers little-endian):
//   magic   "SFD1"                      4 bytes
//   version u32                         currently 1
//   count   u32                         number of entries
//   entry*  count times:
//     name_len u32, name bytes (UTF-8)
//     rank     u32, rank extents as u64
//     payload  numel f64 (IEEE-754 bit pattern, little-endian)
//   crc     u32                         CRC-32 (IEEE) over all entry bytes
//
// Every stored value is an f64 array; scalars are rank-0 single values,
// integers are bit-cast into one f64, text is one code unit per f64.
// ---------------------------------------------------------------------------

struct ArchiveEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t numel() const;
};

class Archive {
public:
  // Insertion keeps order; re-putting a name is a contract violation.
  void put(const std::string& name, std::vector<std::size_t> shape, std::vector<double> data);
  void put_tensor(const std::string& name, const Tensor& t);
  void put_scalar(const std::string& name, double v);
  void put_u64(const std::string& name, std::uint64_t v);
  void put_text(const std::string& name, const std::string& text);

  bool contains(const std::string& name) const;
  const ArchiveEntry& get(const std::string& name) const;  // format_error if absent
  double get_scalar(const std::string& name) const;
  std::uint64_t get_u64(const std::string& name) const;
  std::string get_text(const std::string& name) const;
  Tensor get_tensor(const std::string& name) const;  // plain (non-tracked) tensor

  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> names() const;

  std::vector<unsigned char> serialize() const;
  static Archive deserialize(const std::vector<unsigned char>& bytes);

  void save(const std::string& path) const;       // format_error on IO failure
  static Archive load(const std::string& path);   // format_error on bad file

private:
  std::vector<ArchiveEntry> entries_;
  const ArchiveEntry* find(const std::string& name) const;
};

// CRC-32 (IEEE 802.3, reflected 0xEDB88320); exposed for format tests.
std::uint32_t crc32_ieee(const unsigned char* data, std::size_t n);

}  // namespace sfd
