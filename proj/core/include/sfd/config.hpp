#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfd/error.hpp"

namespace sfd {

// ---------------------------------------------------------------------------
// Config: flat `key = value` document with dotted section names.  Every key
// is registered up front with a type and default; unknown keys are rejected.
// parse(serialize(c)) == c for every reachable c (reals print as %.17g).
// ---------------------------------------------------------------------------

class Config {
 public:
  enum class Kind { u64, real, text };

  Config();  // all known keys at their defaults

  bool has(const std::string& key) const;
  Kind kind(const std::string& key) const;

  std::uint64_t get_u64(const std::string& key) const;
  double get_real(const std::string& key) const;
  const std::string& get_text(const std::string& key) const;

  void set_u64(const std::string& key, std::uint64_t v);
  void set_real(const std::string& key, double v);
  void set_text(const std::string& key, const std::string& v);

  // Typed parse of a textual value for `key`; config_error on unknown key or
  // malformed value.  This is the single entry point for file lines and CLI
  // overrides.
  void set_from_text(const std::string& key, const std::string& value);

  // Full-document forms.  `parse` starts from defaults and applies each
  // `key = value` line; '#' starts a comment, blank lines are skipped.
  std::string serialize() const;
  static Config parse(const std::string& text);
  static Config load_file(const std::string& path);  // config_error if unreadable
  void save_file(const std::string& path) const;

  std::vector<std::string> keys() const;  // registration order

  bool operator==(const Config& other) const;

 private:
  struct Entry {
    std::string key;
    Kind kind;
    std::uint64_t u64_value = 0;
    double real_value = 0.0;
    std::string text_value;
    std::string doc;
  };

  std::vector<Entry> entries_;
  Entry& find(const std::string& key);
  const Entry& find(const std::string& key) const;
  void register_u64(const std::string& key, std::uint64_t v, const std::string& doc);
  void register_real(const std::string& key, double v, const std::string& doc);
  void register_text(const std::string& key, const std::string& v, const std::string& doc);
};

}  // namespace sfd
