#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace msf {

// Flat "[section] / key = value" text config. Keys are addressed as
// "section.key"; '#' and ';' start comments; nesting is one level only.
// The raw file bytes are hashed (FNV-1a) at load so artifacts can embed an
// exact provenance fingerprint.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const;

  // required getters: throw ConfigError when missing or malformed
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  // defaulted getters
  std::string get_string_or(const std::string& key, const std::string& dflt) const;
  double get_double_or(const std::string& key, double dflt) const;
  int get_int_or(const std::string& key, int dflt) const;
  std::uint64_t get_u64_or(const std::string& key, std::uint64_t dflt) const;
  bool get_bool_or(const std::string& key, bool dflt) const;

  std::uint64_t hash() const { return hash_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::uint64_t hash_ = 0;
};

}  // namespace msf
