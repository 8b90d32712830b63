#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>

namespace msf {

// All numeric text output uses %.17g: shortest round-trippable double form
// is not required, but 17 significant digits guarantee value-preserving
// re-reads and byte-stable reruns.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Root seed + config hash stamped into every output file.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

inline void write_provenance_comment(std::ostream& os, const Provenance& p) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "# config=%016llx seed=%llu",
                static_cast<unsigned long long>(p.config_hash),
                static_cast<unsigned long long>(p.seed));
  os << buf << "\n";
}

// FNV-1a over raw bytes; used to fingerprint config files.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace msf
