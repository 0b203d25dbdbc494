#include "stamp/json_util.hpp"

#include <cmath>

namespace stamp {

namespace {

void reject_non_finite(const json& doc) {
  if (doc.is_number_float()) {
    if (!std::isfinite(doc.get<double>())) {
      throw serialization_error("non-finite number in document");
    }
  } else if (doc.is_object() || doc.is_array()) {
    for (const auto& item : doc) {
      reject_non_finite(item);
    }
  }
}

}  // namespace

std::string canonical_dump(const json& doc) {
  reject_non_finite(doc);
  return doc.dump();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string canonical_digest(const json& doc) {
  std::uint64_t h = fnv1a64(canonical_dump(doc));
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace stamp
