#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace stamp {

using json = nlohmann::json;

/// Thrown when a document cannot be serialized canonically
/// (currently only non-finite floating point values).
struct serialization_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical form: key-sorted (nlohmann objects are std::map-backed),
// compact separators, non-finite floats rejected.
std::string canonical_dump(const json& doc);

// FNV-1a 64-bit over the canonical dump, as 16 lowercase hex chars.
// Stable across runs and platforms.
std::string canonical_digest(const json& doc);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace stamp
