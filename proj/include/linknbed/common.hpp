#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace linknbed {

using EntityId = int32_t;
using RelationId = int32_t;
using TypeId = int32_t;
using AttrKeyId = int32_t;
using TokenId = int32_t;

constexpr int32_t kInvalidId = -1;

enum class GraphTag : uint8_t { X = 0, Y = 1 };

inline char graph_tag_char(GraphTag g) { return g == GraphTag::X ? 'X' : 'Y'; }

inline GraphTag other_graph(GraphTag g) {
  return g == GraphTag::X ? GraphTag::Y : GraphTag::X;
}

// Bad input data or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required. Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void contract_violation(const std::string& what) {
  throw std::logic_error("contract violation: " + what);
}

#define LNB_REQUIRE(cond, msg) \
  do {                         \
    if (!(cond)) ::linknbed::contract_violation(msg); \
  } while (0)

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64_u64(uint64_t v, uint64_t h = 14695981039346656037ull) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace linknbed
