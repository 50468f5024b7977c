#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace flc {

namespace detail {

inline constexpr std::uint64_t fnv_offset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t fnv_prime = 0x00000100000001b3ull;
inline constexpr std::uint64_t splitmix_gamma = 0x9e3779b97f4a7c15ull;

// SplitMix64 output mixer (Steele, Lea, Flood 2014 / Vigna).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a_byte(std::uint64_t h, std::uint8_t b) {
  return (h ^ b) * fnv_prime;
}

constexpr std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h = fnv1a_byte(h, static_cast<std::uint8_t>(v >> (8 * i)));
  }
  return h;
}

inline std::uint64_t fnv1a_bytes(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) h = fnv1a_byte(h, c);
  return h;
}

// Tags are absorbed with a leading type byte so integer and string tags
// never alias, and strings carry their length so adjacent tags cannot
// run into each other.
inline std::uint64_t absorb_int(std::uint64_t h, std::uint64_t v) {
  h = fnv1a_byte(h, 'i');
  return fnv1a_u64(h, v);
}

inline std::uint64_t absorb_str(std::uint64_t h, std::string_view s) {
  h = fnv1a_byte(h, 's');
  h = fnv1a_u64(h, s.size());
  return fnv1a_bytes(h, s);
}

}  // namespace detail

// Deterministic SplitMix64 generator. Identical state yields an identical
// output sequence. Streams are single-owner: never shared across threads,
// only derived.
struct RngStream {
  std::uint64_t state = 0;

  std::uint64_t next_u64() {
    state += detail::splitmix_gamma;
    return detail::mix64(state);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_f64() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, m); m >= 1.
  std::uint64_t next_below(std::uint64_t m) { return next_u64() % m; }
};

// A stream-derivation tag: a label ("round", "client", ...) or an index.
struct Tag {
  std::variant<std::uint64_t, std::string> value;

  Tag(std::uint64_t v) : value(v) {}
  Tag(int v) : value(static_cast<std::uint64_t>(v)) {}
  Tag(std::string s) : value(std::move(s)) {}
  Tag(const char* s) : value(std::string(s)) {}
};

template <class T>
concept TagArg =
    std::integral<std::remove_cvref_t<T>> || std::convertible_to<T, std::string_view>;

// Derives an independent stream from a master seed and a tag path.
// The seed and each tag are folded with 64-bit FNV-1a, then the digest is
// finalized with the SplitMix64 mixer. The same (seed, tags) pair always
// yields the same stream, which is how compressed payloads and dropout
// plans stay reconstructible from a seed alone.
template <TagArg... Tags>
RngStream derive_stream(std::uint64_t master_seed, const Tags&... tags) {
  std::uint64_t h = detail::fnv_offset;
  h = detail::fnv1a_u64(h, master_seed);
  (
      [&h](const auto& tag) {
        if constexpr (std::integral<std::remove_cvref_t<decltype(tag)>>) {
          h = detail::absorb_int(h, static_cast<std::uint64_t>(tag));
        } else {
          h = detail::absorb_str(h, std::string_view(tag));
        }
      }(tags),
      ...);
  return RngStream{detail::mix64(h)};
}

inline RngStream derive_stream(std::uint64_t master_seed, std::span<const Tag> tags) {
  std::uint64_t h = detail::fnv_offset;
  h = detail::fnv1a_u64(h, master_seed);
  for (const Tag& t : tags) {
    if (std::holds_alternative<std::uint64_t>(t.value)) {
      h = detail::absorb_int(h, std::get<std::uint64_t>(t.value));
    } else {
      h = detail::absorb_str(h, std::get<std::string>(t.value));
    }
  }
  return RngStream{detail::mix64(h)};
}

// First k values of a seeded partial Fisher-Yates pass over 0..n-1,
// returned sorted ascending. Shared by coefficient subsampling, dropout
// plans and client sampling, so index sets are recoverable from a seed.
inline std::vector<std::uint32_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                             RngStream& stream) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(stream.next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// In-place seeded Fisher-Yates shuffle (descending index walk).
template <class T>
void shuffle(std::span<T> items, RngStream& stream) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(stream.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace flc
