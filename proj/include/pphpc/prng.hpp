#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pphpc {

// 128-bit seed value, stored as two 64-bit halves.
struct Seed128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend bool operator==(const Seed128&, const Seed128&) = default;

  friend Seed128 operator^(Seed128 a, Seed128 b) { return {a.hi ^ b.hi, a.lo ^ b.lo}; }

  // Big-endian read of the first 16 bytes.
  static Seed128 from_bytes(std::span<const unsigned char> bytes) {
    if (bytes.size() < 16) throw std::invalid_argument("Seed128 needs 16 bytes");
    Seed128 s;
    for (int i = 0; i < 8; ++i) s.hi = (s.hi << 8) | bytes[i];
    for (int i = 8; i < 16; ++i) s.lo = (s.lo << 8) | bytes[i];
    return s;
  }

  // Accepts up to 32 hex digits with an optional 0x prefix; shorter values
  // are zero-extended on the left.
  static Seed128 from_hex(std::string_view text) {
    if (text.starts_with("0x") || text.starts_with("0X")) text.remove_prefix(2);
    if (text.empty() || text.size() > 32) throw std::invalid_argument("seed must be 1..32 hex digits");
    Seed128 s;
    for (char c : text) {
      unsigned v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
      else throw std::invalid_argument(std::string("invalid hex digit in seed: ") + c);
      s.hi = (s.hi << 4) | (s.lo >> 60);
      s.lo = (s.lo << 4) | v;
    }
    return s;
  }

  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(32, '0');
    for (int i = 0; i < 16; ++i) {
      out[15 - i] = digits[(hi >> (4 * i)) & 0xF];
      out[31 - i] = digits[(lo >> (4 * i)) & 0xF];
    }
    return out;
  }

  // Four 32-bit words, least significant first.
  std::array<std::uint32_t, 4> words() const {
    return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(lo >> 32),
            static_cast<std::uint32_t>(hi), static_cast<std::uint32_t>(hi >> 32)};
  }
};

struct GlobalSeed {
  Seed128 value;
  friend bool operator==(const GlobalSeed&, const GlobalSeed&) = default;
};

struct WorkerSeed {
  Seed128 value;
  std::uint32_t worker = 0;
  friend bool operator==(const WorkerSeed&, const WorkerSeed&) = default;
};

namespace detail {

inline std::vector<unsigned char> digest(const EVP_MD* md, std::span<const unsigned char> data) {
  std::vector<unsigned char> out(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, md, nullptr) != 1)
    throw std::runtime_error("EVP_Digest failed");
  out.resize(len);
  return out;
}

}  // namespace detail

inline std::vector<unsigned char> md5(std::string_view text) {
  return detail::digest(EVP_md5(), {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

inline std::vector<unsigned char> sha256(std::span<const unsigned char> data) {
  return detail::digest(EVP_sha256(), data);
}

/// Global seed of replication `r`: MD5 of its decimal representation, read
/// big-endian as a 128-bit integer.
inline GlobalSeed derive_replication_seed(std::uint64_t replication) {
  return GlobalSeed{Seed128::from_bytes(md5(std::to_string(replication)))};
}

/// First 16 bytes of SHA-256 over the 4-byte big-endian encoding of `i`.
inline Seed128 worker_seed_offset(std::uint32_t i) {
  const std::array<unsigned char, 4> be{static_cast<unsigned char>(i >> 24), static_cast<unsigned char>(i >> 16),
                                        static_cast<unsigned char>(i >> 8), static_cast<unsigned char>(i)};
  return Seed128::from_bytes(sha256(be));
}

/// Worker 0 uses the global seed unchanged; worker i > 0 XORs it with the
/// truncated SHA-256 of i.
inline WorkerSeed derive_worker_seed(GlobalSeed global, std::uint32_t i) {
  if (i == 0) return WorkerSeed{global.value, 0};
  return WorkerSeed{global.value ^ worker_seed_offset(i), i};
}

// Feeds the reference MT19937 init_by_array state into std::mt19937 through
// the engine's seed-sequence constructor. The engine copies the 624 words
// verbatim (k = 1 for 32-bit words); the forced MSB of word 0 is the same
// non-zero guarantee the reference routine applies.
class ArraySeedSequence {
 public:
  using result_type = std::uint32_t;

  explicit ArraySeedSequence(std::span<const std::uint32_t> key) {
    constexpr int n = 624;
    state_[0] = 19650218u;
    for (int i = 1; i < n; ++i)
      state_[i] = 1812433253u * (state_[i - 1] ^ (state_[i - 1] >> 30)) + static_cast<std::uint32_t>(i);
    int i = 1;
    std::size_t j = 0;
    const int klen = static_cast<int>(key.size());
    for (int k = (n > klen ? n : klen); k; --k) {
      state_[i] = (state_[i] ^ ((state_[i - 1] ^ (state_[i - 1] >> 30)) * 1664525u)) + key[j] +
                  static_cast<std::uint32_t>(j);
      ++i;
      ++j;
      if (i >= n) {
        state_[0] = state_[n - 1];
        i = 1;
      }
      if (j >= key.size()) j = 0;
    }
    for (int k = n - 1; k; --k) {
      state_[i] = (state_[i] ^ ((state_[i - 1] ^ (state_[i - 1] >> 30)) * 1566083941u)) -
                  static_cast<std::uint32_t>(i);
      ++i;
      if (i >= n) {
        state_[0] = state_[n - 1];
        i = 1;
      }
    }
    state_[0] = 0x80000000u;
  }

  template <class It>
  void generate(It first, It last) const {
    std::size_t i = 0;
    for (; first != last; ++first) *first = state_[i++ % state_.size()];
  }

  std::size_t size() const { return state_.size(); }

 private:
  std::array<std::uint32_t, 624> state_{};
};

/// MT19937 seeded from the four words of a 128-bit seed with the reference
/// array-seeding routine.
class MersenneTwister {
 public:
  explicit MersenneTwister(const WorkerSeed& seed) : MersenneTwister(seed.value) {}

  explicit MersenneTwister(const Seed128& seed) : engine_(make_engine(seed)) {}

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(engine_()); }

 private:
  static std::mt19937 make_engine(const Seed128& seed) {
    const auto key = seed.words();
    ArraySeedSequence seq(key);
    return std::mt19937(seq);
  }

  std::mt19937 engine_;
};

/// Unbiased draw on [0, n) by rejection over 32-bit words: accept x below the
/// largest multiple of n that fits in 2^32, then reduce modulo n.
template <class Generator>
std::uint32_t uniform_int(Generator& g, std::uint32_t n) {
  if (n == 0) throw std::out_of_range("uniform_int: empty range");
  const std::uint64_t span = std::uint64_t{1} << 32;
  const std::uint64_t limit = span - span % n;
  for (;;) {
    const std::uint64_t x = g.next_u32();
    if (x < limit) return static_cast<std::uint32_t>(x % n);
  }
}

// One logical draw: the bound requested and the value returned.
struct TapeEntry {
  std::uint32_t bound;
  std::uint32_t value;
  friend bool operator==(const TapeEntry&, const TapeEntry&) = default;
};

/// Generator adaptor that records every bounded draw. Used for debugging and
/// by the replay oracle; raw-word access is deliberately absent so that every
/// draw goes through the tape.
template <class Inner = MersenneTwister>
class RecordingGenerator {
 public:
  template <class... Args>
  explicit RecordingGenerator(Args&&... args) : inner_(std::forward<Args>(args)...) {}

  std::uint32_t draw(std::uint32_t n) {
    const std::uint32_t v = uniform_int(inner_, n);
    tape_.push_back({n, v});
    return v;
  }

  const std::vector<TapeEntry>& tape() const { return tape_; }

 private:
  Inner inner_;
  std::vector<TapeEntry> tape_;
};

// Customization point: all model randomness calls draw(g, n).
template <class Generator>
std::uint32_t draw(Generator& g, std::uint32_t n) {
  if constexpr (requires { g.draw(n); }) {
    return g.draw(n);
  } else {
    return uniform_int(g, n);
  }
}

}  // namespace pphpc
