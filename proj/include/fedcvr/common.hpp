//
// Copyright 2026 The FedCVR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef FEDCVR_COMMON_HPP_
#define FEDCVR_COMMON_HPP_

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <initializer_list>
#include <istream>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace fedcvr {

// Error taxonomy. Every failure raised by the library derives from Error so
// callers can catch broadly; the CLI maps ConfigError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class InputError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};
class AggregationError : public Error {
 public:
  using Error::Error;
};
class AccountingError : public Error {
 public:
  using Error::Error;
};
class PartitionError : public Error {
 public:
  using Error::Error;
};
class RoundError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Seed derivation. Child streams are derived as hash64(run_seed, label, ...)
// so that the order in which work is scheduled never changes the numbers.

namespace detail {

constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Mixes a run seed, a stream label and any number of integer coordinates
/// (round, client id, epoch...) into an independent 64-bit child seed.
constexpr std::uint64_t hash64(std::uint64_t run_seed, std::string_view label,
                               std::initializer_list<std::uint64_t> coords = {}) {
  std::uint64_t h = detail::SplitMix64(run_seed ^ detail::SplitMix64(detail::Fnv1a(label)));
  for (std::uint64_t c : coords) h = detail::SplitMix64(h ^ detail::SplitMix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

// ---------------------------------------------------------------------------
// ParamVector: a flat, dense vector of f64 values. The model module fixes the
// canonical length and layout; strategies and the privacy module treat it as a
// plain vector so scalar and 2-d harnesses work too.

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  ParamVector(std::initializer_list<double> v) : values_(v) {}
  explicit ParamVector(std::vector<double> v) : values_(std::move(v)) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  double l2_norm() const {
    double s = 0.0;
    for (double x : values_) s += x * x;
    return std::sqrt(s);
  }

  // Bitwise equality: distinguishes +0/-0 and compares NaN payloads.
  bool bit_equal(const ParamVector& o) const {
    return values_.size() == o.values_.size() &&
           (values_.empty() ||
            std::memcmp(values_.data(), o.values_.data(), values_.size() * sizeof(double)) == 0);
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

inline void require_same_size(const ParamVector& a, const ParamVector& b, const char* what) {
  if (a.size() != b.size()) {
    throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
}

// Length-prefixed little-endian f64 serialization: u64 count, then count
// IEEE-754 binary64 values.
inline void write_le_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_le_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw InputError("truncated binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_params(std::ostream& os, const ParamVector& p) {
  write_le_u64(os, p.size());
  for (double x : p) write_le_u64(os, std::bit_cast<std::uint64_t>(x));
  if (!os) throw Error("failed to write parameter vector");
}

inline ParamVector read_params(std::istream& is) {
  const std::uint64_t n = read_le_u64(is);
  if (n > (std::uint64_t{1} << 32)) throw InputError("implausible parameter vector length");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = std::bit_cast<double>(read_le_u64(is));
  return ParamVector(std::move(v));
}

/// FNV-1a digest over the little-endian encoding, rendered as 16 hex chars.
inline std::string digest_hex(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : values) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// thrown by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t count = std::min(jobs, n);
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace fedcvr

#endif  // FEDCVR_COMMON_HPP_
