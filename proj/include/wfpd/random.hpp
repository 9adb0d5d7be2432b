#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace wfpd {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed split function: the seed of chunk `index` in stream `stream` under
/// root seed `root` is splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index).
/// Streams name experiments; indices name fixed-size replicate chunks.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t root, std::uint64_t stream = 0, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

/// Uniform on [0,1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform on (0,1].
inline double uniform_open_closed(Rng& rng) { return 1.0 - uniform01(rng); }

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::uint64_t binomial(Rng& rng, std::uint64_t n, double p) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return static_cast<std::uint64_t>(std::binomial_distribution<long long>(static_cast<long long>(n), p)(rng));
}

inline double exponential(Rng& rng, double rate) { return -std::log(uniform_open_closed(rng)) / rate; }

/// Beta(1, theta) by inversion: 1 - U^{1/theta}.
inline double beta_one(Rng& rng, double theta) {
  return -std::expm1(std::log(uniform_open_closed(rng)) / theta);
}

/// Number of failures before the first success, success probability q in (0,1].
inline std::uint64_t geometric_failures(Rng& rng, double q) {
  if (q >= 1.0) return 0;
  return static_cast<std::uint64_t>(std::floor(std::log(uniform_open_closed(rng)) / std::log1p(-q)));
}

inline constexpr std::size_t kReplicateChunk = 256;

/// Runs `reps` independent replicates `fn(rng, index)` and returns their
/// results ordered by index. Chunk c of kReplicateChunk replicates draws from
/// make_rng(seed, stream, c), so output does not depend on `threads`.
template <class Result, class Fn>
std::vector<Result> run_replicates(std::size_t reps, std::uint64_t seed, std::uint64_t stream,
                                   unsigned threads, Fn&& fn) {
  std::vector<Result> out(reps);
  const std::size_t chunks = (reps + kReplicateChunk - 1) / kReplicateChunk;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    try {
      for (std::size_t c = next++; c < chunks; c = next++) {
        Rng rng = make_rng(seed, stream, c);
        const std::size_t end = std::min(reps, (c + 1) * kReplicateChunk);
        for (std::size_t i = c * kReplicateChunk; i < end; ++i) out[i] = fn(rng, i);
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = chunks;
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace wfpd
