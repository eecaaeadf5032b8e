// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dickedft/error.hpp"

namespace dickedft {

/// Thread count: explicit value, else DICKEDFT_THREADS, else 1.
inline int resolve_threads(std::optional<int> requested = std::nullopt) {
  if (requested) {
    if (*requested < 1) throw ConfigError("thread count must be positive");
    return *requested;
  }
  if (const char* env = std::getenv("DICKEDFT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError("DICKEDFT_THREADS must be a positive integer");
  }
  return 1;
}

/// Evaluates fn(i) for i in [0, n) on up to `threads` workers and returns
/// the results in index order. The first exception (lowest index) is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, int threads, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1 || n <= 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace dickedft
