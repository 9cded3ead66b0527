//==============================================================================
// Copyright (c) 2026 The saev Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//==============================================================================
#pragma once
//==============================================================================
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "saev/corpus.hpp"
//==============================================================================
namespace saev {
//==============================================================================
inline constexpr const char* kThreadsEnv = "SAEV_THREADS";

/// Worker count from SAEV_THREADS, defaulting to 1.
[[nodiscard]] inline std::size_t default_threads() {
  if (const char* env = std::getenv(kThreadsEnv); env != nullptr) {
    try {
      const long v = std::stol(env);
      if (v > 0) {
        return static_cast<std::size_t>(v);
      }
    } catch (const std::exception&) {
    }
  }
  return 1;
}

/// Streams the source, maps items (possibly on several threads) and feeds
/// the results to `reduce` strictly in corpus order, so reductions are
/// bit-identical for any thread count.
template <typename Result, typename Map, typename Reduce>
void map_reduce_items(const ItemSource& source, std::size_t threads, Map map,
                      Reduce reduce) {
  if (threads <= 1) {
    source.for_each([&](const DataItem& item) { reduce(map(item)); });
    return;
  }
  const std::size_t chunk = threads * 8;
  std::vector<DataItem> pending;
  pending.reserve(chunk);
  std::vector<Result> results;

  auto flush = [&] {
    results.assign(pending.size(), Result{});
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < pending.size(); i += threads) {
            results[i] = map(pending[i]);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) {
      w.join();
    }
    for (const auto& e : errors) {
      if (e) {
        std::rethrow_exception(e);
      }
    }
    for (auto& r : results) {
      reduce(std::move(r));
    }
    pending.clear();
  };

  source.for_each([&](const DataItem& item) {
    pending.push_back(item);
    if (pending.size() == chunk) {
      flush();
    }
  });
  if (!pending.empty()) {
    flush();
  }
}
//==============================================================================
}  // namespace saev
//==============================================================================
