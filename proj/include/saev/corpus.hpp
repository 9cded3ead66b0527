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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "saev/linalg.hpp"
//==============================================================================
namespace saev {
//==============================================================================
enum class Modality : std::uint8_t { kText = 0, kVision = 1 };

[[nodiscard]] std::string_view to_string(Modality modality) noexcept;

struct TokenRecord {
  std::uint64_t item_id = 0;
  std::uint32_t token_index = 0;
  Modality modality = Modality::kText;
  std::uint32_t token_id = 0;
  std::vector<float> hidden;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

/// One data item d_i: its token records in position order.
struct DataItem {
  std::uint64_t item_id = 0;
  std::vector<TokenRecord> records;

  [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
  [[nodiscard]] std::size_t count(Modality modality) const noexcept;
  [[nodiscard]] bool has(Modality modality) const noexcept {
    return count(modality) > 0;
  }

  friend bool operator==(const DataItem&, const DataItem&) = default;
};

/// Throws DimensionError / InvalidArgumentError when the item breaks the
/// DataItem invariants for the given input width.
void validate_item(const DataItem& item, std::uint32_t d_model);

/// Stacks the hidden vectors of an item into an l x m matrix.
[[nodiscard]] MatrixF hidden_matrix(const DataItem& item);
//==============================================================================
// Shard files
//==============================================================================
inline constexpr char kShardMagic[4] = {'S', 'A', 'E', 'V'};
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kShardHeaderBytes = 4 + 4 + 4 + 8;
inline constexpr std::size_t kRecordOverheadBytes = 8 + 4 + 1 + 3 + 4;

struct ShardHeader {
  std::uint32_t version = kShardVersion;
  std::uint32_t d_model = 0;
  std::uint64_t record_count = 0;
};

[[nodiscard]] constexpr std::uint64_t record_bytes(std::uint32_t d_model) {
  return kRecordOverheadBytes + 4ULL * d_model;
}

void write_shard(std::span<const DataItem> items, std::uint32_t d_model,
                 std::ostream& out);
void write_shard(std::span<const DataItem> items, std::uint32_t d_model,
                 const std::filesystem::path& path);

/// Streaming reader: holds at most one item in memory at a time.
class ShardReader {
 public:
  explicit ShardReader(const std::filesystem::path& path);
  explicit ShardReader(std::unique_ptr<std::istream> in,
                       std::string source_name = "<stream>");
  ~ShardReader();

  ShardReader(const ShardReader&) = delete;
  ShardReader& operator=(const ShardReader&) = delete;

  [[nodiscard]] const ShardHeader& header() const noexcept { return header_; }

  /// Next item in file order, or nullopt at end of shard.
  std::optional<DataItem> next();

 private:
  void read_header();
  std::optional<TokenRecord> read_record();

  std::unique_ptr<std::istream> in_;
  std::string source_;
  ShardHeader header_;
  std::uint64_t records_read_ = 0;
  std::uint64_t offset_ = 0;
  std::optional<TokenRecord> pending_;
  std::unordered_set<std::uint64_t> finished_items_;
  std::vector<char> buffer_;
};

[[nodiscard]] std::vector<DataItem> read_shard(
    const std::filesystem::path& path);
//==============================================================================
// Item sources: a re-iterable view over a corpus, either shards on disk or
// items already in memory.
//==============================================================================
using ItemVisitor = std::function<void(const DataItem&)>;

/// Forward cursor over one pass of a corpus. The returned pointer stays
/// valid until the next call.
class ItemCursor {
 public:
  virtual ~ItemCursor() = default;
  virtual const DataItem* next() = 0;
};

class ItemSource {
 public:
  virtual ~ItemSource() = default;

  [[nodiscard]] virtual std::uint32_t d_model() const = 0;
  /// Starts a fresh pass over the corpus; every pass has the same order.
  [[nodiscard]] virtual std::unique_ptr<ItemCursor> open() const = 0;

  void for_each(const ItemVisitor& visit) const;
};

class ShardSet final : public ItemSource {
 public:
  /// Opens every shard header up front; mismatched d_model is a
  /// DimensionError.
  explicit ShardSet(std::vector<std::filesystem::path> paths);

  [[nodiscard]] std::uint32_t d_model() const override { return d_model_; }
  [[nodiscard]] std::unique_ptr<ItemCursor> open() const override;

  [[nodiscard]] const std::vector<std::filesystem::path>& paths() const {
    return paths_;
  }

 private:
  std::vector<std::filesystem::path> paths_;
  std::uint32_t d_model_ = 0;
};

/// Non-owning view over items already in memory; the items must outlive it.
class MemorySource final : public ItemSource {
 public:
  MemorySource(std::span<const DataItem> items, std::uint32_t d_model);

  [[nodiscard]] std::uint32_t d_model() const override { return d_model_; }
  [[nodiscard]] std::unique_ptr<ItemCursor> open() const override;

 private:
  std::span<const DataItem> items_;
  std::uint32_t d_model_;
};
//==============================================================================
// Planted-dictionary corpus
//==============================================================================
struct SyntheticSpec {
  std::uint32_t d_model = 64;
  std::uint32_t planted_features = 32;
  std::uint32_t sparsity = 5;
  std::uint32_t items = 200;
  std::uint32_t tokens_per_item = 16;
  double vision_fraction = 0.5;
  double noise_std = 0.0;
  std::uint64_t seed = 42;
  // Atoms [0, shared) fire on both modalities; the rest is split into a
  // text-only block followed by a vision-only block.
  double shared_fraction = 0.5;
  double coef_min = 1.0;
  double coef_max = 2.0;
  std::uint32_t text_vocab = 32000;
  std::uint32_t vision_vocab = 64;
};

struct PlantedTerm {
  std::uint32_t atom = 0;
  float coefficient = 0.0F;
};

struct SyntheticCorpus {
  std::vector<DataItem> items;
  /// n_true x m, unit-norm rows.
  MatrixF planted;
  /// codes[i][j]: the atoms summed into token j of item i.
  std::vector<std::vector<std::vector<PlantedTerm>>> codes;
  std::uint32_t shared_atoms = 0;
  std::uint32_t text_only_atoms = 0;
  std::uint32_t vision_only_atoms = 0;
};

void validate(const SyntheticSpec& spec);

[[nodiscard]] SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);
//==============================================================================
}  // namespace saev
//==============================================================================
