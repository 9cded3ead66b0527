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
#include "saev/corpus.hpp"
//==============================================================================
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "saev/errors.hpp"
#include "little_endian.hpp"
//==============================================================================
namespace saev {
//==============================================================================
namespace {

using namespace le;

void encode_record(std::vector<char>& buf, const TokenRecord& rec) {
  put_u64(buf, rec.item_id);
  put_u32(buf, rec.token_index);
  put_u8(buf, static_cast<std::uint8_t>(rec.modality));
  put_u8(buf, 0);
  put_u8(buf, 0);
  put_u8(buf, 0);
  put_u32(buf, rec.token_id);
  for (float x : rec.hidden) {
    put_f32(buf, x);
  }
}

}  // namespace
//==============================================================================
std::string_view to_string(Modality modality) noexcept {
  return modality == Modality::kVision ? "vision" : "text";
}

std::size_t DataItem::count(Modality modality) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const TokenRecord& r) {
        return r.modality == modality;
      }));
}

void validate_item(const DataItem& item, std::uint32_t d_model) {
  if (item.records.empty()) {
    throw InvalidArgumentError("item " + std::to_string(item.item_id) +
                               " has no tokens");
  }
  for (std::size_t j = 0; j < item.records.size(); ++j) {
    const TokenRecord& rec = item.records[j];
    if (rec.item_id != item.item_id) {
      throw InvalidArgumentError("record item_id " +
                                 std::to_string(rec.item_id) +
                                 " inside item " +
                                 std::to_string(item.item_id));
    }
    if (rec.token_index != j) {
      throw InvalidArgumentError("item " + std::to_string(item.item_id) +
                                 ": token_index values must be 0..l-1");
    }
    if (rec.modality != Modality::kText && rec.modality != Modality::kVision) {
      throw InvalidArgumentError("unknown modality tag");
    }
    if (rec.hidden.size() != d_model) {
      throw DimensionError("item " + std::to_string(item.item_id) +
                           " token " + std::to_string(j) + " has " +
                           std::to_string(rec.hidden.size()) +
                           " hidden entries, expected " +
                           std::to_string(d_model));
    }
    for (float x : rec.hidden) {
      if (!std::isfinite(x)) {
        throw InvalidArgumentError("non-finite hidden value in item " +
                                   std::to_string(item.item_id));
      }
    }
  }
}

MatrixF hidden_matrix(const DataItem& item) {
  if (item.records.empty()) {
    return {};
  }
  const auto m = static_cast<Eigen::Index>(item.records.front().hidden.size());
  MatrixF h(static_cast<Eigen::Index>(item.records.size()), m);
  for (std::size_t j = 0; j < item.records.size(); ++j) {
    const auto& hidden = item.records[j].hidden;
    if (static_cast<Eigen::Index>(hidden.size()) != m) {
      throw DimensionError("ragged hidden vectors in item " +
                           std::to_string(item.item_id));
    }
    h.row(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::RowVectorXf>(hidden.data(), m);
  }
  return h;
}
//==============================================================================
void write_shard(std::span<const DataItem> items, std::uint32_t d_model,
                 std::ostream& out) {
  if (d_model == 0) {
    throw InvalidArgumentError("d_model must be positive");
  }
  std::uint64_t count = 0;
  std::unordered_set<std::uint64_t> seen;
  for (const DataItem& item : items) {
    validate_item(item, d_model);
    if (!seen.insert(item.item_id).second) {
      throw InvalidArgumentError("item " + std::to_string(item.item_id) +
                                 " appears twice; its records must be "
                                 "contiguous");
    }
    count += item.records.size();
  }

  std::vector<char> buf;
  buf.reserve(kShardHeaderBytes);
  buf.insert(buf.end(), std::begin(kShardMagic), std::end(kShardMagic));
  put_u32(buf, kShardVersion);
  put_u32(buf, d_model);
  put_u64(buf, count);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

  for (const DataItem& item : items) {
    buf.clear();
    buf.reserve(item.records.size() * record_bytes(d_model));
    for (const TokenRecord& rec : item.records) {
      encode_record(buf, rec);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) {
    throw IoError("failed writing shard stream");
  }
}

void write_shard(std::span<const DataItem> items, std::uint32_t d_model,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open shard for writing: " + path.string());
  }
  write_shard(items, d_model, out);
  out.close();
  if (!out) {
    throw IoError("failed writing shard: " + path.string());
  }
}
//==============================================================================
ShardReader::ShardReader(const std::filesystem::path& path)
    : source_(path.string()) {
  auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*file) {
    throw IoError("cannot open shard: " + path.string());
  }
  in_ = std::move(file);
  read_header();
}

ShardReader::ShardReader(std::unique_ptr<std::istream> in,
                         std::string source_name)
    : in_(std::move(in)), source_(std::move(source_name)) {
  read_header();
}

ShardReader::~ShardReader() = default;

void ShardReader::read_header() {
  char raw[kShardHeaderBytes];
  in_->read(raw, sizeof(raw));
  const auto got = static_cast<std::size_t>(in_->gcount());
  if (got < 4 || std::memcmp(raw, kShardMagic, 4) != 0) {
    throw FormatError(source_ + ": bad magic, not an activation shard");
  }
  if (got < kShardHeaderBytes) {
    throw FormatError(source_ + ": truncated shard header");
  }
  header_.version = get_u32(raw + 4);
  header_.d_model = get_u32(raw + 8);
  header_.record_count = get_u64(raw + 12);
  if (header_.version != kShardVersion) {
    throw FormatError(source_ + ": unsupported shard version " +
                      std::to_string(header_.version));
  }
  if (header_.d_model == 0) {
    throw FormatError(source_ + ": d_model must be positive");
  }
  offset_ = kShardHeaderBytes;

  // When the stream is seekable the payload size must match the header
  // exactly; this catches a d_model that disagrees with the records.
  const auto here = in_->tellg();
  if (here != std::streampos(-1)) {
    in_->seekg(0, std::ios::end);
    const auto end = in_->tellg();
    in_->seekg(here);
    if (end != std::streampos(-1)) {
      const auto payload = static_cast<std::uint64_t>(end - here);
      const std::uint64_t per_record = record_bytes(header_.d_model);
      const std::uint64_t expected = header_.record_count * per_record;
      if (payload < expected) {
        const std::uint64_t whole = payload / per_record;
        throw CorruptionError(
            source_ + ": truncated record " + std::to_string(whole) +
                " (header declares " + std::to_string(header_.record_count) +
                " records of d_model " + std::to_string(header_.d_model) + ")",
            kShardHeaderBytes + whole * per_record);
      }
      if (payload > expected) {
        throw CorruptionError(
            source_ + ": trailing bytes after the last record (d_model " +
                std::to_string(header_.d_model) +
                " inconsistent with file size)",
            kShardHeaderBytes + expected);
      }
    }
  }
  buffer_.resize(record_bytes(header_.d_model));
}

std::optional<TokenRecord> ShardReader::read_record() {
  if (records_read_ == header_.record_count) {
    return std::nullopt;
  }
  const std::uint64_t start = offset_;
  in_->read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  if (static_cast<std::size_t>(in_->gcount()) != buffer_.size()) {
    throw CorruptionError(
        source_ + ": truncated record " + std::to_string(records_read_),
        start);
  }
  const char* p = buffer_.data();
  TokenRecord rec;
  rec.item_id = get_u64(p);
  rec.token_index = get_u32(p + 8);
  const auto modality = static_cast<std::uint8_t>(p[12]);
  if (modality > 1) {
    throw CorruptionError(source_ + ": invalid modality tag " +
                              std::to_string(modality),
                          start + 12);
  }
  rec.modality = static_cast<Modality>(modality);
  if (p[13] != 0 || p[14] != 0 || p[15] != 0) {
    throw CorruptionError(source_ + ": nonzero record padding", start + 13);
  }
  rec.token_id = get_u32(p + 16);
  rec.hidden.resize(header_.d_model);
  for (std::uint32_t d = 0; d < header_.d_model; ++d) {
    const float x = get_f32(p + kRecordOverheadBytes + 4 * d);
    if (!std::isfinite(x)) {
      throw CorruptionError(source_ + ": non-finite hidden value",
                            start + kRecordOverheadBytes + 4ULL * d);
    }
    rec.hidden[d] = x;
  }
  ++records_read_;
  offset_ += buffer_.size();
  return rec;
}

std::optional<DataItem> ShardReader::next() {
  std::uint64_t record_offset = offset_;
  std::optional<TokenRecord> first = std::move(pending_);
  pending_.reset();
  if (first) {
    record_offset -= buffer_.size();
  } else {
    first = read_record();
  }
  if (!first) {
    return std::nullopt;
  }

  DataItem item;
  item.item_id = first->item_id;
  if (finished_items_.contains(item.item_id)) {
    throw CorruptionError(source_ + ": records of item " +
                              std::to_string(item.item_id) +
                              " are not contiguous",
                          record_offset);
  }
  item.records.push_back(std::move(*first));
  while (true) {
    const TokenRecord& last = item.records.back();
    if (last.token_index != item.records.size() - 1) {
      throw CorruptionError(source_ + ": item " +
                                std::to_string(item.item_id) +
                                " token_index out of sequence",
                            record_offset + 8);
    }
    record_offset = offset_;
    auto rec = read_record();
    if (!rec) {
      break;
    }
    if (rec->item_id != item.item_id) {
      pending_ = std::move(rec);
      break;
    }
    item.records.push_back(std::move(*rec));
  }
  finished_items_.insert(item.item_id);
  return item;
}

std::vector<DataItem> read_shard(const std::filesystem::path& path) {
  ShardReader reader(path);
  std::vector<DataItem> items;
  while (auto item = reader.next()) {
    items.push_back(std::move(*item));
  }
  return items;
}
//==============================================================================
namespace {

class ShardSetCursor final : public ItemCursor {
 public:
  explicit ShardSetCursor(const std::vector<std::filesystem::path>& paths)
      : paths_(paths) {}

  const DataItem* next() override {
    while (true) {
      if (!reader_) {
        if (index_ == paths_.size()) {
          return nullptr;
        }
        reader_ = std::make_unique<ShardReader>(paths_[index_++]);
      }
      current_ = reader_->next();
      if (current_) {
        return &*current_;
      }
      reader_.reset();
    }
  }

 private:
  const std::vector<std::filesystem::path>& paths_;
  std::size_t index_ = 0;
  std::unique_ptr<ShardReader> reader_;
  std::optional<DataItem> current_;
};

class MemoryCursor final : public ItemCursor {
 public:
  explicit MemoryCursor(std::span<const DataItem> items) : items_(items) {}

  const DataItem* next() override {
    return index_ < items_.size() ? &items_[index_++] : nullptr;
  }

 private:
  std::span<const DataItem> items_;
  std::size_t index_ = 0;
};

}  // namespace

void ItemSource::for_each(const ItemVisitor& visit) const {
  auto cursor = open();
  while (const DataItem* item = cursor->next()) {
    visit(*item);
  }
}

ShardSet::ShardSet(std::vector<std::filesystem::path> paths)
    : paths_(std::move(paths)) {
  for (const auto& path : paths_) {
    ShardReader reader(path);
    const std::uint32_t m = reader.header().d_model;
    if (d_model_ == 0) {
      d_model_ = m;
    } else if (m != d_model_) {
      throw DimensionError("shard " + path.string() + " has d_model " +
                           std::to_string(m) + ", expected " +
                           std::to_string(d_model_));
    }
  }
}

std::unique_ptr<ItemCursor> ShardSet::open() const {
  return std::make_unique<ShardSetCursor>(paths_);
}

MemorySource::MemorySource(std::span<const DataItem> items,
                           std::uint32_t d_model)
    : items_(items), d_model_(d_model) {
  if (d_model_ == 0) {
    throw InvalidArgumentError("d_model must be positive");
  }
  for (const DataItem& item : items_) {
    validate_item(item, d_model_);
  }
}

std::unique_ptr<ItemCursor> MemorySource::open() const {
  return std::make_unique<MemoryCursor>(items_);
}
//==============================================================================
void validate(const SyntheticSpec& spec) {
  if (spec.d_model == 0 || spec.planted_features == 0 || spec.sparsity == 0 ||
      spec.items == 0 || spec.tokens_per_item == 0) {
    throw InvalidArgumentError("synthetic spec counts must be positive");
  }
  if (spec.sparsity > spec.planted_features) {
    throw InvalidArgumentError("sparsity " + std::to_string(spec.sparsity) +
                               " exceeds planted feature count " +
                               std::to_string(spec.planted_features));
  }
  if (!(spec.vision_fraction >= 0.0 && spec.vision_fraction <= 1.0)) {
    throw InvalidArgumentError("vision_fraction must lie in [0, 1]");
  }
  if (!(spec.shared_fraction >= 0.0 && spec.shared_fraction <= 1.0)) {
    throw InvalidArgumentError("shared_fraction must lie in [0, 1]");
  }
  if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
    throw InvalidArgumentError("noise_std must be finite and >= 0");
  }
  if (!(spec.coef_min > 0.0 && spec.coef_min <= spec.coef_max) ||
      !std::isfinite(spec.coef_max)) {
    throw InvalidArgumentError("coefficients need 0 < coef_min <= coef_max");
  }
  if (spec.text_vocab == 0 || spec.vision_vocab == 0) {
    throw InvalidArgumentError("vocabulary sizes must be positive");
  }
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);

  SyntheticCorpus corpus;
  const std::uint32_t n_true = spec.planted_features;
  corpus.shared_atoms = static_cast<std::uint32_t>(
      std::lround(spec.shared_fraction * static_cast<double>(n_true)));
  const std::uint32_t rest = n_true - corpus.shared_atoms;
  corpus.text_only_atoms = (rest + 1) / 2;
  corpus.vision_only_atoms = rest / 2;

  std::vector<std::uint32_t> text_pool;
  std::vector<std::uint32_t> vision_pool;
  for (std::uint32_t k = 0; k < n_true; ++k) {
    const bool shared = k < corpus.shared_atoms;
    const bool text_only =
        !shared && k < corpus.shared_atoms + corpus.text_only_atoms;
    if (shared || text_only) {
      text_pool.push_back(k);
    }
    if (shared || !text_only) {
      vision_pool.push_back(k);
    }
  }

  const auto vision_tokens = static_cast<std::uint32_t>(std::ceil(
      spec.vision_fraction * static_cast<double>(spec.tokens_per_item) -
      1e-12));
  const bool uses_text = vision_tokens < spec.tokens_per_item;
  const bool uses_vision = vision_tokens > 0;
  if ((uses_text && text_pool.size() < spec.sparsity) ||
      (uses_vision && vision_pool.size() < spec.sparsity)) {
    throw InvalidArgumentError(
        "sparsity exceeds the planted atoms available to one modality");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> coef(spec.coef_min, spec.coef_max);

  const std::uint32_t m = spec.d_model;
  corpus.planted.resize(n_true, m);
  for (std::uint32_t k = 0; k < n_true; ++k) {
    VectorD row(m);
    do {
      for (std::uint32_t d = 0; d < m; ++d) {
        row[d] = gauss(rng);
      }
    } while (row.norm() == 0.0);
    row.normalize();
    corpus.planted.row(k) = row.cast<float>().transpose();
  }

  std::normal_distribution<double> noise(0.0, spec.noise_std > 0.0 ? spec.noise_std : 1.0);
  std::vector<std::uint32_t> scratch;
  corpus.items.resize(spec.items);
  corpus.codes.resize(spec.items);
  for (std::uint32_t i = 0; i < spec.items; ++i) {
    DataItem& item = corpus.items[i];
    item.item_id = i;
    item.records.resize(spec.tokens_per_item);
    corpus.codes[i].resize(spec.tokens_per_item);
    for (std::uint32_t j = 0; j < spec.tokens_per_item; ++j) {
      TokenRecord& rec = item.records[j];
      rec.item_id = i;
      rec.token_index = j;
      rec.modality = j < vision_tokens ? Modality::kVision : Modality::kText;
      const auto& pool =
          rec.modality == Modality::kVision ? vision_pool : text_pool;
      rec.token_id =
          rec.modality == Modality::kVision
              ? spec.text_vocab +
                    static_cast<std::uint32_t>(rng() % spec.vision_vocab)
              : static_cast<std::uint32_t>(rng() % spec.text_vocab);

      // Partial Fisher-Yates: the first `sparsity` entries are a uniform
      // draw without replacement from the modality's pool.
      scratch = pool;
      for (std::uint32_t t = 0; t < spec.sparsity; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, scratch.size() - 1);
        std::swap(scratch[t], scratch[pick(rng)]);
      }
      std::sort(scratch.begin(), scratch.begin() + spec.sparsity);

      VectorD h = VectorD::Zero(m);
      auto& terms = corpus.codes[i][j];
      for (std::uint32_t t = 0; t < spec.sparsity; ++t) {
        const auto c = static_cast<float>(coef(rng));
        terms.push_back({scratch[t], c});
        h += static_cast<double>(c) *
             corpus.planted.row(scratch[t]).cast<double>().transpose();
      }
      if (spec.noise_std > 0.0) {
        for (std::uint32_t d = 0; d < m; ++d) {
          h[d] += noise(rng);
        }
      }
      rec.hidden.resize(m);
      for (std::uint32_t d = 0; d < m; ++d) {
        rec.hidden[d] = static_cast<float>(h[d]);
      }
    }
  }
  return corpus;
}
//==============================================================================
}  // namespace saev
//==============================================================================
