#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flick/matrix.hpp"

namespace flick {

/// n x d embedding matrix (f32, row-major) with one unique id per row.
/// Construction validates every invariant; instances are immutable.
class EmbeddingSet {
 public:
  EmbeddingSet(std::vector<std::string> ids, std::vector<float> values,
               std::size_t dim);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<float>& values() const noexcept { return values_; }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }

  std::optional<std::size_t> find(std::string_view id) const;

  /// New set holding the given rows, in the given order.
  EmbeddingSet subset(std::span<const std::size_t> rows) const;

  Matrix to_matrix() const;
  Matrix rows_matrix(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::size_t dim_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Same ids, same order, same dimension and bit-identical values.
bool bit_equal(const EmbeddingSet& a, const EmbeddingSet& b);

struct LabelEntry {
  std::string id;
  int label = 0;

  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// id -> class index into an ordered list of class names. Entries keep file
/// order. A single-class table is legal here; training rejects it later.
class LabelTable {
 public:
  LabelTable(std::vector<std::string> class_names, std::vector<LabelEntry> entries);

  /// Builds a table whose class_names are the sorted distinct names.
  static LabelTable from_named(
      const std::vector<std::pair<std::string, std::string>>& id_and_name);

  std::size_t class_count() const noexcept { return class_names_.size(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<LabelEntry>& entries() const noexcept { return entries_; }

  std::optional<int> label_of(std::string_view id) const;
  std::vector<std::size_t> class_sizes() const;

 private:
  std::vector<std::string> class_names_;
  std::vector<LabelEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class FewLabelMode { total_count, per_class_shots };

struct FewLabelSample {
  std::vector<std::string> ids;
  FewLabelMode mode = FewLabelMode::total_count;
  std::size_t count = 0;
};

std::string_view to_string(FewLabelMode mode);
FewLabelMode parse_few_label_mode(std::string_view text);

/// Reads an FLKE file: "FLKE", u32 version=1, u64 n, u32 d, n length-prefixed
/// UTF-8 ids, then n*d little-endian f32 values.
EmbeddingSet load_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

/// JSONL, one {"id": ..., "label": ...} object per line. Blank lines skipped.
LabelTable load_labels(const std::filesystem::path& path);
void write_labels(const LabelTable& labels, const std::filesystem::path& path);

/// total_count: stratified-proportional draw of `count` ids, every class
/// getting at least one when count >= Z. per_class_shots: min(count, size)
/// ids per class. Output is in label-table order.
FewLabelSample subsample_few_labels(const LabelTable& labels, FewLabelMode mode,
                                    std::size_t count, std::uint64_t seed);

/// Per-class quotas for a stratified-proportional draw of `count` items.
std::vector<std::size_t> proportional_quotas(std::span<const std::size_t> class_sizes,
                                             std::size_t count);

}  // namespace flick
