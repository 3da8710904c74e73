#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ogcp/ktensor.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp {

struct TnsReadOptions {
  /// Sum values of repeated coordinates instead of rejecting them.
  bool merge_duplicates = false;
};

/// Reads a `.tns` file: one entry per line, d 1-based indices then a value,
/// whitespace separated. Lines starting with `#` are comments; an optional
/// `# dims: I1 ... Id` line declares the shape, otherwise each mode's size is
/// its largest index. Entries whose (merged) value is exactly 0 are dropped.
SparseTensor read_tns(const std::filesystem::path& path,
                      const TnsReadOptions& opts = {});
SparseTensor read_tns(std::istream& in, const TnsReadOptions& opts = {});

/// Writes a `# dims:` header and one line per entry, values at 17 significant
/// digits.
void write_tns(const SparseTensor& x, const std::filesystem::path& path);
void write_tns(const SparseTensor& x, std::ostream& out);

/// K-tensor text format: `d R`, the dims, the weights, then every factor
/// row-major with one row per line.
void write_ktensor(const KTensor& m, const std::filesystem::path& path);
void write_ktensor(const KTensor& m, std::ostream& out);
KTensor read_ktensor(const std::filesystem::path& path);
KTensor read_ktensor(std::istream& in);

/// Yields the last-mode slices of a tensor in order. Entries are bucketed once;
/// each slice is materialized only when requested.
class SliceStream {
 public:
  explicit SliceStream(const SparseTensor& x);

  Index num_slices() const { return static_cast<Index>(offsets_.size()) - 1; }
  /// Slice t (0-based), last coordinate dropped.
  SparseTensor slice(Index t) const;

  /// Next slice in order, or nullopt when exhausted.
  std::optional<SparseTensor> next();
  Index position() const { return cursor_; }
  void seek(Index t) { cursor_ = t; }

 private:
  const SparseTensor* x_;
  std::vector<std::size_t> order_;    // entry ordinals grouped by slice
  std::vector<std::size_t> offsets_;  // slice t occupies [offsets_[t], offsets_[t+1])
  Index cursor_ = 0;
};

/// Stacks equally-shaped slices along a new last mode.
SparseTensor stack_slices(std::span<const SparseTensor> slices);

/// Sub-tensor with last-mode indices in [begin, end), re-based to 0.
SparseTensor last_mode_range(const SparseTensor& x, Index begin, Index end);

}  // namespace ogcp
