#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ogcp/error.hpp"

namespace ogcp {

using Index = std::int64_t;

/// Coordinate-format d-way sparse tensor with an O(1) membership index.
///
/// Coordinates are 0-based in this API (the `.tns` reader/writer converts to
/// and from 1-based). Entries are stored contiguously: coordinate n occupies
/// `coords()[n*d .. n*d+d)`. The object is immutable after construction.
///
/// Stored values must be finite and nonzero unless `allow_explicit_zeros` is
/// set, which is reserved for gradient tensors where an accumulated value may
/// legitimately be exactly zero.
template <typename Scalar>
class SparseTensorT {
 public:
  struct Options {
    bool allow_explicit_zeros = false;
    /// Skip the membership index (and with it the duplicate check). Only for
    /// tensors whose coordinates are unique by construction.
    bool build_index = true;
  };

  SparseTensorT() = default;

  SparseTensorT(std::vector<Index> dims, std::vector<Index> coords,
                std::vector<Scalar> values, Options opts = {})
      : dims_(std::move(dims)),
        coords_(std::move(coords)),
        values_(std::move(values)),
        allow_zeros_(opts.allow_explicit_zeros),
        indexed_(opts.build_index) {
    validate_and_index();
  }

  /// Empty tensor with the given shape.
  explicit SparseTensorT(std::vector<Index> dims)
      : SparseTensorT(std::move(dims), {}, {}) {}

  std::size_t ndims() const { return dims_.size(); }
  const std::vector<Index>& dims() const { return dims_; }
  Index dim(std::size_t k) const { return dims_[k]; }
  std::size_t nnz() const { return values_.size(); }

  /// Product of dims, i.e. the number of cells (zeros included).
  Index numel() const { return numel_; }
  double numel_float() const { return static_cast<double>(numel_); }

  std::span<const Index> coord(std::size_t n) const {
    return {coords_.data() + n * dims_.size(), dims_.size()};
  }
  Index coord(std::size_t n, std::size_t k) const {
    return coords_[n * dims_.size() + k];
  }
  Scalar value(std::size_t n) const { return values_[n]; }

  const std::vector<Index>& coords() const { return coords_; }
  const std::vector<Scalar>& values() const { return values_; }
  bool allows_explicit_zeros() const { return allow_zeros_; }

  /// Mixed-radix linear index (mode 0 fastest).
  Index linearize(std::span<const Index> idx) const {
    check_bounds(idx);
    return linearize_unchecked(idx);
  }

  Index linearize_unchecked(std::span<const Index> idx) const {
    Index lin = 0;
    for (std::size_t k = dims_.size(); k-- > 0;) lin = lin * dims_[k] + idx[k];
    return lin;
  }

  /// Entry ordinal of a stored coordinate, or nullopt for an implicit zero.
  std::optional<std::size_t> find(std::span<const Index> idx) const {
    check_bounds(idx);
    return find_linear(linearize_unchecked(idx));
  }

  std::optional<std::size_t> find_linear(Index lin) const {
    if (!indexed_)
      fail(ErrorKind::Contract, "membership query on an unindexed tensor");
    auto it = index_.find(lin);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::span<const Index> idx) const {
    return find(idx).has_value();
  }

  /// Sum of squared stored values.
  Scalar frobenius_norm_squared() const {
    Scalar acc = 0;
    for (Scalar v : values_) acc += v * v;
    return acc;
  }

  /// Mode-(d-1) hyperslice at index t, with the last coordinate dropped.
  SparseTensorT slice(Index t) const {
    if (dims_.size() < 2)
      fail(ErrorKind::Index, "slice requires a tensor with at least 2 modes");
    const std::size_t d = dims_.size();
    if (t < 0 || t >= dims_[d - 1])
      fail(ErrorKind::Index, "slice index " + std::to_string(t) +
                                 " out of range [0," +
                                 std::to_string(dims_[d - 1]) + ")");
    std::vector<Index> sub_dims(dims_.begin(), dims_.end() - 1);
    std::vector<Index> sub_coords;
    std::vector<Scalar> sub_values;
    for (std::size_t n = 0; n < nnz(); ++n) {
      if (coord(n, d - 1) != t) continue;
      auto c = coord(n);
      sub_coords.insert(sub_coords.end(), c.begin(), c.end() - 1);
      sub_values.push_back(values_[n]);
    }
    return SparseTensorT(std::move(sub_dims), std::move(sub_coords),
                         std::move(sub_values), {allow_zeros_, indexed_});
  }

  void check_bounds(std::span<const Index> idx) const {
    if (idx.size() != dims_.size())
      fail(ErrorKind::Index, "index arity " + std::to_string(idx.size()) +
                                 " does not match tensor order " +
                                 std::to_string(dims_.size()));
    for (std::size_t k = 0; k < dims_.size(); ++k)
      if (idx[k] < 0 || idx[k] >= dims_[k])
        fail(ErrorKind::Index, "index " + std::to_string(idx[k]) +
                                   " out of bounds for mode " +
                                   std::to_string(k) + " of size " +
                                   std::to_string(dims_[k]));
  }

 private:
  void validate_and_index() {
    const std::size_t d = dims_.size();
    if (d == 0) fail(ErrorKind::Shape, "sparse tensor needs at least one mode");
    numel_ = 1;
    for (Index n : dims_) {
      if (n <= 0) fail(ErrorKind::Shape, "tensor dims must be positive");
      if (numel_ > std::numeric_limits<Index>::max() / n)
        fail(ErrorKind::Shape,
             "product of tensor dims exceeds 2^63-1; cannot linearize");
      numel_ *= n;
    }
    if (coords_.size() != values_.size() * d)
      fail(ErrorKind::Shape, "coordinate list length does not match nnz*d");
    if (indexed_) index_.reserve(values_.size());
    for (std::size_t n = 0; n < values_.size(); ++n) {
      const Scalar v = values_[n];
      if (!std::isfinite(v))
        fail(ErrorKind::Domain, "non-finite value at entry " +
                                    std::to_string(n));
      if (v == Scalar(0) && !allow_zeros_)
        fail(ErrorKind::Domain, "explicit zero stored at entry " +
                                    std::to_string(n));
      auto c = coord(n);
      check_bounds(c);
      if (!indexed_) continue;
      auto [it, inserted] = index_.emplace(linearize_unchecked(c), n);
      if (!inserted)
        fail(ErrorKind::Contract, "duplicate coordinate at entries " +
                                      std::to_string(it->second) + " and " +
                                      std::to_string(n));
    }
  }

  std::vector<Index> dims_;
  std::vector<Index> coords_;
  std::vector<Scalar> values_;
  std::unordered_map<Index, std::size_t> index_;
  Index numel_ = 0;
  bool allow_zeros_ = false;
  bool indexed_ = true;
};

using SparseTensor = SparseTensorT<double>;

}  // namespace ogcp
