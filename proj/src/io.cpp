#include "ogcp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>

namespace ogcp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  fail(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what);
}

Index parse_index(const std::string& tok, std::size_t line) {
  Index v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    parse_error(line, "non-integer index '" + tok + "'");
  if (v <= 0) parse_error(line, "index must be >= 1, got " + tok);
  return v;
}

double parse_value(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) parse_error(line, "non-numeric value '" + tok + "'");
    if (!std::isfinite(v)) parse_error(line, "non-finite value '" + tok + "'");
    return v;
  } catch (const std::invalid_argument&) {
    parse_error(line, "non-numeric value '" + tok + "'");
  } catch (const std::out_of_range&) {
    parse_error(line, "value out of range '" + tok + "'");
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

SparseTensor read_tns(std::istream& in, const TnsReadOptions& opts) {
  std::optional<std::vector<Index>> declared;
  std::size_t order = 0;
  std::vector<Index> coords;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> seen;  // only when merging

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      if (body.rfind("dims:", 0) == 0) {
        std::vector<Index> dims;
        for (const auto& tok : split_ws(body.substr(5)))
          dims.push_back(parse_index(tok, line_no));
        if (dims.empty()) parse_error(line_no, "empty dims header");
        declared = std::move(dims);
      }
      continue;
    }
    const auto toks = split_ws(line);
    if (toks.size() < 2) parse_error(line_no, "expected indices and a value");
    if (order == 0) order = toks.size() - 1;
    if (toks.size() - 1 != order)
      parse_error(line_no, "expected " + std::to_string(order) +
                               " indices, found " + std::to_string(toks.size() - 1));
    if (declared && declared->size() != order)
      parse_error(line_no, "entry arity does not match the dims header");
    const std::size_t base = coords.size();
    for (std::size_t k = 0; k < order; ++k) {
      const Index i = parse_index(toks[k], line_no);
      if (declared && i > (*declared)[k])
        parse_error(line_no, "index " + std::to_string(i) + " exceeds declared dim " +
                                 std::to_string((*declared)[k]));
      coords.push_back(i - 1);
    }
    const double v = parse_value(toks[order], line_no);
    if (opts.merge_duplicates) {
      std::string key(reinterpret_cast<const char*>(coords.data() + base),
                      order * sizeof(Index));
      auto [it, fresh] = seen.emplace(std::move(key), values.size());
      if (!fresh) {
        values[it->second] += v;
        coords.resize(base);
        continue;
      }
    }
    values.push_back(v);
  }

  std::vector<Index> dims;
  if (declared) {
    dims = *declared;
  } else {
    if (order == 0) fail(ErrorKind::Parse, "empty .tns file without a dims header");
    dims.assign(order, 1);
    for (std::size_t n = 0; n < values.size(); ++n)
      for (std::size_t k = 0; k < order; ++k)
        dims[k] = std::max(dims[k], coords[n * order + k] + 1);
  }
  if (order == 0) order = dims.size();

  // Drop entries that are (or merged to) exactly zero; zeros are implicit.
  std::vector<Index> kept_coords;
  std::vector<double> kept_values;
  kept_coords.reserve(coords.size());
  kept_values.reserve(values.size());
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (values[n] == 0.0) continue;
    kept_coords.insert(kept_coords.end(), coords.begin() + n * order,
                       coords.begin() + (n + 1) * order);
    kept_values.push_back(values[n]);
  }
  try {
    return SparseTensor(std::move(dims), std::move(kept_coords),
                        std::move(kept_values));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Contract) throw;
    fail(ErrorKind::Parse, std::string(e.what()) +
                               " (pass --merge-duplicates to sum repeated entries)");
  }
}

SparseTensor read_tns(const std::filesystem::path& path,
                      const TnsReadOptions& opts) {
  auto in = open_in(path);
  try {
    return read_tns(in, opts);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

void write_tns(const SparseTensor& x, std::ostream& out) {
  out << std::setprecision(17);
  out << "# dims:";
  for (Index n : x.dims()) out << ' ' << n;
  out << '\n';
  for (std::size_t n = 0; n < x.nnz(); ++n) {
    for (std::size_t k = 0; k < x.ndims(); ++k) out << x.coord(n, k) + 1 << ' ';
    out << x.value(n) << '\n';
  }
  if (!out) fail(ErrorKind::Io, "write failed");
}

void write_tns(const SparseTensor& x, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_tns(x, out);
}

void write_ktensor(const KTensor& m, std::ostream& out) {
  out << std::setprecision(17);
  out << m.ndims() << ' ' << m.rank() << '\n';
  const auto dims = m.dims();
  for (std::size_t k = 0; k < dims.size(); ++k) out << (k ? " " : "") << dims[k];
  out << '\n';
  for (Index j = 0; j < m.rank(); ++j) out << (j ? " " : "") << m.weights()(j);
  out << '\n';
  for (const auto& a : m.factors())
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index j = 0; j < a.cols(); ++j) out << (j ? " " : "") << a(i, j);
      out << '\n';
    }
  if (!out) fail(ErrorKind::Io, "write failed");
}

void write_ktensor(const KTensor& m, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_ktensor(m, out);
}

KTensor read_ktensor(std::istream& in) {
  std::size_t d = 0;
  Index rank = 0;
  if (!(in >> d >> rank) || d == 0 || rank <= 0)
    fail(ErrorKind::Parse, "K-tensor: bad 'd R' header");
  std::vector<Index> dims(d);
  for (auto& n : dims)
    if (!(in >> n) || n <= 0) fail(ErrorKind::Parse, "K-tensor: bad dims line");
  Vector w(rank);
  for (Index j = 0; j < rank; ++j)
    if (!(in >> w(j))) fail(ErrorKind::Parse, "K-tensor: bad weights line");
  FactorList factors;
  for (std::size_t k = 0; k < d; ++k) {
    FactorMatrix a(dims[k], rank);
    for (Index i = 0; i < dims[k]; ++i)
      for (Index j = 0; j < rank; ++j)
        if (!(in >> a(i, j)))
          fail(ErrorKind::Parse, "K-tensor: truncated factor " + std::to_string(k + 1));
    factors.push_back(std::move(a));
  }
  return KTensor(std::move(w), std::move(factors));
}

KTensor read_ktensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_ktensor(in);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

SliceStream::SliceStream(const SparseTensor& x) : x_(&x) {
  if (x.ndims() < 2) fail(ErrorKind::Shape, "slice streaming needs >= 2 modes");
  const std::size_t last = x.ndims() - 1;
  const Index n_slices = x.dim(last);
  offsets_.assign(static_cast<std::size_t>(n_slices) + 1, 0);
  for (std::size_t n = 0; n < x.nnz(); ++n) ++offsets_[x.coord(n, last) + 1];
  for (std::size_t t = 1; t < offsets_.size(); ++t) offsets_[t] += offsets_[t - 1];
  order_.resize(x.nnz());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t n = 0; n < x.nnz(); ++n) order_[fill[x.coord(n, last)]++] = n;
}

SparseTensor SliceStream::slice(Index t) const {
  if (t < 0 || t >= num_slices())
    fail(ErrorKind::Index, "slice " + std::to_string(t) + " out of range");
  const std::size_t d = x_->ndims() - 1;
  std::vector<Index> dims(x_->dims().begin(), x_->dims().end() - 1);
  std::vector<Index> coords;
  std::vector<double> values;
  const std::size_t b = offsets_[t], e = offsets_[t + 1];
  coords.reserve((e - b) * d);
  values.reserve(e - b);
  for (std::size_t p = b; p < e; ++p) {
    const auto c = x_->coord(order_[p]);
    coords.insert(coords.end(), c.begin(), c.begin() + d);
    values.push_back(x_->value(order_[p]));
  }
  return SparseTensor(std::move(dims), std::move(coords), std::move(values));
}

std::optional<SparseTensor> SliceStream::next() {
  if (cursor_ >= num_slices()) return std::nullopt;
  return slice(cursor_++);
}

SparseTensor stack_slices(std::span<const SparseTensor> slices) {
  if (slices.empty()) fail(ErrorKind::Shape, "cannot stack zero slices");
  std::vector<Index> dims = slices.front().dims();
  for (const auto& s : slices)
    if (s.dims() != dims) fail(ErrorKind::Shape, "stacked slices differ in shape");
  dims.push_back(static_cast<Index>(slices.size()));
  std::vector<Index> coords;
  std::vector<double> values;
  for (std::size_t t = 0; t < slices.size(); ++t) {
    const auto& s = slices[t];
    for (std::size_t n = 0; n < s.nnz(); ++n) {
      const auto c = s.coord(n);
      coords.insert(coords.end(), c.begin(), c.end());
      coords.push_back(static_cast<Index>(t));
      values.push_back(s.value(n));
    }
  }
  return SparseTensor(std::move(dims), std::move(coords), std::move(values));
}

SparseTensor last_mode_range(const SparseTensor& x, Index begin, Index end) {
  const std::size_t last = x.ndims() - 1;
  if (begin < 0 || end > x.dim(last) || begin >= end)
    fail(ErrorKind::Index, "invalid last-mode range [" + std::to_string(begin) +
                               "," + std::to_string(end) + ")");
  std::vector<Index> dims = x.dims();
  dims[last] = end - begin;
  std::vector<Index> coords;
  std::vector<double> values;
  for (std::size_t n = 0; n < x.nnz(); ++n) {
    const Index t = x.coord(n, last);
    if (t < begin || t >= end) continue;
    const auto c = x.coord(n);
    coords.insert(coords.end(), c.begin(), c.end());
    coords.back() -= begin;
    values.push_back(x.value(n));
  }
  return SparseTensor(std::move(dims), std::move(coords), std::move(values));
}

}  // namespace ogcp
