#include "hmt/tree.hpp"

#include <algorithm>

#include "hmt/error.hpp"

namespace hmt::tree {

VertexId VertexId::from_bits(std::string_view bits) {
  for (char c : bits) {
    if (c != '0' && c != '1') throw Error(ErrorCode::invalid_argument, "vertex path must contain only 0/1: '" + std::string(bits) + "'");
  }
  return VertexId(std::string(bits));
}

VertexId VertexId::from_index(std::uint64_t index) {
  std::size_t h = index::height(index);
  std::uint64_t value = index + 1 - (std::uint64_t{1} << h);
  std::string bits(h, '0');
  for (std::size_t i = 0; i < h; ++i) {
    if ((value >> (h - 1 - i)) & 1U) bits[i] = '1';
  }
  return VertexId(std::move(bits));
}

VertexId VertexId::child(int bit) const {
  if (bit != 0 && bit != 1) throw Error(ErrorCode::invalid_argument, "child bit must be 0 or 1");
  return VertexId(bits_ + static_cast<char>('0' + bit));
}

std::uint64_t VertexId::bfs_index() const {
  if (height() > 62) throw Error(ErrorCode::invalid_argument, "vertex too deep for index arithmetic");
  return (std::uint64_t{1} << height()) - 1 + tail_value(height());
}

std::uint64_t VertexId::tail_value(std::size_t count) const {
  if (count > height() || count > 63) throw Error(ErrorCode::invalid_argument, "tail longer than path");
  std::uint64_t value = 0;
  for (std::size_t i = height() - count; i < height(); ++i) value = (value << 1) | static_cast<std::uint64_t>(bits_[i] - '0');
  return value;
}

VertexId parent(const VertexId& v) {
  if (v.is_root()) throw Error(ErrorCode::root_has_no_parent, "the root has no parent");
  return VertexId::from_bits(std::string_view(v.path()).substr(0, v.height() - 1));
}

VertexId ancestor(const VertexId& v, std::size_t k) {
  if (k > v.height()) throw Error(ErrorCode::root_has_no_parent, "ancestor above the root");
  return VertexId::from_bits(std::string_view(v.path()).substr(0, v.height() - k));
}

bool is_descendant(const VertexId& v, const VertexId& w) {
  return v.height() >= w.height() && v.path().compare(0, w.height(), w.path()) == 0;
}

Mrca mrca_and_distance(const VertexId& u, const VertexId& v) {
  std::size_t common = 0;
  std::size_t limit = std::min(u.height(), v.height());
  while (common < limit && u.path()[common] == v.path()[common]) ++common;
  return {VertexId::from_bits(std::string_view(u.path()).substr(0, common)), u.height() + v.height() - 2 * common};
}

bool bfs_less(const VertexId& u, const VertexId& v) {
  if (u.height() != v.height()) return u.height() < v.height();
  return u.path() < v.path();
}

bool VertexSet::contains(const VertexId& v) const {
  return std::binary_search(vertices.begin(), vertices.end(), v, BfsLess{});
}

VertexId Spine::root_path(std::size_t depth) const {
  if (depth > bits.size()) throw Error(ErrorCode::spine_required, "spine shorter than requested extension");
  std::string path;
  path.reserve(depth);
  for (std::size_t j = depth; j-- > 0;) {
    if (bits[j] > 1) throw Error(ErrorCode::invalid_argument, "spine bits must be 0 or 1");
    path.push_back(static_cast<char>('0' + bits[j]));
  }
  return VertexId::from_bits(path);
}

std::uint64_t tree_size(std::size_t n) { return (std::uint64_t{2} << n) - 1; }
std::uint64_t generation_size(std::size_t n) { return std::uint64_t{1} << n; }

namespace {

// Appends w·s for every s of relative height `level` whose value is <= last.
void append_level(std::vector<VertexId>& out, const VertexId& w, std::size_t level, std::uint64_t last) {
  std::string bits = w.path();
  bits.resize(w.height() + level, '0');
  for (std::uint64_t value = 0; value <= last; ++value) {
    for (std::size_t i = 0; i < level; ++i) bits[w.height() + i] = ((value >> (level - 1 - i)) & 1U) ? '1' : '0';
    out.push_back(VertexId::from_bits(bits));
  }
}

void append_subtree(std::vector<VertexId>& out, const VertexId& u, std::size_t k) {
  for (std::size_t level = 0; level <= k; ++level) append_level(out, u, level, generation_size(level) - 1);
}

}  // namespace

VertexSet tree_up_to(std::size_t n) {
  VertexSet set{{}, SetRole::tree};
  append_subtree(set.vertices, VertexId::root(), n);
  return set;
}

VertexSet generation(std::size_t n) {
  VertexSet set{{}, SetRole::generation};
  append_level(set.vertices, VertexId::root(), n, generation_size(n) - 1);
  return set;
}

VertexSet subtree(const VertexId& u, std::size_t k) {
  VertexSet set{{}, SetRole::subtree};
  append_subtree(set.vertices, u, k);
  return set;
}

VertexId embed(const VertexId& u, std::size_t k, const Spine* spine) {
  if (k <= u.height()) return u;
  if (spine == nullptr) throw Error(ErrorCode::spine_required, "k exceeds the height of u; a spine is needed");
  std::size_t extra = k - u.height();
  return VertexId::from_bits(spine->root_path(extra).path() + u.path());
}

VertexSet delta(const VertexId& u, std::size_t k, const Spine* spine) {
  VertexSet set = delta_star(u, k, spine);
  set.vertices.push_back(embed(u, k, spine));
  set.role = SetRole::past;
  return set;
}

VertexSet delta_star(const VertexId& u, std::size_t k, const Spine* spine) {
  VertexId v = embed(u, k, spine);
  VertexId w = ancestor(v, k);
  std::uint64_t position = v.tail_value(k);
  VertexSet set{{}, SetRole::strict_past};
  if (k > 0) {
    append_subtree(set.vertices, w, k - 1);
    if (position > 0) append_level(set.vertices, w, k, position - 1);
  }
  return set;
}

Shape shape_of(const VertexId& u, std::size_t k, const Spine* spine) {
  VertexId v = embed(u, k, spine);
  return {generation_size(k) + v.tail_value(k), k};
}

std::vector<Shape> shapes(std::size_t k) {
  std::vector<Shape> out;
  for (std::uint64_t j = 0; j < generation_size(k); ++j) out.push_back({generation_size(k) + j, k});
  return out;
}

VertexSet canonical_delta(const Shape& shape) {
  if (shape.index() >= generation_size(shape.level)) throw Error(ErrorCode::invalid_argument, "shape size out of range");
  return delta(VertexId::from_index(tree_size(shape.level) - generation_size(shape.level) + shape.index()), shape.level);
}

VertexSet block_past(const VertexId& u, std::size_t m, std::size_t k, const Spine* spine) {
  if (m == 0) throw Error(ErrorCode::invalid_argument, "block depth m must be positive");
  std::size_t period = m + 1;
  if (u.height() % period != 0) throw Error(ErrorCode::block_misaligned, "height of u is not a multiple of m+1");
  VertexSet roots = delta_star(u, k * period, spine);
  VertexId v = embed(u, k * period, spine);
  VertexSet set{{}, SetRole::block_past};
  for (const VertexId& r : roots.vertices) {
    if (r.height() % period != v.height() % period) continue;
    append_subtree(set.vertices, r, m);
  }
  std::sort(set.vertices.begin(), set.vertices.end(), BfsLess{});
  return set;
}

VertexSet block_delta(const VertexId& u, std::size_t m, std::size_t k, const Spine* spine) {
  VertexSet set = block_past(u, m, k, spine);
  append_subtree(set.vertices, embed(u, k * (m + 1), spine), m);
  std::sort(set.vertices.begin(), set.vertices.end(), BfsLess{});
  set.role = SetRole::block_past;
  return set;
}

namespace index {

std::size_t height(std::uint64_t i) {
  std::size_t h = 0;
  while ((i + 1) >> (h + 1)) ++h;
  return h;
}

std::uint64_t ancestor(std::uint64_t i, std::size_t k) {
  for (std::size_t j = 0; j < k; ++j) {
    if (i == 0) throw Error(ErrorCode::root_has_no_parent, "ancestor above the root");
    i = parent(i);
  }
  return i;
}

std::vector<std::uint64_t> delta(std::uint64_t u, std::size_t k) {
  std::vector<std::uint64_t> out;
  std::uint64_t w = ancestor(u, k);
  std::uint64_t first = w;
  std::uint64_t limit = u;
  for (std::size_t level = 0; level <= k; ++level) {
    std::uint64_t count = std::uint64_t{1} << level;
    for (std::uint64_t j = 0; j < count && first + j <= limit; ++j) out.push_back(first + j);
    first = 2 * first + 1;
  }
  return out;
}

std::vector<std::uint64_t> delta_star(std::uint64_t u, std::size_t k) {
  std::vector<std::uint64_t> out = delta(u, k);
  out.pop_back();
  return out;
}

}  // namespace index

}  // namespace hmt::tree
