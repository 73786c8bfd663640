#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hmt::tree {

// Vertex of the complete binary tree in Neveu notation: the root is the empty
// path, the children of v are v0 and v1.
class VertexId {
 public:
  VertexId() = default;

  static VertexId root() { return VertexId(); }
  static VertexId from_bits(std::string_view bits);
  // Inverse of bfs_index().
  static VertexId from_index(std::uint64_t index);

  const std::string& path() const { return bits_; }
  std::size_t height() const { return bits_.size(); }
  bool is_root() const { return bits_.empty(); }

  VertexId child(int bit) const;
  // Position in the breadth-first enumeration of the whole tree; needs height <= 62.
  std::uint64_t bfs_index() const;
  // Integer value of the last `count` bits.
  std::uint64_t tail_value(std::size_t count) const;

  bool operator==(const VertexId& other) const = default;

 private:
  explicit VertexId(std::string bits) : bits_(std::move(bits)) {}
  std::string bits_;
};

VertexId parent(const VertexId& v);
// p^k(v).
VertexId ancestor(const VertexId& v, std::size_t k);
bool is_descendant(const VertexId& v, const VertexId& w);

struct Mrca {
  VertexId vertex;
  std::size_t distance = 0;
};
Mrca mrca_and_distance(const VertexId& u, const VertexId& v);

bool bfs_less(const VertexId& u, const VertexId& v);

struct BfsLess {
  bool operator()(const VertexId& u, const VertexId& v) const { return bfs_less(u, v); }
};

enum class SetRole { tree, generation, subtree, past, strict_past, block_past, region, other };

struct VertexSet {
  std::vector<VertexId> vertices;
  SetRole role = SetRole::other;

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
  bool contains(const VertexId& v) const;
};

// Random backward spine; bits[0] says which child of p(∂) the root is, bits[j]
// the same one generation further up.
struct Spine {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  // Path of the original root inside the virtual tree rooted `depth` generations up.
  VertexId root_path(std::size_t depth) const;
};

std::uint64_t tree_size(std::size_t n);
std::uint64_t generation_size(std::size_t n);

VertexSet tree_up_to(std::size_t n);
VertexSet generation(std::size_t n);
// T(u,k): descendants of u up to k generations below it.
VertexSet subtree(const VertexId& u, std::size_t k);

// Coordinates of u inside the virtual tree rooted at p^k(u). When k <= h(u)
// this is u itself; otherwise the spine supplies the missing generations.
VertexId embed(const VertexId& u, std::size_t k, const Spine* spine);

// Δ(u,k) and Δ*(u,k). For k > h(u) the vertices are expressed in the virtual
// tree rooted at p^k(u) (see embed).
VertexSet delta(const VertexId& u, std::size_t k, const Spine* spine = nullptr);
VertexSet delta_star(const VertexId& u, std::size_t k, const Spine* spine = nullptr);

struct Shape {
  std::uint64_t size = 1;
  std::size_t level = 0;

  // Index j of the canonical vertex v_j of G_k carrying this shape.
  std::uint64_t index() const { return size - (std::uint64_t{1} << level); }
  bool operator==(const Shape& other) const = default;
};

Shape shape_of(const VertexId& u, std::size_t k, const Spine* spine = nullptr);
std::vector<Shape> shapes(std::size_t k);
// Canonical Δ(v,k) for the vertex v of G_k with the given shape.
VertexSet canonical_delta(const Shape& shape);

// Δ*(T(u,m),k): union of the blocks T(v,m) preceding T(u,m) within k block
// generations. Blocks are aligned on generations divisible by m+1.
VertexSet block_past(const VertexId& u, std::size_t m, std::size_t k, const Spine* spine = nullptr);
// Δ(T(u,m),k) = block_past ∪ T(u,m).
VertexSet block_delta(const VertexId& u, std::size_t m, std::size_t k, const Spine* spine = nullptr);

// Index arithmetic on breadth-first indices (root = 0).
namespace index {
inline std::uint64_t parent(std::uint64_t i) { return (i - 1) / 2; }
inline std::uint64_t child(std::uint64_t i, int bit) { return 2 * i + 1 + static_cast<std::uint64_t>(bit); }
std::size_t height(std::uint64_t i);
std::uint64_t ancestor(std::uint64_t i, std::size_t k);
// Breadth-first indices of Δ(u,k) (k <= h(u)), ascending.
std::vector<std::uint64_t> delta(std::uint64_t u, std::size_t k);
// Indices of Δ*(u,k); the same list as delta without its last element.
std::vector<std::uint64_t> delta_star(std::uint64_t u, std::size_t k);
}  // namespace index

}  // namespace hmt::tree
