#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hmt/error.hpp"
#include "hmt/tree.hpp"
#include "oracle/brute_force.hpp"

using hmt::tree::VertexId;
namespace tree = hmt::tree;

namespace {

std::vector<std::string> paths(const tree::VertexSet& set) {
  std::vector<std::string> out;
  for (const auto& v : set.vertices) out.push_back(v.path());
  return out;
}

VertexId V(const char* bits) { return VertexId::from_bits(bits); }

}  // namespace

TEST_CASE("parent drops the last bit") {
  CHECK(tree::parent(V("01")).path() == "0");
  CHECK(tree::parent(V("1")).path().empty());
  try {
    tree::parent(VertexId::root());
    FAIL("expected an error");
  } catch (const hmt::Error& e) {
    CHECK(e.code() == hmt::ErrorCode::root_has_no_parent);
  }
}

TEST_CASE("mrca and path distance") {
  auto a = tree::mrca_and_distance(V("00"), V("01"));
  CHECK(a.vertex.path() == "0");
  CHECK(a.distance == 2);
  auto b = tree::mrca_and_distance(V("011"), V("011"));
  CHECK(b.vertex.path() == "011");
  CHECK(b.distance == 0);
  auto c = tree::mrca_and_distance(V("00"), V("11"));
  CHECK(c.vertex.is_root());
  CHECK(c.distance == 4);
}

TEST_CASE("breadth-first order") {
  CHECK(tree::bfs_less(V("1"), V("00")));
  CHECK_FALSE(tree::bfs_less(V("01"), V("00")));
  CHECK_FALSE(tree::bfs_less(V("00"), V("00")));
}

TEST_CASE("breadth-first index round trip and arithmetic") {
  for (std::uint64_t i = 0; i < 1023; ++i) {
    VertexId v = VertexId::from_index(i);
    CHECK(v.bfs_index() == i);
    if (i > 0) CHECK(tree::parent(v).bfs_index() == tree::index::parent(i));
    CHECK(tree::index::height(i) == v.height());
    CHECK(v.child(0).bfs_index() == tree::index::child(i, 0));
    CHECK(v.child(1).bfs_index() == tree::index::child(i, 1));
  }
}

TEST_CASE("tree and generation sizes") {
  for (std::size_t n = 0; n < 10; ++n) {
    CHECK(tree::tree_size(n) == (std::uint64_t{2} << n) - 1);
    CHECK(tree::generation_size(n) == std::uint64_t{1} << n);
    CHECK(tree::tree_up_to(n).size() == tree::tree_size(n));
    CHECK(tree::generation(n).size() == tree::generation_size(n));
  }
}

TEST_CASE("past sets of small vertices") {
  CHECK(paths(tree::delta(V("01"), 1)) == std::vector<std::string>{"0", "00", "01"});
  CHECK(paths(tree::delta_star(V("01"), 1)) == std::vector<std::string>{"0", "00"});
  CHECK(paths(tree::delta(VertexId::root(), 0)) == std::vector<std::string>{""});
  CHECK(tree::delta(V("11"), 2).size() == 7);
}

TEST_CASE("past sets agree with the direct enumeration and nest between subtrees") {
  for (std::uint64_t u = 0; u < 127; ++u) {
    VertexId U = VertexId::from_index(u);
    for (std::size_t k = 0; k <= U.height(); ++k) {
      auto d = tree::delta(U, k);
      std::vector<std::uint64_t> idx;
      for (const auto& v : d.vertices) idx.push_back(v.bfs_index());
      CHECK(std::is_sorted(idx.begin(), idx.end()));
      CHECK(idx == tree::index::delta(u, k));
      if (k > 0) CHECK(idx == oracle::past_of(u, k));
      CHECK(d.contains(U));
      auto ds = tree::delta_star(U, k);
      CHECK(ds.size() + 1 == d.size());
      CHECK_FALSE(ds.contains(U));
      VertexId top = tree::ancestor(U, k);
      if (k >= 1) {
        for (const auto& v : tree::subtree(top, k - 1).vertices) CHECK(d.contains(v));
      }
      for (const auto& v : d.vertices) CHECK(tree::subtree(top, k).contains(v));
    }
  }
}

TEST_CASE("shapes") {
  auto s2 = tree::shapes(2);
  REQUIRE(s2.size() == 4);
  std::vector<std::uint64_t> sizes;
  for (auto s : s2) sizes.push_back(s.size);
  CHECK(sizes == std::vector<std::uint64_t>{4, 5, 6, 7});
  auto s = tree::shape_of(V("01"), 1);
  CHECK(s.size == 3);
  CHECK(s.level == 1);
  CHECK(tree::shapes(0).size() == 1);
  CHECK(tree::shapes(0)[0].size == 1);
}

TEST_CASE("shape index follows the low bits of the breadth-first index") {
  for (std::uint64_t u = 0; u < 255; ++u) {
    VertexId U = VertexId::from_index(u);
    for (std::size_t k = 0; k <= U.height(); ++k) {
      auto s = tree::shape_of(U, k);
      CHECK(s.level == k);
      CHECK(s.size == tree::delta(U, k).size());
      CHECK(s.index() == ((u + 1) & ((std::uint64_t{1} << k) - 1)));
      CHECK(tree::canonical_delta(s).size() == s.size);
    }
  }
}

TEST_CASE("block pasts") {
  CHECK(tree::block_past(VertexId::root(), 1, 0).empty());
  // T(11,1) has the three earlier blocks of its generation and the root block.
  std::set<std::string> expected;
  for (const char* root : {"", "00", "01", "10"}) {
    for (const auto& v : tree::subtree(V(root), 1).vertices) expected.insert(v.path());
  }
  auto got = paths(tree::block_past(V("11"), 1, 1));
  CHECK(std::set<std::string>(got.begin(), got.end()) == expected);
  CHECK(got.size() == expected.size());
  auto full = tree::block_delta(V("11"), 1, 1);
  CHECK(full.size() == expected.size() + 3);
}

TEST_CASE("embedding beyond the root needs a spine") {
  try {
    tree::delta(V("0"), 3);
    FAIL("expected an error");
  } catch (const hmt::Error& e) {
    CHECK(e.code() == hmt::ErrorCode::spine_required);
  }
  tree::Spine spine;
  spine.bits = {1, 0, 1};
  auto d = tree::delta(V("0"), 3, &spine);
  auto s = tree::shape_of(V("0"), 3, &spine);
  CHECK(d.size() == s.size);
  CHECK(s.level == 3);
  // The embedded vertex sits at height 3 of the virtual tree.
  CHECK(tree::embed(V("0"), 3, &spine).height() == 3);
}
