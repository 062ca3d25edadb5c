#include "gwspeed/tree.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace gws {

// ============================================================================
// TreeArena
// ============================================================================

TreeArena::TreeArena(OffspringLaw law, uint64_t seed)
    : law_(std::move(law)), seed_(seed) {
  nodes_.emplace_back();  // e*
  Node& star = nodes_.back();
  star.hash = mix64(seed_, 0x73746172ULL);
  star.depth = -1;
  star.count.store(1, std::memory_order_relaxed);
  star.first_child.store(kRoot, std::memory_order_relaxed);

  nodes_.emplace_back();  // e
  Node& root = nodes_.back();
  root.hash = NodeStream::root_hash(seed_);
  root.parent = kRootParent;
  root.depth = 0;
}

uint32_t TreeArena::child_count(NodeId id) {
  const int32_t cached = node(id).count.load(std::memory_order_acquire);
  if (cached >= 0) return static_cast<uint32_t>(cached);

  std::lock_guard<std::mutex> lk(expand_mu_);
  Node& n = node(id);
  const int32_t again = n.count.load(std::memory_order_acquire);
  if (again >= 0) return static_cast<uint32_t>(again);

  const uint32_t count = NodeStream::draw_count(law_, n.hash);
  if (count > 0) {
    const NodeId first = static_cast<NodeId>(nodes_.size());
    for (uint32_t i = 1; i <= count; ++i) {
      nodes_.emplace_back();
      Node& c = nodes_.back();
      c.hash = NodeStream::child_hash(n.hash, i);
      c.parent = id;
      c.letter = i;
      c.depth = n.depth + 1;
    }
    n.first_child.store(first, std::memory_order_release);
  }
  n.count.store(static_cast<int32_t>(count), std::memory_order_release);
  return count;
}

std::vector<NodeId> TreeArena::expand(NodeId id) {
  const uint32_t count = child_count(id);
  std::vector<NodeId> out;
  out.reserve(count);
  const NodeId first = node(id).first_child.load(std::memory_order_acquire);
  for (uint32_t i = 0; i < count; ++i) out.push_back(first + i);
  return out;
}

NodeId TreeArena::child(NodeId id, uint32_t letter) {
  const uint32_t count = child_count(id);
  if (letter == 0 || letter > count)
    throw SimError("BadChild", "child letter out of range");
  return node(id).first_child.load(std::memory_order_acquire) + (letter - 1);
}

NodeId TreeArena::parent(NodeId id) const { return node(id).parent; }
Letter TreeArena::letter(NodeId id) const { return node(id).letter; }
int TreeArena::depth(NodeId id) const { return node(id).depth; }

Word TreeArena::word(NodeId id) const {
  Word w;
  for (NodeId cur = id; cur != kRoot && cur != kRootParent; cur = node(cur).parent)
    w.push_back(node(cur).letter);
  if (id == kRootParent) throw SimError("BadArgument", "e* has no word label");
  std::reverse(w.begin(), w.end());
  return w;
}

NodeId TreeArena::find(const Word& w) {
  NodeId cur = kRoot;
  for (Letter letter : w) {
    if (letter == 0 || letter > child_count(cur)) return kNoNode;
    cur = child(cur, letter);
  }
  return cur;
}

bool TreeArena::proven_finite(size_t node_budget, size_t frontier_limit) {
  std::vector<NodeId> frontier{kRoot};
  size_t seen = 1;
  while (!frontier.empty()) {
    if (frontier.size() >= frontier_limit) return false;
    std::vector<NodeId> next;
    for (NodeId id : frontier) {
      for (NodeId c : expand(id)) next.push_back(c);
      if (++seen > node_budget) return false;
    }
    frontier = std::move(next);
  }
  return true;
}

void TreeArena::materialize_depth(int depth_limit, size_t node_budget) {
  std::vector<NodeId> frontier{kRoot};
  size_t seen = 1;
  for (int d = 0; d < depth_limit && !frontier.empty(); ++d) {
    std::vector<NodeId> next;
    for (NodeId id : frontier) {
      for (NodeId c : expand(id)) next.push_back(c);
      if (++seen > node_budget)
        throw DepthBudgetError("node budget exhausted while materializing to depth " +
                               std::to_string(depth_limit));
    }
    frontier = std::move(next);
  }
}

std::vector<Word> TreeArena::prefix_words(int depth_limit) const {
  std::vector<Word> out;
  for (size_t id = kRoot; id < nodes_.size(); ++id) {
    if (node(static_cast<NodeId>(id)).depth <= depth_limit)
      out.push_back(word(static_cast<NodeId>(id)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ============================================================================
// ExplicitTree
// ============================================================================

ExplicitTree ExplicitTree::from_words(std::vector<Word> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  if (words.empty() || !words.front().empty())
    throw SimError("TreeInvalid", "a tree must contain the root e");
  for (const Word& w : words) {
    if (w.empty()) continue;
    if (w.back() == 0) throw SimError("TreeInvalid", "letters are 1-based");
    Word probe = word_parent(w);
    if (!std::binary_search(words.begin(), words.end(), probe))
      throw SimError("TreeInvalid", "tree not closed under parent at " + word_format(w));
    probe = w;
    for (Letter j = 1; j < w.back(); ++j) {
      probe.back() = j;
      if (!std::binary_search(words.begin(), words.end(), probe))
        throw SimError("TreeInvalid",
                       "tree not closed under left sibling at " + word_format(w));
    }
  }
  return unchecked(std::move(words));
}

ExplicitTree ExplicitTree::unchecked(std::vector<Word> sorted_words) {
  ExplicitTree t;
  t.words_ = std::move(sorted_words);
  t.build_indexes();
  return t;
}

void ExplicitTree::build_indexes() {
  parent_.assign(words_.size(), -1);
  nchild_.assign(words_.size(), 0);
  for (size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) continue;
    const size_t p = index_of(word_parent(words_[i]));
    parent_[i] = static_cast<int>(p);
    nchild_[p] = std::max(nchild_[p], words_[i].back());
  }
}

bool ExplicitTree::contains(const Word& w) const {
  return std::binary_search(words_.begin(), words_.end(), w);
}

size_t ExplicitTree::index_of(const Word& w) const {
  const auto it = std::lower_bound(words_.begin(), words_.end(), w);
  if (it == words_.end() || *it != w)
    throw NotInTreeError("vertex " + word_format(w) + " is not in the tree");
  return static_cast<size_t>(it - words_.begin());
}

uint32_t ExplicitTree::child_count(const Word& w) const {
  return nchild_[index_of(w)];
}

int ExplicitTree::height() const {
  size_t h = 0;
  for (const Word& w : words_) h = std::max(h, w.size());
  return static_cast<int>(h);
}

std::string ExplicitTree::serialize() const {
  std::string out;
  for (const Word& w : words_) {
    out += word_format(w);
    out.push_back('\n');
  }
  return out;
}

ExplicitTree ExplicitTree::deserialize(const std::string& text) {
  std::vector<Word> words;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    words.push_back(word_parse(line));
  }
  return from_words(std::move(words));
}

std::string ExplicitTree::canonical() const {
  std::string out;
  for (const Word& w : words_) {
    out += word_format(w);
    out.push_back(' ');
  }
  return out;
}

ExplicitTree truncate(const ExplicitTree& tree, int depth_limit) {
  std::vector<Word> kept;
  for (const Word& w : tree.words())
    if (static_cast<int>(w.size()) <= depth_limit) kept.push_back(w);
  return ExplicitTree::unchecked(std::move(kept));
}

ExplicitTree explicit_prefix(TreeArena& arena, int depth_limit, size_t node_budget) {
  arena.materialize_depth(depth_limit, node_budget);
  return ExplicitTree::unchecked(arena.prefix_words(depth_limit));
}

// ============================================================================
// Cut and backward trees
// ============================================================================

ExplicitTree cut_at(const ExplicitTree& tree, const Word& x) {
  if (!tree.contains(x))
    throw NotInTreeError("cut vertex " + word_format(x) + " is not in the tree");
  std::vector<Word> kept;
  kept.reserve(tree.size());
  for (const Word& w : tree.words())
    if (!word_is_strict_ancestor(x, w)) kept.push_back(w);
  return ExplicitTree::unchecked(std::move(kept));
}

Site reversal_image(const Word& x, const Site& site) {
  const size_t n = x.size();
  const Word xbar = word_reversed(x);
  if (site.star) return Site::of(xbar);  // e* lands on the reversed word
  const Word& u = site.w;
  if (word_is_strict_ancestor(x, u))
    throw InvalidPathError("reversal image undefined on strict descendants of " +
                           word_format(x));
  // Ancestors of x (including x itself): x_{*k} -> the ancestor of the
  // reversed word at k' = n - k + 1 letters removed, with k' = 0 meaning the
  // reversed word itself and k' = n + 1 meaning e*.
  if (word_is_ancestor_or_equal(u, x)) {
    const size_t k = n - u.size();
    const size_t kprime = n - k + 1;
    if (kprime == n + 1) return Site::root_parent();
    return Site::of(word_ancestor(xbar, kprime));
  }
  // Off the ancestral path: attach at the image of the deepest path vertex
  // that is an ancestor of u, keeping the relative label.
  size_t common = 0;
  while (common < u.size() && common < n && u[common] == x[common]) ++common;
  // u's deepest path ancestor is x_{*k} with |x_{*k}| = common.
  const size_t k = n - common;
  const size_t kprime = n - k + 1;
  Word image = (kprime <= n) ? word_ancestor(xbar, kprime) : Word{};
  image.insert(image.end(), u.begin() + static_cast<ptrdiff_t>(common), u.end());
  return Site::of(image);
}

ExplicitTree backward_tree(const ExplicitTree& tree, const Word& x) {
  const ExplicitTree cut = cut_at(tree, x);
  std::vector<Word> words;
  words.reserve(cut.size());
  for (const Word& w : cut.words()) {
    const Site img = reversal_image(x, Site::of(w));
    if (!img.star) words.push_back(img.w);  // x itself maps to e*
  }
  // The old e* becomes the reversed word, a leaf of the result.
  words.push_back(word_reversed(x));
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return ExplicitTree::unchecked(std::move(words));
}

// ============================================================================
// Double trees
// ============================================================================

std::string dvert_format(const DVert& v) {
  return word_format(v.w) + (v.side > 0 ? "+" : "-");
}

DVert r_parent(const DoubleTree& dt, const DVert& v, const Word& r) {
  if (!dt.left.contains(r))
    throw NotInTreeError("reroot vertex " + word_format(r) + " is not in the left tree");
  if (v.side > 0) {
    if (!dt.right.contains(v.w)) throw NotInTreeError("vertex not in the right tree");
    if (v.w.empty()) return DVert{-1, {}};  // across the root edge
    return DVert{+1, word_parent(v.w)};
  }
  if (!dt.left.contains(v.w)) throw NotInTreeError("vertex not in the left tree");
  if (word_is_ancestor_or_equal(r, v.w))
    throw UndefinedVertexError("no r-parent at or below the reroot vertex");
  if (word_is_strict_ancestor(v.w, r)) {
    // One step toward r along its ancestral line.
    return DVert{-1, word_ancestor(r, r.size() - v.w.size() - 1)};
  }
  return DVert{-1, word_parent(v.w)};
}

}  // namespace gws
