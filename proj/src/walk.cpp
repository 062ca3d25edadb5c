#include "gwspeed/walk.hpp"

#include <algorithm>

namespace gws {

namespace {

// One kernel draw: weight lambda to the parent slot, weight 1 per child.
// Returns 0 for "up" and the 1-based child letter otherwise.
uint32_t draw_move(uint32_t nu, double lambda, Rng& rng) {
  const double x = rng.next_double() * (lambda + static_cast<double>(nu));
  if (x < lambda || nu == 0) return 0;
  const uint32_t letter = 1 + static_cast<uint32_t>(x - lambda);
  return std::min(letter, nu);
}

}  // namespace

// ============================================================================
// ArenaSurface
// ============================================================================

uint32_t ArenaSurface::step(uint32_t cur, double lambda, Rng& rng) const {
  if (cur == TreeArena::kRootParent) return TreeArena::kRoot;  // reflection
  const uint32_t nu = arena_->child_count(cur);
  const uint32_t move = draw_move(nu, lambda, rng);
  return move == 0 ? arena_->parent(cur) : arena_->child(cur, move);
}

// ============================================================================
// ExplicitSurface
// ============================================================================

ExplicitSurface::ExplicitSurface(const ExplicitTree& tree) : tree_(&tree) {
  const size_t n = tree.size();
  parent_.assign(n + 1, kNoNode);
  depth_.assign(n + 1, -1);
  nchild_.assign(n + 1, 0);
  children_.assign(n + 1, {});
  nchild_[0] = 1;  // e* has exactly one child, the root
  children_[0] = {1};
  for (size_t i = 0; i < n; ++i) {
    const uint32_t id = static_cast<uint32_t>(i + 1);
    const Word& w = tree.words()[i];
    depth_[id] = static_cast<int>(w.size());
    parent_[id] = w.empty() ? 0 : static_cast<uint32_t>(tree.parent_index(i) + 1);
    nchild_[id] = tree.child_count_by_index(i);
    children_[id].resize(nchild_[id], kNoNode);
  }
  for (size_t i = 0; i < n; ++i) {
    const uint32_t id = static_cast<uint32_t>(i + 1);
    const Word& w = tree.words()[i];
    if (!w.empty()) children_[parent_[id]][w.back() - 1] = id;
  }
}

uint32_t ExplicitSurface::id_of(const Site& s) const {
  if (s.star) return 0;
  return static_cast<uint32_t>(tree_->index_of(s.w) + 1);
}

Site ExplicitSurface::site_of(uint32_t id) const {
  if (id == 0) return Site::root_parent();
  return Site::of(tree_->words()[id - 1]);
}

uint32_t ExplicitSurface::child(uint32_t id, uint32_t letter) const {
  return children_[id][letter - 1];
}

uint32_t ExplicitSurface::step(uint32_t cur, double lambda, Rng& rng) const {
  if (cur == 0) return 1;  // reflected at e*
  const uint32_t move = draw_move(nchild_[cur], lambda, rng);
  return move == 0 ? parent_[cur] : children_[cur][move - 1];
}

double ExplicitSurface::step_prob(uint32_t from, uint32_t to, double lambda) const {
  if (from == 0) return to == 1 ? 1.0 : 0.0;
  const double denom = lambda + static_cast<double>(nchild_[from]);
  if (parent_[from] == to) return lambda / denom;
  for (uint32_t c : children_[from])
    if (c == to) return 1.0 / denom;
  return 0.0;
}

// ============================================================================
// DoubleLayout
// ============================================================================

DoubleLayout::DoubleLayout(const DoubleTree& dt) : dt_(&dt), nright_(dt.right.size()) {
  const size_t total = dt.left.size() + dt.right.size();
  parent_.assign(total, kNoNode);
  nchild_.assign(total, 0);
  children_.assign(total, {});
  depth_.assign(total, 0);

  const auto wire = [&](const ExplicitTree& tree, uint32_t base) {
    for (size_t i = 0; i < tree.size(); ++i) {
      const uint32_t id = base + static_cast<uint32_t>(i);
      nchild_[id] = tree.child_count_by_index(i);
      children_[id].resize(nchild_[id], kNoNode);
    }
    for (size_t i = 0; i < tree.size(); ++i) {
      const uint32_t id = base + static_cast<uint32_t>(i);
      const Word& w = tree.words()[i];
      if (w.empty()) continue;
      const uint32_t p = base + static_cast<uint32_t>(tree.parent_index(i));
      parent_[id] = p;
      children_[p][w.back() - 1] = id;
      depth_[id] = static_cast<int>(w.size());
    }
  };
  wire(dt.right, 0);
  wire(dt.left, static_cast<uint32_t>(nright_));
  // The root edge: e- hangs off e+.
  parent_[eminus()] = eplus();
  depth_[eminus()] = 1;
  for (size_t i = 1; i < dt.left.size(); ++i)
    depth_[nright_ + i] = static_cast<int>(dt.left.words()[i].size()) + 1;
}

uint32_t DoubleLayout::id_of(const DVert& v) const {
  if (v.side > 0) return static_cast<uint32_t>(dt_->right.index_of(v.w));
  return static_cast<uint32_t>(nright_ + dt_->left.index_of(v.w));
}

DVert DoubleLayout::vert_of(uint32_t id) const {
  if (id < nright_) return DVert{+1, dt_->right.words()[id]};
  return DVert{-1, dt_->left.words()[id - nright_]};
}

// ============================================================================
// DoubleSurfaceY
// ============================================================================

uint32_t DoubleSurfaceY::kernel_up(uint32_t id) const {
  if (id == l_->eplus()) return l_->eminus();
  if (id == l_->eminus()) return l_->eplus();
  return l_->parent(id);
}

uint32_t DoubleSurfaceY::step(uint32_t cur, double lambda, Rng& rng) const {
  const uint32_t nu = l_->child_count(cur);
  const uint32_t move = draw_move(nu, lambda, rng);
  return move == 0 ? kernel_up(cur) : l_->children(cur)[move - 1];
}

double DoubleSurfaceY::step_prob(uint32_t from, uint32_t to, double lambda) const {
  const double denom = lambda + static_cast<double>(l_->child_count(from));
  if (kernel_up(from) == to) return lambda / denom;
  for (uint32_t c : l_->children(from))
    if (c == to) return 1.0 / denom;
  return 0.0;
}

// ============================================================================
// DoubleSurfaceYr
// ============================================================================

DoubleSurfaceYr::DoubleSurfaceYr(const DoubleLayout& layout, Word r)
    : l_(&layout), r_(std::move(r)) {
  const DoubleTree& dt = l_->tree();
  if (!dt.left.contains(r_))
    throw NotInTreeError("reroot vertex " + word_format(r_) + " is not in the left tree");
  const size_t total = l_->size();
  allowed_.assign(total, 1);
  rparent_.assign(total, kNoNode);
  others_.assign(total, {});
  reflect_ = l_->id_of(DVert{-1, r_});

  for (uint32_t id = 0; id < total; ++id) {
    const DVert v = l_->vert_of(id);
    if (v.side < 0 && word_is_strict_ancestor(r_, v.w)) {
      allowed_[id] = 0;  // never entered
      continue;
    }
    if (id == reflect_) continue;  // forced move, no kernel weights
    rparent_[id] = l_->id_of(r_parent(dt, v, r_));
    // Remaining allowed neighbours get weight 1 each.
    std::vector<uint32_t> nb;
    if (l_->parent(id) != kNoNode) nb.push_back(l_->parent(id));
    if (id == l_->eplus()) nb.push_back(l_->eminus());
    for (uint32_t c : l_->children(id)) nb.push_back(c);
    for (uint32_t x : nb) {
      if (x == rparent_[id]) continue;
      const DVert xv = l_->vert_of(x);
      if (xv.side < 0 && word_is_strict_ancestor(r_, xv.w)) continue;
      others_[id].push_back(x);
    }
  }
}

uint32_t DoubleSurfaceYr::step(uint32_t cur, double lambda, Rng& rng) const {
  (void)lambda;
  if (!allowed_[cur])
    throw InvalidPathError("rerooted walk stepped from an excluded vertex");
  if (cur == reflect_) {
    // Reflected: the unique move is one step up the reroot line, or across
    // the root edge when the reroot vertex is the left root.
    if (r_.empty()) return l_->eplus();
    return l_->id_of(DVert{-1, word_parent(r_)});
  }
  const size_t k = others_[cur].size();
  const double x = rng.next_double() * (lambda + static_cast<double>(k));
  if (x < lambda) return rparent_[cur];
  const size_t pick = std::min(k - 1, static_cast<size_t>(x - lambda));
  return others_[cur][pick];
}

double DoubleSurfaceYr::step_prob(uint32_t from, uint32_t to, double lambda) const {
  if (!allowed_[from] || !allowed_[to]) return 0.0;
  if (from == reflect_) {
    const uint32_t target =
        r_.empty() ? l_->eplus() : l_->id_of(DVert{-1, word_parent(r_)});
    return to == target ? 1.0 : 0.0;
  }
  const double denom = lambda + static_cast<double>(others_[from].size());
  if (rparent_[from] == to) return lambda / denom;
  for (uint32_t x : others_[from])
    if (x == to) return 1.0 / denom;
  return 0.0;
}

// ============================================================================
// Epochs
// ============================================================================

EpochList fresh_epochs(const Trajectory& traj) {
  EpochList out;
  if (traj.nodes.empty()) return out;
  std::vector<uint8_t> seen;
  for (size_t i = 0; i < traj.nodes.size(); ++i) {
    const uint32_t id = traj.nodes[i];
    if (id >= seen.size()) seen.resize(id + 1, 0);
    if (!seen[id]) {
      seen[id] = 1;
      out.fresh.push_back(i);
      out.fresh_nodes.push_back(id);
    }
  }
  return out;
}

namespace {

template <class S>
std::string csv_impl(const S& s, const Trajectory& traj) {
  std::string out = "step,word,depth\n";
  for (size_t i = 0; i < traj.nodes.size(); ++i) {
    const uint32_t id = traj.nodes[i];
    out += std::to_string(i);
    out.push_back(',');
    if constexpr (std::is_same_v<S, ArenaSurface>) {
      out += id == TreeArena::kRootParent ? std::string("e*") : word_format(s.word(id));
    } else {
      out += site_format(s.site_of(id));
    }
    out.push_back(',');
    out += std::to_string(s.depth(id));
    out.push_back('\n');
  }
  return out;
}

}  // namespace

std::string trajectory_csv(const ArenaSurface& s, const Trajectory& traj) {
  return csv_impl(s, traj);
}
std::string trajectory_csv(const ExplicitSurface& s, const Trajectory& traj) {
  return csv_impl(s, traj);
}

}  // namespace gws
