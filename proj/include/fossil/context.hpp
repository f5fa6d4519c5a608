#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "fossil/common.hpp"
#include "fossil/dataset.hpp"

namespace fossil {

// What a scorer may see about a user at one time step.
struct UserContext {
  UserIndex user = 0;
  std::vector<ItemIndex> history;  // long-term item set, sorted and distinct
  std::vector<ItemIndex> recents;  // recents[k-1] is the item k steps back

  bool in_history(ItemIndex item) const {
    return std::binary_search(history.begin(), history.end(), item);
  }
};

// Fills recents with up to `order` items preceding `position` (0-based).
inline void fill_recents(std::span<const ItemIndex> sequence, std::size_t position,
                         std::size_t order, std::vector<ItemIndex>& recents) {
  recents.clear();
  for (std::size_t k = 1; k <= order && k <= position; ++k) {
    recents.push_back(sequence[position - k]);
  }
}

// Context for predicting the action at `position`: everything strictly
// before it.
inline UserContext context_before(const SequenceDataset& ds, UserIndex u,
                                  std::size_t position, std::size_t order) {
  UserContext ctx;
  ctx.user = u;
  const auto& seq = ds.sequences[u];
  ctx.history = distinct_items(std::span(seq).first(position));
  fill_recents(seq, position, order, ctx.recents);
  return ctx;
}

// Context for predicting the action after the last observed one.
inline UserContext context_after_all(const SequenceDataset& ds, UserIndex u,
                                     std::size_t order) {
  return context_before(ds, u, ds.sequences[u].size(), order);
}

}  // namespace fossil
