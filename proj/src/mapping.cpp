#include "xbofsim/mapping.hpp"

#include <algorithm>
#include <stdexcept>

namespace xbofsim {

MappingCache::MappingCache(std::int64_t total_pages, int pages_per_segment,
                           int local_capacity_segments)
    : total_pages_(total_pages),
      pages_per_segment_(pages_per_segment),
      local_capacity_(local_capacity_segments) {
  if (pages_per_segment_ < 1) throw std::invalid_argument("mapping: bad segment size");
  const std::int64_t regions =
      (total_pages_ + pages_per_segment_ - 1) / pages_per_segment_;
  dir_.resize(regions);
}

void MappingCache::touch(std::int64_t region) {
  RegionState& r = dir_[region];
  if (r.loc == SegmentLocation::Local) {
    local_lru_.erase(r.lru_pos);
    local_lru_.push_front(region);
    r.lru_pos = local_lru_.begin();
  } else if (r.loc == SegmentLocation::Offsite) {
    offsite_lru_.erase(r.lru_pos);
    offsite_lru_.push_front(region);
    r.lru_pos = offsite_lru_.begin();
  }
}

MappingCache::Action MappingCache::drop_action(std::int64_t region) {
  RegionState& r = dir_[region];
  Action a;
  a.region = region;
  a.from = r.loc;
  a.lender = r.lender;
  a.pages = dirty_pages(region);
  a.kind = a.pages.empty() ? Action::Kind::DropSegment : Action::Kind::FlushSegment;
  return a;
}

void MappingCache::evict_offsite(std::vector<Action>& actions) {
  const std::int64_t victim = offsite_lru_.back();
  offsite_lru_.pop_back();
  RegionState& r = dir_[victim];
  actions.push_back(drop_action(victim));
  offsite_free_per_lender_[r.lender]++;
  r.loc = SegmentLocation::NotCached;
  r.lender = 0xFF;
  r.present.clear();
  r.dirty.clear();
}

std::int64_t MappingCache::present_count(const RegionState& r) {
  std::int64_t n = 0;
  for (const bool b : r.present) n += b ? 1 : 0;
  return n;
}

void MappingCache::evict_local(std::vector<Action>& actions) {
  const std::int64_t victim = local_lru_.back();
  RegionState& r = dir_[victim];
  local_pages_ -= present_count(r);
  if (offsite_capacity_ > 0) {
    // Demote to the lender with free frames (lowest id for determinism).
    int lender = -1;
    for (int l = 0; l < 256; ++l) {
      if (offsite_free_per_lender_[l] > 0) {
        lender = l;
        break;
      }
    }
    if (lender < 0) {
      // Capacity exists but every frame is occupied: make room offsite.
      evict_offsite(actions);
      for (int l = 0; l < 256; ++l) {
        if (offsite_free_per_lender_[l] > 0) {
          lender = l;
          break;
        }
      }
    }
    local_lru_.pop_back();
    offsite_free_per_lender_[lender]--;
    Action demote;
    demote.kind = Action::Kind::DemoteSegment;
    demote.region = victim;
    demote.from = SegmentLocation::Local;
    demote.lender = static_cast<std::uint8_t>(lender);
    for (int p = 0; p < pages_per_segment_; ++p)
      if (r.present[p]) demote.pages.push_back(p);
    actions.push_back(std::move(demote));
    r.loc = SegmentLocation::Offsite;
    r.lender = static_cast<std::uint8_t>(lender);
    offsite_lru_.push_front(victim);
    r.lru_pos = offsite_lru_.begin();
    return;
  }
  local_lru_.pop_back();
  actions.push_back(drop_action(victim));
  r.loc = SegmentLocation::NotCached;
  r.present.clear();
  r.dirty.clear();
}

void MappingCache::install(std::int64_t region, std::vector<Action>& actions) {
  (void)actions;
  if (local_capacity_ < 1)
    throw std::logic_error("mapping: zero local capacity");
  RegionState& r = dir_[region];
  r.loc = SegmentLocation::Local;
  r.lender = 0xFF;
  r.present.assign(pages_per_segment_, false);
  r.dirty.assign(pages_per_segment_, false);
  local_lru_.push_front(region);
  r.lru_pos = local_lru_.begin();
}

MappingCache::Outcome MappingCache::access(std::int64_t page_index,
                                           bool mark_dirty) {
  if (page_index < 0 || page_index >= total_pages_)
    throw std::out_of_range("mapping: page index");
  const std::int64_t region = page_index / pages_per_segment_;
  const int page = static_cast<int>(page_index % pages_per_segment_);
  Outcome out;
  RegionState* r = &dir_[region];
  if (r->loc == SegmentLocation::NotCached) {
    install(region, out.actions);
    r = &dir_[region];  // install may reallocate nothing, but be safe
  } else {
    touch(region);
  }
  if (!r->present[page]) {
    out.page_fill = true;
    ++misses_;
    if (r->loc == SegmentLocation::Local) {
      // DRAM capacity is page-granular; eviction reclaims whole segments
      // starting from the LRU end (never the segment being filled).
      const std::int64_t cap =
          static_cast<std::int64_t>(local_capacity_) * pages_per_segment_;
      while (local_pages_ + 1 > cap && local_lru_.size() > 1)
        evict_local(out.actions);
      ++local_pages_;
    }
    Action fill;
    fill.kind = Action::Kind::FillPage;
    fill.region = region;
    fill.page = page;
    fill.from = r->loc;
    fill.lender = r->lender;
    out.actions.push_back(fill);
    r->present[page] = true;
  } else {
    ++hits_;
  }
  if (mark_dirty) r->dirty[page] = true;
  out.where = r->loc;
  out.lender = r->lender;
  return out;
}

void MappingCache::prewarm() {
  std::int64_t region = 0;
  const auto limit = std::min<std::int64_t>(regions(), local_capacity_);
  std::vector<Action> scratch;
  for (; region < limit; ++region) {
    install(region, scratch);
    RegionState& r = dir_[region];
    r.present.assign(pages_per_segment_, true);
    local_pages_ += pages_per_segment_;
  }
  // Keep LRU order: lowest region least recently used.
  local_lru_.clear();
  for (std::int64_t i = 0; i < limit; ++i) {
    local_lru_.push_front(i);
    dir_[i].lru_pos = local_lru_.begin();
  }
}

void MappingCache::add_offsite_frames(std::uint8_t lender, int count) {
  offsite_capacity_ += count;
  offsite_free_per_lender_[lender] += count;
}

std::vector<MappingCache::Action> MappingCache::remove_offsite_frames(
    std::uint8_t lender) {
  std::vector<Action> actions;
  for (auto it = offsite_lru_.begin(); it != offsite_lru_.end();) {
    const std::int64_t region = *it;
    RegionState& r = dir_[region];
    if (r.lender != lender) {
      ++it;
      continue;
    }
    actions.push_back(drop_action(region));
    it = offsite_lru_.erase(it);
    r.loc = SegmentLocation::NotCached;
    r.lender = 0xFF;
    r.present.clear();
    r.dirty.clear();
  }
  // The lender's whole allocation goes away: free frames plus dropped ones.
  offsite_capacity_ -=
      offsite_free_per_lender_[lender] + static_cast<int>(actions.size());
  offsite_free_per_lender_[lender] = 0;
  return actions;
}

std::vector<MappingCache::Action> MappingCache::shrink_local(int new_capacity) {
  std::vector<Action> actions;
  const std::int64_t cap =
      static_cast<std::int64_t>(new_capacity) * pages_per_segment_;
  while ((local_pages_ > cap ||
          static_cast<int>(local_lru_.size()) > new_capacity) &&
         !local_lru_.empty())
    evict_local(actions);
  local_capacity_ = new_capacity;
  return actions;
}

void MappingCache::grow_local(int new_capacity) {
  local_capacity_ = std::max(local_capacity_, new_capacity);
}

bool MappingCache::page_present(std::int64_t page_index) const {
  const std::int64_t region = page_index / pages_per_segment_;
  const int page = static_cast<int>(page_index % pages_per_segment_);
  const RegionState& r = dir_[region];
  return r.loc != SegmentLocation::NotCached && r.present[page];
}

std::vector<int> MappingCache::dirty_pages(std::int64_t region) const {
  std::vector<int> out;
  const RegionState& r = dir_[region];
  for (std::size_t p = 0; p < r.dirty.size(); ++p)
    if (r.dirty[p]) out.push_back(static_cast<int>(p));
  return out;
}

void MappingCache::clear_dirty(std::int64_t region) {
  RegionState& r = dir_[region];
  r.dirty.assign(r.dirty.size(), false);
}

std::vector<std::int64_t> MappingCache::regions_at(std::uint8_t lender) const {
  std::vector<std::int64_t> out;
  for (const auto region : offsite_lru_)
    if (dir_[region].lender == lender) out.push_back(region);
  return out;
}

std::vector<int> MappingCache::force_drop(std::int64_t region) {
  RegionState& r = dir_[region];
  std::vector<int> dirty = dirty_pages(region);
  if (r.loc == SegmentLocation::Local) {
    local_pages_ -= present_count(r);
    local_lru_.erase(r.lru_pos);
  } else if (r.loc == SegmentLocation::Offsite) {
    offsite_lru_.erase(r.lru_pos);
    offsite_free_per_lender_[r.lender]++;
  }
  r.loc = SegmentLocation::NotCached;
  r.lender = 0xFF;
  r.present.clear();
  r.dirty.clear();
  return dirty;
}

}  // namespace xbofsim
