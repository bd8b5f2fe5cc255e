#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <vector>

namespace xbofsim {

using Lpn = std::int64_t;

// Packed mapping entry: global 16 KB flash page index << 2 | slot (4 KB slices
// per page). Two sentinels mark unwritten and buffered-in-DRAM states.
constexpr std::uint32_t kUnmappedEntry = 0xFFFFFFFF;
constexpr std::uint32_t kBufferedEntry = 0xFFFFFFFE;

constexpr std::uint32_t pack_ppn(std::int64_t flash_page, int slot) {
  return static_cast<std::uint32_t>(flash_page << 2 | slot);
}
constexpr std::int64_t ppn_page(std::uint32_t entry) { return entry >> 2; }
constexpr int ppn_slot(std::uint32_t entry) { return entry & 3; }

enum class SegmentLocation : std::uint8_t { NotCached, Local, Offsite };

// Segment-granular FTL metadata cache. The mapping table is split into 16 KB
// mapping pages (4096 entries); segments group pages_per_segment of them and
// are the unit of caching, eviction, and DRAM lending. Pages fill lazily
// within a resident segment. Two recency orders: local frames and offsite
// (borrowed) frames, with demotion local -> offsite -> flash.
class MappingCache {
 public:
  struct Action {
    enum class Kind : std::uint8_t {
      FillPage,       // read one mapping page from flash
      DemoteSegment,  // copy present pages of `region` to offsite `lender`
      FlushSegment,   // program dirty pages back to flash, then drop
      DropSegment,    // clean drop
    };
    Kind kind;
    std::int64_t region = 0;
    int page = 0;                      // FillPage only
    SegmentLocation from = SegmentLocation::NotCached;
    std::uint8_t lender = 0xFF;        // Demote target / flush source lender
    std::vector<int> pages;            // Demote: present; Flush: dirty
  };

  struct Outcome {
    bool page_fill = false;            // this access missed in DRAM
    SegmentLocation where = SegmentLocation::NotCached;  // after the access
    std::uint8_t lender = 0xFF;
    std::vector<Action> actions;       // in execution order
  };

  MappingCache(std::int64_t total_pages, int pages_per_segment,
               int local_capacity_segments);

  // One mapping access (4 KB slice granularity upstream). mark_dirty notes
  // an entry update on the page.
  Outcome access(std::int64_t page_index, bool mark_dirty);

  // Marks every local frame resident and present (boot-time preload of as
  // much of the table as fits, LRU order by region index).
  void prewarm();

  // Lending surface: capacity arrives or leaves as whole offsite frames.
  void add_offsite_frames(std::uint8_t lender, int count);
  // Releases every frame at `lender`. Each affected region produces a Flush
  // or Drop action (caller decides timing); state becomes NotCached.
  std::vector<Action> remove_offsite_frames(std::uint8_t lender);
  // Shrinks local capacity (lender side: segments handed to a borrower).
  std::vector<Action> shrink_local(int new_capacity);
  void grow_local(int new_capacity);

  std::int64_t regions() const { return static_cast<std::int64_t>(dir_.size()); }
  int local_capacity() const { return local_capacity_; }
  int offsite_capacity() const { return offsite_capacity_; }
  int pages_per_segment() const { return pages_per_segment_; }
  SegmentLocation location(std::int64_t region) const { return dir_[region].loc; }
  std::uint8_t lender_of(std::int64_t region) const { return dir_[region].lender; }
  bool page_present(std::int64_t page_index) const;
  std::vector<int> dirty_pages(std::int64_t region) const;
  void clear_dirty(std::int64_t region);
  // Regions currently cached at `lender`.
  std::vector<std::int64_t> regions_at(std::uint8_t lender) const;
  // Drop a region unconditionally (recovery path); returns dirty pages.
  std::vector<int> force_drop(std::int64_t region);

  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }
  void reset_counters() { hits_ = misses_ = 0; }

 private:
  struct RegionState {
    SegmentLocation loc = SegmentLocation::NotCached;
    std::uint8_t lender = 0xFF;
    std::vector<bool> present;  // sized on first cache
    std::vector<bool> dirty;
    std::list<std::int64_t>::iterator lru_pos;
  };

  void touch(std::int64_t region);
  static std::int64_t present_count(const RegionState& r);
  // Makes room and caches `region` locally; appends actions.
  void install(std::int64_t region, std::vector<Action>& actions);
  void evict_local(std::vector<Action>& actions);
  void evict_offsite(std::vector<Action>& actions);
  Action drop_action(std::int64_t region);

  std::int64_t total_pages_;
  int pages_per_segment_;
  int local_capacity_;        // segments
  std::int64_t local_pages_ = 0;    // present pages in local frames
  int offsite_capacity_ = 0;  // segments (physical frames at lenders)
  std::vector<int> offsite_free_per_lender_ = std::vector<int>(256, 0);
  std::vector<RegionState> dir_;
  std::list<std::int64_t> local_lru_;    // front = most recent
  std::list<std::int64_t> offsite_lru_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace xbofsim
