#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>
#include <vector>

#include "xbofsim/time.hpp"

namespace xbofsim {

struct FlashGeometry {
  int channels = 8;
  int dies_per_channel = 8;
  int planes_per_die = 4;
  int blocks_per_plane = 1024;
  int pages_per_block = 1024;
  std::int64_t page_size = 16384;
  std::int64_t channel_mt_per_s = 2400;  // 8-bit bus -> MB/s numerically equal

  int dies_total() const { return channels * dies_per_channel; }
  std::int64_t blocks_total() const {
    return static_cast<std::int64_t>(dies_total()) * planes_per_die *
           blocks_per_plane;
  }
  std::int64_t pages_total() const { return blocks_total() * pages_per_block; }
  std::int64_t capacity_bytes() const { return pages_total() * page_size; }

  Nanos page_transfer_ns() const {
    // MT/s on an 8-bit bus moves one byte per transfer.
    return (page_size * 1000 + channel_mt_per_s - 1) / channel_mt_per_s;
  }
  Nanos bytes_transfer_ns(std::int64_t bytes) const {
    return (bytes * 1000 + channel_mt_per_s - 1) / channel_mt_per_s;
  }

  void validate() const;
};

enum class PageType : std::uint8_t { LSB = 0, CSB = 1, MSB = 2 };

struct FlashTiming {
  Nanos read_ns[3] = {30'000, 45'000, 60'000};
  Nanos program_ns[3] = {200'000, 280'000, 400'000};
  Nanos erase_ns = 3'000'000;

  void validate() const;
  Nanos avg_read_ns() const {
    return (read_ns[0] + read_ns[1] + read_ns[2]) / 3;
  }
};

enum class FlashOpKind : std::uint8_t { Read, Program, Erase };

struct FlashAddress {
  int channel = 0;
  int die = 0;
  int plane = 0;
  int block = 0;
  int page = 0;
};

// Pages cycle LSB -> CSB -> MSB by page index within a block.
inline PageType page_type_of(int page_index) {
  return static_cast<PageType>(page_index % 3);
}

struct FlashFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlashOpResult {
  Nanos start;      // when the op began occupying a resource
  Nanos cell_start;
  Nanos cell_end;   // die released
  Nanos complete;   // data available / program committed / erase done
};

// Per-SSD flash array. Dies serialize cell operations; channels serialize
// page transfers. Operations on distinct planes of one die share a cell
// window when they have the same kind and page offset and are issued at the
// same instant (multi-plane command).
class FlashBackbone {
 public:
  FlashBackbone(FlashGeometry geometry, FlashTiming timing);

  // `earliest` is the time the op is handed to the flash controller.
  FlashOpResult submit(FlashOpKind kind, const FlashAddress& addr,
                       Nanos earliest);

  // Mean die-busy fraction over [begin, end). Both bounds must not exceed
  // the highest time already observed via submit (we only look backwards).
  double utilization_window(Nanos begin, Nanos end) const;

  // Accumulated die-busy time by op kind, for the energy model.
  std::int64_t busy_ns(FlashOpKind kind) const {
    return busy_ns_[static_cast<int>(kind)];
  }
  std::int64_t transferred_bytes() const { return transferred_bytes_; }
  std::int64_t ops_submitted() const { return ops_submitted_; }

  const FlashGeometry& geometry() const { return geometry_; }
  const FlashTiming& timing() const { return timing_; }

  // Erase state bookkeeping so program-in-place bugs fault loudly.
  void note_erased(const FlashAddress& block_addr);

  // Drop busy intervals ending before t; utilization queries must stay
  // at or after this horizon.
  void prune(Nanos t);

 private:
  struct DieState {
    Nanos free_at = 0;
    // Last cell window, for multi-plane joining.
    FlashOpKind group_kind = FlashOpKind::Erase;
    int group_page = -1;
    Nanos group_cell_start = -1;
    Nanos group_cell_end = -1;
    Nanos group_issued = -1;
    std::uint32_t group_planes = 0;
    std::deque<std::pair<Nanos, Nanos>> busy;  // merged cell intervals
  };

  int die_index(const FlashAddress& a) const {
    return a.channel * geometry_.dies_per_channel + a.die;
  }
  std::int64_t block_key(const FlashAddress& a) const {
    return ((static_cast<std::int64_t>(die_index(a)) * geometry_.planes_per_die +
             a.plane) *
            geometry_.blocks_per_plane) +
           a.block;
  }
  void check_address(const FlashAddress& a) const;

  FlashGeometry geometry_;
  FlashTiming timing_;
  std::vector<DieState> dies_;
  std::vector<Nanos> channel_free_;
  std::map<std::int64_t, std::vector<bool>> programmed_;  // lazily per block
  std::int64_t busy_ns_[3] = {0, 0, 0};
  std::int64_t transferred_bytes_ = 0;
  std::int64_t ops_submitted_ = 0;
  Nanos prune_horizon_ = 0;
};

}  // namespace xbofsim
