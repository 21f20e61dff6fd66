#pragma once

#include <cstdint>
#include <queue>
#include <vector>

#include "aoi/time.hpp"

namespace aoi::sim {

/// Pending events ordered by (time, insertion sequence). Equal times pop in
/// insertion order, which keeps runs reproducible everywhere.
template <typename Payload>
class EventQueue {
 public:
  struct Entry {
    Nanos time;
    std::uint64_t seq;
    Payload payload;
  };

  void push(Nanos time, Payload payload) { heap_.push(Entry{time, next_seq_++, std::move(payload)}); }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const Entry& top() const { return heap_.top(); }

  Entry pop() {
    Entry e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace aoi::sim
