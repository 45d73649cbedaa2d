#pragma once

// Independent interval-set oracle: tracks live blocks as [start, end) ranges
// and flags overlaps, escapes from the heap, and unknown releases.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

namespace uk::test {

class IntervalOracle {
 public:
  IntervalOracle(const void* heap, std::size_t len)
      : lo_(reinterpret_cast<std::uintptr_t>(heap)), hi_(lo_ + len) {}

  // Records a new live block; returns an empty string or a failure reason.
  std::string add(const void* p, std::size_t len) {
    const auto start = reinterpret_cast<std::uintptr_t>(p);
    const std::uintptr_t end = start + len;
    if (start < lo_ || end > hi_ || end < start) return "block escapes heap";
    auto next = live_.lower_bound(start);
    if (next != live_.end() && next->first < end) return "overlaps following block";
    if (next != live_.begin()) {
      auto prev = std::prev(next);
      if (prev->second > start) return "overlaps preceding block";
    }
    live_.emplace(start, end);
    bytes_ += len;
    return {};
  }

  std::string remove(const void* p) {
    auto it = live_.find(reinterpret_cast<std::uintptr_t>(p));
    if (it == live_.end()) return "release of unknown block";
    bytes_ -= it->second - it->first;
    live_.erase(it);
    return {};
  }

  std::size_t live_count() const { return live_.size(); }
  std::size_t live_bytes() const { return bytes_; }

 private:
  std::uintptr_t lo_;
  std::uintptr_t hi_;
  std::map<std::uintptr_t, std::uintptr_t> live_;
  std::size_t bytes_ = 0;
};

}  // namespace uk::test
