#include "hilra/memory.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

namespace hilra::memory {

Tracker& Tracker::instance() {
  static Tracker tracker;
  return tracker;
}

void Tracker::add(const std::string& tag, std::size_t bytes) {
  std::lock_guard lock(mutex_);
  auto& c = tags_[tag];
  c.live += bytes;
  c.peak = std::max(c.peak, c.live);
  total_.live += bytes;
  total_.peak = std::max(total_.peak, total_.live);
}

void Tracker::release(const std::string& tag, std::size_t bytes) {
  std::lock_guard lock(mutex_);
  auto& c = tags_[tag];
  c.live -= std::min(c.live, bytes);
  total_.live -= std::min(total_.live, bytes);
}

std::size_t Tracker::live() const {
  std::lock_guard lock(mutex_);
  return total_.live;
}

std::size_t Tracker::peak() const {
  std::lock_guard lock(mutex_);
  return total_.peak;
}

std::size_t Tracker::live(const std::string& tag) const {
  std::lock_guard lock(mutex_);
  auto it = tags_.find(tag);
  return it == tags_.end() ? 0 : it->second.live;
}

std::size_t Tracker::peak(const std::string& tag) const {
  std::lock_guard lock(mutex_);
  auto it = tags_.find(tag);
  return it == tags_.end() ? 0 : it->second.peak;
}

void Tracker::reset_peaks() {
  std::lock_guard lock(mutex_);
  total_.peak = total_.live;
  for (auto& [tag, c] : tags_) c.peak = c.live;
}

Reservation::Reservation(std::string tag, std::size_t bytes)
    : tag_(std::move(tag)), bytes_(bytes) {
  Tracker::instance().add(tag_, bytes_);
}

Reservation::~Reservation() {
  if (bytes_ != 0) Tracker::instance().release(tag_, bytes_);
}

Reservation::Reservation(Reservation&& other) noexcept
    : tag_(std::move(other.tag_)), bytes_(std::exchange(other.bytes_, 0)) {}

Reservation& Reservation::operator=(Reservation&& other) noexcept {
  if (this != &other) {
    if (bytes_ != 0) Tracker::instance().release(tag_, bytes_);
    tag_ = std::move(other.tag_);
    bytes_ = std::exchange(other.bytes_, 0);
  }
  return *this;
}

void Reservation::resize(std::size_t bytes) {
  if (bytes > bytes_) {
    Tracker::instance().add(tag_, bytes - bytes_);
  } else if (bytes < bytes_) {
    Tracker::instance().release(tag_, bytes_ - bytes);
  }
  bytes_ = bytes;
}

std::optional<std::size_t> rss_peak_bytes() {
  std::ifstream status("/proc/self/status");
  if (!status) return std::nullopt;
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream in(line.substr(6));
      std::size_t kib = 0;
      in >> kib;
      return kib * 1024;
    }
  }
  return std::nullopt;
}

}  // namespace hilra::memory
