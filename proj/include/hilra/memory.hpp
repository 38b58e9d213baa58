#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace hilra::memory {

// Live-byte accounting for tagged subsystems ("fmm.expansions",
// "hss.samples", ...). Subsystems register what they hold through
// Reservation handles; the tracker keeps the global and per-tag high-water
// marks.
class Tracker {
 public:
  static Tracker& instance();

  void add(const std::string& tag, std::size_t bytes);
  void release(const std::string& tag, std::size_t bytes);

  std::size_t live() const;
  std::size_t peak() const;
  std::size_t live(const std::string& tag) const;
  std::size_t peak(const std::string& tag) const;

  // Resets every high-water mark to the current live figure.
  void reset_peaks();

 private:
  struct Counter {
    std::size_t live = 0;
    std::size_t peak = 0;
  };
  mutable std::mutex mutex_;
  Counter total_;
  std::map<std::string, Counter> tags_;
};

// RAII registration of a byte count under a tag. Resizing updates the
// tracker by the difference.
class Reservation {
 public:
  Reservation() = default;
  Reservation(std::string tag, std::size_t bytes);
  ~Reservation();

  Reservation(Reservation&& other) noexcept;
  Reservation& operator=(Reservation&& other) noexcept;
  Reservation(const Reservation&) = delete;
  Reservation& operator=(const Reservation&) = delete;

  void resize(std::size_t bytes);
  std::size_t bytes() const { return bytes_; }

 private:
  std::string tag_;
  std::size_t bytes_ = 0;
};

// Process resident-set high-water mark (VmHWM) in bytes, if the platform
// exposes it.
std::optional<std::size_t> rss_peak_bytes();

}  // namespace hilra::memory
