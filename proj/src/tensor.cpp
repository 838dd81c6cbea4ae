#include "memroute/tensor.hpp"

#include <atomic>

namespace memroute::alloc_stats {

namespace {
std::atomic<std::uint64_t> g_current{0};
std::atomic<std::uint64_t> g_peak{0};
}  // namespace

std::uint64_t current_bytes() { return g_current.load(std::memory_order_relaxed); }
std::uint64_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed)); }

namespace detail {

void on_alloc(std::uint64_t bytes) {
    const std::uint64_t now = g_current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::uint64_t peak = g_peak.load(std::memory_order_relaxed);
    while (now > peak &&
           !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
    }
}

void on_free(std::uint64_t bytes) { g_current.fetch_sub(bytes, std::memory_order_relaxed); }

}  // namespace detail

}  // namespace memroute::alloc_stats
