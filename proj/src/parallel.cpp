#include "homog/parallel.hpp"

#include <atomic>

namespace homog {

namespace {
std::atomic<int> g_workers{1};
}

int default_workers() { return g_workers.load(); }

void set_default_workers(int n) { g_workers.store(std::max(n, 1)); }

}  // namespace homog
