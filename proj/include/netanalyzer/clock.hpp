#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>

namespace netanalyzer {

// Milliseconds source. Experiments run on a ManualClock so that every
// timestamp they record is reproducible; the live service uses wall time.
using Clock = std::function<std::int64_t()>;

inline std::int64_t wall_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

inline Clock system_clock() { return &wall_clock_ms; }

class ManualClock {
public:
    explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

    std::int64_t now() const { return now_.load(); }
    void set(std::int64_t ms) { now_.store(ms); }
    void advance(std::int64_t ms) { now_.fetch_add(ms); }

    Clock as_clock() const {
        return [this] { return now(); };
    }

private:
    std::atomic<std::int64_t> now_;
};

}  // namespace netanalyzer
