#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>

namespace drvsynth {

using Seconds = std::chrono::duration<double>;

class Clock {
public:
    virtual ~Clock() = default;
    /// Monotonic time since an arbitrary origin.
    virtual Seconds now() const = 0;
    virtual void sleep_for(Seconds d) = 0;
};

class SystemClock final : public Clock {
public:
    Seconds now() const override;
    void sleep_for(Seconds d) override;
};

/// Time advances only through sleep_for or advance; sleeps return immediately.
class VirtualClock final : public Clock {
public:
    Seconds now() const override;
    void sleep_for(Seconds d) override;
    void advance(Seconds d) { sleep_for(d); }

private:
    mutable std::mutex mutex_;
    Seconds now_{0};
};

/// Sliding-window limiter: at most `budget` dispatches in any `window`.
/// acquire() blocks (through the clock) until a slot is free; waiters are
/// served in arrival order.
class RateLimiter {
public:
    RateLimiter(Clock& clock, int budget, Seconds window = std::chrono::seconds(60));

    /// Returns the dispatch time granted to the caller.
    Seconds acquire();

    int budget() const noexcept { return budget_; }

private:
    Clock& clock_;
    int budget_;
    Seconds window_;
    std::mutex mutex_;
    std::deque<Seconds> dispatched_;
};

} // namespace drvsynth
