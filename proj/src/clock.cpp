#include "drvsynth/clock.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace drvsynth {

Seconds SystemClock::now() const
{
    return std::chrono::duration_cast<Seconds>(std::chrono::steady_clock::now().time_since_epoch());
}

void SystemClock::sleep_for(Seconds d)
{
    if (d.count() > 0) {
        std::this_thread::sleep_for(d);
    }
}

Seconds VirtualClock::now() const
{
    std::lock_guard lock(mutex_);
    return now_;
}

void VirtualClock::sleep_for(Seconds d)
{
    std::lock_guard lock(mutex_);
    if (d.count() > 0) {
        now_ += d;
    }
}

RateLimiter::RateLimiter(Clock& clock, int budget, Seconds window) : clock_(clock), budget_(budget), window_(window)
{
    if (budget < 1 || window.count() <= 0) {
        throw std::invalid_argument("rate budget and window must be positive");
    }
}

Seconds RateLimiter::acquire()
{
    // Holding the lock while sleeping keeps grants in arrival order.
    std::lock_guard lock(mutex_);
    for (;;) {
        Seconds now = clock_.now();
        while (!dispatched_.empty() && now - dispatched_.front() >= window_) {
            dispatched_.pop_front();
        }
        if (static_cast<int>(dispatched_.size()) < budget_) {
            dispatched_.push_back(now);
            return now;
        }
        clock_.sleep_for(std::max(dispatched_.front() + window_ - now, Seconds(1e-3)));
    }
}

} // namespace drvsynth
