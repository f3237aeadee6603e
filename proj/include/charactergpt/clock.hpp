#pragma once

#include <chrono>
#include <memory>
#include <string>

namespace charactergpt {

using TimePoint = std::chrono::system_clock::time_point;

class Clock {
public:
    virtual ~Clock() = default;
    virtual TimePoint now() const = 0;
};

class SystemClock final : public Clock {
public:
    TimePoint now() const override { return std::chrono::system_clock::now(); }
};

/// Always reports the same instant. Used to normalize timestamps so that two
/// runs produce byte-identical artifacts.
class FixedClock final : public Clock {
public:
    explicit FixedClock(TimePoint at = TimePoint{}) : at_(at) {}
    TimePoint now() const override { return at_; }

private:
    TimePoint at_;
};

std::shared_ptr<const Clock> system_clock();
std::shared_ptr<const Clock> fixed_clock();

/// ISO-8601 UTC with millisecond precision, e.g. 2024-03-01T09:30:00.000Z.
std::string format_utc(TimePoint tp);

}  // namespace charactergpt
