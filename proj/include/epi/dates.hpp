#pragma once

#include <chrono>
#include <compare>
#include <stdexcept>
#include <string>

namespace epi {

/// Calendar date stored as days since the civil epoch (1970-01-01).
/// Parsing and formatting use ISO-8601 (YYYY-MM-DD) exclusively.
class Date {
public:
    Date() = default;
    explicit Date(int days_since_epoch) : days_(days_since_epoch) {}
    Date(int year, unsigned month, unsigned day)
    {
        const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                              std::chrono::day{day}};
        if (!ymd.ok()) {
            throw std::invalid_argument("invalid calendar date");
        }
        days_ = std::chrono::sys_days{ymd}.time_since_epoch().count();
    }

    static Date parse(const std::string& iso);

    int days_since_epoch() const { return days_; }
    std::string to_string() const;

    Date operator+(int days) const { return Date{days_ + days}; }
    Date operator-(int days) const { return Date{days_ - days}; }
    int operator-(Date other) const { return days_ - other.days_; }
    Date& operator++()
    {
        ++days_;
        return *this;
    }
    auto operator<=>(const Date&) const = default;

private:
    int days_ = 0;
};

} // namespace epi
