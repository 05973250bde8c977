#include "epi/dates.hpp"

#include <cstdio>

namespace epi {

Date Date::parse(const std::string& iso)
{
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(iso.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
        throw std::invalid_argument("not an ISO-8601 date: '" + iso + "'");
    }
    return Date{y, m, d};
}

std::string Date::to_string() const
{
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_}}};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

} // namespace epi
