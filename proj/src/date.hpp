#pragma once

#include <compare>
#include <cstdio>
#include <string>

#include "errors.hpp"

namespace aqua {

// Calendar date, day resolution. Match-up granularity in this pipeline is
// one day, so no time-of-day is carried.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    static bool is_leap(int y) {
        return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    }

    static int days_in_month(int y, int m) {
        static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        if (m == 2 && is_leap(y)) return 29;
        return d[m - 1];
    }

    bool valid() const {
        return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
    }

    // Days since 1970-01-01 (proleptic Gregorian), for date arithmetic.
    long serial() const {
        long y = year - (month <= 2 ? 1 : 0);
        long era = (y >= 0 ? y : y - 399) / 400;
        long yoe = y - era * 400;
        long doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
        long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + doe - 719468;
    }

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static Date parse(const std::string& text) {
        Date d;
        char extra = 0;
        if (std::sscanf(text.c_str(), "%d-%d-%d%c", &d.year, &d.month, &d.day, &extra) != 3 ||
            text.size() != 10 || !d.valid()) {
            throw DataError("unparseable ISO-8601 date: '" + text + "'");
        }
        return d;
    }
};

inline long days_between(const Date& a, const Date& b) {
    return b.serial() - a.serial();
}

}  // namespace aqua
