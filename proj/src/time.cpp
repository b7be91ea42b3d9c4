#include "srr/time.hpp"

#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace srr {

namespace {

int read_digits(std::string_view s, std::size_t& pos, int count) {
    if (pos + count > s.size()) throw std::invalid_argument("truncated timestamp");
    int value = 0;
    for (int i = 0; i < count; ++i) {
        const char c = s[pos++];
        if (!std::isdigit(static_cast<unsigned char>(c))) throw std::invalid_argument("expected digit in timestamp");
        value = value * 10 + (c - '0');
    }
    return value;
}

void expect(std::string_view s, std::size_t& pos, char c) {
    if (pos >= s.size() || s[pos] != c) throw std::invalid_argument(std::string("expected '") + c + "' in timestamp");
    ++pos;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    std::size_t pos = 0;
    const int y = read_digits(text, pos, 4);
    expect(text, pos, '-');
    const int mo = read_digits(text, pos, 2);
    expect(text, pos, '-');
    const int d = read_digits(text, pos, 2);
    if (pos >= text.size() || (text[pos] != 'T' && text[pos] != ' ')) throw std::invalid_argument("missing time part");
    ++pos;
    const int hh = read_digits(text, pos, 2);
    expect(text, pos, ':');
    const int mm = read_digits(text, pos, 2);
    int ss = 0;
    if (pos < text.size() && text[pos] == ':') {
        ++pos;
        ss = read_digits(text, pos, 2);
    }
    int offset_minutes = 0;
    if (pos < text.size()) {
        const char c = text[pos];
        if (c == 'Z') {
            ++pos;
        } else if (c == '+' || c == '-') {
            ++pos;
            const int oh = read_digits(text, pos, 2);
            int om = 0;
            if (pos < text.size()) {
                if (text[pos] == ':') ++pos;
                om = read_digits(text, pos, 2);
            }
            offset_minutes = (c == '+' ? 1 : -1) * (oh * 60 + om);
        }
    }
    if (pos != text.size()) throw std::invalid_argument("trailing characters in timestamp");

    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) throw std::invalid_argument("timestamp field out of range");
    return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const hh_mm_ss<seconds> tod{t - day_start};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()));
    return buf;
}

}  // namespace srr
