#include "srr/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "srr/errors.hpp"
#include "srr/random.hpp"

namespace srr {

PowerUnit parse_power_unit(const std::string& text) {
    if (text == "kW_average") return PowerUnit::kw_average;
    if (text == "kWh_interval") return PowerUnit::kwh_interval;
    throw ConfigError("unknown power unit '" + text + "' (expected kW_average or kWh_interval)");
}

std::string to_string(PowerUnit unit) { return unit == PowerUnit::kw_average ? "kW_average" : "kWh_interval"; }

GapPolicy parse_gap_policy(const std::string& text) {
    if (text == "drop_day") return GapPolicy::drop_day;
    if (text == "fail") return GapPolicy::fail;
    throw ConfigError("unknown gap policy '" + text + "' (expected drop_day or fail)");
}

void validate(const CsvSchema& schema) {
    const auto& a = schema.timestamp_column;
    const auto& b = schema.household_column;
    const auto& c = schema.power_column;
    if (a.empty() || b.empty() || c.empty()) throw ValidationError("CSV column names must be non-empty");
    if (a == b || a == c || b == c) throw ValidationError("CSV column names must be distinct");
    if (schema.expected_interval_seconds <= 0) throw ValidationError("expected_interval_seconds must be positive");
}

std::size_t MeterSeries::gap_count() const { return static_cast<std::size_t>(std::count(gap.begin(), gap.end(), true)); }

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    for (auto& f : fields) {
        const auto first = f.find_first_not_of(" \t");
        const auto last = f.find_last_not_of(" \t");
        f = first == std::string::npos ? std::string{} : f.substr(first, last - first + 1);
    }
    return fields;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IngestError("missing column '" + name + "' in header", 1);
    return static_cast<std::size_t>(it - header.begin());
}

double parse_reading(const std::string& text) {
    if (text.empty()) return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
    return v;
}

struct Row {
    Timestamp time;
    double value;
    long line;
};

}  // namespace

std::vector<MeterSeries> parse_csv(std::istream& in, const CsvSchema& schema) {
    validate(schema);
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty file: no header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_fields(line);
    const std::size_t ts_col = column_index(header, schema.timestamp_column);
    const std::size_t hh_col = column_index(header, schema.household_column);
    const std::size_t pw_col = column_index(header, schema.power_column);
    const std::size_t needed = std::max({ts_col, hh_col, pw_col}) + 1;

    std::map<std::string, std::vector<Row>> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_fields(line);
        if (fields.size() < needed) {
            throw IngestError("expected at least " + std::to_string(needed) + " fields, found " +
                                  std::to_string(fields.size()),
                              line_no);
        }
        Timestamp t;
        try {
            t = parse_timestamp(fields[ts_col]);
        } catch (const std::invalid_argument& e) {
            throw IngestError("bad timestamp '" + fields[ts_col] + "': " + e.what(), line_no);
        }
        const auto& id = fields[hh_col];
        if (id.empty()) throw IngestError("empty household id", line_no);
        auto& list = rows[id];
        if (!list.empty()) {
            if (t == list.back().time) {
                throw IngestError("duplicate timestamp " + fields[ts_col] + " for household '" + id +
                                      "' (first seen on line " + std::to_string(list.back().line) + ")",
                                  line_no);
            }
            if (t < list.back().time) {
                throw IngestError("timestamp " + fields[ts_col] + " for household '" + id +
                                      "' goes backwards (previous row on line " + std::to_string(list.back().line) +
                                      ")",
                                  line_no);
            }
        }
        list.push_back({t, parse_reading(fields[pw_col]), line_no});
    }

    const int interval = schema.expected_interval_seconds;
    const double to_kwh = schema.power_unit == PowerUnit::kw_average ? interval / 3600.0 : 1.0;
    std::vector<MeterSeries> out;
    for (const auto& [id, list] : rows) {
        MeterSeries s;
        s.household_id = id;
        s.start_time = list.front().time;
        s.interval_seconds = interval;
        const long long span = (list.back().time - s.start_time).count();
        const std::size_t n = static_cast<std::size_t>(span / interval) + 1;
        s.values.assign(n, std::numeric_limits<double>::quiet_NaN());
        s.gap.assign(n, true);
        for (const auto& r : list) {
            const long long offset = (r.time - s.start_time).count();
            if (offset % interval != 0) {
                throw IngestError("timestamp is not on the " + std::to_string(interval) + " s grid of household '" +
                                      id + "'",
                                  r.line);
            }
            const auto i = static_cast<std::size_t>(offset / interval);
            if (std::isfinite(r.value)) {
                s.values[i] = r.value * to_kwh;
                s.gap[i] = false;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<MeterSeries> load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open '" + path.string() + "'");
    try {
        return parse_csv(in, schema);
    } catch (const IngestError& e) {
        throw IngestError(path.string() + ": " + e.what());
    }
}

void write_csv(std::ostream& out, std::span<const IntervalSeries> series, const CsvSchema& schema) {
    validate(schema);
    out << schema.timestamp_column << ',' << schema.household_column << ',' << schema.power_column << '\n';
    char buf[64];
    for (const auto& s : series) {
        const double scale = schema.power_unit == PowerUnit::kw_average ? 3600.0 / s.interval_seconds : 1.0;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", s.values[i] * scale);
            out << format_timestamp(s.time_at(i)) << ',' << s.household_id << ',' << buf << '\n';
        }
    }
}

void write_csv(const std::filesystem::path& path, std::span<const IntervalSeries> series, const CsvSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot write '" + path.string() + "'");
    write_csv(out, series, schema);
    if (!out) throw IngestError("write to '" + path.string() + "' failed");
}

std::vector<IntervalSeries> clean_gaps(const MeterSeries& series, GapPolicy policy) {
    constexpr long long kDay = 86400;
    const int interval = series.interval_seconds;
    if (interval <= 0 || kDay % interval != 0) {
        throw IngestError("interval of " + std::to_string(interval) + " s does not divide a day");
    }
    const long long per_day = kDay / interval;
    const Timestamp first_day = day_floor(series.start_time);
    const long long lead_seconds = (series.start_time - first_day).count();
    if (lead_seconds % interval != 0) {
        throw IngestError("timestamps of household '" + series.household_id + "' are not aligned to day boundaries");
    }
    const long long lead = lead_seconds / interval;
    const auto n = static_cast<long long>(series.values.size());
    const long long days = (lead + n + per_day - 1) / per_day;

    auto slot_ok = [&](long long g) { return g >= 0 && g < n && !series.gap[static_cast<std::size_t>(g)]; };

    std::vector<IntervalSeries> segments;
    IntervalSeries current;
    auto flush = [&] {
        if (!current.values.empty()) segments.push_back(std::move(current));
        current = IntervalSeries{};
    };
    for (long long d = 0; d < days; ++d) {
        const long long first = d * per_day - lead;
        bool complete = true;
        for (long long g = first; g < first + per_day; ++g) {
            if (slot_ok(g)) continue;
            if (policy == GapPolicy::fail) {
                const Timestamp at = series.start_time + std::chrono::seconds{g * interval};
                throw GapError("gap in household '" + series.household_id + "'", format_timestamp(at));
            }
            complete = false;
            break;
        }
        if (!complete) {
            flush();
            continue;
        }
        if (current.values.empty()) {
            current.household_id = series.household_id;
            current.start_time = first_day + std::chrono::days{d};
            current.interval_seconds = interval;
        }
        const auto begin = series.values.begin() + first;
        current.values.insert(current.values.end(), begin, begin + per_day);
    }
    flush();
    if (segments.empty()) {
        throw EmptyDataError("household '" + series.household_id + "' has no complete day of data");
    }
    return segments;
}

IntervalSeries require_complete(const MeterSeries& series) {
    for (std::size_t i = 0; i < series.gap.size(); ++i) {
        if (series.gap[i]) {
            const Timestamp at = series.start_time + std::chrono::seconds{static_cast<long long>(i) * series.interval_seconds};
            throw GapError("gap in household '" + series.household_id + "'", format_timestamp(at));
        }
    }
    return IntervalSeries{series.household_id, series.start_time, series.interval_seconds, series.values};
}

bool DatasetSplit::is_train(const std::string& id) const {
    return std::binary_search(train.begin(), train.end(), id);
}

DatasetSplit make_split(const std::map<std::string, std::string>& regions,
                        const std::map<std::string, int>& train_counts, std::uint64_t seed) {
    std::map<std::string, std::vector<std::string>> by_region;
    for (const auto& [id, region] : regions) by_region[region].push_back(id);

    DatasetSplit split;
    split.regions = regions;
    split.seed = seed;
    for (const auto& [region, count] : train_counts) {
        if (count < 0) throw ValidationError("negative train count for region '" + region + "'");
        const auto it = by_region.find(region);
        const std::size_t available = it == by_region.end() ? 0 : it->second.size();
        if (static_cast<std::size_t>(count) > available) {
            throw ValidationError("region '" + region + "' has " + std::to_string(available) + " households but " +
                                  std::to_string(count) + " were requested for training");
        }
    }
    for (auto& [region, ids] : by_region) {
        const auto it = train_counts.find(region);
        const std::size_t count = it == train_counts.end() ? 0 : static_cast<std::size_t>(it->second);
        Rng rng = Rng::stream(seed, "split:" + region);
        rng.shuffle(ids);
        split.train.insert(split.train.end(), ids.begin(), ids.begin() + count);
        split.test.insert(split.test.end(), ids.begin() + count, ids.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void require_training_households(const DatasetSplit& split) {
    if (split.train.empty()) throw EmptyDataError("the split has no training households");
}

nlohmann::ordered_json to_json(const DatasetSplit& split) {
    nlohmann::ordered_json regions = nlohmann::ordered_json::object();
    for (const auto& [id, region] : split.regions) regions[id] = region;
    return {{"train", split.train}, {"test", split.test}, {"regions", regions}, {"seed", split.seed}};
}

DatasetSplit split_from_json(const nlohmann::json& doc) {
    DatasetSplit split;
    try {
        split.train = doc.at("train").get<std::vector<std::string>>();
        split.test = doc.at("test").get<std::vector<std::string>>();
        split.regions = doc.at("regions").get<std::map<std::string, std::string>>();
        split.seed = doc.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed split document: ") + e.what());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    for (const auto& id : split.test) {
        if (split.is_train(id)) throw ConfigError("household '" + id + "' is in both train and test");
    }
    return split;
}

namespace {

IntervalSeries slice(const IntervalSeries& s, std::size_t offset, std::size_t length) {
    IntervalSeries out{s.household_id, s.time_at(offset), s.interval_seconds, {}};
    out.values.assign(s.values.begin() + offset, s.values.begin() + offset + length);
    return out;
}

}  // namespace

std::vector<SrPair> window_dataset(std::span<const SrPair> pairs, int window_hours, int stride_hours) {
    if (window_hours < 1 || stride_hours < 1) throw ValidationError("window and stride must be >= 1 hour");
    std::vector<SrPair> windows;
    std::size_t skipped = 0;
    for (const auto& pair : pairs) {
        const int low_interval = pair.low.interval_seconds;
        if ((window_hours * 3600) % low_interval != 0 || (stride_hours * 3600) % low_interval != 0) {
            throw ValidationError("window and stride must be whole multiples of the low-resolution interval");
        }
        const auto length = static_cast<std::size_t>(window_hours * 3600 / low_interval);
        const auto stride = static_cast<std::size_t>(stride_hours * 3600 / low_interval);
        if (pair.low.size() < length) {
            ++skipped;
            continue;
        }
        const auto factor = static_cast<std::size_t>(pair.factor);
        for (std::size_t o = 0; o + length <= pair.low.size(); o += stride) {
            windows.push_back(
                SrPair{slice(pair.low, o, length), slice(pair.high, o * factor, length * factor), pair.factor});
        }
    }
    if (skipped > 0) spdlog::info("window_dataset: skipped {} series shorter than {} h", skipped, window_hours);
    if (windows.empty()) throw EmptyDataError("no series is long enough for a " + std::to_string(window_hours) + " h window");
    return windows;
}

HoldoutSplit holdout_tail_days(std::span<const IntervalSeries> segments, double fraction) {
    HoldoutSplit out;
    if (segments.empty()) return out;
    std::size_t total_days = 0;
    std::vector<std::size_t> seg_days;
    for (const auto& s : segments) {
        const std::size_t per_day = 86400 / s.interval_seconds;
        seg_days.push_back(s.size() / per_day);
        total_days += seg_days.back();
    }
    auto remaining = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total_days) - 1e-9));
    std::vector<IntervalSeries> validation;
    std::size_t i = segments.size();
    while (i > 0 && remaining > 0) {
        --i;
        const auto& s = segments[i];
        if (seg_days[i] <= remaining) {
            validation.push_back(s);
            remaining -= seg_days[i];
            continue;
        }
        const std::size_t per_day = 86400 / s.interval_seconds;
        const std::size_t keep = (seg_days[i] - remaining) * per_day;
        out.train.push_back(slice(s, 0, keep));
        validation.push_back(slice(s, keep, s.size() - keep));
        remaining = 0;
        break;
    }
    std::vector<IntervalSeries> head(segments.begin(), segments.begin() + i);
    if (!out.train.empty()) head.push_back(std::move(out.train.front()));
    out.train = std::move(head);
    out.validation.assign(validation.rbegin(), validation.rend());
    return out;
}

}  // namespace srr
