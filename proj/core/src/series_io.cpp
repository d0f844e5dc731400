#include "gpdhp/series_io.hpp"

#include "gpdhp/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string_view>

namespace gpdhp {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc() && ptr == s.data() + s.size()) return value;
    // Integral values written in floating notation ("3.0") are accepted.
    double real = 0.0;
    auto [rptr, rec] = std::from_chars(s.data(), s.data() + s.size(), real);
    if (rec == std::errc() && rptr == s.data() + s.size() && std::isfinite(real) &&
        real == std::floor(real) && std::abs(real) < 9.0e15) {
        return static_cast<std::int64_t>(real);
    }
    return std::nullopt;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

} // namespace

CountSeries::CountSeries(std::vector<std::int64_t> counts, std::string step_label,
                         std::int64_t origin_index)
    : counts_(std::move(counts)), step_label_(std::move(step_label)), origin_index_(origin_index) {
    if (counts_.empty()) {
        throw ValidationError("count series must contain at least one bin");
    }
    for (std::size_t k = 0; k < counts_.size(); ++k) {
        if (counts_[k] < 0) {
            throw ValidationError("negative count " + std::to_string(counts_[k]) + " at row " +
                                  std::to_string(k + 1));
        }
    }
}

CountSeries CountSeries::prefix(std::size_t n) const {
    if (n == 0 || n > counts_.size()) {
        throw ValidationError("prefix length " + std::to_string(n) + " outside 1.." +
                              std::to_string(counts_.size()));
    }
    return CountSeries({counts_.begin(), counts_.begin() + static_cast<std::ptrdiff_t>(n)},
                       step_label_, origin_index_);
}

Eigen::VectorXd CountSeries::as_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(counts_.size()));
    for (std::size_t k = 0; k < counts_.size(); ++k) v[static_cast<Eigen::Index>(k)] = static_cast<double>(counts_[k]);
    return v;
}

std::int64_t CountSeries::total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

SeriesView::SeriesView(const CountSeries& full, std::size_t begin, std::size_t end)
    : full_(&full), begin_(begin), end_(end) {
    if (begin > end || end > full.size()) {
        throw ValidationError("series view [" + std::to_string(begin) + ", " + std::to_string(end) +
                              ") outside series of length " + std::to_string(full.size()));
    }
}

void validate_split(const SplitSpec& spec, std::size_t series_length) {
    const bool ok = spec.train_end >= 1 && spec.train_end < spec.valid_end &&
                    spec.valid_end <= spec.test_end && spec.test_end <= series_length;
    if (!ok) {
        throw ValidationError("invalid split (" + std::to_string(spec.train_end) + ", " +
                              std::to_string(spec.valid_end) + ", " + std::to_string(spec.test_end) +
                              ") for series of length " + std::to_string(series_length) +
                              "; need 1 <= train_end < valid_end <= test_end <= T");
    }
}

SeriesSplit split_series(const CountSeries& series, const SplitSpec& spec) {
    validate_split(spec, series.size());
    return {SeriesView(series, 0, spec.train_end),
            SeriesView(series, spec.train_end, spec.valid_end),
            SeriesView(series, spec.valid_end, spec.test_end)};
}

CountSeries parse_counts_csv(const std::string& text) {
    std::string_view rest(text);
    if (rest.substr(0, 3) == "\xEF\xBB\xBF") rest.remove_prefix(3);

    std::string label = "step";
    std::vector<std::int64_t> counts;
    std::optional<std::int64_t> origin;
    std::optional<std::size_t> columns;
    std::size_t row = 0;
    bool first_content_line = true;

    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        const std::string_view line = trim(rest.substr(0, nl));
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view key = "step_label:";
            auto body = trim(line.substr(1));
            if (body.substr(0, key.size()) == key) label = std::string(trim(body.substr(key.size())));
            continue;
        }

        const auto fields = split_fields(line);
        if (first_content_line) {
            first_content_line = false;
            // A header is any first line whose last field is not numeric.
            if (!parse_integer(fields.back())) {
                double ignored = 0.0;
                auto f = fields.back();
                if (std::from_chars(f.data(), f.data() + f.size(), ignored).ec != std::errc()) {
                    continue;
                }
            }
        }

        ++row;
        if (fields.size() != 1 && fields.size() != 2) {
            throw ValidationError("row " + std::to_string(row) + ": expected 1 or 2 columns, got " +
                                  std::to_string(fields.size()));
        }
        if (columns && *columns != fields.size()) {
            throw ValidationError("row " + std::to_string(row) + ": inconsistent column count");
        }
        columns = fields.size();

        const auto value = parse_integer(fields.back());
        if (!value) {
            throw ValidationError("row " + std::to_string(row) + ": count '" +
                                  std::string(fields.back()) + "' is not an integer");
        }
        if (*value < 0) {
            throw ValidationError("row " + std::to_string(row) + ": negative count " +
                                  std::to_string(*value));
        }
        if (fields.size() == 2) {
            const auto index = parse_integer(fields.front());
            if (!index) {
                throw ValidationError("row " + std::to_string(row) + ": index '" +
                                      std::string(fields.front()) + "' is not an integer");
            }
            if (!origin) {
                origin = *index;
            } else if (*index != *origin + static_cast<std::int64_t>(counts.size())) {
                throw GapError("row " + std::to_string(row) + ": index " + std::to_string(*index) +
                               " does not follow " +
                               std::to_string(*origin + static_cast<std::int64_t>(counts.size()) - 1));
            }
        }
        counts.push_back(*value);
    }
    if (counts.empty()) throw ValidationError("no count rows found");
    return CountSeries(std::move(counts), std::move(label), origin.value_or(0));
}

CountSeries load_counts(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_counts_csv(buffer.str());
}

std::string format_counts_csv(const CountSeries& series) {
    std::string out;
    out.reserve(series.size() * 8 + 64);
    out += "# step_label: " + series.step_label() + "\n";
    out += "t,count\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        out += std::to_string(series.origin_index() + static_cast<std::int64_t>(k));
        out += ',';
        out += std::to_string(series[k]);
        out += '\n';
    }
    return out;
}

void save_counts(const CountSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << format_counts_csv(series);
}

} // namespace gpdhp
