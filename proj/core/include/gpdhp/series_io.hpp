#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpdhp {

// Nonnegative event counts on a regular grid. Bin k (0-based) is time
// origin_index + k; model time t = k + 1.
class CountSeries {
public:
    CountSeries() = default;
    explicit CountSeries(std::vector<std::int64_t> counts,
                         std::string step_label = "step",
                         std::int64_t origin_index = 0);

    [[nodiscard]] std::size_t size() const noexcept { return counts_.size(); }
    [[nodiscard]] bool empty() const noexcept { return counts_.empty(); }
    [[nodiscard]] std::int64_t operator[](std::size_t k) const { return counts_[k]; }
    [[nodiscard]] std::span<const std::int64_t> counts() const noexcept { return counts_; }
    [[nodiscard]] const std::string& step_label() const noexcept { return step_label_; }
    [[nodiscard]] std::int64_t origin_index() const noexcept { return origin_index_; }

    // First `n` bins as a new series (same label and origin).
    [[nodiscard]] CountSeries prefix(std::size_t n) const;
    [[nodiscard]] Eigen::VectorXd as_vector() const;
    [[nodiscard]] std::int64_t total() const noexcept;

    friend bool operator==(const CountSeries&, const CountSeries&) = default;

private:
    std::vector<std::int64_t> counts_;
    std::string step_label_{"step"};
    std::int64_t origin_index_{0};
};

// Inclusive 1-based split ends: train = 1..train_end, valid = train_end+1..valid_end,
// test = valid_end+1..test_end.
struct SplitSpec {
    std::size_t train_end{0};
    std::size_t valid_end{0};
    std::size_t test_end{0};
};

// Contiguous window [begin, end) of a series (0-based). The full series stays
// reachable so one-step-ahead predictions can see every earlier bin.
class SeriesView {
public:
    SeriesView(const CountSeries& full, std::size_t begin, std::size_t end);

    [[nodiscard]] std::size_t begin() const noexcept { return begin_; }
    [[nodiscard]] std::size_t end() const noexcept { return end_; }
    [[nodiscard]] std::size_t size() const noexcept { return end_ - begin_; }
    [[nodiscard]] bool empty() const noexcept { return begin_ == end_; }
    [[nodiscard]] std::int64_t operator[](std::size_t k) const { return (*full_)[begin_ + k]; }
    [[nodiscard]] const CountSeries& full() const noexcept { return *full_; }
    // Everything strictly before the window.
    [[nodiscard]] std::span<const std::int64_t> history() const noexcept {
        return full_->counts().first(begin_);
    }

private:
    const CountSeries* full_;
    std::size_t begin_;
    std::size_t end_;
};

struct SeriesSplit {
    SeriesView train;
    SeriesView valid;
    SeriesView test;
};

void validate_split(const SplitSpec& spec, std::size_t series_length);
[[nodiscard]] SeriesSplit split_series(const CountSeries& series, const SplitSpec& spec);

// CSV with one (count) or two (index, count) columns, optional `t,count`
// header and an optional leading `# step_label: <label>` comment.
[[nodiscard]] CountSeries parse_counts_csv(const std::string& text);
[[nodiscard]] CountSeries load_counts(const std::filesystem::path& path);
[[nodiscard]] std::string format_counts_csv(const CountSeries& series);
void save_counts(const CountSeries& series, const std::filesystem::path& path);

} // namespace gpdhp
