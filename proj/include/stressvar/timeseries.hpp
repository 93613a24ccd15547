#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace svar::timeseries {

// A calendar month. Dates are carried at month granularity and always
// rendered as the last calendar day of the month.
class Month {
public:
    constexpr Month() = default;
    constexpr Month(int year, int month) : index_(year * 12 + (month - 1)) {}

    static constexpr Month from_index(int index) {
        Month m;
        m.index_ = index;
        return m;
    }
    // Accepts YYYY-MM-DD with a valid day for that month; throws DomainError.
    static Month parse(std::string_view iso);

    constexpr int index() const { return index_; }
    constexpr int year() const { return index_ >= 0 ? index_ / 12 : (index_ - 11) / 12; }
    constexpr int month() const { return index_ - year() * 12 + 1; }
    int last_day() const;
    std::string to_string() const;

    constexpr Month operator+(int months) const { return from_index(index_ + months); }
    constexpr Month operator-(int months) const { return from_index(index_ - months); }
    constexpr int operator-(Month other) const { return index_ - other.index_; }
    constexpr auto operator<=>(const Month&) const = default;

private:
    int index_ = 0;
};

// Contiguous monthly returns for one fund or factor. Gaps are not
// representable: dates are start, start+1, ..., start+size-1.
class ReturnSeries {
public:
    ReturnSeries() = default;
    // Validates: non-empty, every return finite and > -1.
    ReturnSeries(std::string id, Month start, std::vector<double> returns);

    const std::string& id() const { return id_; }
    Month start() const { return start_; }
    Month end() const { return start_ + static_cast<int>(returns_.size()) - 1; }
    std::size_t size() const { return returns_.size(); }
    Month date(std::size_t i) const { return start_ + static_cast<int>(i); }
    std::vector<Month> dates() const;
    std::span<const double> returns() const { return returns_; }
    double operator[](std::size_t i) const { return returns_[i]; }

    bool covers(Month m) const { return m >= start_ && m <= end(); }
    std::optional<double> at(Month m) const;
    // Returns observed strictly before `m`, at most `count` of them (most recent).
    std::span<const double> history_before(Month m, std::size_t count) const;
    // All returns strictly before `m`.
    std::span<const double> all_before(Month m) const;

    // Used by the stop-loss convention; value must satisfy the return invariants.
    void append(double r);

    bool operator==(const ReturnSeries&) const = default;

private:
    std::string id_;
    Month start_;
    std::vector<double> returns_;
};

class FactorPanel {
public:
    static constexpr std::size_t kDefaultMinHistory = 120;

    FactorPanel() = default;
    // Throws DuplicateObservationError on repeated ids, InsufficientHistoryError
    // on a factor shorter than min_history.
    explicit FactorPanel(std::vector<ReturnSeries> factors, std::size_t min_history = kDefaultMinHistory);

    std::span<const ReturnSeries> factors() const { return factors_; }
    std::size_t size() const { return factors_.size(); }
    const ReturnSeries& operator[](std::size_t i) const { return factors_[i]; }
    const ReturnSeries* find(std::string_view id) const;
    Month first_date() const { return first_; }
    Month last_date() const { return last_; }
    std::size_t min_history() const { return min_history_; }

private:
    std::vector<ReturnSeries> factors_;  // sorted by id
    Month first_, last_;
    std::size_t min_history_ = kDefaultMinHistory;
};

class FundUniverse {
public:
    FundUniverse() = default;
    explicit FundUniverse(std::vector<ReturnSeries> funds);

    std::span<const ReturnSeries> funds() const { return funds_; }
    std::size_t size() const { return funds_.size(); }
    const ReturnSeries& operator[](std::size_t i) const { return funds_[i]; }
    const ReturnSeries* find(std::string_view id) const;

    // Final recorded date per fund (including an appended stop-loss month).
    const std::map<std::string, Month>& last_report() const { return last_report_; }
    bool is_dead(std::string_view id) const { return dead_.count(std::string(id)) != 0; }
    const std::set<std::string>& dead() const { return dead_; }
    Month last_date() const;

    friend FundUniverse apply_stop_loss(const FundUniverse&, Month, double);

private:
    std::vector<ReturnSeries> funds_;  // sorted by id
    std::map<std::string, Month> last_report_;
    std::set<std::string> dead_;
};

enum class SeriesKind { fund, factor };

// CSV with header `date,id,return`. Lines starting with '#' and blank lines
// are ignored. Row numbers in errors are 1-based physical line numbers.
std::vector<ReturnSeries> load_csv(const std::string& path, SeriesKind kind);
std::vector<ReturnSeries> parse_csv(std::istream& in, SeriesKind kind);

// Writes `date,id,return` rows sorted by (id, date); `comment` lines are
// emitted first, each prefixed with "# ".
void write_csv(std::ostream& out, std::span<const ReturnSeries> series, std::span<const std::string> comment = {});
void save_csv(const std::string& path, std::span<const ReturnSeries> series, std::span<const std::string> comment = {});

struct AlignedPair {
    Month first;  // date of the first pair
    std::vector<double> a;
    std::vector<double> b;
    std::size_t size() const { return a.size(); }
};

// Most recent `window` dates held by both series, restricted to dates
// strictly before `before` when given. Throws InsufficientHistoryError.
AlignedPair align(const ReturnSeries& a, const ReturnSeries& b, std::size_t window,
                  std::optional<Month> before = std::nullopt);

// Appends a -loss return in the month after the last report of every fund
// that stops before panel_end and marks it dead. Funds already dead are left alone.
FundUniverse apply_stop_loss(const FundUniverse& universe, Month panel_end, double loss);

}  // namespace svar::timeseries
