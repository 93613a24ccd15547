#include "stressvar/timeseries.hpp"

#include "stressvar/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace svar::timeseries {
namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

void check_return(double r, std::string_view id) {
    if (!std::isfinite(r)) throw DomainError(fmt::format("series '{}': non-finite return", id));
    if (r <= -1.0) throw DomainError(fmt::format("series '{}': return {} is not > -1", id, r));
}

}  // namespace

Month Month::parse(std::string_view iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw DomainError(fmt::format("malformed date '{}', expected YYYY-MM-DD", iso));
    int y = 0, m = 0, d = 0;
    if (!parse_number(iso.substr(0, 4), y) || !parse_number(iso.substr(5, 2), m) ||
        !parse_number(iso.substr(8, 2), d))
        throw DomainError(fmt::format("malformed date '{}'", iso));
    if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m))
        throw DomainError(fmt::format("invalid calendar date '{}'", iso));
    return Month(y, m);
}

int Month::last_day() const { return days_in_month(year(), month()); }

std::string Month::to_string() const { return fmt::format("{:04d}-{:02d}-{:02d}", year(), month(), last_day()); }

ReturnSeries::ReturnSeries(std::string id, Month start, std::vector<double> returns)
    : id_(std::move(id)), start_(start), returns_(std::move(returns)) {
    if (returns_.empty()) throw DomainError(fmt::format("series '{}' is empty", id_));
    for (double r : returns_) check_return(r, id_);
}

std::vector<Month> ReturnSeries::dates() const {
    std::vector<Month> out(returns_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = date(i);
    return out;
}

std::optional<double> ReturnSeries::at(Month m) const {
    if (!covers(m)) return std::nullopt;
    return returns_[static_cast<std::size_t>(m - start_)];
}

std::span<const double> ReturnSeries::all_before(Month m) const {
    if (m <= start_) return {};
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(m - start_), returns_.size());
    return std::span<const double>(returns_).first(n);
}

std::span<const double> ReturnSeries::history_before(Month m, std::size_t count) const {
    auto all = all_before(m);
    return all.size() > count ? all.last(count) : all;
}

void ReturnSeries::append(double r) {
    check_return(r, id_);
    returns_.push_back(r);
}

FactorPanel::FactorPanel(std::vector<ReturnSeries> factors, std::size_t min_history)
    : factors_(std::move(factors)), min_history_(min_history) {
    std::sort(factors_.begin(), factors_.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        if (i > 0 && factors_[i].id() == factors_[i - 1].id())
            throw DuplicateObservationError(fmt::format("duplicate factor id '{}'", factors_[i].id()));
        if (factors_[i].size() < min_history_)
            throw InsufficientHistoryError(fmt::format("factor '{}' has {} months, minimum is {}", factors_[i].id(),
                                                       factors_[i].size(), min_history_));
    }
    if (!factors_.empty()) {
        first_ = factors_.front().start();
        last_ = factors_.front().end();
        for (const auto& f : factors_) {
            first_ = std::min(first_, f.start());
            last_ = std::max(last_, f.end());
        }
    }
}

const ReturnSeries* FactorPanel::find(std::string_view id) const {
    auto it = std::lower_bound(factors_.begin(), factors_.end(), id,
                               [](const ReturnSeries& s, std::string_view v) { return s.id() < v; });
    return it != factors_.end() && it->id() == id ? &*it : nullptr;
}

FundUniverse::FundUniverse(std::vector<ReturnSeries> funds) : funds_(std::move(funds)) {
    std::sort(funds_.begin(), funds_.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
    for (std::size_t i = 0; i < funds_.size(); ++i) {
        if (i > 0 && funds_[i].id() == funds_[i - 1].id())
            throw DuplicateObservationError(fmt::format("duplicate fund id '{}'", funds_[i].id()));
        last_report_[funds_[i].id()] = funds_[i].end();
    }
}

const ReturnSeries* FundUniverse::find(std::string_view id) const {
    auto it = std::lower_bound(funds_.begin(), funds_.end(), id,
                               [](const ReturnSeries& s, std::string_view v) { return s.id() < v; });
    return it != funds_.end() && it->id() == id ? &*it : nullptr;
}

Month FundUniverse::last_date() const {
    Month last;
    bool any = false;
    for (const auto& f : funds_) {
        if (!any || f.end() > last) last = f.end();
        any = true;
    }
    return last;
}

std::vector<ReturnSeries> parse_csv(std::istream& in, SeriesKind kind) {
    const char* kind_name = kind == SeriesKind::fund ? "fund" : "factor";
    std::string line;
    std::size_t row = 0;
    bool header_seen = false;
    std::unordered_map<std::string, std::vector<std::pair<Month, double>>> rows;
    std::vector<std::string> order;

    while (std::getline(in, line)) {
        ++row;
        const std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        if (!header_seen) {
            if (s != "date,id,return")
                throw ParseError(fmt::format("expected header 'date,id,return', got '{}'", s), row);
            header_seen = true;
            continue;
        }
        const auto c1 = s.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : s.find(',', c1 + 1);
        if (c2 == std::string_view::npos || s.find(',', c2 + 1) != std::string_view::npos)
            throw ParseError("expected 3 fields", row);
        const auto date_s = trim(s.substr(0, c1));
        const auto id_s = trim(s.substr(c1 + 1, c2 - c1 - 1));
        const auto ret_s = trim(s.substr(c2 + 1));
        if (id_s.empty()) throw ParseError("empty id", row);

        Month m;
        try {
            m = Month::parse(date_s);
        } catch (const DomainError& e) {
            throw ParseError(e.what(), row);
        }
        double r = 0.0;
        if (!parse_number(ret_s, r)) throw ParseError(fmt::format("malformed number '{}'", ret_s), row);
        if (!std::isfinite(r)) throw ParseError(fmt::format("non-finite return '{}'", ret_s), row);
        if (r <= -1.0)
            throw DomainError(fmt::format("row {}: {} '{}' return {} is not > -1", row, kind_name, id_s, r));

        auto [it, inserted] = rows.try_emplace(std::string(id_s));
        if (inserted) order.push_back(it->first);
        it->second.emplace_back(m, r);
    }

    std::sort(order.begin(), order.end());
    std::vector<ReturnSeries> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        auto& obs = rows[id];
        std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> values;
        values.reserve(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (i > 0) {
                if (obs[i].first == obs[i - 1].first)
                    throw DuplicateObservationError(
                        fmt::format("duplicate observation ({}, {})", id, obs[i].first.to_string()));
                if (obs[i].first - obs[i - 1].first != 1)
                    throw DomainError(fmt::format("{} '{}' has missing months between {} and {}", kind_name, id,
                                                  obs[i - 1].first.to_string(), obs[i].first.to_string()));
            }
            values.push_back(obs[i].second);
        }
        out.emplace_back(id, obs.front().first, std::move(values));
    }
    return out;
}

std::vector<ReturnSeries> load_csv(const std::string& path, SeriesKind kind) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_csv(in, kind);
}

void write_csv(std::ostream& out, std::span<const ReturnSeries> series, std::span<const std::string> comment) {
    for (const auto& c : comment) out << "# " << c << '\n';
    out << "date,id,return\n";
    std::vector<const ReturnSeries*> sorted;
    for (const auto& s : series) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id() < b->id(); });
    std::string buf;
    for (const auto* s : sorted) {
        for (std::size_t i = 0; i < s->size(); ++i) {
            buf.clear();
            fmt::format_to(std::back_inserter(buf), "{},{},{}\n", s->date(i).to_string(), s->id(), (*s)[i]);
            out << buf;
        }
    }
}

void save_csv(const std::string& path, std::span<const ReturnSeries> series, std::span<const std::string> comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_csv(out, series, comment);
}

AlignedPair align(const ReturnSeries& a, const ReturnSeries& b, std::size_t window, std::optional<Month> before) {
    Month lo = std::max(a.start(), b.start());
    Month hi = std::min(a.end(), b.end());
    if (before) hi = std::min(hi, *before - 1);
    const int common = hi - lo + 1;
    if (window == 0 || common < static_cast<int>(window))
        throw InsufficientHistoryError(fmt::format("'{}' and '{}' share {} months, window needs {}", a.id(), b.id(),
                                                   std::max(common, 0), window));
    AlignedPair out;
    out.first = hi - static_cast<int>(window) + 1;
    const auto oa = static_cast<std::size_t>(out.first - a.start());
    const auto ob = static_cast<std::size_t>(out.first - b.start());
    out.a.assign(a.returns().begin() + oa, a.returns().begin() + oa + window);
    out.b.assign(b.returns().begin() + ob, b.returns().begin() + ob + window);
    return out;
}

FundUniverse apply_stop_loss(const FundUniverse& universe, Month panel_end, double loss) {
    if (!(loss >= 0.0 && loss < 1.0)) throw DomainError(fmt::format("stop loss {} outside [0, 1)", loss));
    FundUniverse out = universe;
    for (auto& f : out.funds_) {
        if (f.end() >= panel_end || out.dead_.count(f.id())) continue;
        f.append(loss == 0.0 ? 0.0 : -loss);
        out.last_report_[f.id()] = f.end();
        out.dead_.insert(f.id());
    }
    return out;
}

}  // namespace svar::timeseries
