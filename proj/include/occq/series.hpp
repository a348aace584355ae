#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace occq {

/// Calendar month, stored as months since year 0.
struct YearMonth {
    int index = 0;

    static YearMonth of(int year, int month) { return {year * 12 + (month - 1)}; }
    int year() const { return index / 12; }
    int month() const { return index % 12 + 1; }
    /// Parses "YYYY-MM"; throws ParseError.
    static YearMonth parse(const std::string& s);
    std::string str() const;
};

struct CountPoint {
    int t;           ///< months since the series origin
    std::int64_t n;  ///< head-count
};

/// Monthly counts for one class. Month indices strictly increase.
struct CountSeries {
    enum class Provenance { observed, synthesized };

    std::string class_id = "all";
    YearMonth origin{};
    std::vector<CountPoint> points;
    Provenance provenance = Provenance::observed;

    void validate() const;
    std::size_t size() const { return points.size(); }
    /// First `count` points.
    CountSeries head(std::size_t count) const;
    /// Points from index `from` on.
    CountSeries tail_from(std::size_t from) const;
};

/// Reads `month,class_id,count` CSV (month as YYYY-MM). Errors carry line and column.
std::vector<CountSeries> read_count_csv(std::istream& in);
void write_count_csv(std::ostream& out, const CountSeries& series);

struct QuarterCount {
    int year;
    int quarter;  ///< 1..4
    double count;
};

/// Reads `quarter,class_id,count` CSV (quarter as YYYY-Qn) for a single class.
std::vector<QuarterCount> read_quarterly_csv(std::istream& in, std::string* class_id = nullptr);

/// Natural cubic smoothing spline, smoothing parameter chosen by generalized cross-validation.
class SmoothingSpline {
public:
    SmoothingSpline(std::vector<double> x, std::vector<double> y);
    /// Fixed smoothing parameter.
    SmoothingSpline(std::vector<double> x, std::vector<double> y, double lambda);

    double operator()(double x) const;
    double lambda() const { return lambda_; }
    const std::vector<double>& fitted() const { return g_; }

private:
    void fit(double lambda);

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> g_;
    std::vector<double> gamma_;  ///< second derivatives at the knots, zero at both ends
    double lambda_ = 0.0;
};

/// Quarterly counts to a monthly series: count/3 anchors at quarter midpoints, a smoothing
/// spline evaluated at month midpoints, plus Gaussian noise with the residual standard error
/// of a straight-line fit to the anchors. Counts are rounded and clamped at zero.
CountSeries synthesize_monthly(const std::vector<QuarterCount>& quarterly, std::uint64_t seed,
                               const std::string& class_id = "all");

}  // namespace occq
