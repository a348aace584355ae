#include <doctest.h>

#include <cmath>
#include <sstream>

#include "occq/errors.hpp"
#include "occq/series.hpp"

using namespace occq;

namespace {

std::string parse_error_of(const std::string& text) {
    std::istringstream in(text);
    try {
        read_count_csv(in);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
    return sxy / sxx;
}

}  // namespace

TEST_CASE("year-month") {
    CHECK(YearMonth::parse("2015-03").str() == "2015-03");
    CHECK(YearMonth::parse("2019-01").index - YearMonth::parse("2018-12").index == 1);
    CHECK_THROWS_AS(YearMonth::parse("2015-13"), ParseError);
    CHECK_THROWS_AS(YearMonth::parse("15-03"), ParseError);
}

TEST_CASE("count csv round trip") {
    std::istringstream in("month,class_id,count\n2015-03,theft,10\n2015-04,theft,12\n2015-03,fraud,4\n2015-06,theft,9\n");
    const auto all = read_count_csv(in);
    REQUIRE(all.size() == 2);
    CHECK(all[0].class_id == "theft");
    CHECK(all[0].points.back().t == 3);
    std::ostringstream out;
    write_count_csv(out, all[0]);
    CHECK(out.str() == "month,class_id,count\n2015-03,theft,10\n2015-04,theft,12\n2015-06,theft,9\n");
}

TEST_CASE("count csv errors carry line and column") {
    CHECK(parse_error_of("") .find("line 1, column 1") != std::string::npos);
    CHECK(parse_error_of("month,count\n").find("line 1, column 1") != std::string::npos);
    CHECK(parse_error_of("month,class_id,count\n2015-03,a,x\n").find("line 2, column 11") != std::string::npos);
    CHECK(parse_error_of("month,class_id,count\n2015-3,a,1\n").find("line 2, column 1") != std::string::npos);
    CHECK(parse_error_of("month,class_id,count\n2015-03,a,1\n2015-03,a,2\n").find("line 3") != std::string::npos);
    CHECK(parse_error_of("month,class_id,count\n2015-03,a,-1\n").find("non-negative") != std::string::npos);
    CHECK(parse_error_of("month,class_id,count\n2015-03,a\n").find("expected 3 fields") != std::string::npos);
}

TEST_CASE("quarterly csv") {
    std::istringstream in("quarter,class_id,count\n2015-Q1,theft,300\n2015-Q2,theft,330\n");
    std::string cls;
    const auto q = read_quarterly_csv(in, &cls);
    CHECK(cls == "theft");
    REQUIRE(q.size() == 2);
    CHECK(q[1].quarter == 2);
    std::istringstream bad("quarter,class_id,count\n2015-Q5,theft,300\n");
    CHECK_THROWS_AS(read_quarterly_csv(bad), ParseError);
}

TEST_CASE("smoothing spline limits") {
    const std::vector<double> x{0, 1, 2.5, 4, 6, 7};
    const std::vector<double> y{1, 3, 2, 5, 4, 6};
    const SmoothingSpline interp(x, y, 1e-10);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(interp(x[i]) == doctest::Approx(y[i]).epsilon(1e-6));

    // Heavy smoothing tends to the least-squares line.
    const SmoothingSpline flat(x, y, 1e10);
    const double b = ls_slope(x, y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / y.size();
    for (double t : {0.0, 3.0, 7.0}) CHECK(flat(t) == doctest::Approx(my + b * (t - mx)).epsilon(1e-4));

    // A straight line is reproduced for any smoothing parameter.
    std::vector<double> line;
    for (double v : x) line.push_back(2.0 - 0.5 * v);
    const SmoothingSpline gcv(x, line);
    for (double t : {0.3, 3.3, 8.0, -1.0}) CHECK(gcv(t) == doctest::Approx(2.0 - 0.5 * t).epsilon(1e-8));
}

TEST_CASE("synthesize monthly") {
    std::vector<QuarterCount> flat;
    for (int i = 0; i < 16; ++i) flat.push_back({2015 + i / 4, i % 4 + 1, 300.0});
    const auto s = synthesize_monthly(flat, 1);
    CHECK(s.provenance == CountSeries::Provenance::synthesized);
    CHECK(s.size() == 48);
    double mean = 0.0;
    for (const auto& p : s.points) mean += static_cast<double>(p.n) / s.size();
    CHECK(std::abs(mean - 100.0) < 1.0);

    // Quarterly counts rising by 90 per quarter: per-month anchors rise by 30 every 3 months.
    std::vector<QuarterCount> trend;
    for (int i = 0; i < 16; ++i) trend.push_back({2015 + i / 4, i % 4 + 1, 3000.0 + 90.0 * i + (i % 2 ? 15.0 : -15.0)});
    const auto t = synthesize_monthly(trend, 9, "theft");
    CHECK(t.class_id == "theft");
    CHECK(t.origin.str() == "2015-01");
    std::vector<double> xs, ys;
    for (const auto& p : t.points) xs.push_back(p.t), ys.push_back(static_cast<double>(p.n));
    CHECK(ls_slope(xs, ys) == doctest::Approx(90.0 / 9.0).epsilon(0.05));

    const auto again = synthesize_monthly(trend, 9, "theft");
    CHECK(again.points.size() == t.points.size());
    bool same = true;
    for (std::size_t i = 0; i < t.size(); ++i) same = same && again.points[i].n == t.points[i].n;
    CHECK(same);
    for (const auto& p : t.points) CHECK(p.n >= 0);
    CHECK_THROWS_AS(synthesize_monthly({flat.begin(), flat.begin() + 3}, 1), DomainError);
}
