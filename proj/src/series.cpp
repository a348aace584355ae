#include "occq/series.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "occq/errors.hpp"
#include "occq/rng.hpp"

namespace occq {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto issp = [](unsigned char c) { return std::isspace(c); };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
    return s;
}

[[noreturn]] void fail_at(int line, std::size_t column, const std::string& msg) {
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg,
                     "check the CSV against the documented header and formats");
}

// 1-based column where cell `idx` starts.
std::size_t column_of(const std::vector<std::string>& cells, std::size_t idx) {
    std::size_t col = 1;
    for (std::size_t i = 0; i < idx; ++i) col += cells[i].size() + 1;
    return col;
}

std::int64_t parse_count(const std::string& s, int line, std::size_t col) {
    const std::string t = trim(s);
    if (t.empty()) fail_at(line, col, "missing count");
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(t, &pos);
    } catch (...) {
        fail_at(line, col, "count \"" + t + "\" is not an integer");
    }
    if (pos != t.size()) fail_at(line, col, "count \"" + t + "\" is not an integer");
    if (v < 0) fail_at(line, col, "count must be non-negative");
    return v;
}

}  // namespace

YearMonth YearMonth::parse(const std::string& s) {
    int y = 0, m = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d%c", &y, &m, &tail) != 2 || s.size() != 7 || m < 1 || m > 12) {
        throw ParseError("month \"" + s + "\" is not YYYY-MM");
    }
    return of(y, m);
}

std::string YearMonth::str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year(), month());
    return buf;
}

void CountSeries::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].n < 0) throw DomainError("series counts must be non-negative");
        if (i > 0 && points[i].t <= points[i - 1].t) throw DomainError("series month indices must strictly increase");
    }
}

CountSeries CountSeries::head(std::size_t count) const {
    CountSeries s = *this;
    s.points.resize(std::min(count, points.size()));
    return s;
}

CountSeries CountSeries::tail_from(std::size_t from) const {
    CountSeries s = *this;
    s.points.assign(points.begin() + static_cast<std::ptrdiff_t>(std::min(from, points.size())), points.end());
    return s;
}

std::vector<CountSeries> read_count_csv(std::istream& in) {
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw ParseError("line 1, column 1: empty input, expected header month,class_id,count");
    ++lineno;
    if (trim(line) != "month,class_id,count") fail_at(1, 1, "expected header month,class_id,count");
    std::vector<CountSeries> out;
    struct Raw {
        YearMonth month;
        std::int64_t n;
    };
    std::vector<std::pair<std::string, std::vector<Raw>>> groups;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 3) fail_at(lineno, 1, "expected 3 fields, found " + std::to_string(cells.size()));
        YearMonth ym;
        try {
            ym = YearMonth::parse(trim(cells[0]));
        } catch (const ParseError& e) {
            fail_at(lineno, column_of(cells, 0), e.what());
        }
        const std::string cls = trim(cells[1]);
        if (cls.empty()) fail_at(lineno, column_of(cells, 1), "empty class_id");
        const auto n = parse_count(cells[2], lineno, column_of(cells, 2));
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == cls; });
        if (it == groups.end()) {
            groups.push_back({cls, {}});
            it = std::prev(groups.end());
        }
        if (!it->second.empty() && ym.index <= it->second.back().month.index) {
            fail_at(lineno, column_of(cells, 0), "months must strictly increase within class " + cls);
        }
        it->second.push_back({ym, n});
    }
    for (const auto& [cls, raws] : groups) {
        CountSeries s;
        s.class_id = cls;
        s.origin = raws.front().month;
        for (const auto& r : raws) s.points.push_back({r.month.index - s.origin.index, r.n});
        out.push_back(std::move(s));
    }
    if (out.empty()) throw ParseError("no data rows after the header");
    return out;
}

void write_count_csv(std::ostream& out, const CountSeries& series) {
    out << "month,class_id,count\n";
    for (const auto& p : series.points) {
        out << YearMonth{series.origin.index + p.t}.str() << ',' << series.class_id << ',' << p.n << '\n';
    }
}

std::vector<QuarterCount> read_quarterly_csv(std::istream& in, std::string* class_id) {
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw ParseError("line 1, column 1: empty input, expected header quarter,class_id,count");
    ++lineno;
    if (trim(line) != "quarter,class_id,count") fail_at(1, 1, "expected header quarter,class_id,count");
    std::vector<QuarterCount> out;
    std::string cls_seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 3) fail_at(lineno, 1, "expected 3 fields, found " + std::to_string(cells.size()));
        const std::string q = trim(cells[0]);
        int y = 0, qq = 0;
        char tail = 0;
        if (std::sscanf(q.c_str(), "%4d-Q%1d%c", &y, &qq, &tail) != 2 || qq < 1 || qq > 4) {
            fail_at(lineno, 1, "quarter \"" + q + "\" is not YYYY-Qn");
        }
        const std::string cls = trim(cells[1]);
        if (cls_seen.empty()) cls_seen = cls;
        if (cls != cls_seen) fail_at(lineno, column_of(cells, 1), "quarterly input must hold a single class");
        const auto n = parse_count(cells[2], lineno, column_of(cells, 2));
        if (!out.empty() && y * 4 + qq != out.back().year * 4 + out.back().quarter + 1) {
            fail_at(lineno, 1, "quarters must be consecutive");
        }
        out.push_back({y, qq, static_cast<double>(n)});
    }
    if (class_id) *class_id = cls_seen.empty() ? "all" : cls_seen;
    return out;
}

namespace {

struct Penalty {
    Eigen::MatrixXd Q;  // m x (m - 2)
    Eigen::MatrixXd R;  // (m - 2) x (m - 2), tridiagonal
};

Penalty build_penalty(const std::vector<double>& x) {
    const auto m = static_cast<Eigen::Index>(x.size());
    Penalty p{Eigen::MatrixXd::Zero(m, m - 2), Eigen::MatrixXd::Zero(m - 2, m - 2)};
    for (Eigen::Index j = 1; j + 1 < m; ++j) {
        const double h0 = x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(j - 1)];
        const double h1 = x[static_cast<std::size_t>(j + 1)] - x[static_cast<std::size_t>(j)];
        const Eigen::Index c = j - 1;
        p.Q(j - 1, c) = 1.0 / h0;
        p.Q(j, c) = -1.0 / h0 - 1.0 / h1;
        p.Q(j + 1, c) = 1.0 / h1;
        p.R(c, c) = (h0 + h1) / 3.0;
        if (j + 2 < m) {
            p.R(c, c + 1) = h1 / 6.0;
            p.R(c + 1, c) = h1 / 6.0;
        }
    }
    return p;
}

}  // namespace

SmoothingSpline::SmoothingSpline(std::vector<double> x, std::vector<double> y, double lambda)
    : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size() || x_.size() < 3) throw DomainError("smoothing spline needs >= 3 points");
    for (std::size_t i = 1; i < x_.size(); ++i) {
        if (!(x_[i] > x_[i - 1])) throw DomainError("smoothing spline knots must increase");
    }
    fit(lambda);
}

SmoothingSpline::SmoothingSpline(std::vector<double> x, std::vector<double> y)
    : SmoothingSpline(std::move(x), std::move(y), 0.0) {
    const auto m = static_cast<Eigen::Index>(x_.size());
    const auto n = static_cast<double>(m);
    const Penalty pen = build_penalty(x_);
    const Eigen::MatrixXd K = pen.Q * pen.R.ldlt().solve(pen.Q.transpose());
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
    const Eigen::Map<const Eigen::VectorXd> y_vec(y_.data(), m);
    // GCV(lambda) = n RSS / (n - tr A)^2 with hat matrix A = (I + lambda K)^{-1}.
    auto score = [&](double log_lambda) {
        const Eigen::MatrixXd A = (I + std::exp(log_lambda) * K).inverse();
        const double rss = (y_vec - A * y_vec).squaredNorm();
        const double denom = n - A.trace();
        return n * rss / (denom * denom);
    };
    double best = -20.0;
    double best_score = std::numeric_limits<double>::infinity();
    for (double ll = -20.0; ll <= 20.0; ll += 0.5) {
        const double s = score(ll);
        if (s < best_score - 1e-12 * std::abs(best_score)) {
            best_score = s;
            best = ll;
        }
    }
    double a = best - 0.5, b = best + 0.5;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = score(c), fd = score(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = score(d);
        }
    }
    const double refined = 0.5 * (a + b);
    fit(std::exp(score(refined) <= best_score ? refined : best));
}

void SmoothingSpline::fit(double lambda) {
    lambda_ = lambda;
    const std::size_t m = x_.size();
    const auto M = static_cast<Eigen::Index>(m);
    const Penalty pen = build_penalty(x_);
    const Eigen::Map<const Eigen::VectorXd> y(y_.data(), M);
    // Reinsch form: (R + lambda Q^T Q) gamma = Q^T y, g = y - lambda Q gamma.
    const Eigen::MatrixXd lhs = pen.R + lambda * pen.Q.transpose() * pen.Q;
    const Eigen::VectorXd gam = lhs.ldlt().solve(pen.Q.transpose() * y);
    const Eigen::VectorXd g = y - lambda * pen.Q * gam;
    g_.assign(g.data(), g.data() + M);
    gamma_.assign(m, 0.0);
    for (std::size_t j = 1; j + 1 < m; ++j) gamma_[j] = gam(static_cast<Eigen::Index>(j - 1));
}

double SmoothingSpline::operator()(double x) const {
    const std::size_t m = x_.size();
    if (x <= x_.front()) {
        const double h = x_[1] - x_[0];
        const double slope = (g_[1] - g_[0]) / h - h * gamma_[1] / 6.0;
        return g_[0] + slope * (x - x_[0]);
    }
    if (x >= x_.back()) {
        const double h = x_[m - 1] - x_[m - 2];
        const double slope = (g_[m - 1] - g_[m - 2]) / h + h * gamma_[m - 2] / 6.0;
        return g_[m - 1] + slope * (x - x_[m - 1]);
    }
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double a = x - x_[i];
    const double b = x_[i + 1] - x;
    return (a * g_[i + 1] + b * g_[i]) / h -
           a * b / 6.0 * ((1.0 + a / h) * gamma_[i + 1] + (1.0 + b / h) * gamma_[i]);
}

CountSeries synthesize_monthly(const std::vector<QuarterCount>& quarterly, std::uint64_t seed,
                               const std::string& class_id) {
    if (quarterly.size() < 4) {
        throw DomainError("synthesis needs at least 4 quarters, got " + std::to_string(quarterly.size()));
    }
    std::vector<double> x, y;
    for (std::size_t q = 0; q < quarterly.size(); ++q) {
        x.push_back(3.0 * static_cast<double>(q) + 1.5);
        y.push_back(quarterly[q].count / 3.0);
    }
    const SmoothingSpline spline(x, y);

    // Residual standard error of the least-squares line through the anchors.
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (icept + slope * x[i]);
        rss += r * r;
    }
    const double noise_sd = std::sqrt(rss / (n - 2.0));

    CountSeries out;
    out.class_id = class_id;
    out.provenance = CountSeries::Provenance::synthesized;
    out.origin = YearMonth::of(quarterly.front().year, 3 * (quarterly.front().quarter - 1) + 1);
    CounterRng rng(seed, Stream::synthesis);
    const int months = static_cast<int>(3 * quarterly.size());
    for (int t = 0; t < months; ++t) {
        double v = spline(t + 0.5);
        if (noise_sd > 0.0) v += sample_normal(rng, 0.0, noise_sd);
        out.points.push_back({t, static_cast<std::int64_t>(std::max(0.0, std::round(v)))});
    }
    return out;
}

}  // namespace occq
