#include "occq/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <numeric>
#include <thread>

#include "occq/numeric.hpp"
#include "occq/rng.hpp"
#include "occq/simulator.hpp"

namespace occq {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_logpdf(double x, const NormalPrior& p) {
    const double z = (x - p.mu) / p.sigma;
    return -0.5 * z * z - std::log(p.sigma) - 0.5 * std::log(2.0 * M_PI);
}

void require_series(const CountSeries& s, std::size_t min_points, const char* what) {
    s.validate();
    if (s.size() < min_points) {
        throw DomainError(std::string(what) + " needs at least " + std::to_string(min_points) + " months, got " +
                              std::to_string(s.size()),
                          "supply a longer series");
    }
}

// ---- generic adaptive random-walk Metropolis ----

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using LogDensity = std::function<double(const Vec&)>;

struct ChainRun {
    std::vector<Vec> kept;
    double acceptance = 0.0;
};

Mat safe_cholesky(const Mat& cov) {
    Mat c = cov;
    for (int attempt = 0; attempt < 30; ++attempt) {
        Eigen::LLT<Mat> llt(c);
        if (llt.info() == Eigen::Success) return llt.matrixL();
        const double bump = 1e-10 * std::max(1.0, c.diagonal().cwiseAbs().maxCoeff()) * std::pow(10.0, attempt);
        c.diagonal().array() += bump;
    }
    return cov.diagonal().cwiseAbs().cwiseSqrt().asDiagonal();
}

// Proposal scale adapted by Robbins-Monro toward 0.234 acceptance; proposal covariance
// replaced by the running covariance of the warmup draws every 200 iterations.
ChainRun run_chain(const LogDensity& f, Vec x, const Mat& cov0, int iterations, int warmup, CounterRng rng) {
    const auto d = x.size();
    const double base = std::log(2.38 * 2.38 / static_cast<double>(d));
    double log_scale = base;
    Mat L = safe_cholesky(cov0);
    double lp = f(x);

    Vec mean = Vec::Zero(d);
    Mat m2 = Mat::Zero(d, d);
    long count = 0;
    const int adapt_from = warmup / 4;

    ChainRun out;
    out.kept.reserve(static_cast<std::size_t>(std::max(0, iterations - warmup)));
    long accepted = 0;
    Vec z(d);
    for (int it = 0; it < iterations; ++it) {
        for (Eigen::Index i = 0; i < d; ++i) z[i] = sample_normal(rng, 0.0, 1.0);
        const Vec y = x + std::exp(0.5 * log_scale) * (L * z);
        const double ly = f(y);
        double a = 0.0;
        if (std::isfinite(ly)) a = ly >= lp ? 1.0 : std::exp(ly - lp);
        if (rng.uniform() < a) {
            x = y;
            lp = ly;
            if (it >= warmup) ++accepted;
        }
        if (it < warmup) {
            log_scale += (a - 0.234) / std::pow(static_cast<double>(it) + 1.0, 0.6);
            log_scale = std::clamp(log_scale, base - 25.0, base + 10.0);
            if (it >= adapt_from) {
                ++count;
                const Vec dx = x - mean;
                mean += dx / static_cast<double>(count);
                m2 += dx * (x - mean).transpose();
                if ((it + 1) % 200 == 0 && count > 10 * d) {
                    Mat cov = m2 / static_cast<double>(count - 1);
                    for (Eigen::Index i = 0; i < d; ++i) cov(i, i) += 1e-12 * (1.0 + mean[i] * mean[i]);
                    L = safe_cholesky(cov);
                    log_scale = base;
                }
            }
        } else {
            out.kept.push_back(x);
        }
    }
    out.acceptance = iterations > warmup ? static_cast<double>(accepted) / (iterations - warmup) : 0.0;
    return out;
}

double chain_mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double chain_var(const std::vector<double>& v) {
    const double m = chain_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.size() > 1 ? s / (v.size() - 1) : 0.0;
}

// Split R-hat over the 2C half-chains.
double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        const std::size_t h = c.size() / 2;
        if (h < 2) return std::numeric_limits<double>::quiet_NaN();
        halves.emplace_back(c.begin(), c.begin() + static_cast<long>(h));
        halves.emplace_back(c.end() - static_cast<long>(h), c.end());
    }
    const double n = static_cast<double>(halves.front().size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto& h : halves) {
        means.push_back(chain_mean(h));
        w += chain_var(h);
    }
    w /= static_cast<double>(halves.size());
    const double b = n * chain_var(means);
    if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

// Effective sample size with Geyer's initial positive sequence on the multi-chain autocorrelation.
double effective_size(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    if (n < 4) return static_cast<double>(m * n);
    std::vector<double> means, vars;
    for (const auto& c : chains) {
        means.push_back(chain_mean(c));
        vars.push_back(chain_var(c));
    }
    const double w = chain_mean(vars);
    const double b_over_n = m > 1 ? chain_var(means) : 0.0;
    const double var_plus = (n - 1.0) / n * w + b_over_n;
    if (var_plus <= 0.0) return static_cast<double>(m * n);

    auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i + lag < n; ++i) s += (chains[c][i] - means[c]) * (chains[c][i + lag] - means[c]);
            acov += s / n;
        }
        acov /= m;
        return 1.0 - (w - acov) / var_plus;
    };

    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
    }
    tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
    return static_cast<double>(m * n) / tau;
}

struct SamplerOutput {
    std::vector<std::vector<Vec>> chains;
    Diagnostics diagnostics;
};

SamplerOutput sample(const LogDensity& f, const std::vector<Vec>& starts, const Mat& cov0, int iterations,
                     int warmup, std::uint64_t seed, std::uint64_t substream_base,
                     const std::vector<std::string>& names) {
    const std::size_t c = starts.size();
    std::vector<ChainRun> runs(c);
    // Chains own their streams, so batching by the worker cap does not change the draws.
    const std::size_t width = std::max<std::size_t>(1, std::min<std::size_t>(c, worker_threads()));
    for (std::size_t first = 0; first < c; first += width) {
        std::vector<std::thread> workers;
        for (std::size_t k = first; k < std::min(c, first + width); ++k) {
            workers.emplace_back([&, k] {
                runs[k] = run_chain(f, starts[k], cov0, iterations, warmup,
                                    CounterRng(seed, Stream::mcmc, substream_base + k));
            });
        }
        for (auto& t : workers) t.join();
    }

    SamplerOutput out;
    out.diagnostics.parameters = names;
    out.diagnostics.iterations = iterations;
    for (auto& r : runs) {
        out.diagnostics.acceptance.push_back(r.acceptance);
        out.chains.push_back(std::move(r.kept));
    }
    for (std::size_t p = 0; p < names.size(); ++p) {
        std::vector<std::vector<double>> per(c);
        for (std::size_t k = 0; k < c; ++k)
            for (const auto& v : out.chains[k]) per[k].push_back(v[static_cast<Eigen::Index>(p)]);
        out.diagnostics.r_hat.push_back(split_rhat(per));
        out.diagnostics.ess.push_back(effective_size(per));
    }
    return out;
}

// Nelder-Mead maximizer, restarted from its own optimum.
Vec maximize(const LogDensity& f, Vec x0, const Vec& step) {
    const auto d = x0.size();
    auto neg = [&](const Vec& v) {
        const double y = f(v);
        return std::isfinite(y) ? -y : std::numeric_limits<double>::infinity();
    };
    for (int restart = 0; restart < 4; ++restart) {
        std::vector<Vec> s(d + 1, x0);
        for (Eigen::Index i = 0; i < d; ++i) s[i + 1][i] += step[i];
        std::vector<double> fv(d + 1);
        for (Eigen::Index i = 0; i <= d; ++i) fv[i] = neg(s[i]);
        for (int it = 0; it < 2000 * d; ++it) {
            std::vector<std::size_t> idx(d + 1);
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
            std::vector<Vec> s2;
            std::vector<double> f2;
            for (auto i : idx) {
                s2.push_back(s[i]);
                f2.push_back(fv[i]);
            }
            s = std::move(s2);
            fv = std::move(f2);
            if (std::isfinite(fv[d]) && std::abs(fv[d] - fv[0]) < 1e-10 * (1.0 + std::abs(fv[0]))) break;

            Vec centroid = Vec::Zero(d);
            for (Eigen::Index i = 0; i < d; ++i) centroid += s[i];
            centroid /= static_cast<double>(d);
            const Vec xr = centroid + (centroid - s[d]);
            const double fr = neg(xr);
            if (fr < fv[0]) {
                const Vec xe = centroid + 2.0 * (centroid - s[d]);
                const double fe = neg(xe);
                if (fe < fr) {
                    s[d] = xe;
                    fv[d] = fe;
                } else {
                    s[d] = xr;
                    fv[d] = fr;
                }
            } else if (fr < fv[d - 1]) {
                s[d] = xr;
                fv[d] = fr;
            } else {
                const Vec xc = centroid + 0.5 * (s[d] - centroid);
                const double fc = neg(xc);
                if (fc < fv[d]) {
                    s[d] = xc;
                    fv[d] = fc;
                } else {
                    for (Eigen::Index i = 1; i <= d; ++i) {
                        s[i] = s[0] + 0.5 * (s[i] - s[0]);
                        fv[i] = neg(s[i]);
                    }
                }
            }
        }
        const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
        x0 = s[best];
    }
    return x0;
}

// Inverse negative Hessian at `x`; falls back to `fallback` where it is not positive definite.
Mat local_covariance(const LogDensity& f, const Vec& x, const Vec& scale, const Mat& fallback) {
    const auto d = x.size();
    Mat h(d, d);
    const double f0 = f(x);
    Vec e = Vec::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) e[i] = 1e-4 * scale[i];
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i; j < d; ++j) {
            double v;
            if (i == j) {
                Vec a = x, b = x;
                a[i] += e[i];
                b[i] -= e[i];
                v = (f(a) - 2.0 * f0 + f(b)) / (e[i] * e[i]);
            } else {
                Vec pp = x, pm = x, mp = x, mm = x;
                pp[i] += e[i], pp[j] += e[j];
                pm[i] += e[i], pm[j] -= e[j];
                mp[i] -= e[i], mp[j] += e[j];
                mm[i] -= e[i], mm[j] -= e[j];
                v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * e[i] * e[j]);
            }
            h(i, j) = h(j, i) = v;
        }
    }
    if (!h.allFinite()) return fallback;
    const Mat neg_h = -h;
    Eigen::LLT<Mat> llt(neg_h);
    if (llt.info() != Eigen::Success) return fallback;
    Mat cov = llt.solve(Mat::Identity(d, d));
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(cov(i, i) > 0.0) || cov(i, i) > fallback(i, i) * 1e4) return fallback;
    }
    return cov;
}

std::vector<Vec> jittered_starts(const LogDensity& f, const Vec& mode, const Mat& cov, int chains,
                                 std::uint64_t seed, std::uint64_t substream) {
    const Mat L = safe_cholesky(cov);
    CounterRng rng(seed, Stream::mcmc, 1000 + substream);
    std::vector<Vec> starts;
    for (int c = 0; c < chains; ++c) {
        Vec s = mode;
        for (int attempt = 0; attempt < 100; ++attempt) {
            Vec z(mode.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sample_normal(rng, 0.0, 1.0);
            const Vec cand = mode + 2.0 * (L * z);
            if (std::isfinite(f(cand))) {
                s = cand;
                break;
            }
        }
        starts.push_back(s);
    }
    return starts;
}

struct SamplerPlan {
    LogDensity f;
    Vec start;
    Vec step;
    Mat fallback_cov;
    std::vector<std::string> names;
};

// Runs the sampler with restarts; returns the last output and the restart count used.
std::pair<SamplerOutput, bool> run_with_restarts(const SamplerPlan& plan, const McmcSettings& mcmc) {
    if (mcmc.chains < 1) throw DomainError("mcmc.chains must be >= 1");
    if (mcmc.iterations < 4) throw DomainError("mcmc.iterations must be >= 4");
    if (mcmc.warmup_iterations() >= mcmc.iterations) throw DomainError("mcmc.warmup must be below iterations");

    if (!std::isfinite(plan.f(plan.start))) {
        throw InfeasibleError("no starting point with finite posterior density",
                              "check that the priors allow a non-negative arrival rate over the whole series");
    }
    const Vec mode = maximize(plan.f, plan.start, plan.step);
    const Mat cov0 = local_covariance(plan.f, mode, plan.step, plan.fallback_cov);

    SamplerOutput out;
    int iterations = mcmc.iterations;
    int warmup = mcmc.warmup_iterations();
    for (int r = 0; r <= mcmc.max_restarts; ++r) {
        const auto sub = static_cast<std::uint64_t>(r) * 64;
        const auto starts = jittered_starts(plan.f, mode, cov0, mcmc.chains, mcmc.seed, sub);
        out = sample(plan.f, starts, cov0, iterations, warmup, mcmc.seed, sub, plan.names);
        out.diagnostics.restarts = r;
        const double worst = out.diagnostics.max_r_hat();
        if (mcmc.chains < 2 || worst <= mcmc.rhat_threshold) return {std::move(out), true};
        iterations *= 2;
        warmup *= 2;
    }
    return {std::move(out), false};
}

double sample_sd(const std::vector<double>& v) { return std::sqrt(chain_var(v)); }

}  // namespace

// ---- closed forms ----

ClosedForms closed_forms(double beta0, double beta1, double alpha, double theta, double tau, double delta) {
    if (!(alpha > 2.0)) throw UnsupportedError("closed forms require alpha > 2", "raise the lower bound of the alpha prior");
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    if (!(delta >= 0.0)) throw DomainError("delta must be non-negative");
    if (beta1 > 0.0) {
        throw DomainError("increasing linear rate is negative in the distant past",
                          "the model needs beta1 <= 0 so the rate stays non-negative before tau");
    }
    const double lt = beta0 + beta1 * tau;
    if (beta0 + beta1 * (tau + delta) < 0.0) {
        throw DomainError("linear rate is negative at tau + delta", "shorten the horizon");
    }
    const double a1 = alpha - 1.0;
    const double a2 = alpha - 2.0;
    const double v = lt * theta / a1 - beta1 * theta * theta / (a1 * a2);
    if (delta == 0.0) return {v, 1.0, 0.0};

    const double dt = delta + theta;
    const double t_a1 = std::pow(theta / dt, a1);  // theta^{a-1} (delta+theta)^{1-a}
    const double denom = lt * (2.0 - alpha) + beta1 * theta;
    const double p = denom == 0.0 ? t_a1 : t_a1 * (1.0 + beta1 * delta / denom);
    // theta^a (delta+theta)^{1-a} = theta * t_a1 ; theta^a (delta+theta)^{2-a} = theta * dt * t_a1
    const double m = lt / (1.0 - alpha) * (theta * t_a1 - theta) +
                     beta1 / ((1.0 - alpha) * (2.0 - alpha)) *
                         (theta * dt * t_a1 - theta * theta - delta * theta * (2.0 - alpha));
    return {v, p, m};
}

double forecast_mean(const ModelParams& p, double tau, double delta, std::int64_t n) {
    const auto cf = closed_forms(p, tau, delta);
    return static_cast<double>(n) * cf.p_tau_delta + cf.m_check;
}

std::vector<std::string> PriorSpec::validate() const {
    if (!(beta0.sigma > 0.0) || !(beta1.sigma > 0.0)) throw DomainError("prior sigma must be positive");
    if (!std::isfinite(beta0.mu) || !std::isfinite(beta1.mu)) throw DomainError("prior mu must be finite");
    if (!(alpha.hi > alpha.lo)) throw DomainError("alpha prior needs hi > lo");
    if (!(alpha.lo > 2.0)) {
        throw UnsupportedError("alpha prior must exclude alpha <= 2",
                               "the occupancy closed forms need a finite service-time variance");
    }
    if (!(mean_service > 0.0)) throw DomainError("mean_service must be positive");
    std::vector<std::string> warnings;
    if (alpha.lo < 2.5) warnings.push_back("alpha lower bound below 2.5: near-infinite service variance");
    if (alpha.hi > 10.0) warnings.push_back("alpha upper bound above 10: the tail shape becomes non-identifiable");
    return warnings;
}

double log_posterior(const FreeParams& x, const CountSeries& series, const PriorSpec& priors,
                     bool include_likelihood) {
    if (!(x.alpha >= priors.alpha.lo && x.alpha <= priors.alpha.hi)) return kNegInf;
    if (!std::isfinite(x.beta0) || !std::isfinite(x.beta1)) return kNegInf;
    double lp = normal_logpdf(x.beta0, priors.beta0) + normal_logpdf(x.beta1, priors.beta1) -
                std::log(priors.alpha.hi - priors.alpha.lo);
    if (!include_likelihood) return lp;
    const double theta = priors.theta_for(x.alpha);
    const auto& pts = series.points;
    if (!pts.empty()) {
        // The rate must be non-negative up to the last month; beta1 <= 0 makes that the binding point.
        if (x.beta1 > 0.0 || x.beta0 + x.beta1 * pts.back().t < 0.0) return kNegInf;
    }
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double tau = pts[i - 1].t;
        const double delta = pts[i].t - pts[i - 1].t;
        const auto cf = closed_forms(x.beta0, x.beta1, x.alpha, theta, tau, delta);
        const double m = static_cast<double>(pts[i - 1].n) * cf.p_tau_delta + cf.m_check;
        const auto k = static_cast<double>(pts[i].n);
        if (!(m > 0.0)) {
            if (pts[i].n == 0) continue;
            return kNegInf;
        }
        lp += k * std::log(m) - m - std::lgamma(k + 1.0);
    }
    return lp;
}

double log_posterior_dbeta0(const FreeParams& x, const CountSeries& series, const PriorSpec& priors) {
    double g = -(x.beta0 - priors.beta0.mu) / (priors.beta0.sigma * priors.beta0.sigma);
    const double theta = priors.theta_for(x.alpha);
    const auto& pts = series.points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double tau = pts[i - 1].t;
        const double delta = pts[i].t - pts[i - 1].t;
        const auto cf = closed_forms(x.beta0, x.beta1, x.alpha, theta, tau, delta);
        const auto n_prev = static_cast<double>(pts[i - 1].n);
        const double m = n_prev * cf.p_tau_delta + cf.m_check;
        const double t_a1 = std::pow(theta / (delta + theta), x.alpha - 1.0);
        const double denom = (x.beta0 + x.beta1 * tau) * (2.0 - x.alpha) + x.beta1 * theta;
        const double dp = denom == 0.0 ? 0.0 : -t_a1 * x.beta1 * delta * (2.0 - x.alpha) / (denom * denom);
        const double dm = (theta * t_a1 - theta) / (1.0 - x.alpha);
        g += (static_cast<double>(pts[i].n) / m - 1.0) * (n_prev * dp + dm);
    }
    return g;
}

double Diagnostics::max_r_hat() const {
    double worst = 0.0;
    for (double r : r_hat) {
        if (std::isnan(r)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, r);
    }
    return worst;
}

PosteriorDraws fit(const CountSeries& series, const PriorSpec& priors, const McmcSettings& mcmc) {
    priors.validate();
    if (mcmc.include_likelihood) require_series(series, 2, "fit");

    SamplerPlan plan;
    plan.names = {"beta0", "beta1", "alpha"};
    plan.f = [&](const Vec& v) {
        try {
            return log_posterior({v[0], v[1], v[2]}, series, priors, mcmc.include_likelihood);
        } catch (const Error&) {
            return kNegInf;
        }
    };
    const double a_mid = 0.5 * (priors.alpha.lo + priors.alpha.hi);
    const double a_range = priors.alpha.hi - priors.alpha.lo;
    double b0 = priors.beta0.mu;
    double b1 = std::min(priors.beta1.mu, 0.0);
    if (mcmc.include_likelihood) {
        const double t_last = series.points.back().t;
        if (b0 + b1 * t_last <= 0.0) b0 = -b1 * t_last + std::max(1.0, 0.1 * std::abs(b0));
    }
    plan.start = Vec(3);
    plan.start << b0, b1, a_mid;
    plan.step = Vec(3);
    plan.step << priors.beta0.sigma * 0.1, priors.beta1.sigma * 0.1, a_range * 0.1;
    plan.fallback_cov = Mat::Zero(3, 3);
    plan.fallback_cov(0, 0) = std::pow(priors.beta0.sigma * 0.05, 2);
    plan.fallback_cov(1, 1) = std::pow(priors.beta1.sigma * 0.05, 2);
    plan.fallback_cov(2, 2) = a_range * a_range / 12.0;

    auto [out, ok] = run_with_restarts(plan, mcmc);
    PosteriorDraws draws;
    draws.chains = mcmc.chains;
    draws.diagnostics = out.diagnostics;
    draws.converged = ok;
    for (const auto& chain : out.chains) {
        for (const auto& v : chain) draws.draws.push_back({v[0], v[1], v[2], priors.theta_for(v[2])});
    }
    if (!ok) {
        throw FitConvergenceError("MCMC did not converge: max r_hat " + numeric::fmt(out.diagnostics.max_r_hat()),
                                  std::move(draws));
    }
    return draws;
}

ArrivalPosterior fit_arrival_counts(const CountSeries& arrivals, const McmcSettings& mcmc) {
    require_series(arrivals, 2, "fit_arrival_counts");
    const auto& pts = arrivals.points;

    // Least-squares start on the month midpoints.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto n = static_cast<double>(pts.size());
    for (const auto& p : pts) {
        const double x = p.t + 0.5;
        sx += x;
        sy += static_cast<double>(p.n);
        sxx += x * x;
        sxy += x * static_cast<double>(p.n);
    }
    const double sdx = sxx - sx * sx / n;
    double b1 = sdx > 0.0 ? (sxy - sx * sy / n) / sdx : 0.0;
    double b0 = sy / n - b1 * sx / n;

    SamplerPlan plan;
    plan.names = {"beta0", "beta1"};
    plan.f = [&](const Vec& v) {
        double ll = 0.0;
        for (const auto& p : pts) {
            const double mu = v[0] + v[1] * (p.t + 0.5);
            if (!(mu > 0.0)) return kNegInf;
            ll += static_cast<double>(p.n) * std::log(mu) - mu;
        }
        return ll;
    };
    // Nudge the start inside the positive-rate region.
    for (int i = 0; i < 60 && !std::isfinite(plan.f((Vec(2) << b0, b1).finished())); ++i) {
        b1 *= 0.5;
        b0 = std::max(b0, 1.0) * 1.1;
    }
    plan.start = (Vec(2) << b0, b1).finished();
    const double level = std::max(1.0, sy / n);
    const double span = std::max(1.0, static_cast<double>(pts.back().t - pts.front().t + 1));
    plan.step = (Vec(2) << std::sqrt(level), std::sqrt(level) / span).finished();
    plan.fallback_cov = Mat::Zero(2, 2);
    plan.fallback_cov(0, 0) = level / n * 4.0;
    plan.fallback_cov(1, 1) = 12.0 * level / (n * span * span);

    auto [out, ok] = run_with_restarts(plan, mcmc);
    if (!ok) {
        throw ConvergenceError("arrival-count MCMC did not converge: max r_hat " +
                                   numeric::fmt(out.diagnostics.max_r_hat()),
                               "increase iterations");
    }
    ArrivalPosterior post;
    post.chains = mcmc.chains;
    post.diagnostics = out.diagnostics;
    for (const auto& chain : out.chains)
        for (const auto& v : chain) post.draws.push_back({v[0], v[1]});
    return post;
}

PriorSpec prior_from_arrivals(const ArrivalPosterior& posterior, double mean_service, double sd_scale,
                              UniformPrior alpha) {
    if (posterior.draws.empty()) throw DomainError("empty arrival posterior");
    std::vector<double> b0, b1;
    for (const auto& d : posterior.draws) {
        b0.push_back(d.beta0);
        b1.push_back(d.beta1);
    }
    PriorSpec p;
    p.beta0 = {chain_mean(b0), sd_scale * sample_sd(b0)};
    p.beta1 = {chain_mean(b1), sd_scale * sample_sd(b1)};
    p.alpha = alpha;
    p.mean_service = mean_service;
    return p;
}

// ---- prediction ----

std::vector<int> horizon_range(int q) {
    if (q < 1) throw DomainError("horizon count q must be >= 1");
    std::vector<int> h(static_cast<std::size_t>(q));
    std::iota(h.begin(), h.end(), 1);
    return h;
}

namespace {

double scenario_mean(const Draw& d, const Scenario& s, double tau, double delta, std::int64_t n) {
    const auto old_cf = closed_forms(d.beta0, d.beta1, d.alpha, d.theta, tau, delta);
    double m_new = 0.0;
    if (delta > s.pause_months) {
        const double theta = s.new_mean_service ? *s.new_mean_service * (d.alpha - 1.0) : d.theta;
        m_new = closed_forms(d.beta0, d.beta1, d.alpha, theta, tau + s.pause_months, delta - s.pause_months).m_check;
    }
    return static_cast<double>(n) * old_cf.p_tau_delta + s.lambda_scale * m_new;
}

}  // namespace

PredictionSeries predict(const PosteriorDraws& draws, double tau, std::int64_t n, const std::vector<int>& horizons,
                         const PredictOptions& opts) {
    if (draws.draws.empty()) throw DomainError("prediction needs at least one posterior draw");
    if (n < 0) throw DomainError("observed count must be non-negative");
    const Scenario& sc = opts.scenario;
    if (!(sc.lambda_scale >= 0.0)) throw DomainError("lambda_scale must be non-negative");
    if (!(sc.pause_months >= 0.0)) throw DomainError("pause_months must be non-negative");
    if (sc.new_mean_service && !(*sc.new_mean_service > 0.0)) throw DomainError("new mean service must be positive");

    PredictionSeries out;
    out.tau = tau;
    out.n = n;
    const auto k = static_cast<double>(draws.draws.size());
    for (int delta : horizons) {
        if (delta < 0) throw DomainError("horizons must be non-negative");
        if (delta > opts.horizon_cap) {
            throw DomainError("horizon " + std::to_string(delta) + " exceeds the cap of " +
                                  numeric::fmt(opts.horizon_cap) + " months",
                              "raise horizon_cap only if the linear rate is trusted that far ahead");
        }
        ForecastPoint fp{delta, tau + delta, 0, 0, 0, 0, 0, 0};
        if (delta == 0) {
            fp.mean = fp.lower = fp.upper = fp.sampled_mean = static_cast<double>(n);
            out.points.push_back(fp);
            continue;
        }
        CounterRng rng(opts.seed, Stream::prediction, static_cast<std::uint64_t>(delta));
        double sum = 0.0, sum2 = 0.0, qsum = 0.0, qsum2 = 0.0;
        for (const auto& d : draws.draws) {
            const double m = scenario_mean(d, sc, tau, delta, n);
            sum += m;
            sum2 += m * m;
            const auto q = static_cast<double>(sample_poisson(rng, m));
            qsum += q;
            qsum2 += q * q;
        }
        const double mean = sum / k;
        const double var_m = std::max(0.0, sum2 / k - mean * mean);
        fp.mean = mean;
        fp.sd = std::sqrt(mean + var_m);
        fp.lower = mean - 2.0 * fp.sd;
        fp.upper = mean + 2.0 * fp.sd;
        fp.sampled_mean = qsum / k;
        fp.sampled_sd = std::sqrt(std::max(0.0, qsum2 / k - fp.sampled_mean * fp.sampled_mean));
        out.points.push_back(fp);
    }
    return out;
}

PredictionSeries predict(const PosteriorDraws& draws, const ObservedState& state, const std::vector<int>& horizons,
                         const PredictOptions& opts) {
    state.validate();
    if (state.classes.empty()) throw DomainError("observed state has no classes");
    auto out = predict(draws, state.tau, state.classes.front().n, horizons, opts);
    out.class_id = state.classes.front().class_id;
    return out;
}

PredictionSeries predict_short_term(const CountSeries& full, std::size_t train_size, int q, const PriorSpec& priors,
                                    const McmcSettings& mcmc, const PredictOptions& opts) {
    full.validate();
    if (train_size < 2 || train_size > full.size()) throw DomainError("train_size must be in [2, series length]");
    if (q < 1) throw DomainError("q must be >= 1");
    if (train_size + static_cast<std::size_t>(q) - 1 > full.size()) {
        throw DomainError("short-term prediction needs the realized months up to the last forecast",
                          "lower q or extend the series");
    }
    PredictionSeries out;
    out.mode = PredictionSeries::Mode::short_term;
    out.class_id = full.class_id;
    out.tau = full.points[train_size - 1].t;
    out.n = full.points[train_size - 1].n;
    for (int j = 1; j <= q; ++j) {
        const auto train = full.head(train_size + static_cast<std::size_t>(j) - 1);
        const auto draws = fit(train, priors, mcmc);
        const auto& last = train.points.back();
        const std::size_t target = train_size + static_cast<std::size_t>(j) - 1;
        const double t_next = target < full.size() ? full.points[target].t : last.t + 1;
        const int step = static_cast<int>(t_next - last.t);
        auto one = predict(draws, last.t, last.n, {step}, opts);
        auto fp = one.points.front();
        fp.delta = static_cast<int>(t_next - out.tau);
        out.points.push_back(fp);
    }
    return out;
}

double rmse(const PredictionSeries& pred, const CountSeries& actual) {
    if (pred.points.empty()) throw DomainError("empty prediction");
    double s = 0.0;
    for (const auto& p : pred.points) {
        const auto it = std::find_if(actual.points.begin(), actual.points.end(),
                                     [&](const CountPoint& c) { return c.t == p.t; });
        if (it == actual.points.end()) {
            throw DomainError("no realized count at month " + numeric::fmt(p.t),
                              "align the prediction horizons with the realized series");
        }
        const double e = static_cast<double>(it->n) - p.mean;
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(pred.points.size()));
}

CountSeries simulate_count_series(const ModelParams& truth, int months, std::uint64_t seed) {
    if (months < 1) throw DomainError("months must be >= 1");
    CounterRng rng(seed, Stream::fixture, 0);
    CountSeries s;
    s.origin = YearMonth::of(2015, 3);
    s.provenance = CountSeries::Provenance::synthesized;
    const auto v0 = closed_forms(truth, 0.0, 0.0).v_tau;
    std::int64_t n = sample_poisson(rng, v0);
    s.points.push_back({0, n});
    for (int t = 1; t < months; ++t) {
        n = sample_poisson(rng, forecast_mean(truth, t - 1, 1.0, n));
        s.points.push_back({t, n});
    }
    return s;
}

CountSeries simulate_arrival_counts(double beta0, double beta1, int months, std::uint64_t seed) {
    if (months < 1) throw DomainError("months must be >= 1");
    CounterRng rng(seed, Stream::fixture, 1);
    CountSeries s;
    s.origin = YearMonth::of(2015, 3);
    s.provenance = CountSeries::Provenance::synthesized;
    for (int t = 0; t < months; ++t) {
        s.points.push_back({t, sample_poisson(rng, std::max(0.0, beta0 + beta1 * (t + 0.5)))});
    }
    return s;
}

// ---- serialization ----

nlohmann::json to_json(const PriorSpec& p) {
    return {{"beta0", {{"mu", p.beta0.mu}, {"sigma", p.beta0.sigma}}},
            {"beta1", {{"mu", p.beta1.mu}, {"sigma", p.beta1.sigma}}},
            {"alpha", {{"lo", p.alpha.lo}, {"hi", p.alpha.hi}}},
            {"mean_service", p.mean_service}};
}

PriorSpec prior_spec_from_json(const nlohmann::json& j) {
    try {
        PriorSpec p;
        p.beta0 = {j.at("beta0").at("mu").get<double>(), j.at("beta0").at("sigma").get<double>()};
        p.beta1 = {j.at("beta1").at("mu").get<double>(), j.at("beta1").at("sigma").get<double>()};
        if (j.contains("alpha")) p.alpha = {j["alpha"].value("lo", 2.5), j["alpha"].value("hi", 10.0)};
        p.mean_service = j.at("mean_service").get<double>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("prior spec: ") + plain_message(e),
                         "expected {beta0:{mu,sigma}, beta1:{mu,sigma}, alpha:{lo,hi}, mean_service}");
    }
}

nlohmann::json to_json(const McmcSettings& m) {
    return {{"chains", m.chains},         {"iterations", m.iterations},         {"warmup", m.warmup_iterations()},
            {"seed", m.seed},             {"max_restarts", m.max_restarts},     {"rhat_threshold", m.rhat_threshold},
            {"include_likelihood", m.include_likelihood}};
}

McmcSettings mcmc_settings_from_json(const nlohmann::json& j) {
    try {
        McmcSettings m;
        m.chains = j.value("chains", m.chains);
        m.iterations = j.value("iterations", m.iterations);
        m.warmup = j.value("warmup", -1);
        m.seed = j.value("seed", std::uint64_t{0});
        m.max_restarts = j.value("max_restarts", m.max_restarts);
        m.rhat_threshold = j.value("rhat_threshold", m.rhat_threshold);
        m.include_likelihood = j.value("include_likelihood", true);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("mcmc settings: ") + plain_message(e));
    }
}

nlohmann::json to_json(const Diagnostics& d) {
    nlohmann::json r = nlohmann::json::object(), e = nlohmann::json::object();
    for (std::size_t i = 0; i < d.parameters.size(); ++i) {
        r[d.parameters[i]] = d.r_hat[i];
        e[d.parameters[i]] = d.ess[i];
    }
    return {{"r_hat", r}, {"ess", e}, {"acceptance", d.acceptance}, {"iterations", d.iterations}, {"restarts", d.restarts}};
}

nlohmann::json to_json(const PredictionSeries& p) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& f : p.points) {
        pts.push_back({{"delta", f.delta},
                       {"t", f.t},
                       {"mean", f.mean},
                       {"sd", f.sd},
                       {"lower", f.lower},
                       {"upper", f.upper},
                       {"sampled_mean", f.sampled_mean},
                       {"sampled_sd", f.sampled_sd}});
    }
    return {{"mode", p.mode == PredictionSeries::Mode::long_term ? "long_term" : "short_term"},
            {"class_id", p.class_id},
            {"tau", p.tau},
            {"n", p.n},
            {"points", pts}};
}

nlohmann::json to_json(const Scenario& s) {
    nlohmann::json j = {{"lambda_scale", s.lambda_scale}, {"pause_months", s.pause_months}};
    j["E_S_new"] = s.new_mean_service ? nlohmann::json(*s.new_mean_service) : nlohmann::json(nullptr);
    return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        Scenario s;
        if (j.contains("switch") && !j["switch"].is_null()) s.new_mean_service = j["switch"].at("E_S_new").get<double>();
        if (j.contains("E_S_new") && !j["E_S_new"].is_null()) s.new_mean_service = j["E_S_new"].get<double>();
        if (j.contains("lambda_scale")) s.lambda_scale = j["lambda_scale"].get<double>();
        if (j.contains("pause")) {
            const auto& p = j["pause"];
            s.pause_months = p.is_object() ? p.at("months").get<double>() : p.get<double>();
        }
        if (j.contains("pause_months")) s.pause_months = j["pause_months"].get<double>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: ") + plain_message(e),
                         "expected {switch:{E_S_new}} | {lambda_scale} | {pause:{months}}");
    }
}

void write_draws_csv(std::ostream& os, const PosteriorDraws& d) {
    os << "chain,draw,beta0,beta1,alpha,theta\n" << std::setprecision(17);
    const std::size_t per = d.per_chain();
    for (std::size_t i = 0; i < d.draws.size(); ++i) {
        const auto& x = d.draws[i];
        os << (per ? i / per : 0) << ',' << (per ? i % per : i) << ',' << x.beta0 << ',' << x.beta1 << ',' << x.alpha
           << ',' << x.theta << '\n';
    }
}

PosteriorDraws read_draws_csv(std::istream& in) {
    PosteriorDraws d;
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) throw ParseError("draws csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "chain,draw,beta0,beta1,alpha,theta")
        throw ParseError("draws csv: line 1, column 1: expected header chain,draw,beta0,beta1,alpha,theta");
    std::vector<int> chain_of;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v[6];
        std::size_t pos = 0;
        for (int c = 0; c < 6; ++c) {
            const std::size_t end = c < 5 ? line.find(',', pos) : line.size();
            const std::string cell = line.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
            char* stop = nullptr;
            v[c] = std::strtod(cell.c_str(), &stop);
            if (cell.empty() || *stop != '\0' || !std::isfinite(v[c]) || (c < 5 && end == std::string::npos))
                throw ParseError("draws csv: line " + std::to_string(lineno) + ", column " + std::to_string(pos + 1) +
                                 ": bad field '" + cell + "'");
            pos = end + 1;
        }
        chain_of.push_back(static_cast<int>(v[0]));
        d.draws.push_back({v[2], v[3], v[4], v[5]});
    }
    if (d.draws.empty()) throw ParseError("draws csv: no draws");
    d.chains = *std::max_element(chain_of.begin(), chain_of.end()) + 1;
    if (d.draws.size() % static_cast<std::size_t>(d.chains) != 0) d.chains = 1;
    return d;
}

void write_prediction_csv(std::ostream& os, const PredictionSeries& p) {
    os << "delta,t,mean,sd,lower,upper\n" << std::setprecision(17);
    for (const auto& f : p.points) {
        os << f.delta << ',' << f.t << ',' << f.mean << ',' << f.sd << ',' << f.lower << ',' << f.upper << '\n';
    }
}

}  // namespace occq
