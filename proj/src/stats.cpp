#include "cmtr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cmtr/error.hpp"

namespace cmtr::eval {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Probability distribution of the sum of a random subset of the given
// doubled ranks (each included with probability 1/2). Index = doubled sum.
std::vector<double> subset_sum_distribution(const std::vector<long>& doubled_ranks) {
    long total = 0;
    for (long r : doubled_ranks) total += r;
    std::vector<double> dist(static_cast<std::size_t>(total) + 1, 0.0);
    dist[0] = 1.0;
    long reach = 0;
    for (long r : doubled_ranks) {
        for (long s = reach; s >= 0; --s) {
            const double v = dist[static_cast<std::size_t>(s)] * 0.5;
            dist[static_cast<std::size_t>(s)] = v;
            dist[static_cast<std::size_t>(s + r)] += v;
        }
        reach += r;
    }
    return dist;
}

std::vector<std::size_t> tie_group_sizes(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> groups;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        groups.push_back(j - i);
        i = j;
    }
    return groups;
}

}  // namespace

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double chi_square_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
        for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
        i = j;
    }
    return ranks;
}

std::vector<double> signed_rank_counts(std::size_t n) {
    std::vector<long> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = 2 * static_cast<long>(i + 1);
    const auto dist = subset_sum_distribution(doubled);
    std::vector<double> counts(dist.size() / 2 + 1, 0.0);
    const double total = std::ldexp(1.0, static_cast<int>(n));
    for (std::size_t s = 0; s < dist.size(); s += 2) counts[s / 2] = std::round(dist[s] * total);
    return counts;
}

StatReport wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, const WilcoxonOptions& options) {
    if (a.size() != b.size())
        throw ConfigError("wilcoxon: samples have different lengths (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const auto n_zero = static_cast<std::size_t>(std::count(d.begin(), d.end(), 0.0));
    if (n_zero == d.size()) throw RuntimeError("wilcoxon: all paired differences are zero; the test is undefined");

    // Ranks of |d|, either over the non-zero differences (wilcox) or over all
    // of them with zero ranks discarded afterwards (pratt).
    std::vector<double> kept, magnitudes;
    for (double x : d)
        if (options.zero_method == ZeroMethod::pratt || x != 0.0) kept.push_back(x);
    for (double x : kept) magnitudes.push_back(std::abs(x));
    const auto ranks = average_ranks(magnitudes);

    double t_plus = 0.0;
    std::vector<double> nonzero_ranks;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] > 0.0) t_plus += ranks[i];
        if (kept[i] != 0.0) nonzero_ranks.push_back(ranks[i]);
    }

    std::vector<double> nonzero_magnitudes;
    for (double x : d)
        if (x != 0.0) nonzero_magnitudes.push_back(std::abs(x));
    const auto ties = tie_group_sizes(nonzero_magnitudes);
    const bool has_ties = std::any_of(ties.begin(), ties.end(), [](std::size_t t) { return t > 1; });

    PValueMethod method = options.method;
    if (method == PValueMethod::automatic) {
        if (!has_ties && n_zero == 0 && nonzero_ranks.size() <= 50) method = PValueMethod::exact;
        else if (d.size() <= 13) method = PValueMethod::exact;
        else method = PValueMethod::normal;
    }

    StatReport r;
    r.test = "wilcoxon";
    r.statistic = t_plus;

    if (method == PValueMethod::exact) {
        std::vector<long> doubled;
        for (double rk : nonzero_ranks) doubled.push_back(std::lround(2.0 * rk));
        const auto dist = subset_sum_distribution(doubled);
        const auto observed = std::lround(2.0 * t_plus);
        double upper = 0.0, lower = 0.0;
        for (std::size_t s = 0; s < dist.size(); ++s) {
            if (static_cast<long>(s) >= observed) upper += dist[s];
            if (static_cast<long>(s) <= observed) lower += dist[s];
        }
        switch (options.alternative) {
            case Alternative::greater: r.p_value = upper; break;
            case Alternative::less: r.p_value = lower; break;
            case Alternative::two_sided: r.p_value = std::min(1.0, 2.0 * std::min(upper, lower)); break;
        }
        r.detail = "exact null distribution, n=" + std::to_string(nonzero_ranks.size());
    } else {
        const double count = static_cast<double>(kept.size());
        double mean = count * (count + 1.0) * 0.25;
        double var = count * (count + 1.0) * (2.0 * count + 1.0);
        if (options.zero_method == ZeroMethod::pratt) {
            const double z0 = static_cast<double>(n_zero);
            mean -= z0 * (z0 + 1.0) * 0.25;
            var -= z0 * (z0 + 1.0) * (2.0 * z0 + 1.0);
        }
        for (std::size_t t : ties) {
            const double td = static_cast<double>(t);
            var -= 0.5 * (td * td * td - td);
        }
        const double se = std::sqrt(var / 24.0);
        const double z = (t_plus - mean) / se;
        switch (options.alternative) {
            case Alternative::greater: r.p_value = normal_sf(z); break;
            case Alternative::less: r.p_value = normal_cdf(z); break;
            case Alternative::two_sided: r.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(z))); break;
        }
        r.detail = "normal approximation, z=" + std::to_string(z);
    }
    r.p_value = std::clamp(r.p_value, 0.0, 1.0);
    r.significant = r.p_value < options.alpha;
    return r;
}

StatReport friedman(const std::vector<std::vector<double>>& columns, double alpha) {
    const std::size_t k = columns.size();
    if (k < 3) throw ConfigError("friedman needs at least 3 columns, got " + std::to_string(k));
    const std::size_t n = columns[0].size();
    if (n == 0) throw ConfigError("friedman: columns are empty");
    for (const auto& c : columns)
        if (c.size() != n) throw ConfigError("friedman: columns have different lengths");

    std::vector<double> rank_sums(k, 0.0);
    double tie_sum = 0.0;
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) row[j] = columns[j][i];
        const auto ranks = average_ranks(row);
        for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks[j];
        for (std::size_t t : tie_group_sizes(row)) {
            const double td = static_cast<double>(t);
            tie_sum += td * td * td - td;
        }
    }
    const double nd = static_cast<double>(n), kd = static_cast<double>(k);
    double ss = 0.0;
    for (double s : rank_sums) ss += s * s;
    const double correction = 1.0 - tie_sum / (nd * kd * (kd * kd - 1.0));

    StatReport r;
    r.test = "friedman";
    if (correction <= 1e-12) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.detail = "every row fully tied";
    } else {
        r.statistic = std::max(0.0, (12.0 / (nd * kd * (kd + 1.0)) * ss - 3.0 * nd * (kd + 1.0)) / correction);
        r.p_value = chi_square_sf(r.statistic, kd - 1.0);
        r.detail = "chi-square with " + std::to_string(k - 1) + " degrees of freedom";
    }
    r.significant = r.p_value < alpha;
    return r;
}

double studentized_range_sf(double q, int k) {
    if (k < 2) throw ConfigError("studentized range needs k >= 2");
    if (q <= 0.0) return 1.0;
    // P(range <= q) = k * int phi(z) [Phi(z) - Phi(z - q)]^(k-1) dz
    auto integrand = [&](double z) {
        const double inner = normal_cdf(z) - normal_cdf(z - q);
        return normal_pdf(z) * std::pow(std::max(inner, 0.0), k - 1);
    };
    using boost::math::quadrature::gauss_kronrod;
    const double lo = -9.0, hi = 9.0 + q;
    double cdf = 0.0;
    // Split at the two bumps of the integrand for accuracy.
    const double cuts[] = {lo, -1.0, 0.5 * q, q + 1.0, hi};
    for (int i = 0; i + 1 < 5; ++i) {
        if (cuts[i + 1] <= cuts[i]) continue;
        cdf += gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1], 15, 1e-13);
    }
    return std::clamp(1.0 - k * cdf, 0.0, 1.0);
}

std::vector<std::vector<double>> nemenyi_posthoc(const std::vector<std::vector<double>>& columns) {
    const std::size_t k = columns.size();
    if (k < 3) throw ConfigError("nemenyi needs at least 3 columns, got " + std::to_string(k));
    const std::size_t n = columns[0].size();
    if (n == 0) throw ConfigError("nemenyi: columns are empty");
    for (const auto& c : columns)
        if (c.size() != n) throw ConfigError("nemenyi: columns have different lengths");

    std::vector<double> mean_rank(k, 0.0);
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) row[j] = columns[j][i];
        const auto ranks = average_ranks(row);
        for (std::size_t j = 0; j < k; ++j) mean_rank[j] += ranks[j] / static_cast<double>(n);
    }
    const double kd = static_cast<double>(k);
    const double scale = std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));
    std::vector<std::vector<double>> p(k, std::vector<double>(k, 1.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double q = std::abs(mean_rank[i] - mean_rank[j]) / scale * std::sqrt(2.0);
            p[i][j] = p[j][i] = studentized_range_sf(q, static_cast<int>(k));
        }
    }
    return p;
}

}  // namespace cmtr::eval
