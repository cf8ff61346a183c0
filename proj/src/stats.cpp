#include "msde/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "msde/core.hpp"

namespace msde::stats {

double pairwise_sum(std::span<const double> v) {
    constexpr std::size_t kBlock = 32;
    if (v.size() <= kBlock) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanSe mean_se(std::span<const double> v) {
    MeanSe out;
    out.n = v.size();
    if (v.empty()) return out;
    out.mean = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() < 2) return out;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    out.sd = std::sqrt(var);
    out.se = out.sd / std::sqrt(static_cast<double>(v.size()));
    return out;
}

MeanSe batch_means(std::span<const double> v, std::size_t batches) {
    MeanSe out;
    out.n = v.size();
    if (v.empty()) return out;
    out.mean = pairwise_sum(v) / static_cast<double>(v.size());
    batches = std::min(batches, v.size());
    if (batches < 2) return out;
    const std::size_t len = v.size() / batches;
    std::vector<double> means(batches);
    for (std::size_t b = 0; b < batches; ++b) {
        means[b] = pairwise_sum(v.subspan(b * len, len)) / static_cast<double>(len);
    }
    const MeanSe bm = mean_se(means);
    out.sd = bm.sd * std::sqrt(static_cast<double>(len));
    out.se = bm.se;
    return out;
}

double student_t_quantile(double p, double dof) {
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, p);
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    require_dim(y.size(), x.size(), "least_squares");
    if (x.size() < 3) throw ContractViolation("least_squares: need >= 3 points");
    const auto n = static_cast<double>(x.size());
    const double mx = pairwise_sum(x) / n;
    const double my = pairwise_sum(y) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw ContractViolation("least_squares: degenerate abscissae");
    LineFit fit;
    fit.n = x.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        rss += r * r;
    }
    const double dof = n - 2.0;
    fit.slope_se = std::sqrt(rss / dof / sxx);
    const double q = student_t_quantile(0.975, dof);
    fit.ci_low = fit.slope - q * fit.slope_se;
    fit.ci_high = fit.slope + q * fit.slope_se;
    return fit;
}

}  // namespace msde::stats
