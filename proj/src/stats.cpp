#include "spanprof/stats.hpp"

#include "spanprof/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>

namespace spanprof {

void ExactSum::add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
        if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
        const double hi = x + y;
        const double lo = y - (hi - x);
        if (lo != 0.0) partials_[i++] = lo;
        x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
}

void ExactSum::add(const ExactSum& other) {
    for (double p : other.partials_) add(p);
}

// Round-half-even correction as in Python's math.fsum.
double ExactSum::value() const {
    if (partials_.empty()) return 0.0;
    auto n = partials_.size();
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials_[--n];
        hi = x + y;
        const double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        const double yr = x - hi;
        if (y == yr) hi = x;
    }
    return hi;
}

double exact_sum(std::span<const double> values) {
    ExactSum s;
    for (double v : values) s.add(v);
    return s.value();
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return exact_sum(values) / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    ExactSum ss;
    for (double v : values) ss.add((v - m) * (v - m));
    return std::sqrt(ss.value() / static_cast<double>(values.size() - 1));
}

double coefficient_of_variation(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) return 0.0;
    const double m = mean(values);
    if (m == 0.0) throw ZeroDenominator("coefficient of variation undefined for zero mean");
    return sample_stddev(values) / m;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

FenceResult tukey_fence(std::span<const double> values, double k) {
    FenceResult r;
    r.total = values.size();
    if (values.empty()) return r;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto at = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double q1 = at(0.25);
    const double q3 = at(0.75);
    const double iqr = q3 - q1;
    r.lower = q1 - k * iqr;
    r.upper = q3 + k * iqr;
    r.kept.reserve(values.size());
    for (double v : values) {
        if (v >= r.lower && v <= r.upper) r.kept.push_back(v);
    }
    return r;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DegenerateVariance("correlation inputs differ in length");
    if (xs.size() < 3) throw DegenerateVariance("correlation needs at least 3 pairs");
    const double mx = mean(xs);
    const double my = mean(ys);
    ExactSum sxy, sxx, syy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    if (sxx.value() == 0.0 || syy.value() == 0.0) throw DegenerateVariance("correlation input has zero variance");
    const double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
    return std::clamp(r, -1.0, 1.0);
}

ConfidenceInterval mean_confidence_interval(std::span<const double> values, double level) {
    ConfidenceInterval ci;
    ci.mean = mean(values);
    ci.lower = ci.upper = ci.mean;
    if (values.size() < 2) return ci;
    const boost::math::students_t dist(static_cast<double>(values.size() - 1));
    const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
    const double half = t * sample_stddev(values) / std::sqrt(static_cast<double>(values.size()));
    ci.lower = ci.mean - half;
    ci.upper = ci.mean + half;
    return ci;
}

}  // namespace spanprof
