#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mim/common.hpp"

namespace mim::stats {

// Mergeable first/second-moment accumulator.
struct Accum {
    std::int64_t n = 0;
    double sum = 0.0;
    double sumsq = 0.0;
    double sum_x = 0.0;  // sum of the binning coordinate (log x)

    void add(double y, double logx = 0.0) {
        ++n;
        sum += y;
        sumsq += y * y;
        sum_x += logx;
    }
    Accum& operator+=(const Accum& o) {
        n += o.n;
        sum += o.sum;
        sumsq += o.sumsq;
        sum_x += o.sum_x;
        return *this;
    }
    double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
    double var() const {
        if (n < 2) return 0.0;
        const double m = mean();
        return std::max(0.0, (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    }
    double se() const { return n > 1 ? std::sqrt(var() / static_cast<double>(n)) : 0.0; }
    double mean_x() const { return n > 0 ? sum_x / static_cast<double>(n) : 0.0; }
};

inline std::vector<double> log_edges(double lo, double hi, int per_decade) {
    std::vector<double> e;
    const double step = 1.0 / per_decade;
    const double l0 = std::log10(lo), l1 = std::log10(hi);
    for (double l = l0; l < l1 + 0.5 * step; l += step) e.push_back(std::pow(10.0, l));
    e.back() = hi;
    return e;
}

// Log-binned conditional-mean curve over a positive coordinate.
struct BinnedCurve {
    std::vector<double> edges;  // size K+1, strictly increasing
    std::vector<Accum> bins;    // size K

    explicit BinnedCurve(std::vector<double> e = {}) : edges(std::move(e)) {
        if (!edges.empty()) bins.resize(edges.size() - 1);
    }

    int bin_of(double x) const {
        if (edges.empty() || x < edges.front() || x >= edges.back()) return -1;
        // bins are log-spaced but a linear scan is fine at this size
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        return static_cast<int>(it - edges.begin()) - 1;
    }

    void add(double x, double y) {
        const int b = bin_of(x);
        if (b >= 0) bins[static_cast<std::size_t>(b)].add(y, std::log(x));
    }

    BinnedCurve& merge(const BinnedCurve& o) {
        for (std::size_t i = 0; i < bins.size(); ++i) bins[i] += o.bins[i];
        return *this;
    }

    // Representative x of a bin: geometric mean of observations, falling
    // back to the bin's geometric center when empty.
    double x_of(std::size_t i) const {
        if (bins[i].n > 0) return std::exp(bins[i].mean_x());
        return std::sqrt(edges[i] * edges[i + 1]);
    }
};

// Ordinary least squares y = a + b x with slope standard error.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    std::int64_t n = 0;
};

inline LineFit ols_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    f.n = static_cast<std::int64_t>(x.size());
    if (x.size() < 3 || x.size() != y.size()) return f;
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (det <= 0) return f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    const double s2 = ss / (n - 2.0);
    f.slope_se = std::sqrt(s2 * n / det);
    return f;
}

inline double spearman_rho(std::vector<double> a, std::vector<double> b) {
    auto ranks = [](std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(ra.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

// Simple fixed-width histogram over [lo, hi).
struct Histogram {
    double lo, hi;
    std::vector<std::int64_t> counts;
    Histogram(double lo_, double hi_, std::size_t nbins) : lo(lo_), hi(hi_), counts(nbins, 0) {}
    void add(double x) {
        if (x < lo || x >= hi) return;
        const auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(counts.size()));
        counts[std::min(b, counts.size() - 1)]++;
    }
    // Center of the most populated bin.
    double mode() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < counts.size(); ++i)
            if (counts[i] > counts[best]) best = i;
        return lo + (static_cast<double>(best) + 0.5) * (hi - lo) / static_cast<double>(counts.size());
    }
};

}  // namespace mim::stats
