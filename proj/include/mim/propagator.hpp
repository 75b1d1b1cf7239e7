#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mim/common.hpp"
#include "mim/impact.hpp"

namespace mim::prop {

// Non-linear propagator: the kernel acts on sqrt(q_j) per child, not on
// q_j. A child executed at t_j still moves the price at t > t_j by
//   G0 * sqrt(q_j) * sqrt(dt) / (t - t_j + s0)^beta,
// with s0 = i0 * dt tying the lag regularizer to the child spacing.
struct PropagatorParams {
    double G0 = 1.0;      // impact units per sqrt(shares)
    double s0 = 0.0;      // seconds
    double beta = 0.5;
    double dt = 1.0;      // child spacing (seconds)

    double i0() const { return dt > 0.0 ? s0 / dt : 0.0; }
    bool valid() const { return G0 > 0.0 && s0 >= 0.0 && beta > 0.0 && beta < 1.0 && dt > 0.0; }
};

// 2 G0 sqrt(q) (sqrt(i+i0) - sqrt(i0)); continuum evaluation of the
// uniform-spacing discrete sum, square-root kernel only.
inline double closed_form_partial_impact(double q, double i, const PropagatorParams& p) {
    if (p.beta != 0.5) throw UnsupportedBeta("closed form requires beta = 1/2");
    if (i <= 0.0) return 0.0;
    const double i0 = p.i0();
    return 2.0 * p.G0 * std::sqrt(q) * (std::sqrt(i + i0) - std::sqrt(i0));
}

// Exact discrete sum over child times; the brute-force oracle for the
// closed form and the generative law of the simulator.
inline double discrete_sum_impact(const std::vector<double>& q, const std::vector<double>& t,
                                  double t_eval, const PropagatorParams& p) {
    double acc = 0.0;
    const double dt_pow = std::pow(p.dt, p.beta);
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (t[j] > t_eval) break;
        acc += std::sqrt(q[j]) * dt_pow * std::pow(t_eval - t[j] + p.s0, -p.beta);
    }
    return p.G0 * acc;
}

// Kernel of one past order, evaluated at lag tau >= 0.
inline double kernel(double q, double tau, const PropagatorParams& p) {
    return p.G0 * std::sqrt(q) * std::pow(p.dt, p.beta) * std::pow(tau + p.s0, -p.beta);
}

// Eq-3-style prediction: I(Q, N) = 2 G0 sqrt(Q) (sqrt(1+i0/N) - sqrt(i0/N)).
// The bracket rises from ~0.31 at N=2 toward 1 as N grows (i0 = 4).
inline double total_impact_bracket(double N, double i0) {
    return std::sqrt(1.0 + i0 / N) - std::sqrt(i0 / N);
}

inline double total_impact_prediction(double Q, double N, const PropagatorParams& p) {
    return 2.0 * p.G0 * std::sqrt(Q) * total_impact_bracket(N, p.i0());
}

// Maps a fitted child profile onto propagator parameters: G0 = A/2,
// s0 = i0 * dt.
inline PropagatorParams calibrate(const impact::ChildProfile& profile, double mean_dt_s) {
    if (!profile.fit || !profile.fit->converged)
        throw FitUnavailable("calibrate: child profile has no converged fit");
    PropagatorParams p;
    p.G0 = profile.fit->A / 2.0;
    p.s0 = profile.fit->i0 * mean_dt_s;
    p.beta = profile.fit->beta;
    p.dt = mean_dt_s;
    return p;
}

}  // namespace mim::prop
