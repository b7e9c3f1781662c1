#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/config.hpp"
#include "wqed/model.hpp"
#include "wqed/rng.hpp"

namespace wqed {

inline bool theta_is_degenerate(double theta, double tol = 1e-9) {
    double k = std::round(theta / kPi);
    return k >= 1.0 && std::abs(theta - k * kPi) < tol;
}

// Disorder-averaged product-state optimum, exact for theta <= pi/2 where all
// cos(xi_i - xi_j) are nonnegative and a common phase is optimal.
inline double bound_exact_weak_disorder(double theta, int n, double gamma) {
    if (theta < 0.0 || theta > 0.5 * kPi + 1e-12)
        throw InvalidParameter("exact weak-disorder bound requires 0 <= theta <= pi/2");
    double f = theta < 1e-12 ? 1.0 : 2.0 / theta * std::sin(0.5 * theta);
    return 0.25 * gamma * n * double(n) * f * f;
}

// Positive-configuration estimate (gamma/4) sum_ij cos^2(xi_i - xi_j),
// diagonal included; contracts to (gamma N^2 / 8)(1 + |c|^2).
inline double bound_lower_estimate(const DisorderRealization& r, double gamma) {
    double n = r.n();
    return 0.125 * gamma * n * n * (1.0 + std::norm(r.cached_c));
}

inline double bound_lower_estimate_averaged(double theta, int n, double gamma, DisorderKind kind) {
    double nn = double(n) * n;
    if (kind == DisorderKind::UniformOffset) {
        double s = theta < 1e-12 ? 1.0 : std::sin(theta) / theta;
        return 0.125 * gamma * nn * (1.0 + s * s);
    }
    if (kind == DisorderKind::GaussianOffset)
        return 0.125 * gamma * nn * (1.0 + std::exp(-theta * theta));
    throw InvalidParameter("averaged lower estimate: unsupported disorder kind");
}

// Lieb-type bound (3/2) N Gamma_max - gamma N / 2.
inline double bound_loose(const DisorderRealization& r, double gamma) {
    double n = r.n();
    return 1.5 * n * r.gamma_plus - 0.5 * gamma * n;
}

inline double bound_loose_averaged(double theta, int n, double gamma) {
    double s = theta < 1e-12 ? 1.0 : std::sin(theta) / theta;
    return 0.75 * gamma * double(n) * n * (1.0 + s);
}

// Disorder-averaged largest channel rate, printed asymptotic forms.
inline double mean_gamma_plus(double theta, int n, double gamma, DisorderKind kind) {
    if (kind == DisorderKind::UniformOffset) {
        if (theta < 1e-12) return gamma * n;
        if (theta_is_degenerate(theta))
            return 0.5 * gamma * n * (1.0 + std::sqrt(kPi / 8.0) / std::sqrt(double(n)));
        return 0.5 * gamma * n * (1.0 + std::sin(theta) / theta);
    }
    if (kind == DisorderKind::GaussianOffset)
        return 0.5 * gamma * n * (1.0 + std::exp(-0.5 * theta * theta));
    throw InvalidParameter("mean_gamma_plus: unsupported disorder kind");
}

struct PhaseOptimum {
    double value = 0.0;
    std::vector<double> phases;
    int sweeps = 0;
    int restarts_used = 0;
};

namespace detail {

// One coordinate-ascent pass over f(phi) = (gamma/4)(|A|^2 + |B|^2) with
// A = sum e^{i phi} cos(xi), B = sum e^{i phi} sin(xi). Each update excludes
// the site's own contribution, so every move is an exact coordinate maximum
// and the objective never decreases.
inline double ascent_sweep(const std::vector<double>& cosxi, const std::vector<double>& sinxi,
                           std::vector<double>& phi, cplx& A, cplx& B) {
    double max_move = 0.0;
    const int n = int(phi.size());
    for (int j = 0; j < n; ++j) {
        cplx e = std::exp(cplx(0.0, phi[j]));
        cplx a_rest = A - e * cosxi[j];
        cplx b_rest = B - e * sinxi[j];
        cplx w = cosxi[j] * a_rest + sinxi[j] * b_rest;
        if (std::abs(w) < 1e-300) continue;
        double target = std::arg(w);
        double move = std::abs(wrap_angle(target - phi[j]));
        max_move = std::max(max_move, move);
        phi[j] = target;
        cplx en = std::exp(cplx(0.0, target));
        A = a_rest + en * cosxi[j];
        B = b_rest + en * sinxi[j];
    }
    return max_move;
}

inline double objective(const std::vector<double>& cosxi, const std::vector<double>& sinxi,
                        const std::vector<double>& phi, double gamma, cplx& A, cplx& B) {
    A = B = cplx{0, 0};
    for (std::size_t j = 0; j < phi.size(); ++j) {
        cplx e = std::exp(cplx(0.0, phi[j]));
        A += e * cosxi[j];
        B += e * sinxi[j];
    }
    return 0.25 * gamma * (std::norm(A) + std::norm(B));
}

}  // namespace detail

// Maximizes (gamma/4) sum_ij cos(xi_i - xi_j) cos(phi_i - phi_j) over the
// dipole azimuths. Seeds: the two location-locked patterns phi = +-xi, the
// common phase, and `restarts` random starts.
inline PhaseOptimum maximize_phase_configuration(const DisorderRealization& r, double gamma,
                                                 int restarts = 8, std::uint64_t seed = 17) {
    const int n = r.n();
    std::vector<double> cosxi(n), sinxi(n);
    for (int j = 0; j < n; ++j) {
        cosxi[j] = std::cos(r.xi[j]);
        sinxi[j] = std::sin(r.xi[j]);
    }
    PhaseOptimum best;
    RngStream stream(seed, kSharedRealizationStream + 2);

    auto refine = [&](std::vector<double> phi) {
        cplx A, B;
        detail::objective(cosxi, sinxi, phi, gamma, A, B);
        int sweeps = 0;
        for (; sweeps < 20000; ++sweeps) {
            double moved = detail::ascent_sweep(cosxi, sinxi, phi, A, B);
            if (moved < 1e-10) break;
        }
        double value = detail::objective(cosxi, sinxi, phi, gamma, A, B);
        if (value > best.value || best.phases.empty()) {
            best.value = value;
            best.phases = std::move(phi);
            best.sweeps = sweeps;
        }
    };

    refine(r.xi);                                      // phi = +xi
    std::vector<double> neg(n);
    for (int j = 0; j < n; ++j) neg[j] = -r.xi[j];
    refine(std::move(neg));                            // phi = -xi
    refine(std::vector<double>(n, 0.0));               // common phase
    for (int k = 0; k < restarts; ++k) {
        std::vector<double> phi(n);
        for (int j = 0; j < n; ++j) phi[j] = stream.uniform(-kPi, kPi);
        refine(std::move(phi));
        ++best.restarts_used;
    }
    return best;
}

struct BoundReport {
    int n_atoms = 0;
    double theta = 0.0;
    double r_exact_weak = 0.0;      // valid only when theta <= pi/2
    bool has_exact_weak = false;
    double r_lower_estimate = 0.0;  // per realization
    double r_lower_averaged = 0.0;
    double r_loose = 0.0;
    double r_variational = 0.0;
    std::vector<double> optimal_phases;
    int sweeps = 0;
    int restarts = 0;
};

inline BoundReport bound_report(const DisorderRealization& r, const SystemConfig& cfg,
                                int restarts = 8) {
    BoundReport rep;
    rep.n_atoms = r.n();
    rep.theta = cfg.theta;
    rep.has_exact_weak = cfg.theta <= 0.5 * kPi + 1e-12 &&
                         cfg.disorder_kind == DisorderKind::UniformOffset;
    if (rep.has_exact_weak)
        rep.r_exact_weak = bound_exact_weak_disorder(cfg.theta, r.n(), cfg.gamma);
    rep.r_lower_estimate = bound_lower_estimate(r, cfg.gamma);
    if (cfg.disorder_kind != DisorderKind::RegularLattice)
        rep.r_lower_averaged = bound_lower_estimate_averaged(cfg.theta, r.n(), cfg.gamma, cfg.disorder_kind);
    rep.r_loose = bound_loose(r, cfg.gamma);
    PhaseOptimum opt = maximize_phase_configuration(r, cfg.gamma, restarts);
    rep.r_variational = opt.value;
    rep.optimal_phases = std::move(opt.phases);
    rep.sweeps = opt.sweeps;
    rep.restarts = restarts;
    return rep;
}

// Least-squares fit of r0 + r1 N^{-p} with p = 1/2 on the degenerate branch
// (theta a positive multiple of pi) and p = 1 otherwise.
struct FiniteSizeFit {
    double r0 = 0.0, r1 = 0.0;
    double exponent = 1.0;
    double residual_norm = 0.0;
    std::string model;
};

inline FiniteSizeFit fit_with_exponent(const std::vector<std::pair<double, double>>& peaks,
                                       double p) {
    if (peaks.size() < 2) throw InvalidParameter("finite-size fit needs >= 2 points");
    double s00 = 0, s01 = 0, s11 = 0, b0 = 0, b1 = 0;
    for (auto [n, y] : peaks) {
        double x = std::pow(n, -p);
        s00 += 1.0;
        s01 += x;
        s11 += x * x;
        b0 += y;
        b1 += x * y;
    }
    double det = s00 * s11 - s01 * s01;
    if (std::abs(det) < 1e-14 * s00 * s11 || det == 0.0)
        throw InvalidParameter("finite-size fit is rank deficient (need distinct N)");
    FiniteSizeFit f;
    f.exponent = p;
    f.r0 = (s11 * b0 - s01 * b1) / det;
    f.r1 = (s00 * b1 - s01 * b0) / det;
    double ss = 0.0;
    for (auto [n, y] : peaks) {
        double e = y - (f.r0 + f.r1 * std::pow(n, -p));
        ss += e * e;
    }
    f.residual_norm = std::sqrt(ss);
    f.model = p == 0.5 ? "r0 + r1 N^-1/2" : "r0 + r1 N^-1";
    return f;
}

inline FiniteSizeFit fit_finite_size(const std::vector<std::pair<double, double>>& peaks,
                                     double theta) {
    if (peaks.size() < 4) throw InvalidParameter("finite-size fit needs >= 4 N values");
    return fit_with_exponent(peaks, theta_is_degenerate(theta) ? 0.5 : 1.0);
}

}  // namespace wqed
