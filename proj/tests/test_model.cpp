#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "support/oracles.hpp"
#include "wqed/model.hpp"

using namespace wqed;
using Catch::Approx;

namespace {

SystemConfig base_config(int n, double theta, DisorderKind kind = DisorderKind::UniformOffset) {
    SystemConfig cfg;
    cfg.n_atoms = n;
    cfg.theta = theta;
    cfg.disorder_kind = kind;
    return cfg;
}

}  // namespace

TEST_CASE("zero-width disorder gives the ordered array") {
    auto cfg = base_config(12, 0.0);
    RngStream s = seed_stream(1, 0);
    auto r = sample_uniform_disorder(cfg, s);
    for (double x : r.xi) REQUIRE(x == 0.0);
    REQUIRE(r.cached_c.real() == Approx(1.0));
    REQUIRE(r.gamma_plus == Approx(12.0));
    REQUIRE(r.gamma_minus == Approx(0.0).margin(1e-12));
}

TEST_CASE("uniform disorder sample moments match closed forms") {
    const int n = 100000;
    SECTION("theta = 2 pi: mean of cos 2 xi near sin(2pi)/(2pi) = 0") {
        auto cfg = base_config(n, 2.0 * kPi);
        RngStream s = seed_stream(2, 0);
        auto r = sample_uniform_disorder(cfg, s);
        double mean = 0;
        for (double x : r.xi) mean += std::cos(2.0 * x);
        mean /= n;
        double se = std::sqrt(0.5 / n);  // var = 1/2 at multiples of pi
        REQUIRE(std::abs(mean) < 3.0 * se);
    }
    SECTION("theta = pi: variance of cos 2 xi is 1/2") {
        auto cfg = base_config(n, kPi);
        RngStream s = seed_stream(3, 0);
        auto r = sample_uniform_disorder(cfg, s);
        double m1 = 0, m2 = 0;
        for (double x : r.xi) {
            double c = std::cos(2.0 * x);
            m1 += c;
            m2 += c * c;
        }
        m1 /= n;
        m2 /= n;
        REQUIRE(m2 - m1 * m1 == Approx(0.5).epsilon(0.01));
    }
}

TEST_CASE("gaussian disorder sample moments") {
    const int n = 100000;
    SECTION("theta = pi: mean cos 2 xi near exp(-theta^2/2)") {
        auto cfg = base_config(n, kPi, DisorderKind::GaussianOffset);
        RngStream s = seed_stream(4, 0);
        auto r = sample_gaussian_disorder(cfg, s);
        double mean = 0;
        for (double x : r.xi) mean += std::cos(2.0 * x);
        mean /= n;
        double target = std::exp(-0.5 * kPi * kPi);
        double se = std::sqrt(0.5 / n);
        REQUIRE(std::abs(mean - target) < 3.0 * se);
    }
    SECTION("theta = pi/2: mean cos 2 xi near exp(-pi^2/8) ~ 0.291") {
        auto cfg = base_config(n, 0.5 * kPi, DisorderKind::GaussianOffset);
        RngStream s = seed_stream(5, 0);
        auto r = sample_gaussian_disorder(cfg, s);
        double mean = 0;
        for (double x : r.xi) mean += std::cos(2.0 * x);
        mean /= n;
        double target = std::exp(-kPi * kPi / 8.0);
        REQUIRE(mean == Approx(target).margin(3.0 * std::sqrt(0.5 / n)));
        REQUIRE(target == Approx(0.291).margin(5e-4));
    }
}

TEST_CASE("regular lattice phases") {
    SECTION("k0d = 2 pi is the ordered point") {
        auto cfg = base_config(8, 0.0, DisorderKind::RegularLattice);
        cfg.k0d = 2.0 * kPi;
        RngStream s = seed_stream(6, 0);
        auto r = regular_lattice(cfg, s);
        for (double x : r.xi) REQUIRE(std::abs(x) < 1e-12);
        REQUIRE(std::abs(r.cached_c - cplx{1.0, 0.0}) < 1e-12);
    }
    SECTION("k0d = pi alternates 0, pi with c = 1") {
        auto cfg = base_config(4, 0.0, DisorderKind::RegularLattice);
        cfg.k0d = kPi;
        RngStream s = seed_stream(6, 1);
        auto r = regular_lattice(cfg, s);
        REQUIRE(std::abs(r.cached_c - cplx{1.0, 0.0}) < 1e-12);
    }
    SECTION("k0d = pi/2, N = 4 has c = 0") {
        auto cfg = base_config(4, 0.0, DisorderKind::RegularLattice);
        cfg.k0d = 0.5 * kPi;
        RngStream s = seed_stream(6, 2);
        auto r = regular_lattice(cfg, s);
        REQUIRE(std::abs(r.cached_c) < 1e-12);
    }
}

TEST_CASE("overlap and channel rates") {
    SECTION("antipodal pair") {
        REQUIRE(std::abs(overlap_c({0.0, 0.5 * kPi})) < 1e-15);
    }
    SECTION("c = 1 gives (gamma N, 0); c = 0 halves") {
        auto [gp0, gm0] = channel_rates(1.0, 10, cplx{1.0, 0.0});
        REQUIRE(gp0 == Approx(10.0));
        REQUIRE(gm0 == Approx(0.0).margin(1e-14));
        auto [gp1, gm1] = channel_rates(1.0, 10, cplx{0.0, 0.0});
        REQUIRE(gp1 == Approx(5.0));
        REQUIRE(gm1 == Approx(5.0));
    }
    SECTION("sum rule Gamma+ + Gamma- = gamma N on random draws") {
        auto cfg = base_config(37, 2.7);
        RngStream s = seed_stream(7, 0);
        for (int k = 0; k < 50; ++k) {
            auto r = sample_uniform_disorder(cfg, s);
            REQUIRE(std::abs(r.cached_c) <= 1.0 + 1e-12);
            REQUIRE(r.gamma_plus + r.gamma_minus == Approx(37.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("closed-form disorder moments against Monte Carlo") {
    RngStream s = seed_stream(8, 0);
    for (double theta : {0.7, kPi, 2.0 * kPi}) {
        const long n = 1000000;
        double sa = 0, saa = 0, sb = 0, sbb = 0;
        for (long i = 0; i < n; ++i) {
            double xi = s.uniform(-0.5 * theta, 0.5 * theta);
            double a = std::cos(2 * xi), b = std::sin(2 * xi);
            sa += a; saa += a * a; sb += b; sbb += b * b;
        }
        auto m = disorder_moments(theta, DisorderKind::UniformOffset);
        double se_a = std::sqrt(m.var_a / n), se_b = std::sqrt(m.var_b / n);
        REQUIRE(std::abs(sa / n - m.mu_a) < 3.5 * se_a);
        REQUIRE(std::abs(sb / n - m.mu_b) < 3.5 * se_b);
        REQUIRE(saa / n - (sa / n) * (sa / n) == Approx(m.var_a).margin(0.01));
        REQUIRE(sbb / n - (sb / n) * (sb / n) == Approx(m.var_b).margin(0.01));
    }
    SECTION("theta -> 0 limit is analytic") {
        auto m = disorder_moments(0.0, DisorderKind::UniformOffset);
        REQUIRE(m.mu_a == 1.0);
        REQUIRE(m.var_a == 0.0);
        REQUIRE(m.var_b == 0.0);
    }
    SECTION("theta = pi uniform has var = 1/2 on both quadratures") {
        auto m = disorder_moments(kPi, DisorderKind::UniformOffset);
        REQUIRE(m.var_a == Approx(0.5).epsilon(1e-12));
        REQUIRE(m.var_b == Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("prefix kernel equals the direct double sum") {
    RngStream s = seed_stream(9, 0);
    for (int n : {2, 3, 17, 50}) {
        for (double theta : {0.0, 1.2, 2.0 * kPi}) {
            auto cfg = base_config(n, theta);
            auto r = sample_uniform_disorder(cfg, s);
            KernelWorkspace kernel(r);
            std::vector<cplx> x(n), out(n), ref;
            for (int j = 0; j < n; ++j) x[j] = {s.uniform(-1, 1), s.uniform(-1, 1)};
            for (int sign : {+1, -1}) {
                kernel.apply(sign, x.data(), out.data());
                testing::brute_kernel_apply(r, sign, x, ref);
                for (int j = 0; j < n; ++j)
                    REQUIRE(std::abs(out[j] - ref[j]) < 1e-10 * (1.0 + std::abs(ref[j])));
            }
            // sin kernel drops the diagonal
            std::vector<cplx> sout(n), scratch(n);
            kernel.apply_sin(x.data(), sout.data(), scratch.data());
            for (int j = 0; j < n; ++j) {
                cplx ref_s{0, 0};
                for (int l = 0; l < n; ++l)
                    if (l != j) ref_s += std::sin(std::abs(r.k0z[j] - r.k0z[l])) * x[l];
                REQUIRE(std::abs(sout[j] - ref_s) < 1e-10 * (1.0 + std::abs(ref_s)));
            }
        }
    }
}

TEST_CASE("ordered point kernels: sin vanishes, cos is one") {
    auto cfg = base_config(9, 0.0);
    RngStream s = seed_stream(10, 0);
    auto r = sample_uniform_disorder(cfg, s);
    KernelWorkspace kernel(r);
    REQUIRE(kernel.zero_phase());
    std::vector<cplx> x(9, cplx{1.0, 0.0}), out(9), scratch(9);
    kernel.apply_sin(x.data(), out.data(), scratch.data());
    for (auto& v : out) REQUIRE(std::abs(v) < 1e-14);
    kernel.apply(+1, x.data(), out.data());
    for (auto& v : out) REQUIRE(std::abs(v - cplx{9.0, 0.0}) < 1e-12);
}

TEST_CASE("gaussian offsets can reorder atoms; sorted kernel still exact") {
    auto cfg = base_config(12, 2.5 * kPi, DisorderKind::GaussianOffset);
    RngStream s = seed_stream(11, 0);
    auto r = sample_gaussian_disorder(cfg, s);
    bool reordered = false;
    for (int k = 0; k + 1 < r.n(); ++k)
        if (r.z_order[k + 1] < r.z_order[k]) reordered = true;
    INFO("reordered = " << reordered);
    KernelWorkspace kernel(r);
    std::vector<cplx> x(12), out(12), ref;
    for (int j = 0; j < 12; ++j) x[j] = {s.uniform(-1, 1), s.uniform(-1, 1)};
    kernel.apply(+1, x.data(), out.data());
    testing::brute_kernel_apply(r, +1, x, ref);
    for (int j = 0; j < 12; ++j) REQUIRE(std::abs(out[j] - ref[j]) < 1e-9);
}

TEST_CASE("sampling is a pure function of the stream state") {
    auto cfg = base_config(25, 1.9);
    cfg.delta_omega = 2.0;
    RngStream s1 = seed_stream(12, 5);
    RngStream s2 = seed_stream(12, 5);
    auto a = sample_uniform_disorder(cfg, s1);
    auto b = sample_uniform_disorder(cfg, s2);
    REQUIRE(a.xi == b.xi);
    REQUIRE(a.delta_omega_j == b.delta_omega_j);
    REQUIRE(a.z_order == b.z_order);
}

TEST_CASE("frequency offsets have width delta_omega / 2") {
    SystemConfig cfg = base_config(100000, 0.0);
    cfg.delta_omega = 2.0;
    RngStream s = seed_stream(13, 0);
    auto dw = sample_frequency_offsets(cfg, s);
    double m1 = 0, m2 = 0;
    for (double w : dw) { m1 += w; m2 += w * w; }
    m1 /= dw.size();
    m2 /= dw.size();
    REQUIRE(std::abs(m1) < 0.01);
    REQUIRE(std::sqrt(m2 - m1 * m1) == Approx(1.0).epsilon(0.01));
}
