#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wqed/rng.hpp"

using namespace wqed;

TEST_CASE("identical stream inputs reproduce identical draws") {
    RngStream a = seed_stream(0xDEADBEEF12345678ull, 42);
    RngStream b = seed_stream(0xDEADBEEF12345678ull, 42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct stream indices are uncorrelated") {
    RngStream a = seed_stream(7, 0);
    RngStream b = seed_stream(7, 1);
    const int n = 1000000;
    double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        double x = a.uniform01(), y = b.uniform01();
        sx += x; sy += y; sxy += x * y; sxx += x * x; syy += y * y;
    }
    double mx = sx / n, my = sy / n;
    double r = (sxy / n - mx * my) /
               std::sqrt((sxx / n - mx * mx) * (syy / n - my * my));
    REQUIRE(std::abs(r) < 0.01);
}

TEST_CASE("one draw per stream is uniform across streams") {
    const int n = 1000;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = seed_stream(99, i).uniform01();
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        double f = double(i + 1) / n;
        double f0 = double(i) / n;
        d = std::max({d, std::abs(f - xs[i]), std::abs(xs[i] - f0)});
    }
    // Kolmogorov-Smirnov p-value (asymptotic series)
    double lambda = (std::sqrt(double(n)) + 0.12 + 0.11 / std::sqrt(double(n))) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k)
        p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    REQUIRE(p > 0.001);
}

TEST_CASE("gaussian and wiener moments") {
    RngStream s = seed_stream(3, 12);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double g = s.gaussian();
        sum += g;
        sum2 += g * g;
    }
    REQUIRE(std::abs(sum / n) < 0.01);
    REQUIRE(std::abs(sum2 / n - 1.0) < 0.02);

    double dt = 0.1;
    cplx acc{0, 0};
    double mod2 = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        cplx w = s.wiener(dt);
        acc += w;
        mod2 += std::norm(w);
        sq += (w * w).real();
    }
    REQUIRE(std::abs(acc) / n < 0.01);
    REQUIRE(std::abs(mod2 / n - dt) < 0.01 * dt);  // E[dW dW*] = dt
    REQUIRE(std::abs(sq / n) < 0.01 * dt);         // E[dW dW] = 0
}
