#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <map>

#include "fedsim/rng.hpp"
#include "fedsim/sampler.hpp"

using namespace fedsim;

namespace {

// chi-square critical values at significance 0.01
constexpr double kChi2Crit3 = 11.344867;
constexpr double kChi2Crit5 = 15.086272;
constexpr double kChi2Crit9 = 21.665994;

// Numerical oracle for the probability that A-Res with the given weights
// keeps exactly the pair {i, j} when K = 2. Key_l = U^(1/w_l), so the key
// CDF is F_l(k) = k^{w_l}. Conditioning on the smaller of the two winning
// keys being m:
//   P = integral over m of [f_i(m)(1 - F_j(m)) + f_j(m)(1 - F_i(m))]
//       * prod_{l != i,j} F_l(m) dm,
// integrated with composite Gauss-Legendre quadrature.
double pair_probability_by_integration(const std::vector<double>& w, std::size_t i,
                                       std::size_t j) {
    static const std::array<double, 5> nodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                             0.5384693101056831, 0.9061798459386640};
    static const std::array<double, 5> weights{0.2369268850561891, 0.4786286704993665,
                                               0.5688888888888889, 0.4786286704993665,
                                               0.2369268850561891};
    const auto integrand = [&](double m) {
        const auto f = [&](std::size_t idx) {
            return w[idx] * std::pow(m, w[idx] - 1.0);
        };
        const auto cdf = [&](std::size_t idx) { return std::pow(m, w[idx]); };
        double rest = 1.0;
        for (std::size_t l = 0; l < w.size(); ++l)
            if (l != i && l != j) rest *= cdf(l);
        return (f(i) * (1.0 - cdf(j)) + f(j) * (1.0 - cdf(i))) * rest;
    };
    const int panels = 400;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = static_cast<double>(p) / panels;
        const double b = static_cast<double>(p + 1) / panels;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t q = 0; q < nodes.size(); ++q)
            total += weights[q] * integrand(mid + half * nodes[q]) * half;
    }
    return total;
}

}  // namespace

TEST_CASE("sample_without_replacement basics") {
    Rng rng(101);
    SECTION("N == K selects everyone regardless of positive weights") {
        for (int trial = 0; trial < 20; ++trial) {
            const auto out = sample_without_replacement({0.1, 5.0, 2.3}, 3, rng);
            CHECK(out == std::vector<int>{0, 1, 2});
        }
    }
    SECTION("zero-weight entries never win") {
        for (int trial = 0; trial < 200; ++trial)
            CHECK(sample_without_replacement({1.0, 1.0, 0.0}, 2, rng) == std::vector<int>{0, 1});
    }
    SECTION("always exactly K distinct indices, sorted") {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> w(8);
            for (auto& x : w) x = rng.uniform_open();
            const int k = 1 + static_cast<int>(rng.below(8));
            const auto out = sample_without_replacement(w, k, rng);
            CHECK(static_cast<int>(out.size()) == k);
            for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i] > out[i - 1]);
        }
    }
    SECTION("fewer positive weights than K is infeasible") {
        CHECK_THROWS_AS(sample_without_replacement({1.0, 0.0, 0.0}, 2, rng),
                        std::invalid_argument);
        CHECK_THROWS_AS(sample_without_replacement({1.0, -0.5}, 1, rng), std::invalid_argument);
    }
    SECTION("same seed, same sequence") {
        Rng a(7), b(7);
        const std::vector<double> w{0.5, 1.5, 2.5, 0.1};
        for (int trial = 0; trial < 50; ++trial)
            CHECK(sample_without_replacement(w, 2, a) == sample_without_replacement(w, 2, b));
    }
}

TEST_CASE("K = 1 sampling is exactly proportional") {
    Rng rng(102);
    const std::vector<double> weights{2.0, 1.0, 1.0, 1.0};
    const int trials = 100000;
    const auto freq = inclusion_frequencies(weights, 1, trials, rng);
    double stat = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double expected = trials * weights[i] / 5.0;
        const double diff = freq[i] * trials - expected;
        stat += diff * diff / expected;
    }
    CHECK(stat < kChi2Crit3);
    CHECK(freq[0] == Catch::Approx(0.4).margin(0.01));
}

TEST_CASE("K = 2 set frequencies match the key-integration oracle") {
    // weights >= 1 keep the key densities bounded for the quadrature
    const std::vector<double> weights{2.0, 1.5, 1.0, 1.0};
    std::map<std::pair<int, int>, double> expected;
    double total_p = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) {
            const double p = pair_probability_by_integration(weights, i, j);
            expected[{static_cast<int>(i), static_cast<int>(j)}] = p;
            total_p += p;
        }
    CHECK(total_p == Catch::Approx(1.0).margin(1e-9));  // quadrature sanity

    Rng rng(103);
    const int trials = 100000;
    std::map<std::pair<int, int>, int> observed;
    for (int t = 0; t < trials; ++t) {
        const auto pick = sample_without_replacement(weights, 2, rng);
        observed[{pick[0], pick[1]}] += 1;
    }
    double stat = 0.0;
    for (const auto& [pair, p] : expected) {
        const double e = p * trials;
        const double diff = observed[pair] - e;
        stat += diff * diff / e;
    }
    CHECK(stat < kChi2Crit5);
}

TEST_CASE("inclusion_frequencies") {
    Rng rng(104);
    SECTION("uniform weights, K=2 of N=4: every index near 1/2") {
        const auto freq = inclusion_frequencies({1.0, 1.0, 1.0, 1.0}, 2, 50000, rng);
        for (double f : freq) CHECK(f == Catch::Approx(0.5).margin(0.01));
    }
    SECTION("zero-weight index frequency is exactly zero") {
        const auto freq = inclusion_frequencies({1.0, 0.0, 1.0, 1.0}, 2, 20000, rng);
        CHECK(freq[1] == 0.0);
    }
    SECTION("deterministic under a fixed seed") {
        Rng a(5), b(5);
        CHECK(inclusion_frequencies({1.0, 2.0, 3.0}, 2, 1000, a) ==
              inclusion_frequencies({1.0, 2.0, 3.0}, 2, 1000, b));
    }
}

TEST_CASE("sampler distribution properties") {
    SECTION("uniform weights over N=10, K=3: inclusion 3/10 each") {
        Rng rng(105);
        const std::vector<double> w(10, 1.0);
        const int trials = 100000;
        const auto freq = inclusion_frequencies(w, 3, trials, rng);
        double stat = 0.0;
        for (double f : freq) {
            const double e = 0.3 * trials;
            const double diff = f * trials - e;
            stat += diff * diff / e;
        }
        // inclusion counts are negatively correlated, so the multinomial
        // critical value is conservative here
        CHECK(stat < kChi2Crit9);
        for (double f : freq) CHECK(f == Catch::Approx(0.3).margin(0.01));
    }
    SECTION("raising one weight cannot lower its inclusion frequency") {
        Rng a(106), b(107);
        std::vector<double> w{1.0, 1.0, 1.0, 1.0, 1.0};
        const auto before = inclusion_frequencies(w, 2, 100000, a);
        w[3] = 2.5;
        const auto after = inclusion_frequencies(w, 2, 100000, b);
        CHECK(after[3] > before[3]);
    }
    SECTION("scaling all weights leaves the distribution unchanged") {
        Rng a(108), b(109);
        const std::vector<double> w{0.5, 1.0, 2.0, 4.0};
        std::vector<double> scaled;
        for (double x : w) scaled.push_back(137.0 * x);
        const auto f1 = inclusion_frequencies(w, 2, 100000, a);
        const auto f2 = inclusion_frequencies(scaled, 2, 100000, b);
        for (std::size_t i = 0; i < w.size(); ++i)
            CHECK(f1[i] == Catch::Approx(f2[i]).margin(0.012));  // ~4 sigma at 100k trials
    }
}
