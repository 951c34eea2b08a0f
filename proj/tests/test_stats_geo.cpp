#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "skybox/geo.hpp"
#include "skybox/rng.hpp"
#include "skybox/stats.hpp"

using namespace skybox;

namespace {

// Independent CoV reference: textbook two-pass formula.
double cov_reference(const std::vector<double>& xs) {
    double mu = 0;
    for (double x : xs) mu += x;
    mu /= xs.size();
    double var = 0;
    for (double x : xs) var += (x - mu) * (x - mu);
    return std::sqrt(var / xs.size()) / mu;
}

}  // namespace

TEST_CASE("cov of a constant series is zero") {
    std::vector<double> s{5, 5, 5, 5};
    CHECK(cov(s) == 0.0);
}

TEST_CASE("cov of [2,4] is one third") {
    std::vector<double> s{2, 4};
    // mean 3, population sigma 1
    CHECK(cov(s) == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(cov(s) == Catch::Approx(cov_reference(s)).epsilon(1e-15));
}

TEST_CASE("cov of an all-zero series is undefined") {
    std::vector<double> s{0, 0, 0};
    CHECK_THROWS_AS(cov(s), UndefinedCovError);
    CHECK_THROWS_AS(cov(std::vector<double>{}), UndefinedCovError);
}

TEST_CASE("cov is scale invariant") {
    std::mt19937_64 gen(7);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> s(8);
        for (double& v : s) v = uniform_in(gen, 0.1, 100.0);
        const double k = uniform_in(gen, 0.01, 1000.0);
        std::vector<double> scaled = s;
        for (double& v : scaled) v *= k;
        CHECK(cov(scaled) == Catch::Approx(cov(s)).epsilon(1e-12));
    }
}

TEST_CASE("cov of the sum of two anti-phase equal-amplitude traces is zero") {
    std::vector<double> sum;
    for (int t = 0; t < 16; ++t) {
        const double a = t % 2 == 0 ? 100.0 : 0.0;
        sum.push_back(a + (100.0 - a));
    }
    CHECK(cov(sum) == 0.0);
}

TEST_CASE("stable power over windows") {
    std::vector<double> s{10, 20, 5, 30};
    CHECK(stable_power(s, 4) == 5);
    CHECK(stable_power(s, 2) == 5);  // min of the last two: min(5, 30)
    std::vector<double> c{7, 7, 7};
    for (std::size_t w = 1; w <= 3; ++w) CHECK(stable_power(c, w) == 7);
    CHECK_THROWS_AS(stable_power(s, 5), DataError);
    CHECK_THROWS_AS(stable_power(s, 0), DataError);
}

TEST_CASE("distance of identical points is zero") {
    Location p{48.1, 11.6};
    CHECK(distance_miles(p, p) == 0.0);
}

TEST_CASE("quarter circumference along the equator") {
    // 2 pi R / 4 with R = 3958.8 mi.
    const double expected = std::numbers::pi * kEarthRadiusMiles / 2.0;
    CHECK(distance_miles({0, 0}, {0, 90}) == Catch::Approx(expected).epsilon(1e-12));
    CHECK(expected == Catch::Approx(6218.4).margin(0.05));
}

TEST_CASE("distance is symmetric and satisfies the triangle inequality") {
    std::mt19937_64 gen(11);
    auto random_loc = [&] {
        return Location{uniform_in(gen, -90, 90), uniform_in(gen, -180, 180)};
    };
    for (int rep = 0; rep < 100; ++rep) {
        const Location a = random_loc(), b = random_loc(), c = random_loc();
        CHECK(distance_miles(a, b) == distance_miles(b, a));
        CHECK(distance_miles(a, c) <= distance_miles(a, b) + distance_miles(b, c) + 1e-6);
        CHECK(distance_miles(a, b) >= 0.0);
    }
}

TEST_CASE("location validation") {
    CHECK_THROWS_AS((Location{91, 0}).validate(), DataError);
    CHECK_THROWS_AS((Location{0, 181}).validate(), DataError);
    CHECK_NOTHROW((Location{-90, 180}).validate());
}
