#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "linc/error.hpp"
#include "linc/metrics.hpp"
#include "linc/rng.hpp"

using namespace linc;

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t c) {
    std::vector<double> w(c);
    double total = 0.0;
    for (auto& x : w) total += x = -std::log(rng.uniform_open());
    for (auto& x : w) x /= total;
    return w;
}

}  // namespace

TEST_CASE("shannon entropy") {
    CHECK(shannon_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0));
    CHECK(shannon_entropy(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
    CHECK(shannon_entropy(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.5));

    Rng rng(1);
    for (int t = 0; t < 500; ++t) {
        const std::size_t c = 2 + rng.below(10);
        const double h = shannon_entropy(random_simplex(rng, c));
        CHECK(h >= 0.0);
        CHECK(h <= std::log2(static_cast<double>(c)) + 1e-12);
    }
}

TEST_CASE("entropy histogram") {
    const auto onehot = ProbVector::from_weights({1.0, 0.0});
    const auto uniform = ProbVector::from_weights({1.0, 1.0});

    SUBCASE("one-hot mass in the first bin") {
        const std::vector<ProbVector> ps(5, onehot);
        const auto h = entropy_histogram(ps, 4);
        CHECK(h.counts == std::vector<std::size_t>{5, 0, 0, 0});
        CHECK(h.mean_entropy == 0.0);
    }
    SUBCASE("uniform mass in the last bin") {
        const std::vector<ProbVector> ps(3, ProbVector::from_weights({1, 1, 1, 1}));
        const auto h = entropy_histogram(ps, 4);
        CHECK(h.counts == std::vector<std::size_t>{0, 0, 0, 3});
        CHECK(h.mean_entropy == doctest::Approx(2.0));
        CHECK(h.bin_edges.back() == doctest::Approx(2.0));
    }
    SUBCASE("mixed") {
        const std::vector<ProbVector> ps = {onehot, uniform};
        const auto h = entropy_histogram(ps, 2);
        CHECK(h.counts == std::vector<std::size_t>{1, 1});
        CHECK(h.mean_entropy == doctest::Approx(0.5));
        CHECK(h.bin_edges == std::vector<double>{0.0, 0.5, 1.0});
    }
    SUBCASE("empty input") {
        const auto h = entropy_histogram({}, 3, 2);
        CHECK(h.counts == std::vector<std::size_t>{0, 0, 0});
        CHECK(h.bin_edges.size() == 4);
    }
    SUBCASE("invariants") {
        Rng rng(2);
        std::vector<ProbVector> ps;
        for (int i = 0; i < 300; ++i) ps.push_back(ProbVector::from_weights(random_simplex(rng, 3)));
        const auto h = entropy_histogram(ps, 7);
        std::size_t total = 0;
        for (auto n : h.counts) total += n;
        CHECK(total == ps.size());
        for (std::size_t i = 1; i < h.bin_edges.size(); ++i) CHECK(h.bin_edges[i] > h.bin_edges[i - 1]);
        auto shuffled = ps;
        rng.shuffle(std::span(shuffled));
        CHECK(entropy_histogram(shuffled, 7).counts == h.counts);
        CHECK_THROWS_AS(entropy_histogram(ps, 0), ConfigError);
    }
    SUBCASE("csv export") {
        const std::vector<ProbVector> ps = {onehot, uniform};
        CHECK(histogram_csv(entropy_histogram(ps, 2)) == "bin_left_edge,count\n0,1\n0.5,1\n");
    }
}

TEST_CASE("expected calibration error") {
    SUBCASE("hand fixture") {
        const auto r = expected_calibration_error(std::vector<double>{0.9, 0.8, 0.7, 0.6},
                                                  {true, false, true, true}, 1);
        CHECK(r.per_bin[0].accuracy == 0.75);
        CHECK(r.per_bin[0].confidence == 0.75);
        CHECK(r.ece == 0.0);
    }
    SUBCASE("overconfident half") {
        std::vector<bool> correct(10);
        for (std::size_t i = 0; i < 10; ++i) correct[i] = i % 2 == 0;
        const auto r = expected_calibration_error(std::vector<double>(10, 1.0), correct, 10);
        CHECK(r.ece == doctest::Approx(0.5));
        CHECK(r.per_bin[9].count == 10);
    }
    SUBCASE("perfectly confident and right") {
        CHECK(expected_calibration_error(std::vector<double>(4, 1.0), std::vector<bool>(4, true)).ece == 0.0);
    }
    SUBCASE("bin boundaries") {
        CHECK(confidence_bin(0.0, 10) == 0);
        CHECK(confidence_bin(0.1, 10) == 1);
        CHECK(confidence_bin(0.0999, 10) == 0);
        CHECK(confidence_bin(1.0, 10) == 9);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(expected_calibration_error(std::vector<double>{0.5}, {true, false}), ShapeError);
        CHECK_THROWS(expected_calibration_error(std::vector<double>{1.5}, {true}));
        CHECK_THROWS(expected_calibration_error(std::vector<double>{0.5}, {true}, 0));
    }
    SUBCASE("recomputable from per-bin entries and bounded") {
        Rng rng(3);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 1 + rng.below(2000);
            const std::size_t m = 1 + rng.below(50);
            std::vector<double> conf(n);
            std::vector<bool> correct(n);
            for (std::size_t i = 0; i < n; ++i) {
                conf[i] = rng.uniform_open();
                correct[i] = rng.below(2) == 0;
            }
            const auto r = expected_calibration_error(conf, correct, m);
            double again = 0.0;
            std::size_t total = 0;
            for (const auto& b : r.per_bin) {
                total += b.count;
                again += static_cast<double>(b.count) / static_cast<double>(n) *
                         std::abs(b.accuracy - b.confidence);
            }
            CHECK(total == n);
            CHECK(std::abs(again - r.ece) <= 1e-12);
            CHECK(r.ece >= 0.0);
            CHECK(r.ece <= 1.0);
        }
    }
}

TEST_CASE("accuracy") {
    CHECK(accuracy(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}) == 1.0);
    CHECK(accuracy(std::vector<int>{1, 0}, std::vector<int>{0, 1}) == 0.0);
    CHECK(accuracy(std::vector<int>{0, 1, 1, 1}, std::vector<int>{0, 1, 1, 0}) == 0.75);
    CHECK_THROWS_AS(accuracy(std::vector<int>{0}, std::vector<int>{0, 1}), ShapeError);
}

TEST_CASE("mean and population std") {
    CHECK(mean_std(std::vector<double>{64.5}) == std::pair<double, double>{64.5, 0.0});
    CHECK(mean_std(std::vector<double>{1, 1, 1}) == std::pair<double, double>{1.0, 0.0});
    CHECK(mean_std(std::vector<double>{0, 1}) == std::pair<double, double>{0.5, 0.5});
    CHECK_THROWS(mean_std(std::vector<double>{}));

    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v(1 + rng.below(20));
        for (auto& x : v) x = rng.normal();
        const double shift = 5 * rng.normal();
        auto moved = v;
        for (auto& x : moved) x += shift;
        const auto [m, s] = mean_std(v);
        const auto [m2, s2] = mean_std(moved);
        CHECK(m2 == doctest::Approx(m + shift));
        CHECK(s2 == doctest::Approx(s).epsilon(1e-9));
    }
}
