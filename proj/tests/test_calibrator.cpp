#include <doctest.h>

#include <cmath>
#include <set>

#include "linc/calibrator.hpp"
#include "linc/error.hpp"
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

CalibrationParams random_params(Rng& rng, std::size_t c, double scale) {
    CalibrationParams p{Matrix(c), std::vector<double>(c), InitMode::random};
    for (auto& a : p.A.data()) a = scale * rng.normal();
    for (auto& b : p.b) b = scale * rng.normal();
    return p;
}

std::size_t argmax(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

CalibrationParams make(std::vector<double> a, std::vector<double> b) {
    CalibrationParams p{Matrix(b.size()), std::move(b), InitMode::zero};
    std::copy(a.begin(), a.end(), p.A.data().begin());
    return p;
}

}  // namespace

TEST_CASE("initializations") {
    const auto z = init_zero(2);
    CHECK(z.A == Matrix(2));
    CHECK(z.b == std::vector<double>{0, 0});
    CHECK(z.init_mode == InitMode::zero);
    CHECK_THROWS(init_zero(1));

    SUBCASE("zero init predicts uniformly with loss ln C") {
        for (std::size_t c = 2; c <= 6; ++c) {
            Rng rng(c);
            const auto p = random_simplex(rng, c);
            const auto q = calibrated_probs(init_zero(c), p);
            for (double v : q.values()) CHECK(v == doctest::Approx(1.0 / static_cast<double>(c)));
            CHECK(sample_loss(init_zero(c), p, c - 1) == doctest::Approx(std::log(static_cast<double>(c))));
            CHECK(predict(init_zero(c), p) == 0);
        }
    }
    SUBCASE("random init") {
        CHECK(init_random(2, 5, 0.01) == init_random(2, 5, 0.01));
        std::set<std::vector<double>> distinct;
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            const auto r = init_random(2, seed, 0.01);
            for (double a : r.A.data()) CHECK(std::abs(a) < 0.1);
            for (double b : r.b) CHECK(std::abs(b) < 0.1);
            distinct.insert(std::vector<double>(r.A.data().begin(), r.A.data().end()));
        }
        CHECK(distinct.size() == 8);
        CHECK_THROWS(init_random(2, 0, 0.0));
    }
    SUBCASE("ConC init") {
        const auto c = init_conc(ProbVector::from_weights({0.8, 0.2}));
        CHECK(c.A(0, 0) == doctest::Approx(1.25));
        CHECK(c.A(1, 1) == doctest::Approx(5.0));
        CHECK(c.A(0, 1) == 0.0);
        CHECK(c.b == std::vector<double>{0, 0});
        CHECK(c.init_mode == InitMode::conc);

        const auto uniform = init_conc(ProbVector::from_weights({1, 1, 1}));
        CHECK(uniform.A(1, 1) == doctest::Approx(3.0));

        const auto clamped = init_conc(ProbVector::from_weights({1.0, 0.0}));
        CHECK(clamped.A(1, 1) == doctest::Approx(1e10));

        Rng rng(2);
        for (int t = 0; t < 200; ++t) {
            const auto pcf = random_simplex(rng, 2 + rng.below(5));
            const auto z = apply_affine(init_conc(ProbVector::from_weights(pcf)), pcf);
            for (double v : z) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
            const auto p = random_simplex(rng, pcf.size());
            CHECK(predict(init_conc(ProbVector::from_weights(std::vector<double>(pcf.size(), 1.0))), p) == argmax(p));
        }
    }
    SUBCASE("NoC baseline") {
        const auto noc = baseline_noc(2);
        CHECK(noc.A == Matrix::identity(2));
        CHECK(predict(noc, std::vector<double>{0.9, 0.1}) == 0);
        Rng rng(4);
        for (int t = 0; t < 1000; ++t) {
            const auto p = random_simplex(rng, 2 + rng.below(8));
            CHECK(predict(baseline_noc(p.size()), p) == argmax(p));
        }
        const auto q = calibrated_probs(noc, std::vector<double>{0.9, 0.1});
        CHECK(q[0] != doctest::Approx(0.9));
        CHECK(q[0] == doctest::Approx(std::exp(0.9) / (std::exp(0.9) + std::exp(0.1))));
    }
}

TEST_CASE("apply_affine and calibrated_probs") {
    const std::vector<double> p = {0.3, 0.7};
    CHECK(apply_affine(baseline_noc(2), p) == p);
    CHECK(apply_affine(make({0, 0, 0, 0}, {3, 1}), p) == std::vector<double>{3, 1});
    const auto z = apply_affine(make({1.25, 0, 0, 5}, {0, 0}), std::vector<double>{0.727, 0.273});
    CHECK(z[0] == doctest::Approx(0.90875));
    CHECK(z[1] == doctest::Approx(1.365));
    CHECK_THROWS_AS(apply_affine(baseline_noc(2), std::vector<double>{1.0}), ShapeError);

    CHECK(softmax(std::vector<double>{0, 0}) == std::vector<double>{0.5, 0.5});
    const auto s = softmax(std::vector<double>{std::log(3.0), 0});
    CHECK(s[0] == doctest::Approx(0.75));
    CHECK(s[1] == doctest::Approx(0.25));
    const auto big = softmax(std::vector<double>{1000, 999});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1 / (1 + std::exp(-1.0))));

    Rng rng(12);
    for (int t = 0; t < 200; ++t) {
        const std::size_t c = 2 + rng.below(6);
        std::vector<double> zz(c);
        for (auto& v : zz) v = 5 * rng.normal();
        const auto a = softmax(zz);
        double sum = 0.0;
        for (double v : a) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        const double shift = 10 * rng.normal();
        auto shifted = zz;
        for (auto& v : shifted) v += shift;
        const auto b = softmax(shifted);
        for (std::size_t i = 0; i < c; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("cross_entropy") {
    CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 0) == 0.0);
    CHECK(cross_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2) == doctest::Approx(std::log(4.0)));
    CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, 1) == doctest::Approx(0.6931471805599453));
    CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("gradients") {
    SUBCASE("zero init hand values") {
        const auto g = grad(init_zero(2), std::vector<double>{0.7, 0.3}, 0);
        CHECK(g.db[0] == doctest::Approx(-0.5));
        CHECK(g.db[1] == doctest::Approx(0.5));
        CHECK(g.dA(0, 0) == doctest::Approx(-0.35));
        CHECK(g.dA(0, 1) == doctest::Approx(-0.15));
        CHECK(g.dA(1, 0) == doctest::Approx(0.35));
        CHECK(g.dA(1, 1) == doctest::Approx(0.15));
    }
    SUBCASE("perfect prediction has zero gradient") {
        const auto g = grad(make({0, 0, 0, 0}, {1000, 0}), std::vector<double>{0.5, 0.5}, 0);
        for (double v : g.dA.data()) CHECK(v == doctest::Approx(0.0));
        for (double v : g.db) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("central differences") {
        Rng rng(21);
        const double h = 1e-6;
        for (int t = 0; t < 100; ++t) {
            const std::size_t c = 2 + rng.below(5);
            auto params = random_params(rng, c, 1.0);
            const auto p = random_simplex(rng, c);
            const auto y = rng.below(c);
            const auto g = grad(params, p, y);
            double diff = 0.0, norm = 0.0;
            auto probe = [&](double& slot, double analytic) {
                const double saved = slot;
                slot = saved + h;
                const double up = sample_loss(params, p, y);
                slot = saved - h;
                const double down = sample_loss(params, p, y);
                slot = saved;
                const double numeric = (up - down) / (2 * h);
                diff += (numeric - analytic) * (numeric - analytic);
                norm += analytic * analytic;
            };
            for (std::size_t k = 0; k < c * c; ++k) probe(params.A.data()[k], g.dA.data()[k]);
            for (std::size_t k = 0; k < c; ++k) probe(params.b[k], g.db[k]);
            CHECK(std::sqrt(diff) <= 1e-5 * std::max(std::sqrt(norm), 1e-12));
        }
    }
}

TEST_CASE("predict") {
    const auto conc = make({1.25, 0, 0, 5}, {0, 0});
    CHECK(predict(conc, std::vector<double>{0.727, 0.273}) == 1);
    CHECK(predict(init_zero(3), std::vector<double>{0.1, 0.2, 0.7}) == 0);

    Rng rng(31);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t c = 2 + rng.below(6);
        const auto params = random_params(rng, c, 2.0);
        const auto p = random_simplex(rng, c);
        CHECK(predict(params, p) == argmax(apply_affine(params, p)));

        std::vector<double> diag(c);
        for (auto& d : diag) d = 0.01 + 5 * rng.uniform_open();
        CalibrationParams dp{Matrix::diagonal(diag), std::vector<double>(c, 0.0), InitMode::conc};
        std::vector<double> scaled(c);
        for (std::size_t i = 0; i < c; ++i) scaled[i] = diag[i] * p[i];
        CHECK(predict(dp, p) == argmax(scaled));
    }
}

TEST_CASE("train_linc") {
    const std::vector<CalibrationSample> one = {{ProbVector::from_weights({0.7, 0.3}), 0}};
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.n_validation = 1;
    cfg.step_size = 1.0;

    SUBCASE("single step") {
        const auto [params, trace] = train_linc(one, cfg);
        CHECK(params.b[0] == doctest::Approx(0.5));
        CHECK(params.b[1] == doctest::Approx(-0.5));
        CHECK(params.A(0, 0) == doctest::Approx(0.35));
        CHECK(params.A(1, 1) == doctest::Approx(-0.15));
        REQUIRE(trace.epoch_mean_loss.size() == 1);
        CHECK(trace.epoch_mean_loss[0] == doctest::Approx(std::log(2.0)));
        CHECK(trace.backend_calls == 0);
        CHECK(trace.final_params == params);
    }
    SUBCASE("zero step size leaves the initialization") {
        cfg.step_size = 0.0;
        cfg.epochs = 5;
        cfg.init_mode = InitMode::random;
        const auto [params, trace] = train_linc(one, cfg);
        CHECK(params == initial_params(2, cfg));
        for (double l : trace.epoch_mean_loss) CHECK(l == trace.epoch_mean_loss[0]);
    }
    SUBCASE("epochs carry parameters over") {
        Rng rng(44);
        std::vector<CalibrationSample> val;
        for (int i = 0; i < 10; ++i) {
            const auto y = static_cast<int>(rng.below(3));
            auto w = random_simplex(rng, 3);
            w[static_cast<std::size_t>(y)] += 0.5;
            val.push_back({ProbVector::from_weights(w), y});
        }
        TrainConfig a;
        a.n_validation = 10;
        a.step_size = 0.5;
        a.epochs = 3;
        const auto three = train_linc(val, a).first;
        a.epochs = 1;
        auto chained = train_linc(val, a).first;
        for (int e = 0; e < 2; ++e) chained = train_linc(val, a, &chained).first;
        CHECK(chained.A == three.A);
        CHECK(chained.b == three.b);

        a.epochs = 50;
        const auto trace = train_linc(val, a).second;
        CHECK(trace.epoch_mean_loss.back() < trace.epoch_mean_loss.front());
        CHECK(train_linc(val, a).first == train_linc(val, a).first);

        a.shuffle_each_epoch = true;
        a.seed = 9;
        CHECK(train_linc(val, a).first == train_linc(val, a).first);
        const auto shuffled = train_linc(val, a).first;
        a.shuffle_each_epoch = false;
        CHECK_FALSE(train_linc(val, a).first == shuffled);
    }
    SUBCASE("divergence") {
        const std::vector<CalibrationSample> bad = {{ProbVector::from_normalized({0.5, 0.5}), 0}};
        CalibrationParams huge{Matrix::diagonal(std::vector<double>{1.7e308, 1.7e308}), {1.7e308, 0.0}, InitMode::zero};
        try {
            train_linc(bad, cfg, &huge);
            FAIL("expected DivergenceError");
        } catch (const DivergenceError& e) {
            CHECK(e.epoch() == 1);
            CHECK(e.index() == 0);
            CHECK(e.step_size() == 1.0);
        }
    }
    SUBCASE("linear decay") {
        TrainConfig d;
        d.step_size = 1.0;
        d.epochs = 11;
        d.lr_schedule = LrSchedule::linear_decay;
        d.lr_floor_fraction = 0.1;
        CHECK(d.step_size_at(0) == doctest::Approx(1.0));
        CHECK(d.step_size_at(10) == doctest::Approx(0.1));
        CHECK(d.step_size_at(5) == doctest::Approx(0.55));
        d.lr_schedule = LrSchedule::constant;
        CHECK(d.step_size_at(10) == 1.0);
    }
    SUBCASE("label and shape checks") {
        const std::vector<CalibrationSample> wrong = {{ProbVector::from_weights({0.5, 0.5}), 2}};
        CHECK_THROWS(train_linc(wrong, cfg));
        CHECK_THROWS(train_linc({}, cfg));
    }
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.step_size = 1e-6;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.step_size = 21;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.step_size = 20;
    CHECK_NOTHROW(cfg.validate());
    cfg.step_size = 0;
    CHECK_NOTHROW(cfg.validate());
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epochs = 1;
    cfg.n_validation = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("full-batch descent never increases the loss") {
    Rng rng(55);
    for (int fixture = 0; fixture < 10; ++fixture) {
        const std::size_t c = 2 + rng.below(5);
        const std::size_t n = 1 + rng.below(100);
        std::vector<std::vector<double>> ps;
        std::vector<std::size_t> ys;
        for (std::size_t i = 0; i < n; ++i) {
            ps.push_back(random_simplex(rng, c));
            ys.push_back(rng.below(c));
        }
        auto params = random_params(rng, c, 1.0);
        auto loss = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += sample_loss(params, ps[i], ys[i]);
            return s;
        };
        double prev = loss();
        for (int it = 0; it < 200; ++it) {
            std::vector<double> gA(c * c, 0.0), gb(c, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto g = grad(params, ps[i], ys[i]);
                for (std::size_t k = 0; k < c * c; ++k) gA[k] += g.dA.data()[k] / n;
                for (std::size_t k = 0; k < c; ++k) gb[k] += g.db[k] / n;
            }
            for (std::size_t k = 0; k < c * c; ++k) params.A.data()[k] -= 1e-3 * gA[k];
            for (std::size_t k = 0; k < c; ++k) params.b[k] -= 1e-3 * gb[k];
            const double cur = loss();
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("params JSON round-trip is exact") {
    Rng rng(66);
    for (int t = 0; t < 50; ++t) {
        const auto params = random_params(rng, 2 + rng.below(5), 3.0);
        TrainConfig cfg;
        cfg.step_size = 0.1 * rng.uniform_open() + 1e-3;
        const auto j = params_to_json(params, &cfg);
        CHECK(j.at("C") == params.num_classes());
        const auto back = params_from_json(nlohmann::json::parse(j.dump()));
        CHECK(back == params);
        CHECK(train_config_from_json(j.at("train_config")).step_size == cfg.step_size);
    }
    CHECK_THROWS_AS(params_from_json(nlohmann::json{{"C", 2}, {"A", {{1, 0}}}, {"b", {0, 0}}}), ShapeError);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"step", 1}}), ConfigError);
}
