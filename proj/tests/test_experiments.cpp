#include "ccrobust/experiments.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace ccrobust;
using ccrobust::testing::standard_normal_cdf;

namespace {

const NormSpec l2{NormOrder::L2};

GaussianMixture standard_normal(Eigen::Index d) {
    return GaussianMixture({1.0}, {Vector::Zero(d)}, {Eigen::MatrixXd::Identity(d, d)});
}

UncertaintySet origin_ball(Eigen::Index d, double r, NormSpec norm = l2) {
    return UncertaintySet(PointSet::Zero(1, d), r, norm);
}

Box square(double half) { return {Vector::Constant(2, -half), Vector::Constant(2, half)}; }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

ConsistencyConfig small_config(unsigned threads = 1) {
    ConsistencyConfig cfg{bundled_mixture(BundledMixture::ConcentratedDiffuse), 10,
                          CalibrationSpec::with_optimal_lambda(0.9, 0.05, 0.05)};
    cfg.trials = 12;
    cfg.coverage_samples = 5000;
    cfg.seed = 314;
    cfg.threads = threads;
    return cfg;
}

} // namespace

TEST_SUITE("coverage") {
    TEST_CASE("trivial sets") {
        const GaussianMixture mix = bundled_mixture(BundledMixture::FourModes);
        CHECK(estimate_coverage(UncertaintySet(PointSet::Zero(1, 2), 1e4, l2), mix, 10000, RandomStream(1, 1)) == 1.0);
        CHECK(estimate_coverage(UncertaintySet(PointSet::Zero(1, 2), 0.0, l2), mix, 10000, RandomStream(1, 1)) == 0.0);
        CHECK_THROWS_AS(estimate_coverage(origin_ball(2, 1.0), mix, 0, RandomStream(1, 1)), DomainError);
        CHECK_THROWS_AS(estimate_coverage(origin_ball(3, 1.0), mix, 10, RandomStream(1, 1)), DimensionError);
    }

    TEST_CASE("radial case at one million samples") {
        const double r = std::sqrt(2.0 * std::log(10.0));
        const double c = estimate_coverage(origin_ball(2, r), standard_normal(2), 1000000, RandomStream(7, 3));
        CHECK(std::fabs(c - 0.9) <= 0.001);
    }

    TEST_CASE("property: estimator is unbiased on the radial case") {
        const double r = std::sqrt(2.0 * std::log(10.0));
        const std::uint64_t n = 10000;
        double sum = 0.0;
        for (std::uint64_t t = 0; t < 100; ++t)
            sum += estimate_coverage(origin_ball(2, r), standard_normal(2), n, RandomStream(11, t));
        const double sigma = std::sqrt(0.9 * 0.1 / static_cast<double>(n));
        CHECK(std::fabs(sum / 100.0 - 0.9) <= 3.0 * sigma / std::sqrt(100.0));
    }
}

TEST_SUITE("consistency experiment") {
    TEST_CASE("single trial") {
        ConsistencyConfig cfg = small_config();
        cfg.trials = 1;
        const CoverageReport r = run_consistency_experiment(cfg);
        REQUIRE(r.coverage.size() == 1);
        CHECK(r.p05 == r.coverage[0]);
        CHECK(r.p50 == r.coverage[0]);
        CHECK(r.p95 == r.coverage[0]);
        CHECK(r.interval_width() == 0.0);
        CHECK(r.training_size == 4918);
        CHECK(r.shape_sample.rows() == 10);
    }

    TEST_CASE("report invariants") {
        const CoverageReport r = run_consistency_experiment(small_config());
        CHECK(r.coverage.size() == 12);
        CHECK(r.radii.size() == 12);
        CHECK(r.p05 <= r.p50);
        CHECK(r.p50 <= r.p95);
        CHECK(r.fraction_in_band >= 0.0);
        CHECK(r.fraction_in_band <= 1.0);
        for (double c : r.coverage) {
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
        }
        const double expected_in_band =
            static_cast<double>(std::count_if(r.coverage.begin(), r.coverage.end(),
                                              [](double c) { return c >= 0.9 && c <= 0.95; })) /
            12.0;
        CHECK(r.fraction_in_band == expected_in_band);
    }

    TEST_CASE("invalid configurations") {
        ConsistencyConfig cfg = small_config();
        cfg.trials = 0;
        CHECK_THROWS_AS(run_consistency_experiment(cfg), DomainError);
        cfg = small_config();
        cfg.coverage_samples = 0;
        CHECK_THROWS_AS(run_consistency_experiment(cfg), DomainError);
        cfg = small_config();
        cfg.m = 0;
        CHECK_THROWS_AS(run_consistency_experiment(cfg), DomainError);
    }

    TEST_CASE("reproducible and independent of the thread count") {
        const CoverageReport a = run_consistency_experiment(small_config(1));
        const CoverageReport b = run_consistency_experiment(small_config(1));
        const CoverageReport c = run_consistency_experiment(small_config(3));
        CHECK(a.coverage == b.coverage);
        CHECK(a.radii == b.radii);
        CHECK(a.coverage == c.coverage);
        CHECK(a.radii == c.radii);
        CHECK(a.shape_sample == c.shape_sample);
        ConsistencyConfig other = small_config();
        other.seed = 315;
        CHECK(run_consistency_experiment(other).coverage != a.coverage);
    }

    TEST_CASE("violation frequency matches the exact binomial tail") {
        // 1-D standard normal, one ball at 0: covered mass is 2 Phi(r) - 1 exactly
        const GaussianMixture gauss = standard_normal(1);
        const std::uint64_t n = 400;
        const int runs = 2000;
        int violations = 0;
        for (int k = 0; k < runs; ++k) {
            const PointSet training = sample(gauss, RandomStream(2718, static_cast<std::uint64_t>(k)), n);
            const double r = calibrate_radius_at_level(PointSet::Zero(1, 1), l2, training, 0.93).radius();
            if (2.0 * standard_normal_cdf(r) - 1.0 < 0.9)
                ++violations;
        }
        const double freq = static_cast<double>(violations) / runs;
        const double exact = exact_violation_probs(n, 0.9, 0.05, 0.93).below;
        const double se = std::sqrt(exact * (1 - exact) / runs);
        CHECK(exact == doctest::Approx(0.0234845).epsilon(1e-5));
        CHECK(std::fabs(freq - exact) <= 3.0 * se);
        CHECK(exact <= chernoff_violation_bounds(n, 0.9, 0.05, 0.93).below);
    }
}

TEST_SUITE("volume and raster") {
    TEST_CASE("volume of known shapes") {
        const Box box = square(1.5);
        CHECK(box.volume() == 9.0);
        const std::uint64_t n = 200000;
        const double disk = estimate_volume(origin_ball(2, 1.0), box, n, RandomStream(3, 3));
        // binomial standard error of the hit fraction, scaled by the box area
        const double p = std::numbers::pi / 9.0;
        CHECK(std::fabs(disk - std::numbers::pi) <= 4.0 * 9.0 * std::sqrt(p * (1 - p) / n));
        const double diamond = estimate_volume(origin_ball(2, 1.0, NormSpec(NormOrder::L1)), box, n, RandomStream(3, 4));
        CHECK(std::fabs(diamond - 2.0) <= 4.0 * 9.0 * std::sqrt((2.0 / 9) * (7.0 / 9) / n));
        CHECK(estimate_volume(origin_ball(2, 0.0), box, n, RandomStream(3, 5)) == 0.0);
        CHECK_THROWS_AS(estimate_volume(origin_ball(2, 1.0), box, 0, RandomStream(3, 5)), DomainError);
    }

    TEST_CASE("fit_box") {
        PointSet c(2, 2);
        c << 0, 0, 2, 1;
        const Box b = fit_box(UncertaintySet(c, 0.5, l2));
        CHECK(b.lower(0) == -1.5);
        CHECK(b.lower(1) == -1.5);
        CHECK(b.upper(0) == 3.5);
        CHECK(b.upper(1) == 2.5);
    }

    TEST_CASE("four by four raster of the unit disk") {
        // cell centers sit at +-0.5 and +-1.5; only the four inner ones are within 1
        const RasterGrid g = raster_set(origin_ball(2, 1.0), square(2.0), 4);
        for (std::size_t row = 0; row < 4; ++row) {
            for (std::size_t col = 0; col < 4; ++col) {
                const bool inner = (row == 1 || row == 2) && (col == 1 || col == 2);
                CHECK(g.at(row, col) == inner);
            }
        }
        CHECK(g.inside_fraction() == 0.25);
        CHECK(raster_set(origin_ball(2, 0.0), square(2.0), 4).inside_fraction() == 0.0);
    }

    TEST_CASE("row 0 is the top of the image") {
        PointSet c(1, 2);
        c << -1.5, 1.5;
        const RasterGrid g = raster_set(UncertaintySet(c, 0.1, l2), square(2.0), 4);
        CHECK(g.at(0, 0));
        CHECK(g.inside_fraction() == 1.0 / 16.0);
    }

    TEST_CASE("refinement approaches the true area ratio") {
        const double truth = std::numbers::pi / 16.0;
        double previous = 1.0;
        for (std::size_t res : {10, 40, 160}) {
            const double err = std::fabs(raster_set(origin_ball(2, 1.0), square(2.0), res).inside_fraction() - truth);
            CHECK(err < previous);
            previous = err;
        }
        CHECK(previous < 1e-3);
    }

    TEST_CASE("raster errors") {
        CHECK_THROWS_AS(raster_set(origin_ball(3, 1.0), square(2.0), 4), UnsupportedError);
        CHECK_THROWS_AS(raster_set(origin_ball(2, 1.0), square(2.0), 0), DomainError);
        CHECK_THROWS_AS(raster_set(origin_ball(2, 1.0), Box{Vector::Zero(2), Vector::Zero(2)}, 4), DomainError);
        CHECK_THROWS_AS(raster_density(standard_normal(1), square(2.0), 4), UnsupportedError);
    }

    TEST_CASE("density raster") {
        const DensityRaster d = raster_density(standard_normal(2), square(2.0), 4);
        REQUIRE(d.values.size() == 16);
        // inner cells at (+-0.5, +-0.5)
        CHECK(d.values[5] == doctest::Approx(std::exp(-0.25) / (2 * std::numbers::pi)).epsilon(1e-12));
        CHECK(d.values[0] == doctest::Approx(std::exp(-2.25) / (2 * std::numbers::pi)).epsilon(1e-12));
    }
}

TEST_SUITE("role of m") {
    TEST_CASE("entries, rasters and reproducibility") {
        RoleOfMConfig cfg{bundled_mixture(BundledMixture::FourModes),
                          CalibrationSpec::with_optimal_lambda(0.9, 0.05, 0.05)};
        cfg.m_values = {1, 10};
        cfg.seed = 5;
        cfg.volume_samples = 2000;
        cfg.raster_resolution = 16;
        const auto a = run_role_of_m_study(cfg);
        REQUIRE(a.size() == 2);
        CHECK(a[0].m == 1);
        CHECK(a[1].set.size() == 10);
        REQUIRE(a[1].raster.has_value());
        CHECK(a[1].raster->cells.size() == 256);
        const auto b = run_role_of_m_study(cfg);
        CHECK(a[1].radius() == b[1].radius());
        CHECK(a[1].volume == b[1].volume);
        CHECK(a[1].raster->cells == b[1].raster->cells);
        cfg.m_values = {};
        CHECK_THROWS_AS(run_role_of_m_study(cfg), DomainError);
    }

    TEST_CASE("isotropic mixture: volume barely depends on m") {
        RoleOfMConfig cfg{bundled_mixture(BundledMixture::DominantIsotropic),
                          CalibrationSpec::with_optimal_lambda(0.9, 0.05, 0.05)};
        cfg.m_values = {1, 1000};
        std::vector<double> v1, v1000;
        for (std::uint64_t rep = 0; rep < 20; ++rep) {
            cfg.seed = 900 + rep;
            const auto e = run_role_of_m_study(cfg);
            v1.push_back(e[0].volume);
            v1000.push_back(e[1].volume);
        }
        const double ratio = median(v1) / median(v1000);
        CHECK(ratio >= 0.5);
        CHECK(ratio <= 2.0);
    }
}

TEST_SUITE("output formats") {
    TEST_CASE("coverage CSV and summary") {
        const ConsistencyConfig cfg = small_config();
        const CoverageReport r = run_consistency_experiment(cfg);
        std::ostringstream csv;
        write_coverage_csv(csv, r);
        std::istringstream in(csv.str());
        std::string line;
        std::getline(in, line);
        CHECK(line == "trial_id,radius,coverage");
        int rows = 0;
        while (std::getline(in, line)) {
            const auto first = line.find(',');
            const auto second = line.find(',', first + 1);
            REQUIRE(second != std::string::npos);
            CHECK(std::stoi(line.substr(0, first)) == rows);
            // %.17g round-trips exactly
            CHECK(std::stod(line.substr(first + 1, second - first - 1)) == r.radii[static_cast<std::size_t>(rows)]);
            CHECK(std::stod(line.substr(second + 1)) == r.coverage[static_cast<std::size_t>(rows)]);
            ++rows;
        }
        CHECK(rows == 12);

        const nlohmann::json s = coverage_summary(r, cfg);
        CHECK(s.at("trials") == 12);
        CHECK(s.at("p05").get<double>() == r.p05);
        CHECK(s.at("training_size") == 4918);
    }

    TEST_CASE("PGM and grid CSV") {
        const RasterGrid g = raster_set(origin_ball(2, 1.0), square(2.0), 4);
        std::ostringstream pgm;
        write_pgm(pgm, g);
        const std::string bytes = pgm.str();
        const std::string header = "P5\n4 4\n255\n";
        REQUIRE(bytes.size() == header.size() + 16);
        CHECK(bytes.substr(0, header.size()) == header);
        CHECK(static_cast<unsigned char>(bytes[header.size() + 5]) == 255);
        CHECK(static_cast<unsigned char>(bytes[header.size()]) == 0);

        std::ostringstream grid;
        write_grid_csv(grid, g);
        CHECK(grid.str() == "0,0,0,0\n0,1,1,0\n0,1,1,0\n0,0,0,0\n");

        std::ostringstream dens;
        write_pgm(dens, raster_density(standard_normal(2), square(2.0), 4));
        const std::string d = dens.str();
        REQUIRE(d.size() == header.size() + 16);
        const auto px = d.substr(header.size());
        CHECK(static_cast<unsigned char>(*std::max_element(px.begin(), px.end(), [](char a, char b) {
                  return static_cast<unsigned char>(a) < static_cast<unsigned char>(b);
              })) == 255);
        CHECK(static_cast<unsigned char>(px[0]) == std::lround(255.0 * std::exp(-2.0)));
    }
}
