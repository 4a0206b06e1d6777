#include "ccrobust/experiments.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

namespace ccrobust {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_2d(const Box& box, const char* what) {
    if (box.lower.size() != 2 || box.upper.size() != 2)
        throw UnsupportedError(std::string(what) + " supports 2-D boxes only");
    if (!(box.upper.array() > box.lower.array()).all())
        throw DomainError(std::string(what) + ": box must have positive extent");
}

Vector cell_center(const Box& box, std::size_t resolution, std::size_t row, std::size_t col) {
    const double res = static_cast<double>(resolution);
    const double w = (box.upper(0) - box.lower(0)) / res;
    const double h = (box.upper(1) - box.lower(1)) / res;
    Vector c(2);
    c(0) = box.lower(0) + (static_cast<double>(col) + 0.5) * w;
    c(1) = box.upper(1) - (static_cast<double>(row) + 0.5) * h;
    return c;
}

void write_pgm_bytes(std::ostream& out, std::size_t resolution, const std::vector<std::uint8_t>& px) {
    out << "P5\n" << resolution << ' ' << resolution << "\n255\n";
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

} // namespace

double estimate_coverage(const UncertaintySet& set, const GaussianMixture& mix,
                         std::uint64_t n_samples, const RandomStream& stream) {
    if (n_samples == 0)
        throw DomainError("coverage estimate needs at least one sample");
    if (set.dimension() != mix.dimension())
        throw DimensionError("uncertainty set and mixture dimensions disagree");
    MixtureSampler sampler(mix, stream);
    Vector u(mix.dimension());
    const NormOrder order = set.norm().order();
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < n_samples; ++i) {
        sampler.draw(u.data());
        if (detail::within_union(set.centers(), order, set.radius(), u.data()))
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n_samples);
}

CoverageReport run_consistency_experiment(const ConsistencyConfig& cfg) {
    if (cfg.trials < 1)
        throw DomainError("at least one trial is required");
    if (cfg.coverage_samples < 1)
        throw DomainError("at least one coverage sample is required");
    if (cfg.m < 1)
        throw DomainError("the shape sample needs at least one point");

    const RandomStream root(cfg.seed, 0);
    CoverageReport report;
    report.shape_sample = sample(cfg.mixture, root, static_cast<std::size_t>(cfg.m));
    report.training_size = cfg.spec.n_min();
    report.coverage.assign(cfg.trials, 0.0);
    report.radii.assign(cfg.trials, 0.0);

    auto run_trial = [&](std::size_t k) {
        const PointSet training =
            sample(cfg.mixture, root.substream(2 * k + 1), static_cast<std::size_t>(cfg.spec.n_min()));
        const CalibrationResult calibrated =
            calibrate_radius(report.shape_sample, cfg.norm, training, cfg.spec);
        report.radii[k] = calibrated.set.radius();
        report.coverage[k] = estimate_coverage(calibrated.set, cfg.mixture, cfg.coverage_samples,
                                               root.substream(2 * k + 2));
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.trials)));
    if (workers == 1) {
        for (std::size_t k = 0; k < cfg.trials; ++k)
            run_trial(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::atomic<bool> failed{false};
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t k = next++; k < cfg.trials && !failed; k = next++) {
                        try {
                            run_trial(k);
                        } catch (...) {
                            if (!failed.exchange(true))
                                failure = std::current_exception();
                        }
                    }
                });
            }
        }
        if (failure)
            std::rethrow_exception(failure);
    }

    const TrainingScores cov(report.coverage);
    report.p05 = empirical_quantile(cov, 0.05);
    report.p50 = empirical_quantile(cov, 0.50);
    report.p95 = empirical_quantile(cov, 0.95);
    const double lo = cfg.spec.alpha();
    const double hi = cfg.spec.alpha() + cfg.spec.epsilon();
    const auto in_band = std::count_if(report.coverage.begin(), report.coverage.end(),
                                       [&](double c) { return c >= lo && c <= hi; });
    report.fraction_in_band = static_cast<double>(in_band) / static_cast<double>(cfg.trials);
    return report;
}

double Box::volume() const {
    if (lower.size() != upper.size() || lower.size() == 0)
        throw DimensionError("box corners must share a positive dimension");
    return (upper - lower).cwiseMax(0.0).prod();
}

Box fit_box(const UncertaintySet& set, double margin) {
    const Vector pad = Vector::Constant(set.dimension(), margin * set.radius());
    return {set.centers().colwise().minCoeff().transpose() - pad,
            set.centers().colwise().maxCoeff().transpose() + pad};
}

double estimate_volume(const UncertaintySet& set, const Box& box, std::uint64_t samples,
                       const RandomStream& stream) {
    if (samples == 0)
        throw DomainError("volume estimate needs at least one sample");
    if (box.lower.size() != set.dimension() || box.upper.size() != set.dimension())
        throw DimensionError("box and uncertainty set dimensions disagree");
    const double vol = box.volume();
    if (set.radius() == 0.0 || vol == 0.0)
        return 0.0;
    auto engine = stream.engine();
    boost::random::uniform_01<double> uniform;
    const Vector width = box.upper - box.lower;
    Vector u(set.dimension());
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < samples; ++i) {
        for (Eigen::Index k = 0; k < u.size(); ++k)
            u(k) = box.lower(k) + width(k) * uniform(engine);
        if (detail::within_union(set.centers(), set.norm().order(), set.radius(), u.data()))
            ++hits;
    }
    return vol * static_cast<double>(hits) / static_cast<double>(samples);
}

double RasterGrid::inside_fraction() const {
    if (cells.empty())
        return 0.0;
    const auto inside = std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; });
    return static_cast<double>(inside) / static_cast<double>(cells.size());
}

RasterGrid raster_set(const UncertaintySet& set, const Box& box, std::size_t resolution) {
    if (set.dimension() != 2)
        throw UnsupportedError("rasterization supports 2-D sets only");
    require_2d(box, "raster_set");
    if (resolution == 0)
        throw DomainError("raster resolution must be positive");
    RasterGrid grid{resolution, box, std::vector<std::uint8_t>(resolution * resolution, 0)};
    for (std::size_t row = 0; row < resolution; ++row) {
        for (std::size_t col = 0; col < resolution; ++col)
            grid.cells[row * resolution + col] = set.contains(cell_center(box, resolution, row, col)) ? 1 : 0;
    }
    return grid;
}

DensityRaster raster_density(const GaussianMixture& mix, const Box& box, std::size_t resolution) {
    if (mix.dimension() != 2)
        throw UnsupportedError("density rasterization supports 2-D mixtures only");
    require_2d(box, "raster_density");
    if (resolution == 0)
        throw DomainError("raster resolution must be positive");
    DensityRaster out{resolution, box, std::vector<double>(resolution * resolution, 0.0)};
    for (std::size_t row = 0; row < resolution; ++row) {
        for (std::size_t col = 0; col < resolution; ++col)
            out.values[row * resolution + col] = mix.density(cell_center(box, resolution, row, col));
    }
    return out;
}

std::vector<RoleOfMEntry> run_role_of_m_study(const RoleOfMConfig& cfg) {
    if (cfg.m_values.empty())
        throw DomainError("role-of-m study needs at least one m value");
    const RandomStream root(cfg.seed, 0);
    std::vector<RoleOfMEntry> entries;
    for (std::size_t j = 0; j < cfg.m_values.size(); ++j) {
        const Eigen::Index m = cfg.m_values[j];
        if (m < 1)
            throw DomainError("m must be positive");
        const PointSet shape = sample(cfg.mixture, root.substream(3 * j), static_cast<std::size_t>(m));
        const PointSet training = sample(cfg.mixture, root.substream(3 * j + 1),
                                         static_cast<std::size_t>(cfg.spec.n_min()));
        UncertaintySet set = calibrate_radius(shape, cfg.norm, training, cfg.spec).set;
        Box box = fit_box(set);
        const double volume = estimate_volume(set, box, cfg.volume_samples, root.substream(3 * j + 2));
        std::optional<RasterGrid> raster;
        if (cfg.raster_resolution > 0 && set.dimension() == 2 && set.radius() > 0.0)
            raster = raster_set(set, box, cfg.raster_resolution);
        entries.push_back({m, std::move(set), std::move(box), volume, std::move(raster)});
    }
    return entries;
}

void write_coverage_csv(std::ostream& out, const CoverageReport& report) {
    out << "trial_id,radius,coverage\n";
    for (std::size_t k = 0; k < report.coverage.size(); ++k)
        out << k << ',' << format_double(report.radii[k]) << ',' << format_double(report.coverage[k]) << '\n';
}

nlohmann::json coverage_summary(const CoverageReport& report, const ConsistencyConfig& cfg) {
    return {{"trials", report.coverage.size()},
            {"training_size", report.training_size},
            {"coverage_samples", cfg.coverage_samples},
            {"m", cfg.m},
            {"alpha", cfg.spec.alpha()},
            {"epsilon", cfg.spec.epsilon()},
            {"alpha_n", cfg.spec.alpha_n()},
            {"p05", report.p05},
            {"p50", report.p50},
            {"p95", report.p95},
            {"interval_width", report.interval_width()},
            {"fraction_in_band", report.fraction_in_band}};
}

void write_pgm(std::ostream& out, const RasterGrid& grid) {
    std::vector<std::uint8_t> px(grid.cells.size());
    std::transform(grid.cells.begin(), grid.cells.end(), px.begin(),
                   [](std::uint8_t c) { return static_cast<std::uint8_t>(c ? 255 : 0); });
    write_pgm_bytes(out, grid.resolution, px);
}

void write_pgm(std::ostream& out, const DensityRaster& raster) {
    const double top = raster.values.empty() ? 0.0 : *std::max_element(raster.values.begin(), raster.values.end());
    std::vector<std::uint8_t> px(raster.values.size(), 0);
    if (top > 0.0) {
        std::transform(raster.values.begin(), raster.values.end(), px.begin(), [top](double v) {
            return static_cast<std::uint8_t>(std::lround(std::clamp(v / top, 0.0, 1.0) * 255.0));
        });
    }
    write_pgm_bytes(out, raster.resolution, px);
}

void write_grid_csv(std::ostream& out, const RasterGrid& grid) {
    for (std::size_t row = 0; row < grid.resolution; ++row) {
        for (std::size_t col = 0; col < grid.resolution; ++col) {
            if (col > 0)
                out << ',';
            out << (grid.at(row, col) ? '1' : '0');
        }
        out << '\n';
    }
}

} // namespace ccrobust
