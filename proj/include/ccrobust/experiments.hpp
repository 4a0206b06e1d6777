#pragma once

#include "ccrobust/calibration.hpp"
#include "ccrobust/common.hpp"
#include "ccrobust/distmodel.hpp"
#include "ccrobust/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace ccrobust {

/// Fraction of n_samples draws from `mix` that land in `set`.
double estimate_coverage(const UncertaintySet& set, const GaussianMixture& mix,
                         std::uint64_t n_samples, const RandomStream& stream);

struct ConsistencyConfig {
    GaussianMixture mixture;
    Eigen::Index m = 10;
    CalibrationSpec spec;
    std::size_t trials = 200;
    std::uint64_t coverage_samples = 100000;
    std::uint64_t seed = 0;
    NormSpec norm{NormOrder::L2};
    /// Worker threads for the trial loop; results do not depend on it.
    unsigned threads = 1;
};

struct CoverageReport {
    std::vector<double> coverage;
    std::vector<double> radii;
    double p05 = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
    /// Fraction of trials with coverage in [alpha, alpha + epsilon].
    double fraction_in_band = 0.0;
    std::uint64_t training_size = 0;
    PointSet shape_sample;

    double interval_width() const noexcept { return p95 - p05; }
};

/**
 * Mass-consistency study. One shape sample of m points is drawn first and
 * shared by every trial; each trial then draws a fresh training sample of
 * spec.n_min() points, calibrates the radius and estimates the covered mass
 * with coverage_samples fresh draws.
 *
 * Stream ids: 0 for the shape sample, 2k + 1 for trial k's training sample
 * and 2k + 2 for its coverage sample.
 */
CoverageReport run_consistency_experiment(const ConsistencyConfig& cfg);

/// Axis-aligned box.
struct Box {
    Vector lower;
    Vector upper;

    double volume() const;
};

/// Bounding box of the centers, widened by margin * radius on every side.
Box fit_box(const UncertaintySet& set, double margin = 3.0);

/// Box volume times the fraction of uniform draws from the box inside the set.
double estimate_volume(const UncertaintySet& set, const Box& box, std::uint64_t samples,
                       const RandomStream& stream);

/// Inside/outside flags of a 2-D set, row-major. Row 0 is the top of the
/// image (largest second coordinate), column 0 the smallest first coordinate.
struct RasterGrid {
    std::size_t resolution = 0;
    Box box;
    std::vector<std::uint8_t> cells;

    bool at(std::size_t row, std::size_t col) const { return cells[row * resolution + col] != 0; }
    double inside_fraction() const;
};

/// Evaluates member(set, cell center) on a resolution x resolution grid.
RasterGrid raster_set(const UncertaintySet& set, const Box& box, std::size_t resolution);

struct DensityRaster {
    std::size_t resolution = 0;
    Box box;
    std::vector<double> values;
};

DensityRaster raster_density(const GaussianMixture& mix, const Box& box, std::size_t resolution);

struct RoleOfMConfig {
    GaussianMixture mixture;
    CalibrationSpec spec;
    std::vector<Eigen::Index> m_values{1, 10, 100, 1000};
    std::uint64_t seed = 0;
    NormSpec norm{NormOrder::L2};
    std::uint64_t volume_samples = 50000;
    /// 0 skips rasterization.
    std::size_t raster_resolution = 0;
};

struct RoleOfMEntry {
    Eigen::Index m = 0;
    UncertaintySet set;
    Box box;
    double volume = 0.0;
    std::optional<RasterGrid> raster;

    double radius() const noexcept { return set.radius(); }
};

/**
 * For each m: shape sample of m points, fresh training sample of n_min
 * points, calibrated set, Monte-Carlo volume over fit_box(set) and an
 * optional raster over the same box.
 *
 * Stream ids for the j-th m value: 3j (shape), 3j + 1 (training),
 * 3j + 2 (volume).
 */
std::vector<RoleOfMEntry> run_role_of_m_study(const RoleOfMConfig& cfg);

/// trial_id,radius,coverage
void write_coverage_csv(std::ostream& out, const CoverageReport& report);
nlohmann::json coverage_summary(const CoverageReport& report, const ConsistencyConfig& cfg);

/// Binary PGM (P5), 255 = inside.
void write_pgm(std::ostream& out, const RasterGrid& grid);
/// Binary PGM (P5), value / max scaled linearly to [0, 255].
void write_pgm(std::ostream& out, const DensityRaster& raster);
/// One line per raster row of comma-separated 0/1 flags.
void write_grid_csv(std::ostream& out, const RasterGrid& grid);

} // namespace ccrobust
