#pragma once

#include "ccrobust/common.hpp"
#include "ccrobust/geometry.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ccrobust {

/**
 * Identifies one reproducible random sequence. The (seed, stream_id) pair is
 * hashed through std::seed_seq into a fresh Mersenne Twister, so equal pairs
 * replay the same sequence and distinct stream ids give unrelated sequences.
 * Each experiment trial owns its own stream.
 */
class RandomStream {
  public:
    using Engine = std::mt19937_64;

    constexpr RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_id_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Sibling stream with the same seed.
    constexpr RandomStream substream(std::uint64_t stream_id) const noexcept {
        return {seed_, stream_id};
    }

    /// Engine positioned at the start of the stream.
    Engine engine() const;

  private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
};

struct GaussianComponent {
    Vector mean;
    Eigen::MatrixXd covariance;
    /// Lower-triangular Cholesky factor of the covariance.
    Eigen::MatrixXd factor;
    /// -d/2 log(2 pi) - sum log diag(factor)
    double log_normalizer = 0.0;
};

/// Finite mixture of multivariate normals. Immutable after construction.
class GaussianMixture {
  public:
    /// Throws ModelError unless the weights are positive and sum to one
    /// (within 1e-12) and every covariance is symmetric positive definite.
    GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                    std::vector<Eigen::MatrixXd> covariances);

    Eigen::Index dimension() const noexcept { return dim_; }
    std::size_t size() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const GaussianComponent& component(std::size_t k) const { return components_.at(k); }

    double log_density(const Vector& u) const;
    double density(const Vector& u) const;

  private:
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    std::vector<GaussianComponent> components_;
    Eigen::Index dim_;

    friend class MixtureSampler;
};

/// Streams i.i.d. draws from a mixture: pick a component by weight, then
/// mean + L z with z standard normal.
class MixtureSampler {
  public:
    MixtureSampler(const GaussianMixture& mix, const RandomStream& stream);

    /// Writes one draw (dimension() doubles) to `out`.
    void draw(double* out);

  private:
    const GaussianMixture& mix_;
    RandomStream::Engine engine_;
    boost::random::normal_distribution<double> normal_;
    boost::random::uniform_01<double> uniform_;
    Vector z_;
};

/// n draws, one per row.
PointSet sample(const GaussianMixture& mix, const RandomStream& stream, std::size_t n);

double density(const GaussianMixture& mix, const Vector& u);

/**
 * Probability mass of the union of balls under the mixture, by nested
 * adaptive Gauss-Kronrod quadrature over one coordinate at a time with the
 * innermost coordinate done in closed form. Supports d <= 3.
 */
double true_ball_mass(const GaussianMixture& mix, const UncertaintySet& set);

enum class BundledMixture {
    DominantIsotropic,     ///< "a": one dominant isotropic mode
    ConcentratedDiffuse,   ///< "b": a concentrated mode plus diffuse mass
    FourModes,             ///< "c": four well-separated modes
};

/// Illustrative 2-D mixtures in the spirit of the three test beds; the
/// parameters are our own choices.
GaussianMixture bundled_mixture(BundledMixture which);

/// Accepts "a", "b", "c" or "isotropic", "concentrated", "four-mode".
BundledMixture parse_bundled_mixture(std::string_view name);

void to_json(nlohmann::json& j, const GaussianMixture& mix);
GaussianMixture gaussian_mixture_from_json(const nlohmann::json& j);

} // namespace ccrobust
