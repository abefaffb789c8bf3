#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "morsekit/grid.hpp"

namespace morsekit {

struct SamplePair {
    std::vector<double> input;  // initial projected weights
    std::vector<double> output; // final projected weights
};

struct KernelConfig {
    double jitter = 1e-6;            // noise variance relative to signal variance
    int max_jitter_escalations = 6;  // x10 per step on Cholesky failure
    std::optional<std::vector<double>> length_scales; // override per-axis medians
};

struct VarianceConfig {
    double z = 2.0;                 // standard-deviation multiplier
    std::size_t samples_per_cell = 0; // 0: default 2^d + 3^d capped at 64
    double epsilon = 1e-9;          // relative box inflation per axis

    void validate() const;
};

struct Prediction {
    std::vector<double> mean;
    std::vector<double> std;
};

/// One independent squared-exponential GP per output coordinate, sharing the
/// training inputs and per-axis length scales. Hyperparameters are fixed
/// deterministically from the data: length scale = median pairwise distance
/// per axis, signal variance = output variance, noise = jitter * signal.
class GpSurrogate {
public:
    static GpSurrogate fit(const std::vector<SamplePair>& pairs, const KernelConfig& config = {});

    std::size_t input_dim() const { return static_cast<std::size_t>(inputs_.cols()); }
    std::size_t output_dim() const { return prior_mean_.size(); }
    std::size_t training_size() const { return static_cast<std::size_t>(inputs_.rows()); }

    Prediction predict(const std::vector<double>& x) const;

    /// Bounding box of per-sample intervals [mean - z*std, mean + z*std] over
    /// a deterministic point set in the cell (corners plus a regular interior
    /// lattice), inflated by epsilon * extent per axis.
    Box image_box(const Box& cell, const VarianceConfig& cfg = {}) const;

    /// Box -> Box adapter over image_box, for build_outer_map.
    std::function<Box(const Box&)> box_image_fn(const VarianceConfig& cfg = {}) const;
    /// Posterior-mean point map, for validate_outer.
    std::function<std::vector<double>(const std::vector<double>&)> mean_map() const;

    const std::vector<double>& length_scales() const { return length_scales_; }
    const std::vector<double>& signal_variance() const { return signal_var_; }
    const std::vector<double>& prior_mean() const { return prior_mean_; }
    double jitter_used() const { return jitter_used_; }

    // Serialization round-trip (see io.hpp for the JSON wrapping).
    struct State {
        Eigen::MatrixXd inputs;
        Eigen::MatrixXd dual_weights; // I x d_out, (R + jitter I)^-1 (y - m)
        std::vector<double> length_scales;
        std::vector<double> signal_var;
        std::vector<double> prior_mean;
        double jitter_used = 0.0;
    };
    State state() const;
    static GpSurrogate from_state(State s);

private:
    GpSurrogate() = default;

    Eigen::VectorXd correlation_vector(const std::vector<double>& x) const;

    Eigen::MatrixXd inputs_;       // I x d_in
    Eigen::MatrixXd dual_weights_; // I x d_out
    Eigen::LLT<Eigen::MatrixXd> llt_; // factor of R + jitter I
    bool have_llt_ = false;
    std::vector<double> length_scales_;
    std::vector<double> signal_var_;
    std::vector<double> prior_mean_;
    double jitter_used_ = 0.0;
};

/// Deterministic sample points for image_box: the 2^d corners plus the
/// largest m^d interior lattice fitting in the budget.
std::vector<std::vector<double>> cell_sample_points(const Box& cell, std::size_t budget);

} // namespace morsekit
