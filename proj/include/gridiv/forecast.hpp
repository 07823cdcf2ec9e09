#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gridiv/network.hpp"
#include "gridiv/numerics.hpp"

namespace gridiv {

/// Feed-forward I-V forecast model: inputs (v_real, v_imag, u...), outputs
/// (i_real, i_imag) in load convention. Hidden layers use tanh so first and
/// second input derivatives exist everywhere; the output layer is affine.
/// Inputs pass through a stored affine normalization, so callers always work
/// in raw per-unit volts and physical feature units.
struct ForecastModel {
    std::string id;
    std::vector<std::size_t> layer_dims;  // [2 + |input_spec|, hidden..., 2]
    std::vector<DenseMatrix> weights;     // weights[l]: layer_dims[l+1] x layer_dims[l]
    std::vector<Vector> biases;           // biases[l]: layer_dims[l+1]
    std::string activation = "tanh";
    std::vector<std::string> input_spec;  // exogenous feature names, in input order
    Vector norm_center;                   // x_hat = (x - center) * scale
    Vector norm_scale;

    std::size_t input_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
    std::size_t feature_count() const { return input_spec.size(); }

    /// Throws ShapeMismatch when weight shapes disagree with layer_dims or the
    /// output dimension is not 2; ValidationError on non-finite weights.
    void validate() const;

    /// Random Xavier-initialized model. Hidden widths default to {16, 16}.
    static ForecastModel create(std::string id, std::vector<std::string> input_spec,
                                std::vector<std::size_t> hidden_dims, std::uint64_t seed);

    /// All-zero weights and biases with identity normalization.
    static ForecastModel zeros(std::string id, std::vector<std::string> input_spec,
                               std::vector<std::size_t> hidden_dims);
};

using ModelSet = std::map<std::string, ForecastModel>;

struct TrainingSample {
    double v_real = 0.0;
    double v_imag = 0.0;
    std::vector<double> u;
    double y_real = 0.0;
    double y_imag = 0.0;
};

struct TrainingSet {
    std::vector<std::string> feature_names;
    std::vector<TrainingSample> samples;
};

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 1000;
    std::size_t batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;
    double l2_penalty = 0.0;
    double momentum = 0.9;
};

struct TrainResult {
    ForecastModel model;
    Vector loss_history;  // entry 0 is the pre-training mse, one entry per epoch after
};

/// Second derivatives of each output with respect to the raw inputs
/// (v_real, v_imag, u...). Both matrices are symmetric.
struct ModelHessian {
    DenseMatrix real;
    DenseMatrix imag;
};

/// Evaluates the model at raw inputs; u_slice follows input_spec order.
CurrentPair forward(const ForecastModel& m, double v_real, double v_imag,
                    const Vector& u_slice);

/// Convenience overload pulling features from a named exogenous vector.
/// Throws MissingFeature when a required feature is absent.
CurrentPair forward(const ForecastModel& m, double v_real, double v_imag,
                    const ExogenousVector& u);

/// Reverse-mode derivatives of both outputs with respect to the raw inputs:
/// a 2 x (2 + |u|) matrix with rows (I_R, I_I) and columns
/// (v_real, v_imag, u...).
DenseMatrix backward(const ForecastModel& m, double v_real, double v_imag,
                     const Vector& u_slice);
DenseMatrix backward(const ForecastModel& m, double v_real, double v_imag,
                     const ExogenousVector& u);

/// Exact input Hessians of both outputs, propagated layer by layer.
ModelHessian hessian(const ForecastModel& m, double v_real, double v_imag,
                     const Vector& u_slice);
ModelHessian hessian(const ForecastModel& m, double v_real, double v_imag,
                     const ExogenousVector& u);

/// Gradient descent on the mean squared prediction error (optionally with
/// momentum, mini-batches, and L2 weight decay). Fits the input normalization
/// from the data before descending. Deterministic given cfg.seed. Throws
/// DivergedTraining when the loss leaves the finite range.
TrainResult train(const ForecastModel& m, const TrainingSet& data, const TrainConfig& cfg);

/// Mean squared error of the model over a dataset.
double evaluate_mse(const ForecastModel& m, const TrainingSet& data);

// -- synthetic data ------------------------------------------------------------

/// Ground truth used to synthesize training data: a physics device whose power
/// scales with temperature and irradiance,
///   scale(u) = (1 + alpha_temperature * (T - t_ref)) * (1 - alpha_irradiance * S / 1000).
struct GroundTruthSpec {
    PhysicsDevice device;
    double alpha_temperature = 0.0;
    double alpha_irradiance = 0.0;
    double t_ref = 20.0;
    std::string temperature_feature = "temperature";
    std::string irradiance_feature = "irradiance";

    /// Power scale factor for a feature assignment.
    double response_scale(const std::vector<std::string>& names, const Vector& values) const;
    /// Device with its nominal powers scaled by response_scale.
    PhysicsDevice scaled_device(const std::vector<std::string>& names, const Vector& values) const;
};

struct FeatureRange {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
};

/// Samples |V| uniformly in v_range with angle within +/-15 degrees, features
/// uniformly in their ranges, and evaluates the ground-truth device current.
TrainingSet generate_training_data(const GroundTruthSpec& truth,
                                   std::pair<double, double> v_range,
                                   const std::vector<FeatureRange>& u_ranges, std::size_t n,
                                   std::uint64_t seed);

// -- persistence -----------------------------------------------------------------

/// Weight document round-trip: load_model(save_model(m)) reproduces every
/// weight bit-exactly.
std::string save_model(const ForecastModel& m);
ForecastModel load_model(const std::string& document);

/// Serializes a training set (same exactness contract as models).
std::string save_training_set(const TrainingSet& data);
TrainingSet load_training_set(const std::string& document);

}  // namespace gridiv
