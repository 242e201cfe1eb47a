#pragma once

// Dense feed-forward network x = F(q) with reverse-mode gradients.
//
// Batched tensors are column-major with one sample per column: inputs are
// (layer_dims.front() x batch), outputs (layer_dims.back() x batch).

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "uinject/rng.hpp"

namespace uinject {

enum class HiddenActivation { kRelu };
enum class OutputActivation { kSoftmax, kSigmoid };

const char* to_string(HiddenActivation activation);
const char* to_string(OutputActivation activation);

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::VectorXd bias;     // fan_out
};

// Per-layer parameter gradients; shapes equal the model's layers.
using Gradients = std::vector<DenseLayer>;

struct OptimizerState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::uint64_t steps = 0;
};

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class MlpModel {
 public:
  // All parameters start at zero; call initialize() for a He-uniform draw.
  MlpModel(std::vector<Eigen::Index> layer_dims, OutputActivation output,
           HiddenActivation hidden = HiddenActivation::kRelu);

  // Weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero.
  void initialize(Rng& rng);

  const std::vector<Eigen::Index>& layer_dims() const { return layer_dims_; }
  Eigen::Index input_dim() const { return layer_dims_.front(); }
  Eigen::Index output_dim() const { return layer_dims_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t parameter_count() const;

  HiddenActivation hidden_activation() const { return hidden_; }
  OutputActivation output_activation() const { return output_; }

  DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  OptimizerState& optimizer_state() { return optimizer_; }
  const OptimizerState& optimizer_state() const { return optimizer_; }

  // Zero-valued gradient buffers with this model's shapes.
  Gradients zero_gradients() const;

 private:
  std::vector<Eigen::Index> layer_dims_;
  HiddenActivation hidden_;
  OutputActivation output_;
  std::vector<DenseLayer> layers_;
  OptimizerState optimizer_;
};

// Cached values of the most recent forward pass. inputs[l] is the input to
// layer l; pre_activations[l] its affine output.
struct GradientTape {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::MatrixXd outputs;

  bool empty() const { return inputs.empty(); }
  void clear();
};

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs,
                              GradientTape* tape = nullptr);

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& input,
                        GradientTape* tape = nullptr);

// Contracts d(output)/d(theta) with output_gradient (same shape as the taped
// outputs), summing over the batch columns.
Gradients backward(const MlpModel& model, const GradientTape& tape,
                   const Eigen::MatrixXd& output_gradient);

// Gradient ascent (the objective is maximized). Throws a numeric error and
// leaves the model untouched if any gradient entry is non-finite.
void step(MlpModel& model, const Gradients& gradients, const OptimizerConfig& config);

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

// As above, additionally refusing a checkpoint whose shape or output
// activation differ from what the caller expects.
MlpModel load_checkpoint(const std::filesystem::path& path,
                         const std::vector<Eigen::Index>& expected_dims,
                         OutputActivation expected_output);

}  // namespace uinject
