#include "uinject/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "text_io.hpp"
#include "uinject/error.hpp"

namespace uinject {

namespace {

constexpr const char* kCheckpointMagic = "uinject-mlp-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string dims_to_string(const std::vector<Eigen::Index>& dims) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dims.size(); ++i) out << (i ? "x" : "") << dims[i];
  return out.str();
}

void apply_output_activation(OutputActivation activation, Eigen::MatrixXd& z) {
  switch (activation) {
    case OutputActivation::kSoftmax:
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        auto col = z.col(c);
        const double shift = col.maxCoeff();
        col = (col.array() - shift).exp();
        col /= col.sum();
      }
      break;
    case OutputActivation::kSigmoid:
      z = z.unaryExpr([](double v) {
        // Split by sign so exp never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
      break;
  }
}

DenseLayer zero_like(const DenseLayer& layer) {
  return {Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
          Eigen::VectorXd::Zero(layer.bias.size())};
}

}  // namespace

const char* to_string(HiddenActivation activation) {
  switch (activation) {
    case HiddenActivation::kRelu:
      return "relu";
  }
  return "?";
}

const char* to_string(OutputActivation activation) {
  switch (activation) {
    case OutputActivation::kSoftmax:
      return "softmax";
    case OutputActivation::kSigmoid:
      return "sigmoid";
  }
  return "?";
}

MlpModel::MlpModel(std::vector<Eigen::Index> layer_dims, OutputActivation output,
                   HiddenActivation hidden)
    : layer_dims_(std::move(layer_dims)), hidden_(hidden), output_(output) {
  if (layer_dims_.size() < 2) throw_config("an MLP needs at least input and output widths");
  for (Eigen::Index d : layer_dims_) {
    if (d <= 0) throw_config("layer widths must be positive, got " + dims_to_string(layer_dims_));
  }
  layers_.reserve(layer_dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(layer_dims_[l + 1], layer_dims_[l]),
                       Eigen::VectorXd::Zero(layer_dims_[l + 1])});
  }
}

void MlpModel::initialize(Rng& rng) {
  for (DenseLayer& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = dist(rng);
    }
    layer.bias.setZero();
  }
  optimizer_ = OptimizerState{};
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

Gradients MlpModel::zero_gradients() const {
  Gradients grads;
  grads.reserve(layers_.size());
  for (const DenseLayer& layer : layers_) grads.push_back(zero_like(layer));
  return grads;
}

void GradientTape::clear() {
  inputs.clear();
  pre_activations.clear();
  outputs.resize(0, 0);
}

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs,
                              GradientTape* tape) {
  if (inputs.rows() != model.input_dim()) {
    throw_config("input width " + std::to_string(inputs.rows()) + " does not match model input " +
                 std::to_string(model.input_dim()));
  }
  if (tape) {
    tape->clear();
    tape->inputs.reserve(model.num_layers());
    tape->pre_activations.reserve(model.num_layers());
  }

  Eigen::MatrixXd activation = inputs;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const DenseLayer& layer = model.layer(l);
    Eigen::MatrixXd z = layer.weights * activation;
    z.colwise() += layer.bias;
    if (tape) {
      tape->inputs.push_back(std::move(activation));
      tape->pre_activations.push_back(z);
    }
    if (l + 1 < model.num_layers()) {
      activation = z.cwiseMax(0.0);
    } else {
      apply_output_activation(model.output_activation(), z);
      activation = std::move(z);
    }
  }
  if (tape) tape->outputs = activation;
  return activation;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& input, GradientTape* tape) {
  return forward_batch(model, input, tape).col(0);
}

Gradients backward(const MlpModel& model, const GradientTape& tape,
                   const Eigen::MatrixXd& output_gradient) {
  if (tape.empty()) throw_usage("backward called without a recorded forward pass");
  if (tape.inputs.size() != model.num_layers()) {
    throw_usage("gradient tape was recorded on a model with a different depth");
  }
  const Eigen::MatrixXd& y = tape.outputs;
  if (output_gradient.rows() != y.rows() || output_gradient.cols() != y.cols()) {
    throw_config("output gradient shape does not match the taped forward pass");
  }

  // Gradient with respect to the last pre-activation.
  Eigen::MatrixXd delta;
  switch (model.output_activation()) {
    case OutputActivation::kSoftmax: {
      // dz = y .* (g - <g, y>) per column
      const Eigen::RowVectorXd inner = (output_gradient.array() * y.array()).colwise().sum();
      delta = y.array() * (output_gradient.rowwise() - inner).array();
      break;
    }
    case OutputActivation::kSigmoid:
      delta = output_gradient.array() * y.array() * (1.0 - y.array());
      break;
  }

  Gradients grads(model.num_layers());
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    grads[l].weights.noalias() = delta * tape.inputs[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = model.layer(l).weights.transpose() * delta;
    // ReLU subgradient at exactly zero is zero.
    delta = (tape.pre_activations[l - 1].array() > 0.0).select(upstream.array(), 0.0).matrix();
  }
  return grads;
}

void step(MlpModel& model, const Gradients& gradients, const OptimizerConfig& config) {
  if (gradients.size() != model.num_layers()) throw_config("gradient layer count mismatch");
  for (std::size_t l = 0; l < gradients.size(); ++l) {
    const DenseLayer& g = gradients[l];
    const DenseLayer& p = model.layer(l);
    if (g.weights.rows() != p.weights.rows() || g.weights.cols() != p.weights.cols() ||
        g.bias.size() != p.bias.size()) {
      throw_config("gradient shape mismatch at layer " + std::to_string(l));
    }
    if (!g.weights.allFinite() || !g.bias.allFinite()) {
      const auto bad = (!g.weights.array().isFinite()).count() + (!g.bias.array().isFinite()).count();
      throw_numeric("non-finite gradient at layer " + std::to_string(l) + " (" +
                    std::to_string(bad) + " entries); step aborted");
    }
  }

  const double lr = config.learning_rate;
  if (config.kind == OptimizerKind::kSgd) {
    for (std::size_t l = 0; l < gradients.size(); ++l) {
      model.layer(l).weights += lr * gradients[l].weights;
      model.layer(l).bias += lr * gradients[l].bias;
    }
    return;
  }

  OptimizerState& state = model.optimizer_state();
  if (state.first_moment.size() != model.num_layers()) {
    state.first_moment = model.zero_gradients();
    state.second_moment = model.zero_gradients();
    state.steps = 0;
  }
  ++state.steps;
  const double t = static_cast<double>(state.steps);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    param.array() += lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + config.epsilon);
  };
  for (std::size_t l = 0; l < gradients.size(); ++l) {
    update(model.layer(l).weights, state.first_moment[l].weights, state.second_moment[l].weights,
           gradients[l].weights);
    update(model.layer(l).bias, state.first_moment[l].bias, state.second_moment[l].bias,
           gradients[l].bias);
  }
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open checkpoint for writing: " + path.string());

  out << kCheckpointMagic << '\n';
  out << "format_version " << kCheckpointVersion << '\n';
  out << "layer_dims " << model.layer_dims().size();
  for (Eigen::Index d : model.layer_dims()) out << ' ' << d;
  out << '\n';
  out << "hidden_activation " << to_string(model.hidden_activation()) << '\n';
  out << "output_activation " << to_string(model.output_activation()) << '\n';
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const DenseLayer& layer = model.layer(l);
    out << "weights " << l << ' ' << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        out << (j ? " " : "") << detail::format_double(layer.weights(i, j));
      }
      out << '\n';
    }
    out << "bias " << l << ' ' << layer.bias.size() << '\n';
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      out << (i ? " " : "") << detail::format_double(layer.bias(i));
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) throw_io("failed writing checkpoint: " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open checkpoint: " + path.string());
  detail::TokenReader reader(in, "checkpoint " + path.string());

  reader.expect(kCheckpointMagic);
  reader.expect("format_version");
  const auto version = reader.next_int();
  if (version != kCheckpointVersion) {
    throw_format("checkpoint format_version " + std::to_string(version) +
                 " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  reader.expect("layer_dims");
  const auto count = reader.next_int();
  if (count < 2 || count > 1024) throw_format("implausible layer count in checkpoint");
  std::vector<Eigen::Index> dims(static_cast<std::size_t>(count));
  for (auto& d : dims) {
    d = reader.next_int();
    if (d <= 0) throw_format("non-positive layer width in checkpoint");
  }
  reader.expect("hidden_activation");
  if (reader.next() != "relu") throw_format("unsupported hidden activation in checkpoint");
  reader.expect("output_activation");
  const std::string output = reader.next();
  OutputActivation activation;
  if (output == "softmax") {
    activation = OutputActivation::kSoftmax;
  } else if (output == "sigmoid") {
    activation = OutputActivation::kSigmoid;
  } else {
    throw_format("unsupported output activation '" + output + "' in checkpoint");
  }

  MlpModel model(dims, activation);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    DenseLayer& layer = model.layer(l);
    reader.expect("weights");
    if (reader.next_int() != static_cast<std::int64_t>(l) ||
        reader.next_int() != layer.weights.rows() || reader.next_int() != layer.weights.cols()) {
      throw_format("weight block header does not match layer_dims at layer " + std::to_string(l));
    }
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = reader.next_double();
    }
    reader.expect("bias");
    if (reader.next_int() != static_cast<std::int64_t>(l) || reader.next_int() != layer.bias.size()) {
      throw_format("bias block header does not match layer_dims at layer " + std::to_string(l));
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = reader.next_double();
  }
  reader.expect("end");
  return model;
}

MlpModel load_checkpoint(const std::filesystem::path& path,
                         const std::vector<Eigen::Index>& expected_dims,
                         OutputActivation expected_output) {
  MlpModel model = load_checkpoint(path);
  if (model.layer_dims() != expected_dims) {
    throw_format("checkpoint shape " + dims_to_string(model.layer_dims()) +
                 " does not match the configured network " + dims_to_string(expected_dims));
  }
  if (model.output_activation() != expected_output) {
    throw_format(std::string("checkpoint output activation ") +
                 to_string(model.output_activation()) + " does not match the configured " +
                 to_string(expected_output));
  }
  return model;
}

}  // namespace uinject
