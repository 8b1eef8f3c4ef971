#pragma once

#include "saldist/data.hpp"
#include "saldist/grid.hpp"
#include "saldist/losses.hpp"
#include "saldist/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace saldist {

enum class LayerKind { kConv, kReLU, kMaxPool };

/// Conv layers run at stride 1 with odd square kernels; max-pool is fixed at
/// window 2, stride 2.
struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 0;
  bool same_padding = true;
  double lr_multiplier = 1.0;

  static LayerSpec conv(int in, int out, int k, double lr_mult = 1.0, bool same_pad = true) {
    LayerSpec s;
    s.kind = LayerKind::kConv;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel_size = k;
    s.same_padding = same_pad;
    s.lr_multiplier = lr_mult;
    return s;
  }
  static LayerSpec relu() { return {}; }
  static LayerSpec max_pool() {
    LayerSpec s;
    s.kind = LayerKind::kMaxPool;
    return s;
  }

  void validate() const {
    if (kind == LayerKind::kConv) {
      if (in_channels < 1 || out_channels < 1) {
        throw std::invalid_argument("LayerSpec: conv needs positive channel counts");
      }
      if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw std::invalid_argument("LayerSpec: conv kernel must be odd");
      }
      if (!(lr_multiplier > 0.0)) {
        throw std::invalid_argument("LayerSpec: lr_multiplier must be positive");
      }
    }
  }
};

/// Weight matrix rows are output channels; columns run over
/// (in_channel, kernel_row, kernel_col) in that order.
struct ConvParams {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

using ParamGrads = std::vector<ConvParams>;

/// Fully-convolutional saliency network: an ordered layer list whose final
/// conv emits the single-channel response map.
struct FcnModel {
  std::vector<LayerSpec> layers;
  std::vector<ConvParams> params;  // one entry per conv layer, in layer order
  double init_sigma = 0.01;

  int conv_count() const;
  int input_channels() const;
  int output_channels() const;
  int downsample_factor() const;  // product of pool strides
  void validate() const;
};

/// Desk-scale model in the pretrained-trunk-plus-new-head pattern: a trunk of
/// three 3x3 convs (in -> 16 -> 16 -> 16) with two max-pools, trained at 0.1
/// times the base learning rate, and a head of two convs (16 -> 8 -> 1) at
/// the full rate. Weights are zero-mean Gaussian (init_sigma), biases zero.
FcnModel make_toy_model(int in_channels, std::uint64_t seed, double init_sigma = 0.01);

/// Gradient-check-sized model: conv(in->2) relu pool conv(2->2) relu pool
/// conv(2->1), all at lr multiplier 1. Weights are wider than the toy model's
/// and biases start at 0.3 so ReLU inputs and pool selections sit away from
/// their kinks under finite-difference perturbations.
FcnModel make_tiny_model(int in_channels, std::uint64_t seed, double init_sigma = 0.3);

/// Per-layer activations captured during a forward pass, for reuse by the
/// backward pass.
struct ForwardTrace {
  std::vector<ChannelStack> inputs;                // input of each layer
  std::vector<Eigen::MatrixXd> conv_cols;          // im2col patches per conv layer
  std::vector<Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>> pool_argmax;
  ChannelStack output;
};

/// Runs the network on a C-channel image and returns the single-channel
/// response map at reduced resolution.
GridMap forward(const FcnModel& model, const ChannelStack& image, ForwardTrace* trace = nullptr);

/// Reverse-mode gradients of every parameter given d(loss)/d(response map).
ParamGrads backward(const FcnModel& model, const ForwardTrace& trace,
                    const GridMap& grad_response);
ParamGrads backward(const FcnModel& model, const ChannelStack& image,
                    const GridMap& grad_response);

ParamGrads zero_grads(const FcnModel& model);
void accumulate_grads(ParamGrads& into, const ParamGrads& grads);

/// Worst mismatch between backward() and a forward-only central-difference
/// sweep over every parameter, relative to the largest gradient magnitude.
/// The finite differences drive loss_value(softmax(forward(...))) directly
/// and never touch the reverse-mode path they certify.
double parameter_gradcheck(FcnModel model, const ChannelStack& image, const PixelDistribution& g,
                           const LossSpec& spec, double h);

struct TrainConfig {
  double base_lr = 50.0;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 8;
  int epochs = 10;
  LossSpec loss;
  std::uint64_t seed = 0;
  int frozen_prefix = 0;   // leading conv layers excluded from updates
  int val_sauc_splits = 20;
  std::uint64_t metric_seed = 0;

  void validate() const {
    if (!(base_lr > 0.0)) throw std::invalid_argument("TrainConfig: base_lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) {
      throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay < 0");
    if (batch_size < 1 || epochs < 0) {
      throw std::invalid_argument("TrainConfig: batch_size >= 1 and epochs >= 0 required");
    }
    if (frozen_prefix < 0) throw std::invalid_argument("TrainConfig: frozen_prefix < 0");
    loss.validate();
  }
};

/// Momentum buffers, one per conv layer.
struct SgdState {
  ParamGrads velocity;
  static SgdState zeros_like(const FcnModel& model);
};

/// v <- momentum v + lr_layer (grad + weight_decay w); w <- w - v, with
/// lr_layer = base_lr * lr_multiplier. Conv layers below frozen_prefix are
/// left untouched.
void sgd_step(FcnModel& model, const ParamGrads& grads, const TrainConfig& config,
              SgdState& state);

struct IterationLog {
  int iteration = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double cc = 0.0;
  double sauc = 0.0;
  double nss = 0.0;
  double sim = 0.0;
  double auc_judd = 0.0;
};

struct TrainLog {
  std::vector<IterationLog> iterations;
  std::vector<EpochLog> epochs;  // one entry per epoch when a validation set is given
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shuffled mini-batch SGD. Ground-truth targets are rebuilt at the response
/// resolution from each sample's fixations: softmax of the area-downsampled
/// normalized map. Deterministic given config.seed (single-threaded).
/// Throws TrainingDiverged if the loss leaves the finite range.
TrainLog train(FcnModel& model, const std::vector<Sample>& train_set,
               const std::vector<Sample>& val_set, const TrainConfig& config,
               const GtParams& gt);

/// softmax(upsample_bilinear(forward(image))) at the input resolution.
PixelDistribution predict(const FcnModel& model, const ChannelStack& image);

/// Mean validation metrics of a model over a sample set; each image's sAUC
/// bank is the other images' fixations.
EpochLog validate(const FcnModel& model, const std::vector<Sample>& val_set, int sauc_splits,
                  std::uint64_t metric_seed, int epoch);

// Versioned binary checkpoint, magic "SALDIST1", little-endian f64 blobs.
void save_model(const std::filesystem::path& path, const FcnModel& model);
FcnModel load_model(const std::filesystem::path& path);

}  // namespace saldist
