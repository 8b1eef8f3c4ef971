#include "saldist/net.hpp"

#include "saldist/metrics.hpp"
#include "saldist/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace saldist {
namespace {

using MatrixXi = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// Patch matrix for stride-1 convolution: rows run over (in_channel, kernel
// row, kernel col), columns over output pixels. Zero padding outside.
Eigen::MatrixXd im2col(const ChannelStack& in, int k, int pad) {
  const int h = in.height, w = in.width;
  const int oh = h + 2 * pad - k + 1;
  const int ow = w + 2 * pad - k + 1;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(in.channels) * k * k,
                                               static_cast<Eigen::Index>(oh) * ow);
  for (int c = 0; c < in.channels; ++c) {
    for (int dr = 0; dr < k; ++dr) {
      for (int dc = 0; dc < k; ++dc) {
        const int row = (c * k + dr) * k + dc;
        for (int r = 0; r < oh; ++r) {
          const int sr = r + dr - pad;
          if (sr < 0 || sr >= h) continue;
          for (int x = 0; x < ow; ++x) {
            const int sc = x + dc - pad;
            if (sc < 0 || sc >= w) continue;
            cols(row, r * ow + x) = in.values(c, sr * w + sc);
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-adds patch-space gradients back onto the image.
void col2im_add(const Eigen::MatrixXd& cols, ChannelStack& grad_in, int k, int pad) {
  const int h = grad_in.height, w = grad_in.width;
  const int oh = h + 2 * pad - k + 1;
  const int ow = w + 2 * pad - k + 1;
  for (int c = 0; c < grad_in.channels; ++c) {
    for (int dr = 0; dr < k; ++dr) {
      for (int dc = 0; dc < k; ++dc) {
        const int row = (c * k + dr) * k + dc;
        for (int r = 0; r < oh; ++r) {
          const int sr = r + dr - pad;
          if (sr < 0 || sr >= h) continue;
          for (int x = 0; x < ow; ++x) {
            const int sc = x + dc - pad;
            if (sc < 0 || sc >= w) continue;
            grad_in.values(c, sr * w + sc) += cols(row, r * ow + x);
          }
        }
      }
    }
  }
}

ChannelStack conv_forward(const ChannelStack& in, const LayerSpec& spec, const ConvParams& p,
                          Eigen::MatrixXd* cols_out) {
  const int pad = spec.same_padding ? (spec.kernel_size - 1) / 2 : 0;
  const int oh = in.height + 2 * pad - spec.kernel_size + 1;
  const int ow = in.width + 2 * pad - spec.kernel_size + 1;
  if (oh < 1 || ow < 1) throw std::invalid_argument("conv: input smaller than kernel");
  ChannelStack out(spec.out_channels, oh, ow);
  Eigen::MatrixXd cols = im2col(in, spec.kernel_size, pad);
  out.values = p.weight * cols;
  out.values.colwise() += p.bias;
  if (cols_out) *cols_out = std::move(cols);
  return out;
}

ChannelStack pool_forward(const ChannelStack& in, MatrixXi* argmax) {
  if (in.height % 2 != 0 || in.width % 2 != 0) {
    throw std::invalid_argument("max_pool: dims must be even");
  }
  const int oh = in.height / 2, ow = in.width / 2;
  ChannelStack out(in.channels, oh, ow);
  if (argmax) argmax->resize(in.channels, static_cast<Eigen::Index>(oh) * ow);
  for (int c = 0; c < in.channels; ++c) {
    for (int r = 0; r < oh; ++r) {
      for (int x = 0; x < ow; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = -1;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            const int idx = (2 * r + dr) * in.width + (2 * x + dc);
            const double v = in.values(c, idx);
            if (v > best) {  // first maximum wins on ties
              best = v;
              best_idx = idx;
            }
          }
        }
        out.values(c, r * ow + x) = best;
        if (argmax) (*argmax)(c, r * ow + x) = best_idx;
      }
    }
  }
  return out;
}

}  // namespace

int FcnModel::conv_count() const {
  int n = 0;
  for (const LayerSpec& l : layers) n += l.kind == LayerKind::kConv ? 1 : 0;
  return n;
}

int FcnModel::input_channels() const {
  for (const LayerSpec& l : layers) {
    if (l.kind == LayerKind::kConv) return l.in_channels;
  }
  throw std::logic_error("FcnModel: no conv layer");
}

int FcnModel::output_channels() const {
  int out = 0;
  for (const LayerSpec& l : layers) {
    if (l.kind == LayerKind::kConv) out = l.out_channels;
  }
  return out;
}

int FcnModel::downsample_factor() const {
  int d = 1;
  for (const LayerSpec& l : layers) d *= l.kind == LayerKind::kMaxPool ? 2 : 1;
  return d;
}

void FcnModel::validate() const {
  if (layers.empty()) throw std::invalid_argument("FcnModel: no layers");
  int convs = 0;
  int channels = -1;
  for (const LayerSpec& l : layers) {
    l.validate();
    if (l.kind != LayerKind::kConv) continue;
    if (channels >= 0 && l.in_channels != channels) {
      throw std::invalid_argument("FcnModel: channel mismatch between conv layers");
    }
    channels = l.out_channels;
    const ConvParams& p = params.at(convs);
    if (p.weight.rows() != l.out_channels ||
        p.weight.cols() != static_cast<Eigen::Index>(l.in_channels) * l.kernel_size *
                               l.kernel_size ||
        p.bias.size() != l.out_channels) {
      throw std::invalid_argument("FcnModel: parameter shapes disagree with layer specs");
    }
    ++convs;
  }
  if (convs == 0) throw std::invalid_argument("FcnModel: needs at least one conv layer");
  if (static_cast<int>(params.size()) != convs) {
    throw std::invalid_argument("FcnModel: one parameter block per conv layer required");
  }
  if (output_channels() != 1) {
    throw std::invalid_argument("FcnModel: final conv must emit exactly 1 channel");
  }
}

namespace {

FcnModel assemble(std::vector<LayerSpec> layers, std::uint64_t seed, double init_sigma,
                  double bias_init) {
  FcnModel model;
  model.layers = std::move(layers);
  model.init_sigma = init_sigma;
  int conv_idx = 0;
  for (const LayerSpec& l : model.layers) {
    if (l.kind != LayerKind::kConv) continue;
    std::mt19937_64 eng = rng::engine(seed, static_cast<std::uint64_t>(conv_idx));
    ConvParams p;
    p.weight.resize(l.out_channels,
                    static_cast<Eigen::Index>(l.in_channels) * l.kernel_size * l.kernel_size);
    for (Eigen::Index i = 0; i < p.weight.size(); ++i) {
      p.weight.data()[i] = init_sigma * rng::normal(eng);
    }
    p.bias = Eigen::VectorXd::Constant(l.out_channels, bias_init);
    model.params.push_back(std::move(p));
    ++conv_idx;
  }
  model.validate();
  return model;
}

}  // namespace

FcnModel make_toy_model(int in_channels, std::uint64_t seed, double init_sigma) {
  return assemble(
      {
          LayerSpec::conv(in_channels, 16, 3, 0.1),
          LayerSpec::relu(),
          LayerSpec::max_pool(),
          LayerSpec::conv(16, 16, 3, 0.1),
          LayerSpec::relu(),
          LayerSpec::max_pool(),
          LayerSpec::conv(16, 16, 3, 0.1),
          LayerSpec::relu(),
          LayerSpec::conv(16, 8, 3, 1.0),
          LayerSpec::relu(),
          LayerSpec::conv(8, 1, 3, 1.0),
      },
      seed, init_sigma, 0.0);
}

FcnModel make_tiny_model(int in_channels, std::uint64_t seed, double init_sigma) {
  return assemble(
      {
          LayerSpec::conv(in_channels, 2, 3, 1.0),
          LayerSpec::relu(),
          LayerSpec::max_pool(),
          LayerSpec::conv(2, 2, 3, 1.0),
          LayerSpec::relu(),
          LayerSpec::max_pool(),
          LayerSpec::conv(2, 1, 3, 1.0),
      },
      seed, init_sigma, 0.3);
}

GridMap forward(const FcnModel& model, const ChannelStack& image, ForwardTrace* trace) {
  model.validate();
  if (image.channels != model.input_channels()) {
    throw std::invalid_argument("forward: image channels do not match the first conv layer");
  }
  const int d = model.downsample_factor();
  if (image.height % d != 0 || image.width % d != 0) {
    throw std::invalid_argument("forward: image dims must be divisible by the downsample factor");
  }

  ChannelStack x = image;
  int conv_idx = 0;
  for (const LayerSpec& l : model.layers) {
    if (trace) trace->inputs.push_back(x);
    switch (l.kind) {
      case LayerKind::kConv: {
        Eigen::MatrixXd cols;
        x = conv_forward(x, l, model.params[conv_idx++], trace ? &cols : nullptr);
        if (trace) trace->conv_cols.push_back(std::move(cols));
        break;
      }
      case LayerKind::kReLU:
        x.values = x.values.cwiseMax(0.0);
        break;
      case LayerKind::kMaxPool: {
        MatrixXi argmax;
        ChannelStack pooled = pool_forward(x, trace ? &argmax : nullptr);
        if (trace) trace->pool_argmax.push_back(std::move(argmax));
        x = std::move(pooled);
        break;
      }
    }
  }
  if (trace) trace->output = x;

  GridMap response(x.height, x.width);
  Eigen::Map<Eigen::RowVectorXd>(response.data(), response.size()) = x.values.row(0);
  return response;
}

ParamGrads zero_grads(const FcnModel& model) {
  ParamGrads grads;
  grads.reserve(model.params.size());
  for (const ConvParams& p : model.params) {
    grads.push_back({Eigen::MatrixXd::Zero(p.weight.rows(), p.weight.cols()),
                     Eigen::VectorXd::Zero(p.bias.size())});
  }
  return grads;
}

void accumulate_grads(ParamGrads& into, const ParamGrads& grads) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    into[i].weight += grads[i].weight;
    into[i].bias += grads[i].bias;
  }
}

ParamGrads backward(const FcnModel& model, const ForwardTrace& trace,
                    const GridMap& grad_response) {
  if (grad_response.rows() != trace.output.height || grad_response.cols() != trace.output.width) {
    throw std::invalid_argument("backward: grad_response shape mismatch");
  }
  ParamGrads grads = zero_grads(model);

  ChannelStack grad(1, trace.output.height, trace.output.width);
  grad.values.row(0) =
      Eigen::Map<const Eigen::RowVectorXd>(grad_response.data(), grad_response.size());

  int conv_idx = model.conv_count();
  int pool_idx = static_cast<int>(trace.pool_argmax.size());
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const LayerSpec& l = model.layers[li];
    const ChannelStack& input = trace.inputs[li];
    switch (l.kind) {
      case LayerKind::kConv: {
        --conv_idx;
        grads[conv_idx].weight = grad.values * trace.conv_cols[conv_idx].transpose();
        grads[conv_idx].bias = grad.values.rowwise().sum();
        if (li == 0) break;  // nothing consumes the image gradient
        const int pad = l.same_padding ? (l.kernel_size - 1) / 2 : 0;
        ChannelStack grad_in(input.channels, input.height, input.width);
        grad_in.values.setZero();
        col2im_add(model.params[conv_idx].weight.transpose() * grad.values, grad_in,
                   l.kernel_size, pad);
        grad = std::move(grad_in);
        break;
      }
      case LayerKind::kReLU:
        grad.values = (input.values.array() > 0.0).select(grad.values.array(), 0.0);
        break;
      case LayerKind::kMaxPool: {
        --pool_idx;
        const MatrixXi& argmax = trace.pool_argmax[pool_idx];
        ChannelStack grad_in(input.channels, input.height, input.width);
        grad_in.values.setZero();
        for (int c = 0; c < input.channels; ++c) {
          for (Eigen::Index i = 0; i < argmax.cols(); ++i) {
            grad_in.values(c, argmax(c, i)) += grad.values(c, i);
          }
        }
        grad = std::move(grad_in);
        break;
      }
    }
  }
  return grads;
}

ParamGrads backward(const FcnModel& model, const ChannelStack& image,
                    const GridMap& grad_response) {
  ForwardTrace trace;
  forward(model, image, &trace);
  return backward(model, trace, grad_response);
}

double parameter_gradcheck(FcnModel model, const ChannelStack& image, const PixelDistribution& g,
                           const LossSpec& spec, double h) {
  ForwardTrace trace;
  const GridMap response = forward(model, image, &trace);
  const ParamGrads analytic = backward(model, trace, loss_grad(spec, softmax(response), g));

  double scale = 1e-12;
  for (const ConvParams& p : analytic) {
    scale = std::max(scale, p.weight.cwiseAbs().maxCoeff());
    scale = std::max(scale, p.bias.cwiseAbs().maxCoeff());
  }

  double worst = 0.0;
  for (std::size_t li = 0; li < model.params.size(); ++li) {
    for (int part = 0; part < 2; ++part) {
      double* values = part == 0 ? model.params[li].weight.data() : model.params[li].bias.data();
      const double* grad = part == 0 ? analytic[li].weight.data() : analytic[li].bias.data();
      const Eigen::Index count =
          part == 0 ? model.params[li].weight.size() : model.params[li].bias.size();
      for (Eigen::Index i = 0; i < count; ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = loss_value(spec, softmax(forward(model, image)), g);
        values[i] = saved - h;
        const double down = loss_value(spec, softmax(forward(model, image)), g);
        values[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(grad[i] - fd) / std::max(scale, std::abs(fd)));
      }
    }
  }
  return worst;
}

SgdState SgdState::zeros_like(const FcnModel& model) { return {zero_grads(model)}; }

void sgd_step(FcnModel& model, const ParamGrads& grads, const TrainConfig& config,
              SgdState& state) {
  config.validate();
  if (grads.size() != model.params.size() || state.velocity.size() != model.params.size()) {
    throw std::invalid_argument("sgd_step: gradient/buffer count mismatch");
  }
  int conv_idx = 0;
  for (const LayerSpec& l : model.layers) {
    if (l.kind != LayerKind::kConv) continue;
    if (conv_idx >= config.frozen_prefix) {
      const double lr = config.base_lr * l.lr_multiplier;
      ConvParams& p = model.params[conv_idx];
      ConvParams& v = state.velocity[conv_idx];
      v.weight = config.momentum * v.weight +
                 lr * (grads[conv_idx].weight + config.weight_decay * p.weight);
      v.bias = config.momentum * v.bias +
               lr * (grads[conv_idx].bias + config.weight_decay * p.bias);
      p.weight -= v.weight;
      p.bias -= v.bias;
    }
    ++conv_idx;
  }
}

PixelDistribution predict(const FcnModel& model, const ChannelStack& image) {
  const GridMap response = forward(model, image);
  return softmax(upsample_bilinear(response, image.height, image.width));
}

EpochLog validate(const FcnModel& model, const std::vector<Sample>& val_set, int sauc_splits,
                  std::uint64_t metric_seed, int epoch) {
  if (val_set.empty()) throw std::invalid_argument("validate: empty validation set");
  EpochLog log;
  log.epoch = epoch;
  for (std::size_t i = 0; i < val_set.size(); ++i) {
    const Sample& s = val_set[i];
    const PixelDistribution pred = predict(model, s.image);
    log.cc += cc(pred.grid(), s.gt.grid());
    log.nss += nss(pred.grid(), s.fixations);
    log.sim += sim(pred, s.gt);
    log.auc_judd += auc_judd(pred.grid(), s.fixations);
    if (val_set.size() > 1) {
      ShuffleBank bank;
      for (std::size_t j = 0; j < val_set.size(); ++j) {
        if (j != i) bank.sets.push_back(val_set[j].fixations);
      }
      log.sauc += sauc(pred.grid(), s.fixations, bank, sauc_splits,
                       rng::substream(metric_seed, i));
    }
  }
  const double n = static_cast<double>(val_set.size());
  log.cc /= n;
  log.nss /= n;
  log.sim /= n;
  log.auc_judd /= n;
  log.sauc /= n;
  return log;
}

TrainLog train(FcnModel& model, const std::vector<Sample>& train_set,
               const std::vector<Sample>& val_set, const TrainConfig& config,
               const GtParams& gt) {
  config.validate();
  model.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");

  const int d = model.downsample_factor();

  // Targets at the response resolution: softmax of the area-downsampled
  // normalized smoothed map, rebuilt from each sample's fixations.
  std::vector<PixelDistribution> targets;
  targets.reserve(train_set.size());
  for (const Sample& s : train_set) {
    const GridMap normalized =
        min_max_normalize(gaussian_smooth(binary_fixation_map(s.fixations), gt));
    targets.push_back(
        softmax(downsample_area(normalized, normalized.rows() / d, normalized.cols() / d)));
  }

  TrainLog log;
  SgdState state = SgdState::zeros_like(model);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  int iteration = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_eng = rng::engine(config.seed, 1000 + static_cast<std::uint64_t>(epoch));
    rng::shuffle(order, shuffle_eng);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double batch_n = static_cast<double>(stop - start);
      ParamGrads batch_grads = zero_grads(model);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const Sample& s = train_set[order[k]];
        ForwardTrace trace;
        const GridMap response = forward(model, s.image, &trace);
        const PixelDistribution p = softmax(response);
        const LossResult res = loss_eval(config.loss, p, targets[order[k]]);
        batch_loss += res.value;
        accumulate_grads(batch_grads, backward(model, trace, res.grad_logits));
      }
      batch_loss /= batch_n;
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged("training loss became non-finite at iteration " +
                               std::to_string(iteration));
      }
      for (ConvParams& gp : batch_grads) {
        gp.weight /= batch_n;
        gp.bias /= batch_n;
      }
      sgd_step(model, batch_grads, config, state);
      log.iterations.push_back({iteration, epoch, batch_loss});
      ++iteration;
    }

    if (!val_set.empty()) {
      try {
        log.epochs.push_back(validate(model, val_set, config.val_sauc_splits,
                                      rng::substream(config.metric_seed, 7000 + epoch), epoch));
      } catch (const std::invalid_argument&) {
        // A collapsed (constant) response map has no defined CC/NSS; record
        // the epoch as unusable rather than aborting the run.
        EpochLog dead;
        dead.epoch = epoch;
        dead.cc = dead.sauc = dead.nss = dead.sim = dead.auc_judd =
            std::numeric_limits<double>::quiet_NaN();
        log.epochs.push_back(dead);
      }
    }
  }
  return log;
}

// --- Checkpoint ----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'A', 'L', 'D', 'I', 'S', 'T', '1'};

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_model(const std::filesystem::path& path, const FcnModel& model) {
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, model.init_sigma);
  write_pod(out, static_cast<std::uint32_t>(model.layers.size()));
  int conv_idx = 0;
  for (const LayerSpec& l : model.layers) {
    write_pod(out, static_cast<std::uint8_t>(l.kind));
    if (l.kind != LayerKind::kConv) continue;
    write_pod(out, static_cast<std::uint32_t>(l.in_channels));
    write_pod(out, static_cast<std::uint32_t>(l.out_channels));
    write_pod(out, static_cast<std::uint32_t>(l.kernel_size));
    write_pod(out, static_cast<std::uint8_t>(l.same_padding ? 1 : 0));
    write_pod(out, l.lr_multiplier);
    const ConvParams& p = model.params[conv_idx++];
    out.write(reinterpret_cast<const char*>(p.weight.data()),
              static_cast<std::streamsize>(sizeof(double) * p.weight.size()));
    out.write(reinterpret_cast<const char*>(p.bias.data()),
              static_cast<std::streamsize>(sizeof(double) * p.bias.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FcnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a model checkpoint: " + path.string());
  }
  FcnModel model;
  model.init_sigma = read_pod<double>(in);
  const std::uint32_t n_layers = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto kind = static_cast<LayerKind>(read_pod<std::uint8_t>(in));
    if (kind == LayerKind::kReLU) {
      model.layers.push_back(LayerSpec::relu());
      continue;
    }
    if (kind == LayerKind::kMaxPool) {
      model.layers.push_back(LayerSpec::max_pool());
      continue;
    }
    if (kind != LayerKind::kConv) throw std::runtime_error("corrupt checkpoint layer kind");
    const auto in_ch = static_cast<int>(read_pod<std::uint32_t>(in));
    const auto out_ch = static_cast<int>(read_pod<std::uint32_t>(in));
    const auto k = static_cast<int>(read_pod<std::uint32_t>(in));
    const bool same_pad = read_pod<std::uint8_t>(in) != 0;
    const double lr_mult = read_pod<double>(in);
    model.layers.push_back(LayerSpec::conv(in_ch, out_ch, k, lr_mult, same_pad));
    ConvParams p;
    p.weight.resize(out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
    p.bias.resize(out_ch);
    in.read(reinterpret_cast<char*>(p.weight.data()),
            static_cast<std::streamsize>(sizeof(double) * p.weight.size()));
    in.read(reinterpret_cast<char*>(p.bias.data()),
            static_cast<std::streamsize>(sizeof(double) * p.bias.size()));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
    model.params.push_back(std::move(p));
  }
  model.validate();
  return model;
}

}  // namespace saldist
