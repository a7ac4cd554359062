#include "cxr/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cstring>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace cxr {

using json = nlohmann::json;

void VaeArchitecture::validate() const {
  if (input_size < 1) throw ConfigError("VaeArchitecture: input_size must be >= 1");
  if (latent_dim < 1) throw ConfigError("VaeArchitecture: latent_dim must be >= 1");
  if (encoder_widths.empty())
    throw ConfigError("VaeArchitecture: encoder needs at least one width");
  if (decoder_widths.empty())
    throw ConfigError("VaeArchitecture: decoder needs at least one width");
  for (Index w : encoder_widths)
    if (w < 1) throw ConfigError("VaeArchitecture: non-positive encoder width");
  for (Index w : decoder_widths)
    if (w < 1) throw ConfigError("VaeArchitecture: non-positive decoder width");
  if (activation != "tanh" && activation != "relu")
    throw ConfigError("VaeArchitecture: unknown activation " + activation);
}

VaeParams::VaeParams(VaeArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  Index offset = 0;
  auto add_layer = [&](Index in, Index out) {
    slots_.push_back({offset, out, in});
    offset += out * in;
    slots_.push_back({offset, out, 1});
    offset += out;
  };
  Index in = arch_.input_size;
  for (Index w : arch_.encoder_widths) {
    add_layer(in, w);
    in = w;
  }
  const Index feature_width = arch_.encoder_widths.back();
  add_layer(feature_width, arch_.latent_dim);  // mu head
  add_layer(feature_width, arch_.latent_dim);  // logvar head
  in = arch_.latent_dim;
  for (Index w : arch_.decoder_widths) {
    add_layer(in, w);
    in = w;
  }
  add_layer(in, arch_.input_size);  // output layer (sigmoid)
  flat_ = Vector::Zero(offset);
}

Eigen::Map<Matrix> VaeParams::tensor(std::size_t slot) {
  const TensorSlot& s = slots_.at(slot);
  return Eigen::Map<Matrix>(flat_.data() + s.offset, s.rows, s.cols);
}

Eigen::Map<const Matrix> VaeParams::tensor(std::size_t slot) const {
  const TensorSlot& s = slots_.at(slot);
  return Eigen::Map<const Matrix>(flat_.data() + s.offset, s.rows, s.cols);
}

std::size_t VaeParams::encoder_layer_count() const {
  return arch_.encoder_widths.size();
}

std::size_t VaeParams::decoder_layer_count() const {
  return arch_.decoder_widths.size() + 1;
}

VaeParams init_params(const VaeArchitecture& arch, RngStream& rng) {
  VaeParams params(arch);
  // Glorot-uniform weights, zero biases, drawn in slot order.
  for (std::size_t s = 0; s < params.slots().size(); s += 2) {
    auto w = params.tensor(s);
    const Scalar bound =
        std::sqrt(6.0 / static_cast<Scalar>(w.rows() + w.cols()));
    for (Index c = 0; c < w.cols(); ++c)
      for (Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
  }
  return params;
}

namespace {

void apply_activation(Matrix& a, const std::string& activation) {
  if (activation == "tanh") {
    a = a.array().tanh();
  } else {
    a = a.cwiseMax(0.0);
  }
}

// Derivative expressed through the activated output h.
Matrix activation_grad(const Matrix& h, const std::string& activation) {
  if (activation == "tanh") return (1.0 - h.array().square()).matrix();
  return (h.array() > 0.0).cast<Scalar>().matrix();
}

struct ForwardPass {
  std::vector<Matrix> encoder_h;  // encoder_h[0] = input batch
  Matrix mu, logv, std, z;
  std::vector<Matrix> decoder_h;  // decoder_h[0] = z, last = x_rec
  Matrix x_rec;
};

ForwardPass forward(const VaeParams& params, const Matrix& batch,
                    const Matrix* noise) {
  const auto& arch = params.arch();
  if (batch.rows() != arch.input_size)
    throw StructuralError("vae forward: batch pixel count mismatch");
  ForwardPass f;
  const std::size_t n_enc = params.encoder_layer_count();
  f.encoder_h.reserve(n_enc + 1);
  f.encoder_h.push_back(batch);
  for (std::size_t l = 0; l < n_enc; ++l) {
    Matrix a = params.tensor(2 * l) * f.encoder_h.back();
    a.colwise() += Vector(params.tensor(2 * l + 1));
    apply_activation(a, arch.activation);
    f.encoder_h.push_back(std::move(a));
  }
  const std::size_t mu_slot = 2 * n_enc;
  const std::size_t lv_slot = 2 * n_enc + 2;
  f.mu = params.tensor(mu_slot) * f.encoder_h.back();
  f.mu.colwise() += Vector(params.tensor(mu_slot + 1));
  f.logv = params.tensor(lv_slot) * f.encoder_h.back();
  f.logv.colwise() += Vector(params.tensor(lv_slot + 1));

  f.std = (0.5 * f.logv.array()).exp().matrix();
  if (noise) {
    if (noise->rows() != f.mu.rows() || noise->cols() != f.mu.cols())
      throw StructuralError("vae forward: noise shape mismatch");
    f.z = f.mu + f.std.cwiseProduct(*noise);
  } else {
    f.z = f.mu;
  }

  const std::size_t n_dec = params.decoder_layer_count();
  const std::size_t dec_base = 2 * (n_enc + 2);
  f.decoder_h.reserve(n_dec + 1);
  f.decoder_h.push_back(f.z);
  for (std::size_t l = 0; l < n_dec; ++l) {
    Matrix a = params.tensor(dec_base + 2 * l) * f.decoder_h.back();
    a.colwise() += Vector(params.tensor(dec_base + 2 * l + 1));
    if (l + 1 < n_dec) {
      apply_activation(a, arch.activation);
    } else {
      a = a.unaryExpr([](Scalar v) { return sigmoid(v); });
    }
    f.decoder_h.push_back(std::move(a));
  }
  f.x_rec = f.decoder_h.back();
  return f;
}

}  // namespace

std::pair<Vector, Vector> encode(const VaeParams& params, const Vector& image) {
  if (image.size() != params.arch().input_size)
    throw StructuralError("encode: image size does not match architecture");
  const ForwardPass f = forward(params, image, nullptr);
  return {f.mu.col(0), f.logv.col(0)};
}

LatentCode reparameterize(const Vector& mean, const Vector& log_variance,
                          RngStream& rng) {
  if (mean.size() != log_variance.size())
    throw StructuralError("reparameterize: mean/log-variance length mismatch");
  LatentCode code;
  code.mean = mean;
  code.log_variance = log_variance;
  code.noise = rng.standard_normal_vector(mean.size());
  code.sample =
      mean + (0.5 * log_variance.array()).exp().matrix().cwiseProduct(code.noise);
  return code;
}

Vector decode(const VaeParams& params, const Vector& z) {
  const auto& arch = params.arch();
  if (z.size() != arch.latent_dim)
    throw StructuralError("decode: latent size does not match architecture");
  const std::size_t n_enc = params.encoder_layer_count();
  const std::size_t n_dec = params.decoder_layer_count();
  const std::size_t dec_base = 2 * (n_enc + 2);
  Matrix h = z;
  for (std::size_t l = 0; l < n_dec; ++l) {
    Matrix a = params.tensor(dec_base + 2 * l) * h;
    a.colwise() += Vector(params.tensor(dec_base + 2 * l + 1));
    if (l + 1 < n_dec) {
      apply_activation(a, arch.activation);
    } else {
      a = a.unaryExpr([](Scalar v) { return sigmoid(v); });
    }
    h = std::move(a);
  }
  return h.col(0);
}

Scalar reconstruction_loss(const Vector& x, const Vector& x_rec) {
  if (x.size() != x_rec.size())
    throw StructuralError("reconstruction_loss: shape mismatch");
  return (x - x_rec).cwiseAbs().sum();
}

Scalar kl_loss(const Vector& mean, const Vector& log_variance) {
  if (mean.size() != log_variance.size())
    throw StructuralError("kl_loss: length mismatch");
  return -0.5 * (1.0 + log_variance.array() - mean.array().square() -
                 log_variance.array().exp())
                    .sum();
}

Scalar total_loss(Scalar rec, Scalar kl, Scalar beta) {
  if (beta < 0.0) throw DomainError("total_loss: beta must be >= 0");
  return rec + beta * kl;
}

Scalar beta_at_epoch(const BetaSchedule& sched, int epoch) {
  if (epoch < 0) throw DomainError("beta_at_epoch: epoch must be >= 0");
  if (epoch < sched.warmup_epochs) return 0.0;
  const int exponent =
      sched.absolute_exponent ? epoch : epoch - sched.warmup_epochs;
  return sched.base * std::pow(sched.growth, exponent);
}

Scalar lr_on_plateau(const std::vector<Scalar>& history, Scalar current_lr,
                     int patience) {
  if (patience < 1) throw DomainError("lr_on_plateau: patience must be >= 1");
  const auto n = static_cast<long>(history.size());
  if (n <= patience) return current_lr;
  Scalar best_before = std::numeric_limits<Scalar>::infinity();
  for (long i = 0; i < n - patience; ++i)
    best_before = std::min(best_before, history[static_cast<std::size_t>(i)]);
  for (long i = n - patience; i < n; ++i) {
    if (history[static_cast<std::size_t>(i)] < best_before) return current_lr;
  }
  return current_lr / 2.0;
}

Scalar loss_and_gradient(const VaeParams& params, const Matrix& batch,
                         const Matrix& noise, Scalar beta, Vector& grad_out,
                         Scalar* rec_out, Scalar* kl_out) {
  const auto& arch = params.arch();
  const Index b = batch.cols();
  if (b < 1) throw StructuralError("loss_and_gradient: empty batch");
  const Scalar inv_b = 1.0 / static_cast<Scalar>(b);

  const ForwardPass f = forward(params, batch, &noise);

  const Scalar rec = (batch - f.x_rec).cwiseAbs().sum() * inv_b;
  const Scalar kl = (-0.5 * (1.0 + f.logv.array() - f.mu.array().square() -
                             f.logv.array().exp()))
                        .sum() *
                    inv_b;
  const Scalar loss = rec + beta * kl;
  if (rec_out) *rec_out = rec;
  if (kl_out) *kl_out = kl;

  grad_out = Vector::Zero(params.size());
  auto grad_tensor = [&](std::size_t slot) {
    const auto& s = params.slots()[slot];
    return Eigen::Map<Matrix>(grad_out.data() + s.offset, s.rows, s.cols);
  };

  const std::size_t n_enc = params.encoder_layer_count();
  const std::size_t n_dec = params.decoder_layer_count();
  const std::size_t dec_base = 2 * (n_enc + 2);

  // d loss / d x_rec, through the output sigmoid.
  Matrix d = (f.x_rec - batch)
                 .unaryExpr([](Scalar v) {
                   return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                 }) *
             inv_b;
  d = d.cwiseProduct(
      f.x_rec.cwiseProduct((1.0 - f.x_rec.array()).matrix()));

  // Decoder, last layer to first.
  for (std::size_t l = n_dec; l-- > 0;) {
    grad_tensor(dec_base + 2 * l) += d * f.decoder_h[l].transpose();
    grad_tensor(dec_base + 2 * l + 1) += d.rowwise().sum();
    Matrix d_prev = params.tensor(dec_base + 2 * l).transpose() * d;
    if (l > 0)
      d_prev = d_prev.cwiseProduct(activation_grad(f.decoder_h[l], arch.activation));
    d = std::move(d_prev);
  }

  // d is now d loss / d z. Add the KL terms at mu / logv.
  Matrix d_mu = d + (beta * inv_b) * f.mu;
  Matrix d_logv = 0.5 * d.cwiseProduct(noise).cwiseProduct(f.std) +
                  (0.5 * beta * inv_b) * (f.logv.array().exp() - 1.0).matrix();

  const std::size_t mu_slot = 2 * n_enc;
  const std::size_t lv_slot = 2 * n_enc + 2;
  grad_tensor(mu_slot) += d_mu * f.encoder_h.back().transpose();
  grad_tensor(mu_slot + 1) += d_mu.rowwise().sum();
  grad_tensor(lv_slot) += d_logv * f.encoder_h.back().transpose();
  grad_tensor(lv_slot + 1) += d_logv.rowwise().sum();

  Matrix d_h = params.tensor(mu_slot).transpose() * d_mu +
               params.tensor(lv_slot).transpose() * d_logv;

  // Encoder, last layer to first.
  for (std::size_t l = n_enc; l-- > 0;) {
    Matrix d_a =
        d_h.cwiseProduct(activation_grad(f.encoder_h[l + 1], arch.activation));
    grad_tensor(2 * l) += d_a * f.encoder_h[l].transpose();
    grad_tensor(2 * l + 1) += d_a.rowwise().sum();
    if (l > 0) d_h = params.tensor(2 * l).transpose() * d_a;
  }

  return loss;
}

Scalar evaluate_loss(const VaeParams& params, const Matrix& data, Scalar beta) {
  const ForwardPass f = forward(params, data, nullptr);
  const Scalar inv_n = 1.0 / static_cast<Scalar>(data.cols());
  const Scalar rec = (data - f.x_rec).cwiseAbs().sum() * inv_n;
  const Scalar kl = (-0.5 * (1.0 + f.logv.array() - f.mu.array().square() -
                             f.logv.array().exp()))
                        .sum() *
                    inv_n;
  return rec + beta * kl;
}

void fit_inplace(VaeParams& params, AdamState& adam, const Matrix& train_data,
                 const Matrix& val_data, const TrainConfig& cfg,
                 const BetaSchedule& sched, const RngStream& rng,
                 int start_epoch, std::vector<EpochLog>& log,
                 const EpochCallback& on_epoch) {
  if (train_data.cols() < 1 || val_data.cols() < 1)
    throw StructuralError("fit: training and validation data must be non-empty");
  const Index n = train_data.cols();
  const Index batch_size = std::min(cfg.batch_size, n);

  std::vector<Scalar> val_history;
  for (const auto& entry : log) val_history.push_back(entry.val_loss);
  Scalar lr = log.empty() ? cfg.initial_lr : log.back().lr;
  adam.learning_rate = lr;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.epsilon = cfg.adam_epsilon;

  Vector grad(params.size());
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const Scalar beta = beta_at_epoch(sched, epoch);
    RngStream epoch_rng = rng.split("epoch").split(
        static_cast<std::uint64_t>(epoch));
    RngStream shuffle_rng = epoch_rng.split("shuffle");
    RngStream noise_rng = epoch_rng.split("noise");
    const std::vector<Index> order = shuffle_rng.shuffled_indices(n);

    Scalar epoch_rec = 0.0, epoch_kl = 0.0;
    Index n_batches = 0;
    for (Index start = 0; start < n; start += batch_size) {
      const Index b = std::min(batch_size, n - start);
      Matrix batch(train_data.rows(), b);
      for (Index i = 0; i < b; ++i)
        batch.col(i) = train_data.col(order[static_cast<std::size_t>(start + i)]);
      Matrix noise(params.arch().latent_dim, b);
      for (Index c = 0; c < b; ++c)
        noise.col(c) = noise_rng.standard_normal_vector(params.arch().latent_dim);

      Scalar rec = 0.0, kl = 0.0;
      const Scalar loss =
          loss_and_gradient(params, batch, noise, beta, grad, &rec, &kl);
      if (!std::isfinite(loss)) {
        throw NumericError("fit: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches));
      }
      if (cfg.frozen_encoder_layers > 0) {
        const std::size_t frozen =
            std::min(cfg.frozen_encoder_layers, params.encoder_layer_count());
        for (std::size_t s = 0; s < 2 * frozen; ++s) {
          const auto& slot = params.slots()[s];
          grad.segment(slot.offset, slot.rows * slot.cols).setZero();
        }
      }
      adam.learning_rate = lr;
      adam_step(params.flat(), grad, adam);
      epoch_rec += rec;
      epoch_kl += kl;
      ++n_batches;
    }

    const Scalar val_loss = evaluate_loss(params, val_data, beta);
    val_history.push_back(val_loss);
    lr = lr_on_plateau(val_history, lr, cfg.plateau_patience);
    log.push_back({epoch, epoch_rec / static_cast<Scalar>(n_batches),
                   epoch_kl / static_cast<Scalar>(n_batches), beta, lr,
                   val_loss});
    if (on_epoch) on_epoch(params, adam, log);
  }
}

std::pair<VaeParams, std::vector<EpochLog>> fit(const VaeArchitecture& arch,
                                                const Matrix& train_data,
                                                const Matrix& val_data,
                                                const TrainConfig& cfg,
                                                const BetaSchedule& sched,
                                                const RngStream& rng) {
  RngStream init_rng = rng.split("vae-init");
  VaeParams params = init_params(arch, init_rng);
  AdamState adam = AdamState::make(params.size(), cfg.initial_lr,
                                   cfg.adam_beta1, cfg.adam_beta2,
                                   cfg.adam_epsilon);
  std::vector<EpochLog> log;
  fit_inplace(params, adam, train_data, val_data, cfg, sched, rng, 0, log);
  return {std::move(params), std::move(log)};
}

RowMatrix extract_embeddings(const VaeParams& params, const Matrix& images) {
  const ForwardPass f = forward(params, images, nullptr);
  return f.mu.transpose();
}

RowMatrix extract_sampled_embeddings(const VaeParams& params,
                                     const Matrix& images, RngStream& rng) {
  const ForwardPass f = forward(params, images, nullptr);
  Matrix noise(f.mu.rows(), f.mu.cols());
  for (Index c = 0; c < noise.cols(); ++c)
    noise.col(c) = rng.standard_normal_vector(noise.rows());
  return (f.mu + f.std.cwiseProduct(noise)).transpose();
}

namespace {

constexpr char kCheckpointMagic[4] = {'L', 'V', 'C', '1'};

void write_f64_block(std::ofstream& out, const Vector& v) {
  // Assumes a little-endian host (asserted at configure time by the targets
  // this project supports).
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(Scalar)) * v.size());
}

Vector read_f64_block(std::ifstream& in, Index n) {
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(Scalar)) * n);
  if (!in) throw DataError("checkpoint: truncated parameter block");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const VaeParams& params,
                     const BetaSchedule& sched, const std::string& config_digest,
                     std::uint64_t seed, int epoch, const AdamState* adam) {
  json header;
  header["version"] = 1;
  header["arch"] = {{"input_size", params.arch().input_size},
                    {"encoder_widths", params.arch().encoder_widths},
                    {"latent_dim", params.arch().latent_dim},
                    {"decoder_widths", params.arch().decoder_widths},
                    {"activation", params.arch().activation}};
  header["beta_schedule"] = {{"warmup_epochs", sched.warmup_epochs},
                             {"base", sched.base},
                             {"growth", sched.growth},
                             {"absolute_exponent", sched.absolute_exponent}};
  header["config_digest"] = config_digest;
  header["seed"] = seed;
  header["epoch"] = epoch;
  header["n_params"] = params.size();
  header["has_adam"] = adam != nullptr;
  if (adam) {
    header["adam"] = {{"step_count", adam->step_count},
                      {"learning_rate", adam->learning_rate},
                      {"beta1", adam->beta1},
                      {"beta2", adam->beta2},
                      {"epsilon", adam->epsilon}};
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_len));
  write_f64_block(out, params.flat());
  if (adam) {
    write_f64_block(out, adam->first_moment);
    write_f64_block(out, adam->second_moment);
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw DataError("not a checkpoint file: " + path);
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("checkpoint: truncated header");
  const json header = json::parse(header_text);

  VaeArchitecture arch;
  arch.input_size = header["arch"]["input_size"].get<Index>();
  arch.encoder_widths = header["arch"]["encoder_widths"].get<std::vector<Index>>();
  arch.latent_dim = header["arch"]["latent_dim"].get<Index>();
  arch.decoder_widths = header["arch"]["decoder_widths"].get<std::vector<Index>>();
  arch.activation = header["arch"]["activation"].get<std::string>();

  Checkpoint ckpt;
  ckpt.params = VaeParams(arch);
  if (header["n_params"].get<Index>() != ckpt.params.size())
    throw DataError("checkpoint: parameter count does not match architecture");
  ckpt.params.flat() = read_f64_block(in, ckpt.params.size());

  ckpt.schedule.warmup_epochs = header["beta_schedule"]["warmup_epochs"].get<int>();
  ckpt.schedule.base = header["beta_schedule"]["base"].get<Scalar>();
  ckpt.schedule.growth = header["beta_schedule"]["growth"].get<Scalar>();
  ckpt.schedule.absolute_exponent =
      header["beta_schedule"]["absolute_exponent"].get<bool>();
  ckpt.config_digest = header["config_digest"].get<std::string>();
  ckpt.seed = header["seed"].get<std::uint64_t>();
  ckpt.epoch = header["epoch"].get<int>();

  if (header.value("has_adam", false)) {
    AdamState adam;
    adam.step_count = header["adam"]["step_count"].get<long>();
    adam.learning_rate = header["adam"]["learning_rate"].get<Scalar>();
    adam.beta1 = header["adam"]["beta1"].get<Scalar>();
    adam.beta2 = header["adam"]["beta2"].get<Scalar>();
    adam.epsilon = header["adam"]["epsilon"].get<Scalar>();
    adam.first_moment = read_f64_block(in, ckpt.params.size());
    adam.second_moment = read_f64_block(in, ckpt.params.size());
    ckpt.adam = std::move(adam);
  }
  return ckpt;
}

void write_training_log_csv(const std::string& path,
                            const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training log: " + path);
  out << "epoch,rec_loss,kl_loss,beta,lr,val_loss\n";
  out.precision(12);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.rec_loss << ',' << e.kl_loss << ',' << e.beta
        << ',' << e.lr << ',' << e.val_loss << '\n';
  }
}

}  // namespace cxr
