#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/numerics.hpp"
#include "cxr/rng.hpp"
#include "cxr/types.hpp"

namespace cxr {

/// Fully-connected beta-VAE. The encoder maps pixels through the hidden
/// widths to a feature width F, then two linear heads give the latent mean
/// and log-variance; the decoder mirrors back to pixel space with a final
/// sigmoid so reconstructions stay in [0,1].
struct VaeArchitecture {
  Index input_size = 0;                 // flattened pixel count
  std::vector<Index> encoder_widths;    // hidden widths, last entry is F
  Index latent_dim = 100;
  std::vector<Index> decoder_widths = {512};
  std::string activation = "tanh";      // "tanh" or "relu"

  void validate() const;
};

/// Flat parameter vector plus the (offset, rows, cols) registry of every
/// weight and bias in it.
class VaeParams {
 public:
  VaeParams() = default;
  explicit VaeParams(VaeArchitecture arch);

  const VaeArchitecture& arch() const { return arch_; }
  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }
  Index size() const { return flat_.size(); }

  struct TensorSlot {
    Index offset;
    Index rows;
    Index cols;  // 1 for biases
  };
  // Slot order: encoder layers (W,b)..., mu head (W,b), logvar head (W,b),
  // decoder layers (W,b)...
  const std::vector<TensorSlot>& slots() const { return slots_; }

  Eigen::Map<Matrix> tensor(std::size_t slot);
  Eigen::Map<const Matrix> tensor(std::size_t slot) const;

  std::size_t encoder_layer_count() const;  // excluding the two heads
  std::size_t decoder_layer_count() const;

 private:
  VaeArchitecture arch_;
  std::vector<TensorSlot> slots_;
  Vector flat_;
};

/// Glorot-uniform weights, zero biases.
VaeParams init_params(const VaeArchitecture& arch, RngStream& rng);

struct LatentCode {
  Vector mean;
  Vector log_variance;
  Vector sample;  // mean + exp(0.5*log_variance) .* noise
  Vector noise;   // recorded for gradient replay
};

/// Deterministic encoder pass for one flattened image.
std::pair<Vector, Vector> encode(const VaeParams& params, const Vector& image);

LatentCode reparameterize(const Vector& mean, const Vector& log_variance,
                          RngStream& rng);

Vector decode(const VaeParams& params, const Vector& z);

/// Sum of absolute pixel differences.
Scalar reconstruction_loss(const Vector& x, const Vector& x_rec);

/// KL(q(z|x) || N(0,I)) = -0.5 * sum(1 + logv - mu^2 - exp(logv)).
Scalar kl_loss(const Vector& mean, const Vector& log_variance);

Scalar total_loss(Scalar rec, Scalar kl, Scalar beta);

struct BetaSchedule {
  int warmup_epochs = 3;
  Scalar base = 0.005;
  Scalar growth = 1.2;
  // true: exponent is the absolute 0-based epoch index; false: it restarts
  // at zero after the warm-up.
  bool absolute_exponent = true;
};

Scalar beta_at_epoch(const BetaSchedule& sched, int epoch);

/// Halve the rate when the last `patience` entries of the validation-loss
/// history show no strict improvement over the best before them.
Scalar lr_on_plateau(const std::vector<Scalar>& history, Scalar current_lr,
                     int patience);

struct TrainConfig {
  int epochs = 10;
  Scalar initial_lr = 7.5e-4;
  int plateau_patience = 1;
  Index batch_size = 64;
  Scalar adam_beta1 = 0.9;
  Scalar adam_beta2 = 0.999;
  Scalar adam_epsilon = 1e-7;
  // First k encoder layers excluded from updates (frozen feature extractor).
  std::size_t frozen_encoder_layers = 0;
};

struct EpochLog {
  int epoch;
  Scalar rec_loss;
  Scalar kl_loss;
  Scalar beta;
  Scalar lr;
  Scalar val_loss;
};

/// Mean-over-batch loss of Eq.-style objective (pixel-sum reconstruction +
/// beta * KL) and its gradient w.r.t. every parameter, with the
/// reparameterization noise held fixed. batch and noise are column-per-sample.
Scalar loss_and_gradient(const VaeParams& params, const Matrix& batch,
                         const Matrix& noise, Scalar beta, Vector& grad_out,
                         Scalar* rec_out = nullptr, Scalar* kl_out = nullptr);

/// Deterministic loss of a dataset at noise = 0 (z = mean).
Scalar evaluate_loss(const VaeParams& params, const Matrix& data, Scalar beta);

std::pair<VaeParams, std::vector<EpochLog>> fit(const VaeArchitecture& arch,
                                                const Matrix& train_data,
                                                const Matrix& val_data,
                                                const TrainConfig& cfg,
                                                const BetaSchedule& sched,
                                                const RngStream& rng);

using EpochCallback = std::function<void(
    const VaeParams&, const AdamState&, const std::vector<EpochLog>&)>;

/// Continue training from epoch `start_epoch` with an existing optimizer
/// state; fit() is this with fresh params, fresh Adam state and start 0.
/// RNG streams are re-split per epoch, so a resumed run replays the exact
/// draws of an uninterrupted one. on_epoch (if set) fires after each epoch,
/// e.g. to drop a resume checkpoint.
void fit_inplace(VaeParams& params, AdamState& adam, const Matrix& train_data,
                 const Matrix& val_data, const TrainConfig& cfg,
                 const BetaSchedule& sched, const RngStream& rng,
                 int start_epoch, std::vector<EpochLog>& log,
                 const EpochCallback& on_epoch = {});

/// One row of latent means per image column, in input order. N x D.
RowMatrix extract_embeddings(const VaeParams& params, const Matrix& images);
/// Variant drawing a stochastic latent sample per image instead of the mean.
RowMatrix extract_sampled_embeddings(const VaeParams& params,
                                     const Matrix& images, RngStream& rng);

/// Versioned binary checkpoint: JSON header (architecture, schedule, config
/// digest, seeds, epoch) + 64-bit little-endian parameter block, optionally
/// followed by the Adam moment blocks needed to resume mid-run.
void save_checkpoint(const std::string& path, const VaeParams& params,
                     const BetaSchedule& sched, const std::string& config_digest,
                     std::uint64_t seed, int epoch,
                     const AdamState* adam = nullptr);

struct Checkpoint {
  VaeParams params;
  BetaSchedule schedule;
  std::string config_digest;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::optional<AdamState> adam;
};

Checkpoint load_checkpoint(const std::string& path);

void write_training_log_csv(const std::string& path,
                            const std::vector<EpochLog>& log);

}  // namespace cxr
