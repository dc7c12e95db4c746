#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcse/jnf_net.hpp"
#include "mcse/rng.hpp"
#include "mcse/stft.hpp"
#include "mcse/wave.hpp"

namespace mcse {

// One training example: the multi-channel mixture the network sees, the
// propagation-delay-aligned dry target, and the ground-truth noise at the
// reference channel. All three share sample rate and length.
struct TrainScene {
  MultiWave mixture;     // C channels (1 for the post-filter)
  MultiWave target_ref;  // 1 channel
  MultiWave noise_ref;   // 1 channel
};

struct TrainConfig {
  int batch_size = 6;
  int max_epochs = 250;
  // Zero is allowed and performs no update; the degenerate case is part of
  // the optimizer contract.
  double learning_rate = 0.001;
  double crop_seconds = 3.0;
  double alpha = 10.0;
  std::uint64_t seed = 0;
  int patience = 10;  // early stop after this many epochs without val gain
  // Off when the ground-truth noise is unknown (post-filter training); only
  // the speech terms of the loss are summed then.
  bool use_noise_terms = true;
  FrameParams frame;

  void validate() const;
  std::int64_t crop_samples() const;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Published update rule with bias-corrected first and second moments. One
// instance owns the moment state for a fixed parameter list.
class Adam {
 public:
  Adam(const std::vector<std::vector<int>>& shapes, AdamConfig config = {});

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

// Aligned crop starting at a fixed offset; shared by all three signals.
TrainScene crop_at(const TrainScene& scene, std::int64_t offset,
                   std::int64_t length);
// Uniformly random offset; a scene of exactly the crop length keeps offset 0.
TrainScene crop_sample(const TrainScene& scene, double seconds, Rng& rng);

// Scalar terms of the two-domain l1 loss; total carries the alpha weighting,
// the individual terms are unweighted. wave_s/wave_v hold the synthesized
// estimates the time terms compare against. Noise nodes are -1 when the
// noise terms are disabled.
struct LossNodes {
  Tape::NodeId total = -1;
  Tape::NodeId time_s = -1;
  Tape::NodeId mag_s = -1;
  Tape::NodeId time_v = -1;
  Tape::NodeId mag_v = -1;
  Tape::NodeId wave_s = -1;
  Tape::NodeId wave_v = -1;
};

// Decompresses the mask, applies it to the reference channel (speech branch
// directly, noise branch through the complementary mask), and compares both
// the synthesized waves and the masked magnitudes against the targets. The
// target times must match the synthesis length hop*(T-1) + window exactly.
LossNodes build_loss(Tape& tape, const MaskNodes& mask,
                     const Spectrogram& noisy_ref,
                     const std::vector<double>& target_time,
                     const std::vector<double>& noise_time, double alpha,
                     bool use_noise_terms);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  NetParams best;             // validation-loss argmin over logged epochs
  int best_epoch = 0;         // 0 when no finite epoch completed
  std::vector<EpochLog> log;
  bool aborted_nan = false;
};

// Mini-batch Adam with fresh random crops (and fresh NSF permutations) per
// sample and epoch. Validation uses offset-0 crops and per-scene fixed
// permutations so that epochs stay comparable; gradients accumulate in batch
// order, so runs are deterministic given the seed.
TrainResult train(const NetSpec& spec,
                  const std::vector<TrainScene>& train_scenes,
                  const std::vector<TrainScene>& val_scenes,
                  const TrainConfig& config);

// CSV: epoch,train_loss,val_loss,wall_seconds.
void write_training_log(const std::string& path,
                        const std::vector<EpochLog>& log);

}  // namespace mcse
