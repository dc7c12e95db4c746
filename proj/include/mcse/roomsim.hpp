#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mcse/rng.hpp"
#include "mcse/wave.hpp"

namespace mcse {

using Vec3 = std::array<double, 3>;

struct Room {
  double width = 0.0;   // x extent, meters
  double length = 0.0;  // y extent
  double height = 0.0;  // z extent
  double t60 = 0.0;     // seconds
};

// Uniform amplitude reflection coefficient from Sabine's formula,
// beta = sqrt(1 - min(1, 0.161 V / (S t60))). Very small t60 saturates the
// absorption at 1 and yields beta = 0 (anechoic).
double sabine_beta(const Room& room);

struct ArrayPose {
  Vec3 center{0, 0, 0};
  double rotation = 0.0;  // radians, bearing of channel 0 and of the target
  int channel_count = 0;
  double diameter = 0.10;

  std::vector<Vec3> mic_positions() const;
  // Point at `bearing_deg` relative to the array orientation, `distance`
  // meters out, at array height.
  Vec3 point_at(double bearing_deg, double distance) const;
};

struct Scenario {
  Room room;
  ArrayPose array;
  Vec3 target{0, 0, 0};
  std::vector<Vec3> interferers;
  std::uint64_t rng_seed = 0;
};

struct Scene {
  MultiWave mixture;     // C x N
  MultiWave target_ref;  // 1 x N, delay-aligned dry target at channel 0
  MultiWave noise_ref;   // C x N, summed interference at the microphones
  double snr_db = 0.0;   // +inf when there is no noise
};

struct SamplerConfig {
  double width_min = 2.5, width_max = 5.0;
  double length_min = 3.0, length_max = 9.0;
  double height_min = 2.2, height_max = 3.5;
  double t60_min = 0.2, t60_max = 0.5;
  int channels_min = 2, channels_max = 5;
  double array_wall_margin = 1.0;
  double array_height = 1.5;
  double array_diameter = 0.10;
  double target_dist_min = 0.3, target_dist_max = 1.0;
  int interferer_count = 5;
  double interferer_min_dist = 1.0;
  double clear_sector_deg = 20.0;  // kept free to either side of the target
  double interferer_height_mean = 1.6, interferer_height_std = 0.08;
  double source_wall_margin = 0.1;
};

struct RenderConfig {
  // Reflection order for the image sum: ceil(c*t60*horizon/min_dim), capped.
  int max_order_cap = 100;
  double horizon_factor = 1.1;
};

// Image-source RIR with uniform Sabine reflection coefficient, 1/distance
// spreading and 81-tap windowed-sinc fractional delays. max_order bounds the
// total reflection count of an image.
std::vector<double> image_source_rir(const Room& room, const Vec3& src,
                                     const Vec3& mic, int max_order,
                                     int sample_rate = 16000);

// Rejection-samples a scenario satisfying every geometric constraint; throws
// after 10^4 failed attempts. Deterministic in `seed`.
Scenario sample_scenario(std::uint64_t seed, const SamplerConfig& config);

// Convolves dry signals with the scenario's RIRs and mixes. Dry signals are
// mono waves at a common sample rate, normalized to unit RMS first;
// everything is scaled so the target's direct path at channel 0 has unit
// gain. Outputs are cropped to the dry target's length, so interferer
// signals must cover at least that length (loop them beforehand).
Scene render_scene(const Scenario& scenario, const MultiWave& target_speech,
                   const std::vector<MultiWave>& interferer_speech,
                   const RenderConfig& config = {});

// Free-field direct-path rendering from a given incidence angle, with the
// same channel-0 unit-gain normalization as rendered scenes. At angle 0 the
// geometry matches the training target placement.
MultiWave anechoic_probe(const ArrayPose& array, double angle_deg,
                         double distance, const MultiWave& signal);

// Directory of mono WAV files, ordered by filename. Utterances are looped
// up to a requested minimum length.
class DryCorpus {
 public:
  explicit DryCorpus(const std::string& directory);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  MultiWave utterance(std::size_t i, std::int64_t min_len) const;
  int sample_rate() const { return sample_rate_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> signals_;
  int sample_rate_ = 16000;
};

}  // namespace mcse
