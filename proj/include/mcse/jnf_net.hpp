#pragma once

#include <string>
#include <vector>

#include "mcse/mask.hpp"
#include "mcse/numerics/tape.hpp"
#include "mcse/rng.hpp"
#include "mcse/stft.hpp"

namespace mcse {

// The filter family: narrow-band (T), wide-band (F), wide-then-narrow (FT),
// and the single-channel post-filter (PF). nsf turns on the sequence-shuffle
// wrappers that remove order sensitivity from the recurrence.
enum class NetMode { T, F, FT, PF };

std::string mode_name(NetMode mode);
NetMode mode_from_name(const std::string& name);

struct NetSpec {
  NetMode mode = NetMode::FT;
  bool nsf = false;
  int hidden1 = 64;
  int hidden2 = 32;
  bool bidirectional = true;
  int channels = 3;
  int bins = 257;
  bool freq_index_augment = false;  // forced on when nsf

  void validate() const;
  bool augmented() const { return nsf || freq_index_augment; }
  // 2C per element (+1 when augmented); PF stacks the spectrum: 2F.
  int input_features() const;
  int l1_out() const { return bidirectional ? 2 * hidden1 : hidden1; }
  int l2_out() const { return bidirectional ? 2 * hidden2 : hidden2; }
  // Two mask components per (k,i); PF emits the whole spectrum per frame.
  int ff_out() const;
};

std::string netspec_to_json_string(const NetSpec& spec);
NetSpec netspec_from_json_string(const std::string& text);

enum class SeqAxis { Time, Frequency };

// Batch of equal-length sequences; the tag records which physical axis runs
// along the sequence dimension.
struct SeqBatch {
  Tensor data;  // (batch, seq, feat)
  SeqAxis seq_axis = SeqAxis::Time;
};

// T: (F, T, 2C) sequences over time; F and FT: (T, F, 2C) sequences over
// frequency; PF: (1, T, 2F) with the single channel stacked along frequency.
// Feature order per element is (Re, Im) pairs in channel (or bin) order.
SeqBatch arrange(const Spectrogram& spec, NetMode mode);
Spectrogram inverse_arrange(const SeqBatch& batch, NetMode mode,
                            const FrameParams& params, int channels);

// (T, F, feat) -> (F, T, feat) element permutation between the layers of FT.
SeqBatch ft_switch(const SeqBatch& x);

SeqBatch shuffle_wrap(const SeqBatch& x, const std::vector<int>& sigma);
SeqBatch unshuffle(const SeqBatch& y, const std::vector<int>& sigma);

// Appends k/(F-1) to every element's features; the bin index comes from the
// batch axis (mode T) or the sequence axis (modes F, FT).
SeqBatch freq_index_augment(const SeqBatch& x, NetMode mode);

struct NetParams {
  NetSpec spec;
  std::vector<Tensor> tensors;  // canonical order, see tensor_names

  static std::vector<std::string> tensor_names(const NetSpec& spec);
  static std::vector<std::vector<int>> tensor_shapes(const NetSpec& spec);
  // uniform(-1/sqrt(H), 1/sqrt(H)) per layer, +1 on the forget-gate bias.
  static NetParams init(const NetSpec& spec, Rng& rng);
};

// JSON header (format version, netspec, tensor names and shapes) followed by
// the raw float32 little-endian payload in header order.
void save_checkpoint(const std::string& path, const NetParams& params);
NetParams load_checkpoint(const std::string& path);

// Sequence permutations for NSF runs. T/F wrap the whole recurrent stack in
// one permutation; FT wraps each layer along its own axis.
struct NsfPerms {
  std::vector<int> l1;
  std::vector<int> l2;  // FT only
};

NsfPerms draw_nsf_perms(const NetSpec& spec, int frames, Rng& rng);

struct MaskNodes {
  Tape::NodeId re = -1;  // (F, T)
  Tape::NodeId im = -1;  // (F, T)
};

// Records the forward graph on the tape. param_ids are tape inputs holding
// the canonical tensors; the returned nodes hold the compressed mask.
MaskNodes forward(Tape& tape, const std::vector<Tape::NodeId>& param_ids,
                  const NetSpec& spec, const Spectrogram& input,
                  const NsfPerms& perms = {});

// One-shot inference on a private tape.
ComplexMask infer_mask(const NetParams& params, const Spectrogram& input,
                       const NsfPerms& perms = {});

}  // namespace mcse
