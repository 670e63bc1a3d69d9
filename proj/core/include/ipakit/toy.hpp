#pragma once

// Desk-scale CR-CTC demonstration: synthetic frames, time masking and a linear
// frame classifier trained by full-batch gradient descent.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ipakit/ctc.hpp"

namespace ipakit::ctc {

/// Independent sub-seed for stream `stream` of a run seeded with `seed`
/// (splitmix64 finalizer), so one user seed drives data, masks and init.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// T x d synthetic acoustic features.
using FeatureFrames = Matrix;

/// Zero up to `mask_count` random contiguous time spans. The total number of
/// masked frames never exceeds floor(mask_max_fraction * T). Deterministic
/// given the seed.
FeatureFrames spec_mask(const FeatureFrames& x, std::uint64_t seed, const LossConfig& config);

struct Utterance {
  FeatureFrames frames;
  LabelSequence labels;
};

struct SyntheticConfig {
  std::size_t utterances = 200;
  std::size_t vocab_size = 8;  // including blank
  std::size_t max_frames = 30;
  std::size_t max_labels = 5;
  double noise_sigma = 0.1;
};

/// Separable CTC data: each frame is the one-hot of its underlying class
/// (a label or blank) plus Gaussian noise. Labels occupy runs of 2-3 frames;
/// equal neighbours are always separated by blank frames.
std::vector<Utterance> make_separable_dataset(const SyntheticConfig& config, std::uint64_t seed);

/// Linear frame classifier over a window of `context` frames on each side
/// (zero padded): logits_t = [x_{t-c} .. x_{t+c}] * weights + bias.
struct ToyModel {
  std::size_t input_dim = 0;
  std::size_t context = 0;
  Matrix weights;  // (2 * context + 1) * input_dim  x  V
  std::vector<double> bias;

  std::size_t vocab_size() const { return bias.size(); }
  Matrix logits(const FeatureFrames& x) const;
  LogProbMatrix log_probs(const FeatureFrames& x) const { return LogProbMatrix::from_logits(logits(x)); }
};

ToyModel init_toy_model(std::size_t input_dim, std::size_t vocab_size, std::size_t context, double init_scale,
                        std::mt19937_64& rng);

struct TrainConfig {
  LossConfig loss;
  std::size_t steps = 2000;
  double learning_rate = 0.5;
  std::size_t context = 1;
  double init_scale = 0.1;
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;  // batch means
  double ctc_a = 0.0;
  double ctc_b = 0.0;
  double cr = 0.0;
  double decode_exact_match_rate = 0.0;  // on clean frames, before the update
};

struct TrainRun {
  ToyModel model;
  std::vector<StepRecord> log;
};

/// Fraction of utterances whose greedy decode equals the labels exactly.
double exact_match_rate(const ToyModel& model, const std::vector<Utterance>& data);

/// Full-batch gradient descent on the batch-mean CR-CTC loss with two masked
/// views per utterance per step. Throws kDivergence (position = step) if the
/// loss stops being finite. `on_step`, if set, sees every record as it is made.
TrainRun train_toy(const std::vector<Utterance>& data, const TrainConfig& config, std::uint64_t seed,
                   const std::function<void(const StepRecord&)>& on_step = {});

}  // namespace ipakit::ctc
