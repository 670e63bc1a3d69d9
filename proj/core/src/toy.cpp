#include "ipakit/toy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ipakit/error.hpp"

namespace ipakit::ctc {
namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Row t of the context window as one flat input vector.
void splice(const FeatureFrames& x, std::size_t t, std::size_t context, std::vector<double>& out) {
  const std::size_t d = x.cols();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k <= 2 * context; ++k) {
    const auto src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(context);
    if (src < 0 || src >= static_cast<std::ptrdiff_t>(x.rows())) continue;
    const auto row = x.row(static_cast<std::size_t>(src));
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
}

// Accumulate d loss / d (weights, bias) from d loss / d logits.
void backprop(const ToyModel& model, const FeatureFrames& x, const Matrix& grad_logits, double scale,
              Matrix& grad_w, std::vector<double>& grad_b) {
  std::vector<double> input(model.weights.rows());
  const std::size_t V = model.vocab_size();
  for (std::size_t t = 0; t < x.rows(); ++t) {
    splice(x, t, model.context, input);
    const auto g = grad_logits.row(t);
    for (std::size_t v = 0; v < V; ++v) grad_b[v] += scale * g[v];
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (input[i] == 0.0) continue;
      const double xi = scale * input[i];
      auto w_row = grad_w.row(i);
      for (std::size_t v = 0; v < V; ++v) w_row[v] += xi * g[v];
    }
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

FeatureFrames spec_mask(const FeatureFrames& x, std::uint64_t seed, const LossConfig& config) {
  FeatureFrames out = x;
  const std::size_t T = x.rows();
  if (T == 0 || config.mask_count == 0 || !(config.mask_max_fraction > 0.0)) return out;
  const auto budget = static_cast<std::size_t>(std::floor(config.mask_max_fraction * static_cast<double>(T) + 1e-9));
  if (budget == 0) return out;

  // Each span is at most budget / masks frames wide, so even disjoint spans
  // stay within the budget.
  const std::size_t masks = std::min(config.mask_count, budget);
  const std::size_t max_width = budget / masks;
  std::mt19937_64 rng(seed);
  for (std::size_t m = 0; m < masks; ++m) {
    const std::size_t width = uniform_index(rng, 0, max_width);
    const std::size_t start = uniform_index(rng, 0, T - width);
    for (std::size_t t = start; t < start + width; ++t) {
      auto row = out.row(t);
      std::fill(row.begin(), row.end(), 0.0);
    }
  }
  return out;
}

std::vector<Utterance> make_separable_dataset(const SyntheticConfig& config, std::uint64_t seed) {
  if (config.vocab_size < 2) throw Error(ErrorCode::kInvalidArgument, "vocab_size must be >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, config.noise_sigma);
  const auto V = static_cast<TokenId>(config.vocab_size);

  std::vector<Utterance> data;
  data.reserve(config.utterances);
  while (data.size() < config.utterances) {
    const std::size_t L = uniform_index(rng, 1, config.max_labels);
    LabelSequence labels(L);
    for (auto& l : labels) l = static_cast<TokenId>(uniform_index(rng, 1, static_cast<std::size_t>(V - 1)));

    std::vector<TokenId> classes(uniform_index(rng, 0, 2), kBlankId);
    for (std::size_t i = 0; i < L; ++i) {
      if (i > 0) {
        const std::size_t min_gap = labels[i] == labels[i - 1] ? 1 : 0;
        classes.insert(classes.end(), uniform_index(rng, min_gap, 2), kBlankId);
      }
      classes.insert(classes.end(), uniform_index(rng, 2, 3), labels[i]);
    }
    classes.insert(classes.end(), uniform_index(rng, 0, 2), kBlankId);
    if (classes.size() > config.max_frames) continue;

    FeatureFrames frames(classes.size(), config.vocab_size);
    for (std::size_t t = 0; t < classes.size(); ++t) {
      for (std::size_t v = 0; v < config.vocab_size; ++v) {
        frames(t, v) = (static_cast<TokenId>(v) == classes[t] ? 1.0 : 0.0) + noise(rng);
      }
    }
    data.push_back({std::move(frames), std::move(labels)});
  }
  return data;
}

Matrix ToyModel::logits(const FeatureFrames& x) const {
  const std::size_t V = vocab_size();
  Matrix out(x.rows(), V);
  std::vector<double> input(weights.rows());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    splice(x, t, context, input);
    auto row = out.row(t);
    std::copy(bias.begin(), bias.end(), row.begin());
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (input[i] == 0.0) continue;
      const auto w = weights.row(i);
      for (std::size_t v = 0; v < V; ++v) row[v] += input[i] * w[v];
    }
  }
  return out;
}

ToyModel init_toy_model(std::size_t input_dim, std::size_t vocab_size, std::size_t context, double init_scale,
                        std::mt19937_64& rng) {
  ToyModel model;
  model.input_dim = input_dim;
  model.context = context;
  model.weights = Matrix((2 * context + 1) * input_dim, vocab_size);
  model.bias.assign(vocab_size, 0.0);
  std::normal_distribution<double> init(0.0, init_scale);
  for (double& w : model.weights.data()) w = init(rng);
  return model;
}

double exact_match_rate(const ToyModel& model, const std::vector<Utterance>& data) {
  if (data.empty()) return 0.0;
  std::size_t exact = 0;
  for (const auto& u : data) exact += greedy_decode(model.log_probs(u.frames)) == u.labels;
  return static_cast<double>(exact) / static_cast<double>(data.size());
}

TrainRun train_toy(const std::vector<Utterance>& data, const TrainConfig& config, std::uint64_t seed,
                   const std::function<void(const StepRecord&)>& on_step) {
  if (data.empty()) throw Error(ErrorCode::kEmptyInput, "training set is empty");
  const std::size_t d = data.front().frames.cols();
  std::size_t V = 0;
  for (const auto& u : data) {
    if (u.frames.cols() != d) throw Error(ErrorCode::kShapeMismatch, "utterances differ in feature dimension");
    for (TokenId l : u.labels) V = std::max(V, static_cast<std::size_t>(l) + 1);
  }
  V = std::max(V, d);  // one-hot frames cover the whole vocabulary

  std::mt19937_64 rng(seed);
  TrainRun run{init_toy_model(d, V, config.context, config.init_scale, rng), {}};
  ToyModel& model = run.model;
  const double inv_n = 1.0 / static_cast<double>(data.size());

  for (std::size_t step = 0; step < config.steps; ++step) {
    Matrix grad_w(model.weights.rows(), V);
    std::vector<double> grad_b(V, 0.0);
    StepRecord record;
    record.step = step;
    try {
      record.decode_exact_match_rate = exact_match_rate(model, data);
    } catch (const Error& e) {
      // Overflowed logits fail the log-prob row check before any loss exists.
      if (e.code() != ErrorCode::kInvalidArgument) throw;
      throw Error(ErrorCode::kDivergence, "logits became non-finite at step " + std::to_string(step), step);
    }

    for (const auto& u : data) {
      const FeatureFrames view_a = spec_mask(u.frames, rng(), config.loss);
      const FeatureFrames view_b = spec_mask(u.frames, rng(), config.loss);
      const auto result = cr_ctc_loss(model.log_probs(view_a), model.log_probs(view_b), u.labels, config.loss);
      record.loss += inv_n * result.loss;
      record.ctc_a += inv_n * result.ctc_a;
      record.ctc_b += inv_n * result.ctc_b;
      record.cr += inv_n * result.cr;
      backprop(model, view_a, result.grad_a, inv_n, grad_w, grad_b);
      backprop(model, view_b, result.grad_b, inv_n, grad_w, grad_b);
    }
    if (!std::isfinite(record.loss)) {
      throw Error(ErrorCode::kDivergence, "loss became non-finite at step " + std::to_string(step), step);
    }

    grad_w *= config.learning_rate;
    for (std::size_t i = 0; i < model.weights.data().size(); ++i) model.weights.data()[i] -= grad_w.data()[i];
    for (std::size_t v = 0; v < V; ++v) model.bias[v] -= config.learning_rate * grad_b[v];

    if (on_step) on_step(record);
    run.log.push_back(record);
  }
  return run;
}

}  // namespace ipakit::ctc
