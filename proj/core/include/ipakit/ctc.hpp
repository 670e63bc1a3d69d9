#pragma once

// CTC and consistency-regularized CTC (CR-CTC).
//
// Gradients are taken with respect to pre-softmax logits: a LogProbMatrix is
// the row-wise log-softmax of some logits, and every gradient returned here is
// d(loss)/d(logits).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ipakit/ipa.hpp"

namespace ipakit::ctc {

using ipa::kBlankId;
using ipa::TokenId;

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double scale);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// T x V frame-wise log-probabilities; blank is column 0.
/// Invariant: every row log-sum-exps to 0 within 1e-9, T >= 1, V >= 2.
class LogProbMatrix {
 public:
  static constexpr double kRowTolerance = 1e-9;

  // Validates the invariant; throws kInvalidArgument.
  explicit LogProbMatrix(Matrix log_probs);
  static LogProbMatrix from_logits(const Matrix& logits);

  std::size_t frames() const { return values_.rows(); }
  std::size_t vocab_size() const { return values_.cols(); }
  double operator()(std::size_t t, std::size_t v) const { return values_(t, v); }
  std::span<const double> row(std::size_t t) const { return values_.row(t); }
  const Matrix& matrix() const { return values_; }

  Matrix probabilities() const;

 private:
  Matrix values_;
};

double log_sum_exp(std::span<const double> values);
double log_add(double a, double b);

using LabelSequence = std::vector<TokenId>;

// Frames needed to emit `labels`: L plus one blank between each pair of equal
// neighbours.
std::size_t min_frames(std::span<const TokenId> labels);

/// -log P(labels | z) by the forward algorithm in log space.
/// Throws kInfeasibleLength when T < min_frames(labels), kInvalidArgument on
/// blank or out-of-range labels.
double ctc_loss(const LogProbMatrix& z, std::span<const TokenId> labels);

struct CtcResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits
};

/// Loss and exact gradient by forward-backward.
CtcResult ctc_loss_and_grad(const LogProbMatrix& z, std::span<const TokenId> labels);
Matrix ctc_grad(const LogProbMatrix& z, std::span<const TokenId> labels);

struct LossConfig {
  double alpha = 0.2;             // CR weight
  double lambda = 0.5;            // pseudo-label weight in the mixed loss
  double cr_scale = 0.5;          // constant in front of the two KL terms
  std::size_t mask_count = 20;    // time masks per view
  double mask_max_fraction = 0.3; // cap on masked frames / T
  double frame_rate_hz = 50.0;
};

struct ConsistencyResult {
  double loss = 0.0;
  Matrix grad_a;
  Matrix grad_b;
};

/// cr_scale * sum_t [ KL(sg(p_b,t) || p_a,t) + KL(sg(p_a,t) || p_b,t) ].
/// grad_a only carries the first term, grad_b only the second.
ConsistencyResult consistency_loss(const LogProbMatrix& z_a, const LogProbMatrix& z_b, double cr_scale = 0.5);

struct CrCtcResult {
  double loss = 0.0;
  double ctc_a = 0.0;
  double ctc_b = 0.0;
  double cr = 0.0;  // unweighted consistency term
  Matrix grad_a;
  Matrix grad_b;
};

/// (ctc(z_a) + ctc(z_b)) / 2 + alpha * consistency(z_a, z_b).
CrCtcResult cr_ctc_loss(const LogProbMatrix& z_a, const LogProbMatrix& z_b, std::span<const TokenId> labels,
                        const LossConfig& config);

/// labeled + lambda * pseudo.
double mixed_loss(double labeled_loss, double pseudo_loss, const LossConfig& config);

/// Greedy CTC decoding: argmax per frame (ties to the lower id), collapse
/// repeats, drop blanks.
LabelSequence greedy_decode(const LogProbMatrix& z);

}  // namespace ipakit::ctc
