#include "ipakit/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ipakit/error.hpp"

namespace ipakit::ctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_labels(std::span<const TokenId> labels, std::size_t vocab_size) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] <= kBlankId || static_cast<std::size_t>(labels[i]) >= vocab_size) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(labels[i]) + " at position " + std::to_string(i) +
                      " outside [1, " + std::to_string(vocab_size) + ")",
                  i);
    }
  }
}

void check_feasible(const LogProbMatrix& z, std::span<const TokenId> labels) {
  check_labels(labels, z.vocab_size());
  const std::size_t needed = min_frames(labels);
  if (z.frames() < needed) {
    throw Error(ErrorCode::kInfeasibleLength, std::to_string(labels.size()) + " labels need at least " +
                                                  std::to_string(needed) + " frames, got " +
                                                  std::to_string(z.frames()));
  }
}

// Blank-extended label sequence: blank, l1, blank, l2, ..., lL, blank.
std::vector<TokenId> extend(std::span<const TokenId> labels) {
  std::vector<TokenId> ext(2 * labels.size() + 1, kBlankId);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

bool can_skip(const std::vector<TokenId>& ext, std::size_t s) {
  return s >= 2 && ext[s] != kBlankId && ext[s] != ext[s - 2];
}

// alpha(t, s): log mass of prefixes ending in state s at frame t, emission at t
// included.
Matrix forward(const LogProbMatrix& z, const std::vector<TokenId>& ext) {
  const std::size_t T = z.frames();
  const std::size_t S = ext.size();
  Matrix alpha(T, S, kNegInf);
  alpha(0, 0) = z(0, static_cast<std::size_t>(ext[0]));
  if (S > 1) alpha(0, 1) = z(0, static_cast<std::size_t>(ext[1]));
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(ext, s)) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc + z(t, static_cast<std::size_t>(ext[s]));
    }
  }
  return alpha;
}

// beta(t, s): log mass of suffixes after frame t given state s at t, emission
// at t excluded.
Matrix backward(const LogProbMatrix& z, const std::vector<TokenId>& ext) {
  const std::size_t T = z.frames();
  const std::size_t S = ext.size();
  Matrix beta(T, S, kNegInf);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = beta(t + 1, s) + z(t + 1, static_cast<std::size_t>(ext[s]));
      if (s + 1 < S) acc = log_add(acc, beta(t + 1, s + 1) + z(t + 1, static_cast<std::size_t>(ext[s + 1])));
      if (s + 2 < S && can_skip(ext, s + 2)) {
        acc = log_add(acc, beta(t + 1, s + 2) + z(t + 1, static_cast<std::size_t>(ext[s + 2])));
      }
      beta(t, s) = acc;
    }
  }
  return beta;
}

double total_log_prob(const Matrix& alpha) {
  const std::size_t T = alpha.rows();
  const std::size_t S = alpha.cols();
  double lp = alpha(T - 1, S - 1);
  if (S > 1) lp = log_add(lp, alpha(T - 1, S - 2));
  return lp;
}

}  // namespace

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw Error(ErrorCode::kShapeMismatch, "matrix +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scale) {
  for (double& x : data_) x *= scale;
  return *this;
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double hi = *std::max_element(values.begin(), values.end());
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

LogProbMatrix::LogProbMatrix(Matrix log_probs) : values_(std::move(log_probs)) {
  if (values_.rows() < 1 || values_.cols() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "log-prob matrix must be at least 1 x 2");
  }
  for (std::size_t t = 0; t < values_.rows(); ++t) {
    const double lse = log_sum_exp(values_.row(t));
    if (!std::isfinite(lse) || std::abs(lse) > kRowTolerance) {
      throw Error(ErrorCode::kInvalidArgument, "row " + std::to_string(t) + " is not normalized", t);
    }
  }
}

LogProbMatrix LogProbMatrix::from_logits(const Matrix& logits) {
  Matrix out = logits;
  for (std::size_t t = 0; t < out.rows(); ++t) {
    auto row = out.row(t);
    const double lse = log_sum_exp(row);
    for (double& x : row) x -= lse;
  }
  return LogProbMatrix(std::move(out));
}

Matrix LogProbMatrix::probabilities() const {
  Matrix p = values_;
  for (double& x : p.data()) x = std::exp(x);
  return p;
}

std::size_t min_frames(std::span<const TokenId> labels) {
  std::size_t needed = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) needed += labels[i] == labels[i - 1];
  return needed;
}

double ctc_loss(const LogProbMatrix& z, std::span<const TokenId> labels) {
  check_feasible(z, labels);
  return -total_log_prob(forward(z, extend(labels)));
}

CtcResult ctc_loss_and_grad(const LogProbMatrix& z, std::span<const TokenId> labels) {
  check_feasible(z, labels);
  const auto ext = extend(labels);
  const Matrix alpha = forward(z, ext);
  const Matrix beta = backward(z, ext);
  const double log_p = total_log_prob(alpha);

  CtcResult result{-log_p, z.probabilities()};
  for (std::size_t t = 0; t < z.frames(); ++t) {
    for (std::size_t s = 0; s < ext.size(); ++s) {
      const double occupancy = alpha(t, s) + beta(t, s) - log_p;
      if (occupancy == kNegInf) continue;
      result.grad(t, static_cast<std::size_t>(ext[s])) -= std::exp(occupancy);
    }
  }
  return result;
}

Matrix ctc_grad(const LogProbMatrix& z, std::span<const TokenId> labels) {
  return ctc_loss_and_grad(z, labels).grad;
}

ConsistencyResult consistency_loss(const LogProbMatrix& z_a, const LogProbMatrix& z_b, double cr_scale) {
  if (z_a.frames() != z_b.frames() || z_a.vocab_size() != z_b.vocab_size()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::to_string(z_a.frames()) + "x" + std::to_string(z_a.vocab_size()) + " vs " +
                    std::to_string(z_b.frames()) + "x" + std::to_string(z_b.vocab_size()));
  }
  const std::size_t T = z_a.frames();
  const std::size_t V = z_a.vocab_size();
  ConsistencyResult out{0.0, Matrix(T, V), Matrix(T, V)};
  double kl_sum = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t v = 0; v < V; ++v) {
      const double la = z_a(t, v);
      const double lb = z_b(t, v);
      const double pa = std::exp(la);
      const double pb = std::exp(lb);
      // KL(p_b || p_a) + KL(p_a || p_b), per vocabulary entry.
      kl_sum += (pb - pa) * (lb - la);
      // d/d logits_a of KL(const p_b || softmax(logits_a)) = p_a - p_b, and
      // symmetrically for b.
      out.grad_a(t, v) = cr_scale * (pa - pb);
      out.grad_b(t, v) = cr_scale * (pb - pa);
    }
  }
  out.loss = cr_scale * kl_sum;
  return out;
}

CrCtcResult cr_ctc_loss(const LogProbMatrix& z_a, const LogProbMatrix& z_b, std::span<const TokenId> labels,
                        const LossConfig& config) {
  auto ctc_a = ctc_loss_and_grad(z_a, labels);
  auto ctc_b = ctc_loss_and_grad(z_b, labels);
  auto cr = consistency_loss(z_a, z_b, config.cr_scale);

  CrCtcResult out;
  out.ctc_a = ctc_a.loss;
  out.ctc_b = ctc_b.loss;
  out.cr = cr.loss;
  out.loss = 0.5 * (ctc_a.loss + ctc_b.loss) + config.alpha * cr.loss;

  out.grad_a = std::move(ctc_a.grad);
  out.grad_a *= 0.5;
  cr.grad_a *= config.alpha;
  out.grad_a += cr.grad_a;

  out.grad_b = std::move(ctc_b.grad);
  out.grad_b *= 0.5;
  cr.grad_b *= config.alpha;
  out.grad_b += cr.grad_b;
  return out;
}

double mixed_loss(double labeled_loss, double pseudo_loss, const LossConfig& config) {
  return labeled_loss + config.lambda * pseudo_loss;
}

LabelSequence greedy_decode(const LogProbMatrix& z) {
  LabelSequence out;
  TokenId previous = kBlankId;
  for (std::size_t t = 0; t < z.frames(); ++t) {
    const auto row = z.row(t);
    // max_element returns the first maximum, i.e. the lower id on ties.
    const auto best = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != kBlankId && best != previous) out.push_back(best);
    previous = best;
  }
  return out;
}

}  // namespace ipakit::ctc
