#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "autocl/tape.hpp"

namespace autocl {

enum class PoolOp { avg, max };
enum class SimilarityKind { dot, cos, dist };

// Boolean rows x cols mask selecting entries of a score matrix. A mask is
// shared by every leading group of a G x rows x cols score tensor.
class PairMask {
 public:
  PairMask() = default;
  PairMask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  void set(std::size_t r, std::size_t c, bool on = true) { bits_[r * cols_ + c] = on ? 1 : 0; }
  bool get(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  std::size_t row_count(std::size_t r) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Elementwise arithmetic. Shapes must match exactly.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// x + bias, broadcasting bias (d) over the trailing axis of x (... x d).
Var add_bias(Var x, Var bias);
// x + c and x * c for a same-shape constant that takes no gradient.
Var add_const(Var x, const Tensor& c);
Var mul_const(Var x, const Tensor& c);

Var exp(Var x);
Var log(Var x);
Var tanh(Var x);
Var relu(Var x);
// Softmax over the trailing axis.
Var softmax(Var x);

Var sum(Var x);
Var mean(Var x);

// Shape manipulation.
Var reshape(Var x, Shape shape);
Var permute(Var x, const std::vector<std::size_t>& perm);
Var transpose(Var x);  // rank-2 only
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);

// (n x k) @ (k x m)
Var matmul(Var a, Var b);
// x (... x in) @ w (in x out) + b (out)
Var linear(Var x, Var w, Var b);

// input B x T x Cin, weight K x Cin x Cout, bias Cout. Symmetric zero padding
// keeps the time length: out[b,t,o] = bias[o] +
//   sum_{k,i} input[b, t + (k - K/2) * dilation, i] * weight[k,i,o].
Var conv1d_dilated(Var input, Var weight, Var bias, std::size_t dilation);

// B x T x d -> B x ceil(T/kernel) x d with stride == kernel. The last window
// may be partial; avg divides by its actual length, max routes the gradient to
// the lowest index attaining the maximum.
Var pool1d(Var input, std::size_t kernel, PoolOp op);

// Normalizes each trailing-axis vector to zero mean and unit variance.
Var layer_norm(Var x, Var gain, Var offset, double eps = 1e-5);
// v / max(||v||_2, eps) over the trailing axis.
Var l2_normalize(Var x, double eps = 1e-12);

// a: G x n x d, c: G x m x d -> G x n x m of sim(a[g,i], c[g,j]).
//   dot: a.c   cos: a.c / (|a||c| + 1e-12)   dist: -|a - c|
Var pairwise_similarity(Var a, Var c, SimilarityKind kind);

// Multi-positive InfoNCE on a score tensor G x n x m. For each row r:
//   logsumexp over positives+negatives - logsumexp over positives,
// i.e. -log(sum_P e^s / (sum_P e^s + sum_N e^s)). Rows without a positive or
// without a negative produce 0 and take no gradient. Output: G x n.
Var contrastive_nll(Var scores, const PairMask& positives, const PairMask& negatives);
// Rows of the masks that carry at least one positive and one negative.
std::size_t contrastive_row_count(const PairMask& positives, const PairMask& negatives);

// Sum over every (group, row, positive p, negative q) of
// max(0, margin + s[q] - s[p]). Output is a scalar.
Var triplet_hinge(Var scores, const PairMask& positives, const PairMask& negatives, double margin);
// Number of (row, positive, negative) triples per group.
std::size_t triplet_count(const PairMask& positives, const PairMask& negatives);

}  // namespace autocl
