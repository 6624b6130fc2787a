#pragma once

// Dense float64 kernels with hand-written backward passes. Volumes are stored
// channel-major as [C][N][N][N] with x fastest; all backward functions
// accumulate into their gradient outputs.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fovs::nn {

using Span = std::span<double>;
using CSpan = std::span<const double>;

struct Tensor {
  std::vector<int> shape;
  std::vector<double> value;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);
  std::size_t size() const { return value.size(); }
};

std::size_t shape_size(const std::vector<int>& shape);

struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Named parameter blocks packed into one flat buffer. Gradient buffers are
/// plain vectors of the same length, addressed with the same blocks.
class Parameters {
 public:
  /// Registers a zero-initialised block and returns its index.
  std::size_t add(std::string name, std::vector<int> shape);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }
  std::size_t total() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  Span view(std::size_t i) { return slice(values_, i); }
  CSpan view(std::size_t i) const { return slice(values_, i); }
  Span slice(std::vector<double>& buffer, std::size_t i) const;
  CSpan slice(const std::vector<double>& buffer, std::size_t i) const;

 private:
  std::vector<ParamBlock> blocks_;
  std::vector<double> values_;
};

/// 3x3x3 convolution, stride 1, zero padding 1. W is [Co][Ci][3][3][3].
/// Sparse inputs (mostly zeros) take a scatter path.
void conv3_forward(CSpan in, int ci, int n, CSpan w, CSpan b, int co, Span out);
/// d_in may be empty when the input gradient is not needed.
void conv3_backward(CSpan in, int ci, int n, CSpan w, int co, CSpan d_out, Span d_w, Span d_b, Span d_in);

/// 1x1x1 convolution. W is [Co][Ci].
void conv1_forward(CSpan in, int ci, int voxels, CSpan w, CSpan b, int co, Span out);
void conv1_backward(CSpan in, int ci, int voxels, CSpan w, int co, CSpan d_out, Span d_w, Span d_b, Span d_in);

/// 2x2x2 average pooling, stride 2: [C][N]^3 -> [C][N/2]^3.
void avgpool2_forward(CSpan in, int c, int n, Span out);
void avgpool2_backward(int c, int n, CSpan d_out, Span d_in);

/// 2x2x2 transposed convolution, stride 2: [Ci][N]^3 -> [Co][2N]^3. W is [Ci][Co][2][2][2].
void upconv2_forward(CSpan in, int ci, int n, CSpan w, CSpan b, int co, Span out);
void upconv2_backward(CSpan in, int ci, int n, CSpan w, int co, CSpan d_out, Span d_w, Span d_b, Span d_in);

/// y = W x + b, W is [out][in].
void linear_forward(CSpan x, int in, CSpan w, CSpan b, int out, Span y);
void linear_backward(CSpan x, int in, CSpan w, int out, CSpan d_y, Span d_w, Span d_b, Span d_x);

/// x * sigmoid(x).
void silu_forward(CSpan x, Span y);
void silu_backward(CSpan x, CSpan d_y, Span d_x);

double sigmoid(double x);

/// Row-wise layer norm over `dim` features with gain and bias. `rows` rows.
/// Caches per-row mean and inverse std for the backward pass.
void layernorm_forward(CSpan x, int rows, int dim, CSpan gain, CSpan bias, Span y, Span mean, Span inv_std);
void layernorm_backward(CSpan x, int rows, int dim, CSpan gain, CSpan mean, CSpan inv_std, CSpan d_y,
                        Span d_gain, Span d_bias, Span d_x);

/// Layer norm across channels at each voxel of a [c][voxels] volume, with
/// per-channel gain and bias. Caches per-voxel mean and inverse std.
void channelnorm_forward(CSpan x, int c, int voxels, CSpan gain, CSpan bias, Span y, Span mean, Span inv_std);
void channelnorm_backward(CSpan x, int c, int voxels, CSpan gain, CSpan mean, CSpan inv_std, CSpan d_y,
                          Span d_gain, Span d_bias, Span d_x);

}  // namespace fovs::nn
