#include "fovs/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace fovs::nn {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), value(shape_size(shape), fill) {}

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::size_t Parameters::add(std::string name, std::vector<int> shape) {
  ParamBlock b;
  b.name = std::move(name);
  b.size = shape_size(shape);
  b.shape = std::move(shape);
  b.offset = values_.size();
  values_.resize(values_.size() + b.size, 0.0);
  blocks_.push_back(std::move(b));
  return blocks_.size() - 1;
}

Span Parameters::slice(std::vector<double>& buffer, std::size_t i) const {
  const auto& b = blocks_.at(i);
  return Span(buffer).subspan(b.offset, b.size);
}

CSpan Parameters::slice(const std::vector<double>& buffer, std::size_t i) const {
  const auto& b = blocks_.at(i);
  return CSpan(buffer).subspan(b.offset, b.size);
}

namespace {

inline std::size_t vox(int n, int z, int y, int x) {
  return (static_cast<std::size_t>(z) * n + y) * n + x;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Column matrix [ci*27][n^3]: row i*27+tap holds input channel i shifted by
// the tap, zero outside the volume.
void im2col(CSpan in, int ci, int n, std::vector<double>& cols) {
  const std::size_t vol = static_cast<std::size_t>(n) * n * n;
  cols.assign(static_cast<std::size_t>(ci) * 27 * vol, 0.0);
  for (int i = 0; i < ci; ++i) {
    const double* src = in.data() + i * vol;
    for (int kz = 0; kz < 3; ++kz) {
      const int z0 = std::max(0, 1 - kz);
      const int z1 = std::min(n, n + 1 - kz);
      for (int ky = 0; ky < 3; ++ky) {
        const int y0 = std::max(0, 1 - ky);
        const int y1 = std::min(n, n + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const int x0 = std::max(0, 1 - kx);
          const int x1 = std::min(n, n + 1 - kx);
          double* row = cols.data() + (static_cast<std::size_t>(i) * 27 + (kz * 3 + ky) * 3 + kx) * vol;
          for (int z = z0; z < z1; ++z) {
            for (int y = y0; y < y1; ++y) {
              const double* irow = src + vox(n, z + kz - 1, y + ky - 1, kx - 1);
              double* orow = row + vox(n, z, y, 0);
              for (int x = x0; x < x1; ++x) orow[x] = irow[x];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col, accumulating into d_in.
void col2im(const std::vector<double>& cols, int ci, int n, Span d_in) {
  const std::size_t vol = static_cast<std::size_t>(n) * n * n;
  for (int i = 0; i < ci; ++i) {
    double* dst = d_in.data() + i * vol;
    for (int kz = 0; kz < 3; ++kz) {
      const int z0 = std::max(0, 1 - kz);
      const int z1 = std::min(n, n + 1 - kz);
      for (int ky = 0; ky < 3; ++ky) {
        const int y0 = std::max(0, 1 - ky);
        const int y1 = std::min(n, n + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const int x0 = std::max(0, 1 - kx);
          const int x1 = std::min(n, n + 1 - kx);
          const double* row = cols.data() + (static_cast<std::size_t>(i) * 27 + (kz * 3 + ky) * 3 + kx) * vol;
          for (int z = z0; z < z1; ++z) {
            for (int y = y0; y < y1; ++y) {
              double* drow = dst + vox(n, z + kz - 1, y + ky - 1, kx - 1);
              const double* crow = row + vox(n, z, y, 0);
              for (int x = x0; x < x1; ++x) drow[x] += crow[x];
            }
          }
        }
      }
    }
  }
}

std::vector<double>& scratch_cols() {
  thread_local std::vector<double> cols;
  return cols;
}

// Dense path: out[co][vol] += W[co][ci*27] * cols.
void conv3_dense_forward(CSpan in, int ci, int n, CSpan w, int co, Span out) {
  const auto vol = static_cast<Eigen::Index>(n) * n * n;
  auto& cols = scratch_cols();
  im2col(in, ci, n, cols);
  MatrixMap(out.data(), co, vol).noalias() +=
      ConstMatrixMap(w.data(), co, ci * 27) * ConstMatrixMap(cols.data(), ci * 27, vol);
}

// Scatter path over non-zero input voxels.
void conv3_sparse_forward(CSpan in, int ci, int n, CSpan w, int co, Span out) {
  const std::size_t vol = static_cast<std::size_t>(n) * n * n;
  for (int i = 0; i < ci; ++i) {
    const double* src = in.data() + i * vol;
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const double v = src[vox(n, z, y, x)];
          if (v == 0.0) continue;
          for (int kz = 0; kz < 3; ++kz) {
            const int oz = z - kz + 1;
            if (oz < 0 || oz >= n) continue;
            for (int ky = 0; ky < 3; ++ky) {
              const int oy = y - ky + 1;
              if (oy < 0 || oy >= n) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int ox = x - kx + 1;
                if (ox < 0 || ox >= n) continue;
                const std::size_t tap = static_cast<std::size_t>((kz * 3 + ky) * 3 + kx);
                const std::size_t pos = vox(n, oz, oy, ox);
                for (int o = 0; o < co; ++o) {
                  out[o * vol + pos] += v * w[(static_cast<std::size_t>(o) * ci + i) * 27 + tap];
                }
              }
            }
          }
        }
      }
    }
  }
}

std::size_t count_nonzero(CSpan v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

}  // namespace

void conv3_forward(CSpan in, int ci, int n, CSpan w, CSpan b, int co, Span out) {
  const std::size_t vol = static_cast<std::size_t>(n) * n * n;
  for (int o = 0; o < co; ++o) std::fill_n(out.data() + o * vol, vol, b[static_cast<std::size_t>(o)]);
  if (count_nonzero(in) * 8 < in.size()) {
    conv3_sparse_forward(in, ci, n, w, co, out);
  } else {
    conv3_dense_forward(in, ci, n, w, co, out);
  }
}

void conv3_backward(CSpan in, int ci, int n, CSpan w, int co, CSpan d_out, Span d_w, Span d_b, Span d_in) {
  const std::size_t vol = static_cast<std::size_t>(n) * n * n;
  for (int o = 0; o < co; ++o) {
    double s = 0.0;
    const double* g = d_out.data() + o * vol;
    for (std::size_t p = 0; p < vol; ++p) s += g[p];
    d_b[static_cast<std::size_t>(o)] += s;
  }

  const bool sparse = count_nonzero(in) * 8 < in.size();
  if (sparse) {
    for (int i = 0; i < ci; ++i) {
      const double* src = in.data() + i * vol;
      for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            const double v = src[vox(n, z, y, x)];
            if (v == 0.0) continue;
            for (int kz = 0; kz < 3; ++kz) {
              const int oz = z - kz + 1;
              if (oz < 0 || oz >= n) continue;
              for (int ky = 0; ky < 3; ++ky) {
                const int oy = y - ky + 1;
                if (oy < 0 || oy >= n) continue;
                for (int kx = 0; kx < 3; ++kx) {
                  const int ox = x - kx + 1;
                  if (ox < 0 || ox >= n) continue;
                  const std::size_t tap = static_cast<std::size_t>((kz * 3 + ky) * 3 + kx);
                  const std::size_t pos = vox(n, oz, oy, ox);
                  for (int o = 0; o < co; ++o) {
                    d_w[(static_cast<std::size_t>(o) * ci + i) * 27 + tap] += v * d_out[o * vol + pos];
                  }
                }
              }
            }
          }
        }
      }
    }
  }

  const auto rows = static_cast<Eigen::Index>(ci) * 27;
  const auto cols_n = static_cast<Eigen::Index>(vol);
  const ConstMatrixMap g(d_out.data(), co, cols_n);
  auto& cols = scratch_cols();
  if (!sparse) {
    im2col(in, ci, n, cols);
    MatrixMap(d_w.data(), co, rows).noalias() += g * ConstMatrixMap(cols.data(), rows, cols_n).transpose();
  }
  if (!d_in.empty()) {
    cols.resize(static_cast<std::size_t>(rows) * vol);
    MatrixMap(cols.data(), rows, cols_n).noalias() = ConstMatrixMap(w.data(), co, rows).transpose() * g;
    col2im(cols, ci, n, d_in);
  }
}

void conv1_forward(CSpan in, int ci, int voxels, CSpan w, CSpan b, int co, Span out) {
  const auto vol = static_cast<std::size_t>(voxels);
  for (int o = 0; o < co; ++o) {
    double* dst = out.data() + o * vol;
    std::fill_n(dst, vol, b[static_cast<std::size_t>(o)]);
    for (int i = 0; i < ci; ++i) {
      const double wv = w[static_cast<std::size_t>(o) * ci + i];
      const double* src = in.data() + i * vol;
      for (std::size_t p = 0; p < vol; ++p) dst[p] += wv * src[p];
    }
  }
}

void conv1_backward(CSpan in, int ci, int voxels, CSpan w, int co, CSpan d_out, Span d_w, Span d_b, Span d_in) {
  const auto vol = static_cast<std::size_t>(voxels);
  for (int o = 0; o < co; ++o) {
    const double* g = d_out.data() + o * vol;
    double sb = 0.0;
    for (std::size_t p = 0; p < vol; ++p) sb += g[p];
    d_b[static_cast<std::size_t>(o)] += sb;
    for (int i = 0; i < ci; ++i) {
      const double* src = in.data() + i * vol;
      double s = 0.0;
      for (std::size_t p = 0; p < vol; ++p) s += g[p] * src[p];
      d_w[static_cast<std::size_t>(o) * ci + i] += s;
      if (!d_in.empty()) {
        const double wv = w[static_cast<std::size_t>(o) * ci + i];
        double* dsrc = d_in.data() + i * vol;
        for (std::size_t p = 0; p < vol; ++p) dsrc[p] += wv * g[p];
      }
    }
  }
}

void avgpool2_forward(CSpan in, int c, int n, Span out) {
  const int h = n / 2;
  for (int ch = 0; ch < c; ++ch) {
    const double* src = in.data() + static_cast<std::size_t>(ch) * n * n * n;
    double* dst = out.data() + static_cast<std::size_t>(ch) * h * h * h;
    for (int z = 0; z < h; ++z) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < h; ++x) {
          double s = 0.0;
          for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
              const double* row = src + vox(n, 2 * z + dz, 2 * y + dy, 2 * x);
              s += row[0] + row[1];
            }
          }
          dst[vox(h, z, y, x)] = 0.125 * s;
        }
      }
    }
  }
}

void avgpool2_backward(int c, int n, CSpan d_out, Span d_in) {
  const int h = n / 2;
  for (int ch = 0; ch < c; ++ch) {
    double* dsrc = d_in.data() + static_cast<std::size_t>(ch) * n * n * n;
    const double* g = d_out.data() + static_cast<std::size_t>(ch) * h * h * h;
    for (int z = 0; z < h; ++z) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < h; ++x) {
          const double v = 0.125 * g[vox(h, z, y, x)];
          for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
              double* row = dsrc + vox(n, 2 * z + dz, 2 * y + dy, 2 * x);
              row[0] += v;
              row[1] += v;
            }
          }
        }
      }
    }
  }
}

void upconv2_forward(CSpan in, int ci, int n, CSpan w, CSpan b, int co, Span out) {
  const int m = 2 * n;
  const std::size_t ovol = static_cast<std::size_t>(m) * m * m;
  const std::size_t ivol = static_cast<std::size_t>(n) * n * n;
  for (int o = 0; o < co; ++o) std::fill_n(out.data() + o * ovol, ovol, b[static_cast<std::size_t>(o)]);
  for (int i = 0; i < ci; ++i) {
    const double* src = in.data() + i * ivol;
    for (int o = 0; o < co; ++o) {
      const double* wk = w.data() + (static_cast<std::size_t>(i) * co + o) * 8;
      double* dst = out.data() + o * ovol;
      for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            const double v = src[vox(n, z, y, x)];
            for (int dz = 0; dz < 2; ++dz) {
              for (int dy = 0; dy < 2; ++dy) {
                double* row = dst + vox(m, 2 * z + dz, 2 * y + dy, 2 * x);
                row[0] += v * wk[(dz * 2 + dy) * 2 + 0];
                row[1] += v * wk[(dz * 2 + dy) * 2 + 1];
              }
            }
          }
        }
      }
    }
  }
}

void upconv2_backward(CSpan in, int ci, int n, CSpan w, int co, CSpan d_out, Span d_w, Span d_b, Span d_in) {
  const int m = 2 * n;
  const std::size_t ovol = static_cast<std::size_t>(m) * m * m;
  const std::size_t ivol = static_cast<std::size_t>(n) * n * n;
  for (int o = 0; o < co; ++o) {
    double s = 0.0;
    const double* g = d_out.data() + o * ovol;
    for (std::size_t p = 0; p < ovol; ++p) s += g[p];
    d_b[static_cast<std::size_t>(o)] += s;
  }
  for (int i = 0; i < ci; ++i) {
    const double* src = in.data() + i * ivol;
    double* dsrc = d_in.empty() ? nullptr : d_in.data() + i * ivol;
    for (int o = 0; o < co; ++o) {
      const std::size_t wbase = (static_cast<std::size_t>(i) * co + o) * 8;
      const double* g = d_out.data() + o * ovol;
      double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            const double v = src[vox(n, z, y, x)];
            double back = 0.0;
            for (int dz = 0; dz < 2; ++dz) {
              for (int dy = 0; dy < 2; ++dy) {
                const double* row = g + vox(m, 2 * z + dz, 2 * y + dy, 2 * x);
                const int t = (dz * 2 + dy) * 2;
                acc[t] += v * row[0];
                acc[t + 1] += v * row[1];
                back += w[wbase + static_cast<std::size_t>(t)] * row[0] +
                        w[wbase + static_cast<std::size_t>(t) + 1] * row[1];
              }
            }
            if (dsrc != nullptr) dsrc[vox(n, z, y, x)] += back;
          }
        }
      }
      for (int t = 0; t < 8; ++t) d_w[wbase + static_cast<std::size_t>(t)] += acc[t];
    }
  }
}

void linear_forward(CSpan x, int in, CSpan w, CSpan b, int out, Span y) {
  for (int o = 0; o < out; ++o) {
    double s = b[static_cast<std::size_t>(o)];
    const double* row = w.data() + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) s += row[i] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = s;
  }
}

void linear_backward(CSpan x, int in, CSpan w, int out, CSpan d_y, Span d_w, Span d_b, Span d_x) {
  for (int o = 0; o < out; ++o) {
    const double g = d_y[static_cast<std::size_t>(o)];
    d_b[static_cast<std::size_t>(o)] += g;
    double* drow = d_w.data() + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) drow[i] += g * x[static_cast<std::size_t>(i)];
    if (!d_x.empty()) {
      const double* row = w.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) d_x[static_cast<std::size_t>(i)] += g * row[i];
    }
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void silu_forward(CSpan x, Span y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
}

void silu_backward(CSpan x, CSpan d_y, Span d_x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = sigmoid(x[i]);
    d_x[i] += d_y[i] * s * (1.0 + x[i] * (1.0 - s));
  }
}

void layernorm_forward(CSpan x, int rows, int dim, CSpan gain, CSpan bias, Span y, Span mean, Span inv_std) {
  constexpr double kEps = 1e-5;
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.data() + static_cast<std::size_t>(r) * dim;
    double* yr = y.data() + static_cast<std::size_t>(r) * dim;
    double mu = 0.0;
    for (int i = 0; i < dim; ++i) mu += xr[i];
    mu /= dim;
    double var = 0.0;
    for (int i = 0; i < dim; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= dim;
    const double is = 1.0 / std::sqrt(var + kEps);
    mean[static_cast<std::size_t>(r)] = mu;
    inv_std[static_cast<std::size_t>(r)] = is;
    for (int i = 0; i < dim; ++i) {
      yr[i] = (xr[i] - mu) * is * gain[static_cast<std::size_t>(i)] + bias[static_cast<std::size_t>(i)];
    }
  }
}

void layernorm_backward(CSpan x, int rows, int dim, CSpan gain, CSpan mean, CSpan inv_std, CSpan d_y,
                        Span d_gain, Span d_bias, Span d_x) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.data() + static_cast<std::size_t>(r) * dim;
    const double* gr = d_y.data() + static_cast<std::size_t>(r) * dim;
    double* dxr = d_x.data() + static_cast<std::size_t>(r) * dim;
    const double mu = mean[static_cast<std::size_t>(r)];
    const double is = inv_std[static_cast<std::size_t>(r)];
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double xhat = (xr[i] - mu) * is;
      const double gi = gr[i] * gain[static_cast<std::size_t>(i)];
      d_gain[static_cast<std::size_t>(i)] += gr[i] * xhat;
      d_bias[static_cast<std::size_t>(i)] += gr[i];
      sum_g += gi;
      sum_gx += gi * xhat;
    }
    for (int i = 0; i < dim; ++i) {
      const double xhat = (xr[i] - mu) * is;
      const double gi = gr[i] * gain[static_cast<std::size_t>(i)];
      dxr[i] += is * (gi - sum_g / dim - xhat * sum_gx / dim);
    }
  }
}

void channelnorm_forward(CSpan x, int c, int voxels, CSpan gain, CSpan bias, Span y, Span mean, Span inv_std) {
  constexpr double kEps = 1e-5;
  const auto v_count = static_cast<std::size_t>(voxels);
  std::fill(mean.begin(), mean.end(), 0.0);
  std::vector<double> var(v_count, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    const double* xc = x.data() + ch * v_count;
    for (std::size_t v = 0; v < v_count; ++v) mean[v] += xc[v];
  }
  for (auto& m : mean) m /= c;
  for (int ch = 0; ch < c; ++ch) {
    const double* xc = x.data() + ch * v_count;
    for (std::size_t v = 0; v < v_count; ++v) var[v] += (xc[v] - mean[v]) * (xc[v] - mean[v]);
  }
  for (std::size_t v = 0; v < v_count; ++v) inv_std[v] = 1.0 / std::sqrt(var[v] / c + kEps);
  for (int ch = 0; ch < c; ++ch) {
    const double* xc = x.data() + ch * v_count;
    double* yc = y.data() + ch * v_count;
    const double g = gain[static_cast<std::size_t>(ch)], b = bias[static_cast<std::size_t>(ch)];
    for (std::size_t v = 0; v < v_count; ++v) yc[v] = (xc[v] - mean[v]) * inv_std[v] * g + b;
  }
}

void channelnorm_backward(CSpan x, int c, int voxels, CSpan gain, CSpan mean, CSpan inv_std, CSpan d_y,
                          Span d_gain, Span d_bias, Span d_x) {
  const auto v_count = static_cast<std::size_t>(voxels);
  std::vector<double> sum_g(v_count, 0.0), sum_gx(v_count, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    const double* xc = x.data() + ch * v_count;
    const double* gc = d_y.data() + ch * v_count;
    const double g = gain[static_cast<std::size_t>(ch)];
    double dg = 0.0, db = 0.0;
    for (std::size_t v = 0; v < v_count; ++v) {
      const double xhat = (xc[v] - mean[v]) * inv_std[v];
      dg += gc[v] * xhat;
      db += gc[v];
      sum_g[v] += gc[v] * g;
      sum_gx[v] += gc[v] * g * xhat;
    }
    d_gain[static_cast<std::size_t>(ch)] += dg;
    d_bias[static_cast<std::size_t>(ch)] += db;
  }
  for (int ch = 0; ch < c; ++ch) {
    const double* xc = x.data() + ch * v_count;
    const double* gc = d_y.data() + ch * v_count;
    double* dxc = d_x.data() + ch * v_count;
    const double g = gain[static_cast<std::size_t>(ch)];
    for (std::size_t v = 0; v < v_count; ++v) {
      const double xhat = (xc[v] - mean[v]) * inv_std[v];
      dxc[v] += inv_std[v] * (gc[v] * g - sum_g[v] / c - xhat * sum_gx[v] / c);
    }
  }
}

}  // namespace fovs::nn
