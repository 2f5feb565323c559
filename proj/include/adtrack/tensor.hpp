#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adtrack/error.hpp"

namespace adtrack {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor of rank 1..4.
///
/// Maps are [C,H,W], filters are [C_out,C_in,kH,kW]. Storage is an Eigen
/// column vector so whole-tensor arithmetic can be written as Eigen
/// expressions over flat(). A default-constructed tensor is empty (rank 0).
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    data_ = Vector::Constant(checked_size(shape_), fill);
  }

  BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(checked_size(shape_) == data_.size(),
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_string(shape_));
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), Vector(Eigen::Map<const Vector>(
                                          values.begin(), static_cast<Index>(values.size())))) {}

  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  Vector& flat() { return data_; }
  const Vector& flat() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  template <typename... I>
  Scalar& operator()(I... idx) {
    return data_[offset(static_cast<Index>(idx)...)];
  }
  template <typename... I>
  Scalar operator()(I... idx) const {
    return data_[offset(static_cast<Index>(idx)...)];
  }

  // First axis as rows, remaining axes flattened into columns.
  MatrixMap matrix() { return MatrixMap(data_.data(), shape_.at(0), data_.size() / shape_.at(0)); }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data_.data(), shape_.at(0), data_.size() / shape_.at(0));
  }

  // H x W view of one channel of a [C,H,W] map.
  MatrixMap plane(Index c) {
    const Index h = extent(rank() - 2), w = extent(rank() - 1);
    return MatrixMap(data_.data() + c * h * w, h, w);
  }
  ConstMatrixMap plane(Index c) const {
    const Index h = extent(rank() - 2), w = extent(rank() - 1);
    return ConstMatrixMap(data_.data() + c * h * w, h, w);
  }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_, data_.template cast<Other>());
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Index checked_size(const Shape& shape) {
    require(!shape.empty() && shape.size() <= 4,
            "tensor rank must be 1..4, got " + std::to_string(shape.size()));
    Index n = 1;
    for (Index e : shape) {
      require(e >= 1, "tensor extents must be >= 1, got " + shape_string(shape));
      n *= e;
    }
    return n;
  }

  Index offset(Index i) const { return i; }
  Index offset(Index y, Index x) const {
    return y * shape_[shape_.size() - 1] + x;
  }
  Index offset(Index c, Index y, Index x) const {
    return (c * shape_[1] + y) * shape_[2] + x;
  }
  Index offset(Index o, Index c, Index y, Index x) const {
    return ((o * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  Shape shape_;
  Vector data_;
};

using Tensor = BasicTensor<double>;
using Vector = Tensor::Vector;
using Matrix = Tensor::Matrix;

/// Kernel [C_out,C_in,kH,kW] with stride, symmetric zero padding and an
/// optional per-output-channel bias.
template <typename Scalar>
struct BasicConvSpec {
  Index stride = 1;
  Index padding = 0;
  BasicTensor<Scalar> kernel;
  std::optional<typename BasicTensor<Scalar>::Vector> bias;

  Index out_channels() const { return kernel.extent(0); }
  Index in_channels() const { return kernel.extent(1); }
  Index kernel_h() const { return kernel.extent(2); }
  Index kernel_w() const { return kernel.extent(3); }
};

using ConvSpec = BasicConvSpec<double>;

template <typename Scalar>
struct BasicConvGrad {
  BasicTensor<Scalar> input;  // empty when not requested
  BasicTensor<Scalar> kernel;
  typename BasicTensor<Scalar>::Vector bias;
};

using ConvGrad = BasicConvGrad<double>;

namespace detail {

inline Index conv_out_extent(Index in, Index k, Index stride, Index pad, const char* axis) {
  const Index span = in + 2 * pad - k;
  require(span >= 0, std::string("conv2d: kernel larger than padded input along ") + axis);
  require(span % stride == 0,
          std::string("conv2d: non-integral output extent along ") + axis);
  return span / stride + 1;
}

// Unfolds [C,H,W] into a (C*kh*kw) x (oh*ow) row-major patch matrix.
template <typename Scalar>
typename BasicTensor<Scalar>::Matrix im2col(const BasicTensor<Scalar>& in, Index kh, Index kw,
                                            Index stride, Index pad, Index oh, Index ow) {
  const Index channels = in.extent(0), h = in.extent(1), w = in.extent(2);
  typename BasicTensor<Scalar>::Matrix cols(channels * kh * kw, oh * ow);
  for (Index c = 0; c < channels; ++c) {
    const Scalar* src = in.data() + c * h * w;
    for (Index dy = 0; dy < kh; ++dy) {
      for (Index dx = 0; dx < kw; ++dx) {
        Scalar* dst = cols.data() + ((c * kh + dy) * kw + dx) * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          const Index iy = y * stride + dy - pad;
          Scalar* row = dst + y * ow;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + ow, Scalar(0));
            continue;
          }
          for (Index x = 0; x < ow; ++x) {
            const Index ix = x * stride + dx - pad;
            row[x] = (ix >= 0 && ix < w) ? src[iy * w + ix] : Scalar(0);
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters patch gradients back into [C,H,W].
template <typename Scalar>
BasicTensor<Scalar> col2im(const typename BasicTensor<Scalar>::Matrix& cols, const Shape& in_shape,
                           Index kh, Index kw, Index stride, Index pad, Index oh, Index ow) {
  BasicTensor<Scalar> out(in_shape);
  const Index channels = in_shape[0], h = in_shape[1], w = in_shape[2];
  for (Index c = 0; c < channels; ++c) {
    Scalar* dst = out.data() + c * h * w;
    for (Index dy = 0; dy < kh; ++dy) {
      for (Index dx = 0; dx < kw; ++dx) {
        const Scalar* src = cols.data() + ((c * kh + dy) * kw + dx) * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          const Index iy = y * stride + dy - pad;
          if (iy < 0 || iy >= h) continue;
          const Scalar* row = src + y * ow;
          for (Index x = 0; x < ow; ++x) {
            const Index ix = x * stride + dx - pad;
            if (ix >= 0 && ix < w) dst[iy * w + ix] += row[x];
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
void check_conv(const BasicTensor<Scalar>& input, const BasicConvSpec<Scalar>& spec) {
  require(input.rank() == 3, "conv2d: input must be [C,H,W], got " + shape_string(input.shape()));
  require(spec.kernel.rank() == 4,
          "conv2d: kernel must be [C_out,C_in,kH,kW], got " + shape_string(spec.kernel.shape()));
  require(spec.in_channels() == input.extent(0),
          "conv2d: kernel expects " + std::to_string(spec.in_channels()) + " input channels, got " +
              std::to_string(input.extent(0)));
  require(spec.stride >= 1 && spec.padding >= 0, "conv2d: stride must be >= 1, padding >= 0");
  require(!spec.bias || spec.bias->size() == spec.out_channels(),
          "conv2d: bias length must equal C_out");
}

}  // namespace detail

template <typename Scalar>
BasicTensor<Scalar> conv2d(const BasicTensor<Scalar>& input, const BasicConvSpec<Scalar>& spec) {
  detail::check_conv(input, spec);
  const Index kh = spec.kernel_h(), kw = spec.kernel_w();
  const Index oh = detail::conv_out_extent(input.extent(1), kh, spec.stride, spec.padding, "H");
  const Index ow = detail::conv_out_extent(input.extent(2), kw, spec.stride, spec.padding, "W");
  const auto cols = detail::im2col(input, kh, kw, spec.stride, spec.padding, oh, ow);
  BasicTensor<Scalar> out({spec.out_channels(), oh, ow});
  auto out_mat = out.matrix();
  out_mat.noalias() = spec.kernel.matrix() * cols;
  if (spec.bias) out_mat.colwise() += *spec.bias;
  return out;
}

/// Gradients of conv2d with respect to its input, kernel and bias.
/// The input gradient is skipped when `want_input` is false.
template <typename Scalar>
BasicConvGrad<Scalar> conv2d_backward(const BasicTensor<Scalar>& input,
                                      const BasicConvSpec<Scalar>& spec,
                                      const BasicTensor<Scalar>& grad_out,
                                      bool want_input = true) {
  detail::check_conv(input, spec);
  const Index kh = spec.kernel_h(), kw = spec.kernel_w();
  const Index oh = grad_out.extent(1), ow = grad_out.extent(2);
  const auto cols = detail::im2col(input, kh, kw, spec.stride, spec.padding, oh, ow);
  const auto g = grad_out.matrix();

  BasicConvGrad<Scalar> grad;
  grad.kernel = BasicTensor<Scalar>(spec.kernel.shape());
  grad.kernel.matrix().noalias() = g * cols.transpose();
  grad.bias = g.rowwise().sum();
  if (want_input) {
    typename BasicTensor<Scalar>::Matrix dcols = spec.kernel.matrix().transpose() * g;
    grad.input = detail::col2im<Scalar>(dcols, input.shape(), kh, kw, spec.stride, spec.padding,
                                        oh, ow);
  }
  return grad;
}

template <typename Scalar>
BasicTensor<Scalar> relu(const BasicTensor<Scalar>& input) {
  return BasicTensor<Scalar>(input.shape(), input.flat().cwiseMax(Scalar(0)));
}

// Uses the forward output; the subgradient at 0 is taken as 0.
template <typename Scalar>
BasicTensor<Scalar> relu_backward(const BasicTensor<Scalar>& output,
                                  const BasicTensor<Scalar>& grad_out) {
  return BasicTensor<Scalar>(
      output.shape(),
      (output.flat().array() > Scalar(0)).select(grad_out.flat(), Scalar(0)).matrix());
}

template <typename Scalar>
BasicTensor<Scalar> maxpool2(const BasicTensor<Scalar>& input) {
  require(input.rank() == 3, "maxpool2: input must be [C,H,W]");
  const Index c = input.extent(0), h = input.extent(1), w = input.extent(2);
  require(h % 2 == 0 && w % 2 == 0,
          "maxpool2: extents must be even, got " + shape_string(input.shape()));
  BasicTensor<Scalar> out({c, h / 2, w / 2});
  for (Index k = 0; k < c; ++k)
    for (Index y = 0; y < h / 2; ++y)
      for (Index x = 0; x < w / 2; ++x)
        out(k, y, x) = std::max(std::max(input(k, 2 * y, 2 * x), input(k, 2 * y, 2 * x + 1)),
                                std::max(input(k, 2 * y + 1, 2 * x), input(k, 2 * y + 1, 2 * x + 1)));
  return out;
}

// Routes each window's gradient to the first maximal element in scan order.
template <typename Scalar>
BasicTensor<Scalar> maxpool2_backward(const BasicTensor<Scalar>& input,
                                      const BasicTensor<Scalar>& grad_out) {
  const Index c = input.extent(0), h = input.extent(1), w = input.extent(2);
  BasicTensor<Scalar> grad(input.shape());
  for (Index k = 0; k < c; ++k)
    for (Index y = 0; y < h / 2; ++y)
      for (Index x = 0; x < w / 2; ++x) {
        Index by = 2 * y, bx = 2 * x;
        Scalar best = input(k, by, bx);
        for (Index dy = 0; dy < 2; ++dy)
          for (Index dx = 0; dx < 2; ++dx)
            if (input(k, 2 * y + dy, 2 * x + dx) > best) {
              best = input(k, 2 * y + dy, 2 * x + dx);
              by = 2 * y + dy;
              bx = 2 * x + dx;
            }
        grad(k, by, bx) += grad_out(k, y, x);
      }
  return grad;
}

/// Block-mean pooling of [C,H,W] down to [C,h,w]; H and W must be multiples.
template <typename Scalar>
BasicTensor<Scalar> avg_downsample(const BasicTensor<Scalar>& input, Index out_h, Index out_w) {
  require(input.rank() == 3, "avg_downsample: input must be [C,H,W]");
  const Index c = input.extent(0), h = input.extent(1), w = input.extent(2);
  require(out_h >= 1 && out_w >= 1 && h % out_h == 0 && w % out_w == 0,
          "avg_downsample: " + shape_string(input.shape()) + " not divisible into " +
              std::to_string(out_h) + "x" + std::to_string(out_w));
  const Index bh = h / out_h, bw = w / out_w;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(bh * bw);
  BasicTensor<Scalar> out({c, out_h, out_w});
  for (Index k = 0; k < c; ++k) {
    auto src = input.plane(k);
    auto dst = out.plane(k);
    for (Index y = 0; y < out_h; ++y)
      for (Index x = 0; x < out_w; ++x) dst(y, x) = src.block(y * bh, x * bw, bh, bw).sum() * inv;
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> avg_downsample_backward(const Shape& input_shape,
                                            const BasicTensor<Scalar>& grad_out) {
  const Index c = input_shape[0], h = input_shape[1], w = input_shape[2];
  const Index out_h = grad_out.extent(1), out_w = grad_out.extent(2);
  const Index bh = h / out_h, bw = w / out_w;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(bh * bw);
  BasicTensor<Scalar> grad(input_shape);
  for (Index k = 0; k < c; ++k) {
    auto src = grad_out.plane(k);
    auto dst = grad.plane(k);
    for (Index y = 0; y < out_h; ++y)
      for (Index x = 0; x < out_w; ++x) dst.block(y * bh, x * bw, bh, bw).setConstant(src(y, x) * inv);
  }
  return grad;
}

inline constexpr double kDegenerateVariance = 1e-12;

/// Per-channel zero-mean, unit-variance normalization (population variance).
/// Channels with variance below kDegenerateVariance are only mean-subtracted.
template <typename Scalar>
BasicTensor<Scalar> standardize_map(const BasicTensor<Scalar>& input) {
  require(input.rank() == 3 && input.size() >= 2, "standardize_map: input must be [C,H,W], size >= 2");
  BasicTensor<Scalar> out(input.shape());
  const Index n = input.extent(1) * input.extent(2);
  for (Index k = 0; k < input.extent(0); ++k) {
    auto src = input.flat().segment(k * n, n);
    auto dst = out.flat().segment(k * n, n);
    const Scalar mean = src.mean();
    dst = src.array() - mean;
    const Scalar var = dst.squaredNorm() / static_cast<Scalar>(n);
    if (var >= Scalar(kDegenerateVariance)) dst /= std::sqrt(var);
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> standardize_map_backward(const BasicTensor<Scalar>& input,
                                             const BasicTensor<Scalar>& grad_out) {
  BasicTensor<Scalar> grad(input.shape());
  const Index n = input.extent(1) * input.extent(2);
  for (Index k = 0; k < input.extent(0); ++k) {
    auto src = input.flat().segment(k * n, n);
    auto g = grad_out.flat().segment(k * n, n);
    auto dst = grad.flat().segment(k * n, n);
    const Scalar mean = src.mean();
    typename BasicTensor<Scalar>::Vector centered = src.array() - mean;
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(n);
    const Scalar g_mean = g.mean();
    if (var < Scalar(kDegenerateVariance)) {
      dst = g.array() - g_mean;
      continue;
    }
    const Scalar inv_std = Scalar(1) / std::sqrt(var);
    const auto normalized = centered * inv_std;
    const Scalar proj = g.dot(normalized) / static_cast<Scalar>(n);
    dst = inv_std * (g.array() - g_mean - normalized.array() * proj).matrix();
  }
  return grad;
}

/// Numerically stable softmax over all cells of the tensor.
template <typename Scalar>
BasicTensor<Scalar> softmax_flat(const BasicTensor<Scalar>& input) {
  const Scalar m = input.flat().maxCoeff();
  typename BasicTensor<Scalar>::Vector e = (input.flat().array() - m).exp().matrix();
  e /= e.sum();
  return BasicTensor<Scalar>(input.shape(), std::move(e));
}

}  // namespace adtrack
