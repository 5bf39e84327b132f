/* Copyright 2026 The GeoBEV Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef GEOBEV_TENSOR_HPP_
#define GEOBEV_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace geobev {

// Dense N-dimensional array of 64-bit reals, row-major. The only numeric
// carrier in the project; all summations use a fixed loop nesting so results
// are bit-reproducible across runs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  static Tensor full(const std::vector<int>& shape, double value);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Convenience indexers for the ranks used throughout the pipeline.
  double& at(int i, int j) { return data_[idx2(i, j)]; }
  double at(int i, int j) const { return data_[idx2(i, j)]; }
  double& at(int i, int j, int k) { return data_[idx3(i, j, k)]; }
  double at(int i, int j, int k) const { return data_[idx3(i, j, k)]; }
  double& at(int i, int j, int k, int l) { return data_[idx4(i, j, k, l)]; }
  double at(int i, int j, int k, int l) const { return data_[idx4(i, j, k, l)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::size_t idx2(int i, int j) const {
    return static_cast<std::size_t>(i) * shape_[1] + j;
  }
  std::size_t idx3(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k;
  }
  std::size_t idx4(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) *
               shape_[3] +
           l;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

// --- elementwise maps -------------------------------------------------------

Tensor sigmoid(const Tensor& x);
Tensor tanh_map(const Tensor& x);

// a op b, where b is either the same shape as a, has a's shape with the
// leading axis removed, or has a leading axis of size 1 (broadcast over the
// channel axis; how a [H,W] mask multiplies [C,H,W] features).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
double sum(const Tensor& a);

// --- convolution ------------------------------------------------------------

// Cross-correlation with zero "same" padding, no bias. input [C_in,H,W],
// kernel [C_out,C_in,k,k] with k odd; output [C_out,H,W].
Tensor conv2d(const Tensor& input, const Tensor& kernel);

struct Conv2dGrads {
  Tensor grad_input;
  Tensor grad_kernel;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel,
                            const Tensor& grad_out);

// The two halves of conv2d_backward, usable separately (the ConvGRU backward
// pass accumulates kernel gradients across timesteps).
Tensor conv2d_backward_input(const Tensor& kernel, const Tensor& grad_out);
Tensor conv2d_backward_kernel(const Tensor& input, const Tensor& grad_out,
                              int kernel_size);

// --- depth-axis softmax -----------------------------------------------------

// Softmax along axis 0 of [D,h,w] with max subtraction.
Tensor softmax_channel(const Tensor& x);

// --- numeric gradient oracle ------------------------------------------------

// Central differences (f(x+de_i) - f(x-de_i)) / (2d) per element.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double step = 1e-5);

// --- GTNS file format -------------------------------------------------------
// magic "GTNS\0", u32 LE version = 1, u8 ndim, ndim x u32 LE dims, then raw
// 64-bit LE IEEE-754 values in row-major order.

void save_gtns(const Tensor& t, const std::string& path);
Tensor load_gtns(const std::string& path);

}  // namespace geobev

#endif  // GEOBEV_TENSOR_HPP_
