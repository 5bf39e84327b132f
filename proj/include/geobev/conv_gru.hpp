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
#ifndef GEOBEV_CONV_GRU_HPP_
#define GEOBEV_CONV_GRU_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "geobev/rng.hpp"
#include "geobev/tensor.hpp"

namespace geobev {

// The six convolution kernels of one ConvGRU unit. w_* consume the unit
// input, u_* the previous hidden state; all share the kernel size and carry
// no bias.
struct ConvGruUnitParams {
  Tensor w_update, u_update;     // update gate z
  Tensor w_reset, u_reset;       // reset gate r
  Tensor w_cand, u_cand;         // candidate state
};

struct ConvGruParams {
  std::vector<ConvGruUnitParams> units;
  int input_channels = 0;
  int hidden_channels = 0;
  int kernel_size = 3;
};

// Uniform init in +-sqrt(1 / (C_in * k^2)) per kernel, deterministic per rng
// state. Unit u > 0 consumes the hidden sequence of unit u-1.
ConvGruParams init_conv_gru(int input_channels, int hidden_channels,
                            int num_units, int kernel_size, SeededRng& rng);

// Forward intermediates needed for the exact backward pass.
struct ConvGruCellCache {
  Tensor input, h_prev;
  Tensor z, r, h_cand;
  Tensor reset_h;  // r .* h_prev, the tensor convolved by u_cand
};

// One recurrence step:
//   z = sigmoid(w_z * f + u_z * h);  r = sigmoid(w_r * f + u_r * h)
//   h~ = tanh(w * f + u * (r .* h));  h' = (1 - z) .* h + z .* h~
Tensor convgru_cell(const Tensor& input, const Tensor& h_prev,
                    const ConvGruUnitParams& params,
                    ConvGruCellCache* cache = nullptr);

struct ConvGruCellGrads {
  Tensor grad_input;
  Tensor grad_h_prev;
  ConvGruUnitParams grad_params;
};

ConvGruCellGrads convgru_cell_backward(const ConvGruCellCache& cache,
                                       const ConvGruUnitParams& params,
                                       const Tensor& grad_h);

struct ConvGruForwardCache {
  // cells[u][t] for unit u and timestep t.
  std::vector<std::vector<ConvGruCellCache>> cells;
};

// Runs the stacked recurrence over the window (oldest frame first, zero
// initial state per unit) and returns the final hidden state of the last
// unit.
Tensor convgru_forward(const std::vector<Tensor>& window,
                       const ConvGruParams& params,
                       ConvGruForwardCache* cache = nullptr);

struct ConvGruBpttGrads {
  std::vector<Tensor> grad_window;
  ConvGruParams grad_params;  // same layout, gradients summed over timesteps
};

ConvGruBpttGrads convgru_backward_through_time(const ConvGruForwardCache& cache,
                                               const ConvGruParams& params,
                                               const Tensor& grad_out);

// 3D-convolution temporal baseline: zero "same" padding in space, valid in
// time with the kernel's temporal extent equal to the window length, so the
// window reduces to a single map. kernel [C_out,C_in,T,k,k].
Tensor temporal_conv3d(const std::vector<Tensor>& window, const Tensor& kernel);

std::pair<std::vector<Tensor>, Tensor> temporal_conv3d_backward(
    const std::vector<Tensor>& window, const Tensor& kernel,
    const Tensor& grad_out);

Tensor init_conv3d_kernel(int out_channels, int in_channels, int temporal,
                          int kernel_size, SeededRng& rng);

}  // namespace geobev

#endif  // GEOBEV_CONV_GRU_HPP_
