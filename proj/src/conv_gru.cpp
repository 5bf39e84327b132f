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
#include "geobev/conv_gru.hpp"

#include <cmath>
#include <cstddef>

#include "geobev/error.hpp"

namespace geobev {

namespace {

Tensor uniform_kernel(int c_out, int c_in, int k, SeededRng& rng) {
  Tensor t({c_out, c_in, k, k});
  const double bound = std::sqrt(1.0 / (c_in * k * k));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.uniform(-bound, bound);
  }
  return t;
}

}  // namespace

ConvGruParams init_conv_gru(int input_channels, int hidden_channels,
                            int num_units, int kernel_size, SeededRng& rng) {
  if (num_units < 1) throw_config("ConvGRU needs at least one unit");
  ConvGruParams p;
  p.input_channels = input_channels;
  p.hidden_channels = hidden_channels;
  p.kernel_size = kernel_size;
  p.units.resize(static_cast<std::size_t>(num_units));
  for (int u = 0; u < num_units; ++u) {
    const int c_in = (u == 0) ? input_channels : hidden_channels;
    ConvGruUnitParams& unit = p.units[static_cast<std::size_t>(u)];
    unit.w_update = uniform_kernel(hidden_channels, c_in, kernel_size, rng);
    unit.u_update = uniform_kernel(hidden_channels, hidden_channels, kernel_size, rng);
    unit.w_reset = uniform_kernel(hidden_channels, c_in, kernel_size, rng);
    unit.u_reset = uniform_kernel(hidden_channels, hidden_channels, kernel_size, rng);
    unit.w_cand = uniform_kernel(hidden_channels, c_in, kernel_size, rng);
    unit.u_cand = uniform_kernel(hidden_channels, hidden_channels, kernel_size, rng);
  }
  return p;
}

Tensor convgru_cell(const Tensor& input, const Tensor& h_prev,
                    const ConvGruUnitParams& params, ConvGruCellCache* cache) {
  const Tensor z =
      sigmoid(add(conv2d(input, params.w_update), conv2d(h_prev, params.u_update)));
  const Tensor r =
      sigmoid(add(conv2d(input, params.w_reset), conv2d(h_prev, params.u_reset)));
  const Tensor reset_h = mul(r, h_prev);
  const Tensor h_cand =
      tanh_map(add(conv2d(input, params.w_cand), conv2d(reset_h, params.u_cand)));
  // h' = (1 - z) .* h_prev + z .* h~
  Tensor h_next(h_prev.shape());
  for (std::size_t i = 0; i < h_next.size(); ++i) {
    h_next[i] = (1.0 - z[i]) * h_prev[i] + z[i] * h_cand[i];
  }
  if (cache) {
    cache->input = input;
    cache->h_prev = h_prev;
    cache->z = z;
    cache->r = r;
    cache->h_cand = h_cand;
    cache->reset_h = reset_h;
  }
  return h_next;
}

ConvGruCellGrads convgru_cell_backward(const ConvGruCellCache& cache,
                                       const ConvGruUnitParams& params,
                                       const Tensor& grad_h) {
  if (cache.z.size() == 0) {
    throw Error(ErrorKind::kConfig,
                "convgru_cell_backward: forward cache is empty");
  }
  if (!grad_h.same_shape(cache.z)) {
    throw_config("convgru_cell_backward: grad shape mismatch");
  }
  const std::size_t n = grad_h.size();
  const int k = params.w_update.dim(2);

  // dL/dz, dL/dh~ and the direct dL/dh_prev term of the convex combination.
  Tensor d_z(cache.z.shape()), d_cand(cache.z.shape()), d_hprev(cache.z.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad_h[i];
    d_z[i] = g * (cache.h_cand[i] - cache.h_prev[i]);
    d_cand[i] = g * cache.z[i];
    d_hprev[i] = g * (1.0 - cache.z[i]);
  }
  // Through the activations: sigma' = z(1-z), tanh' = 1 - c^2.
  Tensor d_az(cache.z.shape()), d_ac(cache.z.shape());
  for (std::size_t i = 0; i < n; ++i) {
    d_az[i] = d_z[i] * cache.z[i] * (1.0 - cache.z[i]);
    d_ac[i] = d_cand[i] * (1.0 - cache.h_cand[i] * cache.h_cand[i]);
  }
  // Candidate path: a_c = w_cand * f + u_cand * (r .* h_prev).
  const Tensor d_reset_h = conv2d_backward_input(params.u_cand, d_ac);
  Tensor d_r(cache.z.shape());
  for (std::size_t i = 0; i < n; ++i) {
    d_r[i] = d_reset_h[i] * cache.h_prev[i];
    d_hprev[i] += d_reset_h[i] * cache.r[i];
  }
  Tensor d_ar(cache.z.shape());
  for (std::size_t i = 0; i < n; ++i) {
    d_ar[i] = d_r[i] * cache.r[i] * (1.0 - cache.r[i]);
  }

  ConvGruCellGrads out;
  out.grad_params.w_update = conv2d_backward_kernel(cache.input, d_az, k);
  out.grad_params.u_update = conv2d_backward_kernel(cache.h_prev, d_az, k);
  out.grad_params.w_reset = conv2d_backward_kernel(cache.input, d_ar, k);
  out.grad_params.u_reset = conv2d_backward_kernel(cache.h_prev, d_ar, k);
  out.grad_params.w_cand = conv2d_backward_kernel(cache.input, d_ac, k);
  out.grad_params.u_cand = conv2d_backward_kernel(cache.reset_h, d_ac, k);

  out.grad_input = add(add(conv2d_backward_input(params.w_update, d_az),
                           conv2d_backward_input(params.w_reset, d_ar)),
                       conv2d_backward_input(params.w_cand, d_ac));
  Tensor gh = add(add(conv2d_backward_input(params.u_update, d_az),
                      conv2d_backward_input(params.u_reset, d_ar)),
                  d_hprev);
  out.grad_h_prev = std::move(gh);
  return out;
}

Tensor convgru_forward(const std::vector<Tensor>& window,
                       const ConvGruParams& params, ConvGruForwardCache* cache) {
  if (window.empty()) throw_config("convgru_forward: empty temporal window");
  for (const Tensor& f : window) {
    if (!f.same_shape(window[0])) {
      throw_config("convgru_forward: all frames must share a shape");
    }
  }
  const int t_len = static_cast<int>(window.size());
  const int h = window[0].dim(1), w = window[0].dim(2);
  if (cache) {
    cache->cells.assign(params.units.size(), {});
  }
  std::vector<Tensor> seq = window;
  for (std::size_t u = 0; u < params.units.size(); ++u) {
    if (cache) cache->cells[u].resize(static_cast<std::size_t>(t_len));
    Tensor h_state({params.hidden_channels, h, w}, 0.0);
    for (int t = 0; t < t_len; ++t) {
      ConvGruCellCache* cc =
          cache ? &cache->cells[u][static_cast<std::size_t>(t)] : nullptr;
      h_state = convgru_cell(seq[static_cast<std::size_t>(t)], h_state,
                             params.units[u], cc);
      seq[static_cast<std::size_t>(t)] = h_state;
    }
  }
  return seq.back();
}

ConvGruBpttGrads convgru_backward_through_time(const ConvGruForwardCache& cache,
                                               const ConvGruParams& params,
                                               const Tensor& grad_out) {
  const std::size_t num_units = params.units.size();
  if (cache.cells.size() != num_units || num_units == 0 ||
      cache.cells[0].empty()) {
    throw Error(ErrorKind::kConfig,
                "convgru_backward_through_time: cache does not match params");
  }
  const int t_len = static_cast<int>(cache.cells[0].size());

  ConvGruBpttGrads out;
  out.grad_params.input_channels = params.input_channels;
  out.grad_params.hidden_channels = params.hidden_channels;
  out.grad_params.kernel_size = params.kernel_size;
  out.grad_params.units.resize(num_units);
  auto zero_like = [](const Tensor& t) { return Tensor(t.shape(), 0.0); };
  for (std::size_t u = 0; u < num_units; ++u) {
    const ConvGruUnitParams& p = params.units[u];
    ConvGruUnitParams& g = out.grad_params.units[u];
    g.w_update = zero_like(p.w_update);
    g.u_update = zero_like(p.u_update);
    g.w_reset = zero_like(p.w_reset);
    g.u_reset = zero_like(p.u_reset);
    g.w_cand = zero_like(p.w_cand);
    g.u_cand = zero_like(p.u_cand);
  }

  // grad on each unit's per-timestep output, seeded at the top unit's final
  // state and fed downward through the stack.
  std::vector<Tensor> grad_seq(static_cast<std::size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    grad_seq[static_cast<std::size_t>(t)] = zero_like(grad_out);
  }
  grad_seq.back() = grad_out;

  auto accumulate = [](Tensor& into, const Tensor& g) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
  };

  for (std::size_t ui = num_units; ui-- > 0;) {
    std::vector<Tensor> grad_below(static_cast<std::size_t>(t_len));
    Tensor grad_h;  // carried into earlier timesteps
    for (int t = t_len - 1; t >= 0; --t) {
      Tensor g = grad_seq[static_cast<std::size_t>(t)];
      if (grad_h.size() != 0) accumulate(g, grad_h);
      ConvGruCellGrads cg = convgru_cell_backward(
          cache.cells[ui][static_cast<std::size_t>(t)], params.units[ui], g);
      grad_below[static_cast<std::size_t>(t)] = std::move(cg.grad_input);
      grad_h = std::move(cg.grad_h_prev);
      ConvGruUnitParams& acc = out.grad_params.units[ui];
      accumulate(acc.w_update, cg.grad_params.w_update);
      accumulate(acc.u_update, cg.grad_params.u_update);
      accumulate(acc.w_reset, cg.grad_params.w_reset);
      accumulate(acc.u_reset, cg.grad_params.u_reset);
      accumulate(acc.w_cand, cg.grad_params.w_cand);
      accumulate(acc.u_cand, cg.grad_params.u_cand);
    }
    grad_seq = std::move(grad_below);
  }
  out.grad_window = std::move(grad_seq);
  return out;
}

namespace {

void check_conv3d_shapes(const std::vector<Tensor>& window,
                         const Tensor& kernel) {
  if (window.empty()) throw_config("temporal_conv3d: empty window");
  if (kernel.ndim() != 5) {
    throw_config("temporal_conv3d: kernel must be [C_out,C_in,T,k,k]");
  }
  if (kernel.dim(2) != static_cast<int>(window.size())) {
    throw_config("temporal_conv3d: kernel temporal extent " +
                 std::to_string(kernel.dim(2)) + " != window length " +
                 std::to_string(window.size()));
  }
  if (kernel.dim(3) != kernel.dim(4) || kernel.dim(3) % 2 == 0) {
    throw_config("temporal_conv3d: spatial kernel must be square and odd");
  }
  for (const Tensor& f : window) {
    if (f.ndim() != 3 || f.dim(0) != kernel.dim(1) ||
        !f.same_shape(window[0])) {
      throw_config("temporal_conv3d: window frames mismatch the kernel");
    }
  }
}

// kernel slice [C_out,C_in,k,k] at temporal offset tau.
Tensor kernel_slice(const Tensor& kernel, int tau) {
  const int co = kernel.dim(0), ci = kernel.dim(1), tt = kernel.dim(2),
            k = kernel.dim(3);
  Tensor s({co, ci, k, k});
  for (int a = 0; a < co; ++a) {
    for (int b = 0; b < ci; ++b) {
      for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
          s.at(a, b, y, x) =
              kernel[(((static_cast<std::size_t>(a) * ci + b) * tt + tau) * k + y) * k + x];
        }
      }
    }
  }
  return s;
}

}  // namespace

Tensor temporal_conv3d(const std::vector<Tensor>& window, const Tensor& kernel) {
  check_conv3d_shapes(window, kernel);
  Tensor out;
  for (std::size_t tau = 0; tau < window.size(); ++tau) {
    Tensor part = conv2d(window[tau], kernel_slice(kernel, static_cast<int>(tau)));
    if (tau == 0) {
      out = std::move(part);
    } else {
      out = add(out, part);
    }
  }
  return out;
}

std::pair<std::vector<Tensor>, Tensor> temporal_conv3d_backward(
    const std::vector<Tensor>& window, const Tensor& kernel,
    const Tensor& grad_out) {
  check_conv3d_shapes(window, kernel);
  const int co = kernel.dim(0), ci = kernel.dim(1), tt = kernel.dim(2),
            k = kernel.dim(3);
  std::vector<Tensor> grad_window(window.size());
  Tensor grad_kernel(kernel.shape(), 0.0);
  for (int tau = 0; tau < tt; ++tau) {
    const Tensor slice = kernel_slice(kernel, tau);
    grad_window[static_cast<std::size_t>(tau)] =
        conv2d_backward_input(slice, grad_out);
    const Tensor gk = conv2d_backward_kernel(
        window[static_cast<std::size_t>(tau)], grad_out, k);
    for (int a = 0; a < co; ++a) {
      for (int b = 0; b < ci; ++b) {
        for (int y = 0; y < k; ++y) {
          for (int x = 0; x < k; ++x) {
            grad_kernel[(((static_cast<std::size_t>(a) * ci + b) * tt + tau) * k + y) * k + x] =
                gk.at(a, b, y, x);
          }
        }
      }
    }
  }
  return {std::move(grad_window), std::move(grad_kernel)};
}

Tensor init_conv3d_kernel(int out_channels, int in_channels, int temporal,
                          int kernel_size, SeededRng& rng) {
  Tensor t({out_channels, in_channels, temporal, kernel_size, kernel_size});
  const double bound =
      std::sqrt(1.0 / (in_channels * temporal * kernel_size * kernel_size));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace geobev
