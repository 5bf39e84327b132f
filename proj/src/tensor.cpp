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
#include "geobev/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geobev/error.hpp"

namespace geobev {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t checked_numel(const std::vector<int>& shape) {
  if (shape.empty()) throw_config("tensor shape must have at least one dim");
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) {
      throw_config("invalid tensor shape " + shape_str(shape) +
                   ": dims must be >= 1");
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

Tensor Tensor::full(const std::vector<int>& shape, double value) {
  return Tensor(shape, value);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const double* in = x.data();
  double* o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = in[i];
    if (v >= 0.0) {
      o[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      double e = std::exp(v);
      o[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor tanh_map(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

namespace {

enum class Broadcast { kNone, kLeadingAxis };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Broadcast::kNone;
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  // b matches a minus the leading axis, or carries a size-1 leading axis.
  bool tail_match = false;
  if (sb.size() + 1 == sa.size()) {
    tail_match = std::equal(sb.begin(), sb.end(), sa.begin() + 1);
  } else if (sb.size() == sa.size() && sb[0] == 1) {
    tail_match = std::equal(sb.begin() + 1, sb.end(), sa.begin() + 1);
  }
  if (!tail_match) {
    throw_config("elementwise shape mismatch: " + shape_str(sa) + " vs " +
                 shape_str(sb));
  }
  return Broadcast::kLeadingAxis;
}

template <typename Op>
Tensor elementwise(const Tensor& a, const Tensor& b, Op op) {
  Broadcast mode = broadcast_mode(a, b);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  if (mode == Broadcast::kNone) {
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = op(pa[i], pb[i]);
  } else {
    std::size_t inner = b.size();
    std::size_t lead = a.size() / inner;
    for (std::size_t c = 0; c < lead; ++c) {
      for (std::size_t i = 0; i < inner; ++i) {
        po[c * inner + i] = op(pa[c * inner + i], pb[i]);
      }
    }
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

double sum(const Tensor& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
  return acc;
}

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& kernel) {
  if (input.ndim() != 3) {
    throw_config("conv2d input must be [C_in,H,W], got " +
                 shape_str(input.shape()));
  }
  if (kernel.ndim() != 4) {
    throw_config("conv2d kernel must be [C_out,C_in,k,k], got " +
                 shape_str(kernel.shape()));
  }
  if (kernel.dim(2) != kernel.dim(3)) {
    throw_config("conv2d kernel must be square, got " +
                 shape_str(kernel.shape()));
  }
  if (kernel.dim(2) % 2 == 0) {
    throw_config("conv2d kernel size must be odd, got " +
                 std::to_string(kernel.dim(2)));
  }
  if (kernel.dim(1) != input.dim(0)) {
    throw_config("conv2d channel mismatch: input " + shape_str(input.shape()) +
                 " vs kernel " + shape_str(kernel.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel) {
  check_conv_shapes(input, kernel);
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = kernel.dim(0), k = kernel.dim(2);
  const int pad = (k - 1) / 2;
  Tensor out({c_out, h, w}, 0.0);
  // Fixed nesting (co, ci, dy, dx, y, x); per-output summation order is
  // therefore (ci, dy, dx), identical on every run.
  for (int co = 0; co < c_out; ++co) {
    double* out_plane = out.data() + static_cast<std::size_t>(co) * h * w;
    for (int ci = 0; ci < c_in; ++ci) {
      const double* in_plane =
          input.data() + static_cast<std::size_t>(ci) * h * w;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const double wv = kernel.at(co, ci, dy, dx);
          if (wv == 0.0) continue;
          const int oy = dy - pad, ox = dx - pad;
          const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
          const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
          for (int y = y0; y < y1; ++y) {
            const double* in_row = in_plane + (y + oy) * w + ox;
            double* out_row = out_plane + y * w;
            for (int x = x0; x < x1; ++x) out_row[x] += wv * in_row[x];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& kernel, const Tensor& grad_out) {
  const int c_out = kernel.dim(0), c_in = kernel.dim(1), k = kernel.dim(2);
  if (grad_out.ndim() != 3 || grad_out.dim(0) != c_out) {
    throw_config("conv2d_backward grad_out shape mismatch");
  }
  const int h = grad_out.dim(1), w = grad_out.dim(2);
  const int pad = (k - 1) / 2;
  Tensor grad_input({c_in, h, w}, 0.0);
  for (int ci = 0; ci < c_in; ++ci) {
    double* gi_plane = grad_input.data() + static_cast<std::size_t>(ci) * h * w;
    for (int co = 0; co < c_out; ++co) {
      const double* go_plane =
          grad_out.data() + static_cast<std::size_t>(co) * h * w;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const double wv = kernel.at(co, ci, dy, dx);
          if (wv == 0.0) continue;
          // input (iy,ix) contributed to output (iy-dy+pad, ix-dx+pad)
          const int oy = pad - dy, ox = pad - dx;
          const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
          const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
          for (int y = y0; y < y1; ++y) {
            const double* go_row = go_plane + (y + oy) * w + ox;
            double* gi_row = gi_plane + y * w;
            for (int x = x0; x < x1; ++x) gi_row[x] += wv * go_row[x];
          }
        }
      }
    }
  }
  return grad_input;
}

Tensor conv2d_backward_kernel(const Tensor& input, const Tensor& grad_out,
                              int kernel_size) {
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = grad_out.dim(0);
  if (grad_out.dim(1) != h || grad_out.dim(2) != w) {
    throw_config("conv2d_backward grad_out spatial mismatch");
  }
  const int k = kernel_size;
  const int pad = (k - 1) / 2;
  Tensor grad_kernel({c_out, c_in, k, k}, 0.0);
  for (int co = 0; co < c_out; ++co) {
    const double* go_plane =
        grad_out.data() + static_cast<std::size_t>(co) * h * w;
    for (int ci = 0; ci < c_in; ++ci) {
      const double* in_plane =
          input.data() + static_cast<std::size_t>(ci) * h * w;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const int oy = dy - pad, ox = dx - pad;
          const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
          const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* in_row = in_plane + (y + oy) * w + ox;
            const double* go_row = go_plane + y * w;
            for (int x = x0; x < x1; ++x) acc += go_row[x] * in_row[x];
          }
          grad_kernel.at(co, ci, dy, dx) = acc;
        }
      }
    }
  }
  return grad_kernel;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel,
                            const Tensor& grad_out) {
  check_conv_shapes(input, kernel);
  if (grad_out.ndim() != 3 || grad_out.dim(0) != kernel.dim(0) ||
      grad_out.dim(1) != input.dim(1) || grad_out.dim(2) != input.dim(2)) {
    throw_config("conv2d_backward grad_out shape mismatch: got " +
                 shape_str(grad_out.shape()));
  }
  return {conv2d_backward_input(kernel, grad_out),
          conv2d_backward_kernel(input, grad_out, kernel.dim(2))};
}

Tensor softmax_channel(const Tensor& x) {
  if (x.ndim() != 3) {
    throw_config("softmax_channel expects [D,h,w], got " +
                 shape_str(x.shape()));
  }
  const int d = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(x.shape());
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    for (int c = 0; c < w; ++c) {
      const std::size_t base = static_cast<std::size_t>(y) * w + c;
      double m = x[base];
      for (int i = 1; i < d; ++i) m = std::max(m, x[base + i * plane]);
      double denom = 0.0;
      for (int i = 0; i < d; ++i) {
        double e = std::exp(x[base + i * plane] - m);
        out[base + i * plane] = e;
        denom += e;
      }
      for (int i = 0; i < d; ++i) out[base + i * plane] /= denom;
    }
  }
  return out;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double step) {
  Tensor grad(x.shape(), 0.0);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = f(probe);
    probe[i] = orig - step;
    const double fm = f(probe);
    probe[i] = orig;
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

namespace {

constexpr char kGtnsMagic[5] = {'G', 'T', 'N', 'S', '\0'};
constexpr std::uint32_t kGtnsVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64(std::string& buf, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_gtns(const Tensor& t, const std::string& path) {
  std::string buf;
  buf.reserve(10 + 4 * t.shape().size() + 8 * t.size());
  buf.append(kGtnsMagic, 5);
  put_u32(buf, kGtnsVersion);
  buf.push_back(static_cast<char>(t.ndim()));
  for (int d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.size(); ++i) put_f64(buf, t[i]);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw_io("write failed: " + path);
}

Tensor load_gtns(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 10 || std::memcmp(raw.data(), kGtnsMagic, 5) != 0) {
    throw_format("not a GTNS file (bad magic): " + path);
  }
  if (get_u32(p + 5) != kGtnsVersion) {
    throw_format("unsupported GTNS version in " + path);
  }
  const int ndim = p[9];
  if (ndim < 1 || raw.size() < 10 + 4 * static_cast<std::size_t>(ndim)) {
    throw_format("truncated GTNS header: " + path);
  }
  std::vector<int> shape(static_cast<std::size_t>(ndim));
  std::size_t n = 1;
  for (int i = 0; i < ndim; ++i) {
    std::uint32_t d = get_u32(p + 10 + 4 * i);
    if (d == 0) throw_format("zero dimension in GTNS file: " + path);
    shape[static_cast<std::size_t>(i)] = static_cast<int>(d);
    n *= d;
  }
  const std::size_t off = 10 + 4 * static_cast<std::size_t>(ndim);
  if (raw.size() != off + 8 * n) {
    throw_format("GTNS payload size mismatch: " + path);
  }
  Tensor t(shape);
  for (std::size_t i = 0; i < n; ++i) t[i] = get_f64(p + off + 8 * i);
  return t;
}

}  // namespace geobev
