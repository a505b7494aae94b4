// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pedpipe/errors.hpp"

namespace pedpipe {

using detail::input_grad;
using detail::make_result;
using detail::Node;

namespace {

constexpr double kMaskedScore = -1e30;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

const std::vector<double>& in_value(const Node& n, std::size_t i) { return n.inputs[i]->value; }

}  // namespace

double stable_softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) { return -stable_softplus(-x); }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (double* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    const auto& av = in_value(self, 0);
    const auto& bv = in_value(self, 1);
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make_result(a.shape(), std::move(out), "scale", {a}, [factor](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.shape().back()) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match trailing dim of " +
                         shape_str(x.shape()));
  }
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.numel());
  const auto xv = x.data(), bv = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % n];
  return make_result(x.shape(), std::move(out), "add_bias", {x, bias}, [n](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " . " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    const double* A = in_value(self, 0).data();
    const double* B = in_value(self, 1).data();
    const double* dZ = self.grad.data();
    if (double* dA = input_grad(self, 0)) {
      // dA = dZ . B^T
      for (std::size_t i = 0; i < m; ++i) {
        const double* dz = dZ + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += dz[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (double* dB = input_grad(self, 1)) {
      // dB = A^T . dZ
      for (std::size_t i = 0; i < m; ++i) {
        const double* dz = dZ + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          double* db = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) db[j] += aip * dz[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return make_result({c, r}, std::move(out), "transpose", {a}, [r, c](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {a}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank2(a, "slice_rows");
  const std::size_t cols = a.dim(1);
  if (start + count > a.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_str(a.shape()));
  }
  const auto av = a.data();
  std::vector<double> out(av.begin() + start * cols, av.begin() + (start + count) * cols);
  return make_result({count, cols}, std::move(out), "slice_rows", {a}, [start, cols](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * cols + i] += self.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank2(a, "slice_cols");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (start + count > cols) {
    throw DimensionError("slice_cols: cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_str(a.shape()));
  }
  std::vector<double> out(rows * count);
  const auto av = a.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = av[i * cols + start + j];
  return make_result({rows, count}, std::move(out), "slice_cols", {a}, [rows, cols, start, count](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < count; ++j) g[i * cols + start + j] += self.grad[i * count + j];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  const std::size_t cols = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.dim(1) != cols) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({rows, cols}, std::move(out), "concat_rows", inputs, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const std::size_t len = self.inputs[k]->value.size();
      if (double* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
      }
      offset += len;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  require_rank2(parts[0], "concat_cols");
  const std::size_t rows = parts[0].dim(0);
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    cols += p.dim(1);
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.dim(1);
    const auto pv = p.data();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pc; ++j) out[i * cols + offset + j] = pv[i * pc + j];
    offset += pc;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({rows, cols}, std::move(out), "concat_cols", inputs, [rows, cols](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const std::size_t pc = self.inputs[k]->shape[1];
      if (double* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < pc; ++j) g[i * pc + j] += self.grad[i * cols + offset + j];
      }
      offset += pc;
    }
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& weights) {
  require_rank2(x, "scale_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (weights.numel() != rows) {
    throw DimensionError("scale_rows: weights " + shape_str(weights.shape()) + " do not match rows of " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(rows * cols);
  const auto xv = x.data(), wv = weights.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = xv[i * cols + j] * wv[i];
  return make_result({rows, cols}, std::move(out), "scale_rows", {x, weights}, [rows, cols](Node& self) {
    const auto& xv = in_value(self, 0);
    const auto& wv = in_value(self, 1);
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) g[i * cols + j] += self.grad[i * cols + j] * wv[i];
    }
    if (double* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += self.grad[i * cols + j] * xv[i * cols + j];
        g[i] += acc;
      }
    }
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const TokenId> ids) {
  require_rank2(table, "embedding_lookup");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  const auto tv = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) + " >= table rows " + std::to_string(vocab));
    }
    std::copy_n(tv.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  std::vector<TokenId> saved(ids.begin(), ids.end());
  return make_result({ids.size(), d}, std::move(out), "embedding_lookup", {table},
                     [saved = std::move(saved), d](Node& self) {
                       if (double* g = input_grad(self, 0)) {
                         for (std::size_t i = 0; i < saved.size(); ++i)
                           for (std::size_t j = 0; j < d; ++j) g[saved[i] * d + j] += self.grad[i * d + j];
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()) +
                         " do not match " + shape_str(x.shape()));
  }
  std::vector<double> out(rows * d), xhat(rows * d), rstd(rows);
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* r = xv.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += r[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(d);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (r[j] - mu) * rstd[i];
      out[i * d + j] = xhat[i * d + j] * gv[j] + bv[j];
    }
  }
  return make_result({rows, d}, std::move(out), "layer_norm", {x, gain, bias},
                     [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                       const auto& gv = in_value(self, 1);
                       const double* dy = self.grad.data();
                       if (double* gx = input_grad(self, 0)) {
                         std::vector<double> dxhat(d);
                         for (std::size_t i = 0; i < rows; ++i) {
                           double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             dxhat[j] = dy[i * d + j] * gv[j];
                             mean_dxhat += dxhat[j];
                             mean_dxhat_xhat += dxhat[j] * xhat[i * d + j];
                           }
                           mean_dxhat /= static_cast<double>(d);
                           mean_dxhat_xhat /= static_cast<double>(d);
                           for (std::size_t j = 0; j < d; ++j) {
                             gx[i * d + j] += rstd[i] * (dxhat[j] - mean_dxhat - xhat[i * d + j] * mean_dxhat_xhat);
                           }
                         }
                       }
                       if (double* gg = input_grad(self, 1)) {
                         for (std::size_t i = 0; i < rows; ++i)
                           for (std::size_t j = 0; j < d; ++j) gg[j] += dy[i * d + j] * xhat[i * d + j];
                       }
                       if (double* gb = input_grad(self, 2)) {
                         for (std::size_t i = 0; i < rows; ++i)
                           for (std::size_t j = 0; j < d; ++j) gb[j] += dy[i * d + j];
                       }
                     });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
  return make_result(x.shape(), std::move(out), "gelu", {x}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const auto& xv = in_value(self, 0);
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]);
        g[i] += self.grad[i] * (cdf + xv[i] * pdf);
      }
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const int rank = static_cast<int>(x.rank());
  if (rank == 0) throw DimensionError("softmax: scalar input");
  const int ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= x.shape()[i];
  for (int i = ax + 1; i < rank; ++i) inner *= x.shape()[i];
  const std::size_t n = x.shape()[ax];

  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, xv[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(xv[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), "softmax", {x}, [outer, inner, n](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const auto& y = self.value;
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += self.grad[base + i * inner] * y[base + i * inner];
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = base + i * inner;
            g[idx] += y[idx] * (self.grad[idx] - dot);
          }
        }
      }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(xv[i]);
  return make_result(x.shape(), std::move(out), "sigmoid", {x}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
    }
  });
}

Tensor log_sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_log_sigmoid(xv[i]);
  return make_result(x.shape(), std::move(out), "log_sigmoid", {x}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const auto& xv = in_value(self, 0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * stable_sigmoid(-xv[i]);
    }
  });
}

Tensor softplus(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_softplus(xv[i]);
  return make_result(x.shape(), std::move(out), "softplus", {x}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const auto& xv = in_value(self, 0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * stable_sigmoid(xv[i]);
    }
  });
}

Tensor mask_future(const Tensor& scores) {
  require_rank2(scores, "mask_future");
  const std::size_t n = scores.dim(0);
  if (scores.dim(1) != n) throw DimensionError("mask_future: expected square scores, got " + shape_str(scores.shape()));
  std::vector<double> out(scores.data().begin(), scores.data().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out[i * n + j] = kMaskedScore;
  return make_result({n, n}, std::move(out), "mask_future", {scores}, [n](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) g[i * n + j] += self.grad[i * n + j];
    }
  });
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout: rate must be in [0, 1), got " + std::to_string(p));
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> factors(x.numel());
  for (auto& f : factors) f = rng.uniform() < p ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factors[i];
  return make_result(x.shape(), std::move(out), "dropout", {x}, [factors = std::move(factors)](Node& self) {
    if (double* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factors[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({}, {total}, "sum", {x}, [](Node& self) {
    if (double* g = input_grad(self, 0)) {
      const std::size_t n = self.inputs[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ArgumentError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor cross_entropy_logits(const Tensor& logits, std::span<const TokenId> targets, std::span<const std::uint8_t> mask,
                            Reduction reduction) {
  require_rank2(logits, "cross_entropy_logits");
  const std::size_t rows = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy_logits: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(logits.shape()));
  }
  if (!mask.empty() && mask.size() != rows) {
    throw DimensionError("cross_entropy_logits: mask length " + std::to_string(mask.size()) + " for logits " +
                         shape_str(logits.shape()));
  }
  std::vector<std::uint8_t> selected(rows, 1);
  if (!mask.empty()) std::copy(mask.begin(), mask.end(), selected.begin());

  const auto lv = logits.data();
  std::vector<double> lse(rows, 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!selected[i]) continue;
    if (targets[i] >= vocab) {
      throw IndexError("cross_entropy_logits: target id " + std::to_string(targets[i]) + " >= vocab " +
                       std::to_string(vocab));
    }
    const double* row = lv.data() + i * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double acc = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) acc += std::exp(row[j] - mx);
    lse[i] = mx + std::log(acc);
    total += lse[i] - row[targets[i]];
    ++count;
  }
  double factor = 1.0;
  if (reduction == Reduction::mean) factor = count == 0 ? 0.0 : 1.0 / static_cast<double>(count);
  std::vector<TokenId> saved_targets(targets.begin(), targets.end());
  return make_result({}, {total * factor}, "cross_entropy", {logits},
                     [rows, vocab, factor, selected = std::move(selected), lse = std::move(lse),
                      saved_targets = std::move(saved_targets)](Node& self) {
                       double* g = input_grad(self, 0);
                       if (!g || factor == 0.0) return;
                       const auto& lv = self.inputs[0]->value;
                       const double up = self.grad[0] * factor;
                       for (std::size_t i = 0; i < rows; ++i) {
                         if (!selected[i]) continue;
                         const double* row = lv.data() + i * vocab;
                         double* grow = g + i * vocab;
                         for (std::size_t j = 0; j < vocab; ++j) grow[j] += up * std::exp(row[j] - lse[i]);
                         grow[saved_targets[i]] -= up;
                       }
                     });
}

Tensor sample_standard_normal(Shape shape, Rng& rng) {
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = rng.normal();
  return Tensor::from(std::move(shape), std::move(values), false);
}

}  // namespace pedpipe
