// Copyright 2026 The scalefuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scalefuse/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scalefuse/errors.hpp"

namespace scalefuse {

using detail::Node;

namespace {

// Grad buffer of parent i, or nullptr when that parent does not track grads.
double* pgrad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.grad.data() : nullptr;
}

const double* pval(Node& self, std::size_t i) {
  return self.parents[i]->value.data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

void require_scalar(const Tensor& s, const char* op) {
  if (s.numel() != 1) {
    throw DimensionError(std::string(op) + ": expected a single-element tensor, got " +
                         shape_to_string(s.shape()));
  }
}

void require_dim(const Tensor& t, std::size_t dim, const char* op) {
  if (t.dim() != dim) {
    throw DimensionError(std::string(op) + ": expected " + std::to_string(dim) +
                         "-D tensor, got " + shape_to_string(t.shape()));
  }
}

thread_local bool kink_tracking = false;
thread_local double kink_margin = std::numeric_limits<double>::infinity();

inline void note_kink(double distance_to_kink) {
  if (kink_tracking) kink_margin = std::min(kink_margin, std::abs(distance_to_kink));
}

}  // namespace

KinkMonitor::KinkMonitor() {
  kink_tracking = true;
  kink_margin = std::numeric_limits<double>::infinity();
}

KinkMonitor::~KinkMonitor() { kink_tracking = false; }

double KinkMonitor::margin() const { return kink_margin; }

void KinkMonitor::reset() { kink_margin = std::numeric_limits<double>::infinity(); }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto n = self.grad.size();
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = pgrad(self, p)) {
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto n = self.grad.size();
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto n = self.grad.size();
    const double* x = pval(self, 0);
    const double* y = pval(self, 1);
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * y[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * s;
    }
  });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  require_scalar(s, "mul_scalar");
  const auto av = a.data();
  const double sv = s.data()[0];
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * sv;
  return make_result(a.shape(), std::move(out), {a, s}, [](Node& self) {
    const auto n = self.grad.size();
    const double* x = pval(self, 0);
    const double sv = pval(self, 1)[0];
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * sv;
    }
    if (double* g = pgrad(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += self.grad[i] * x[i];
      g[0] += acc;
    }
  });
}

Tensor div_scalar(const Tensor& a, const Tensor& s) {
  require_scalar(s, "div_scalar");
  const auto av = a.data();
  const double sv = s.data()[0];
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / sv;
  return make_result(a.shape(), std::move(out), {a, s}, [](Node& self) {
    const auto n = self.grad.size();
    const double* x = pval(self, 0);
    const double sv = pval(self, 1)[0];
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] / sv;
    }
    if (double* g = pgrad(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += self.grad[i] * x[i];
      g[0] -= acc / (sv * sv);
    }
  });
}

Tensor relu(const Tensor& a) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    note_kink(av[i]);
    out[i] = av[i] > 0.0 ? av[i] : 0.0;
  }
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    const double* x = pval(self, 0);
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (x[i] > 0.0) g[i] += self.grad[i];
      }
    }
  });
}

Tensor reciprocal(const Tensor& a) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / av[i];
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    const double* x = pval(self, 0);
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[i] -= self.grad[i] / (x[i] * x[i]);
      }
    }
  });
}

Tensor clamp_min(const Tensor& a, double floor) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    note_kink(av[i] - floor);
    out[i] = std::max(av[i], floor);
  }
  return make_result(a.shape(), std::move(out), {a}, [floor](Node& self) {
    const double* x = pval(self, 0);
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (x[i] >= floor) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result({1}, {acc}, {a}, [](Node& self) {
    if (double* g = pgrad(self, 0)) {
      const auto n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) throw ContractError("add_n: no terms");
  const auto& shape = terms[0].shape();
  std::vector<double> out(terms[0].numel(), 0.0);
  for (const auto& t : terms) {
    if (t.shape() != shape) throw DimensionError("add_n: shape mismatch");
    const auto v = t.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return make_result(shape, std::move(out), {terms.begin(), terms.end()},
                     [](Node& self) {
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         if (double* g = pgrad(self, p)) {
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             g[i] += self.grad[i];
                           }
                         }
                       }
                     });
}

Tensor mean_rows(const Tensor& a) {
  if (a.dim() == 1) return a;
  require_dim(a, 2, "mean_rows");
  const std::size_t rows = a.size(0), cols = a.size(1);
  const auto av = a.data();
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += av[r * cols + c];
  }
  const double inv = 1.0 / static_cast<double>(rows);
  for (auto& v : out) v *= inv;
  return make_result({cols}, std::move(out), {a}, [rows, cols, inv](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c] * inv;
      }
    }
  });
}

namespace {

// C[l,m] += A[l,k] * B[k,m], all row-major; reduction over k sequential.
void gemm_acc(const double* a, const double* b, double* c, std::size_t l,
              std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < l; ++i) {
    double* crow = c + i * m;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[l,m] += A[l,k] * B[m,k]^T
void gemm_acc_bt(const double* a, const double* b, double* c, std::size_t l,
                 std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * m + j] += acc;
    }
  }
}

// C[k,m] += A[l,k]^T * B[l,m]
void gemm_acc_at(const double* a, const double* b, double* c, std::size_t l,
                 std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * m;
      const double* brow = b + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() > 2 || b.dim() > 2) throw DimensionError("matmul: operands must be 1-D or 2-D");
  // View both operands as matrices: a 1-D left operand is a row, a 1-D right
  // operand is a column.
  const std::size_t l = a.dim() == 2 ? a.size(0) : 1;
  const std::size_t k = a.dim() == 2 ? a.size(1) : a.size(0);
  const std::size_t kb = b.size(0);
  const std::size_t m = b.dim() == 2 ? b.size(1) : 1;
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions differ " + shape_to_string(a.shape()) +
                         " @ " + shape_to_string(b.shape()));
  }
  Shape out_shape;
  if (a.dim() == 2) out_shape.push_back(l);
  if (b.dim() == 2) out_shape.push_back(m);
  if (out_shape.empty()) out_shape.push_back(1);

  std::vector<double> out(l * m, 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), l, k, m);
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [l, k, m](Node& self) {
                       const double* av = pval(self, 0);
                       const double* bv = pval(self, 1);
                       if (double* ga = pgrad(self, 0)) {
                         gemm_acc_bt(self.grad.data(), bv, ga, l, m, k);
                       }
                       if (double* gb = pgrad(self, 1)) {
                         gemm_acc_at(av, self.grad.data(), gb, l, k, m);
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_dim(a, 2, "transpose");
  const std::size_t r = a.size(0), c = a.size(1);
  const auto av = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  }
  return make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_dim(w, 2, "linear");
  require_dim(b, 1, "linear");
  if (x.dim() != 1 && x.dim() != 2) throw DimensionError("linear: input must be 1-D or 2-D");
  const std::size_t rows = x.dim() == 2 ? x.size(0) : 1;
  const std::size_t n = x.dim() == 2 ? x.size(1) : x.size(0);
  const std::size_t m = w.size(1);
  if (w.size(0) != n || b.size(0) != m) {
    throw DimensionError("linear: x " + shape_to_string(x.shape()) + ", W " +
                         shape_to_string(w.shape()) + ", b " + shape_to_string(b.shape()));
  }
  std::vector<double> out(rows * m, 0.0);
  gemm_acc(x.data().data(), w.data().data(), out.data(), rows, n, m);
  const auto bv = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] += bv[j];
  }
  Shape shape = x.dim() == 2 ? Shape{rows, m} : Shape{m};
  return make_result(std::move(shape), std::move(out), {x, w, b},
                     [rows, n, m](Node& self) {
                       const double* xv = pval(self, 0);
                       const double* wv = pval(self, 1);
                       const double* g = self.grad.data();
                       if (double* gx = pgrad(self, 0)) gemm_acc_bt(g, wv, gx, rows, m, n);
                       if (double* gw = pgrad(self, 1)) gemm_acc_at(xv, g, gw, rows, n, m);
                       if (double* gb = pgrad(self, 2)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t j = 0; j < m; ++j) gb[j] += g[r * m + j];
                         }
                       }
                     });
}

namespace {

void softmax_row(const double* x, double* y, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) throw InvalidValueError("softmax: non-finite input");
    mx = std::max(mx, x[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    total += y[i];
  }
  for (std::size_t i = 0; i < n; ++i) y[i] /= total;
}

}  // namespace

std::vector<double> softmax_values(std::span<const double> x) {
  if (x.empty()) throw ContractError("softmax: empty input");
  std::vector<double> y(x.size());
  softmax_row(x.data(), y.data(), x.size());
  return y;
}

Tensor softmax(const Tensor& x) {
  if (x.dim() > 2) throw DimensionError("softmax: input must be 1-D or 2-D");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    softmax_row(xv.data() + r * cols, out.data() + r * cols, cols);
  }
  return make_result(x.shape(), std::move(out), {x}, [rows, cols](Node& self) {
    double* g = pgrad(self, 0);
    if (!g) return;
    const double* y = self.value.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y + r * cols;
      const double* gr = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t i = 0; i < cols; ++i) dot += gr[i] * yr[i];
      for (std::size_t i = 0; i < cols; ++i) g[r * cols + i] += yr[i] * (gr[i] - dot);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  require_dim(logits, 1, "cross_entropy");
  const std::size_t c = logits.size(0);
  if (label >= c) {
    throw ContractError("cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(c) + " classes");
  }
  const auto z = logits.data();
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) {
    if (!std::isfinite(v)) throw InvalidValueError("cross_entropy: non-finite logit");
    mx = std::max(mx, v);
  }
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  const double log_norm = mx + std::log(total);
  const double loss = log_norm - z[label];
  return make_result({1}, {loss}, {logits}, [c, label, log_norm](Node& self) {
    double* g = pgrad(self, 0);
    if (!g) return;
    const double* zv = pval(self, 0);
    const double up = self.grad[0];
    for (std::size_t i = 0; i < c; ++i) {
      const double p = std::exp(zv[i] - log_norm);
      g[i] += up * (p - (i == label ? 1.0 : 0.0));
    }
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat: no parts");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_dim(p, 1, "concat");
    offsets.push_back(out.size());
    const auto v = p.data();
    out.insert(out.end(), v.begin(), v.end());
  }
  const auto n = out.size();
  return make_result({n}, std::move(out), {parts.begin(), parts.end()},
                     [offsets](Node& self) {
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         if (double* g = pgrad(self, p)) {
                           const auto len = self.parents[p]->value.size();
                           for (std::size_t i = 0; i < len; ++i) {
                             g[i] += self.grad[offsets[p] + i];
                           }
                         }
                       }
                     });
}

Tensor slice(const Tensor& v, std::size_t offset, std::size_t length) {
  require_dim(v, 1, "slice");
  if (length == 0 || offset + length > v.size(0)) throw DimensionError("slice: out of range");
  const auto d = v.data();
  std::vector<double> out(d.begin() + static_cast<std::ptrdiff_t>(offset),
                          d.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return make_result({length}, std::move(out), {v}, [offset](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& m, std::size_t offset, std::size_t length) {
  require_dim(m, 2, "slice_cols");
  const std::size_t rows = m.size(0), cols = m.size(1);
  if (length == 0 || offset + length > cols) throw DimensionError("slice_cols: out of range");
  const auto d = m.data();
  std::vector<double> out(rows * length);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < length; ++j) out[r * length + j] = d[r * cols + offset + j];
  }
  return make_result({rows, length}, std::move(out), {m},
                     [rows, cols, offset, length](Node& self) {
                       if (double* g = pgrad(self, 0)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t j = 0; j < length; ++j) {
                             g[r * cols + offset + j] += self.grad[r * length + j];
                           }
                         }
                       }
                     });
}

Tensor row(const Tensor& m, std::size_t i) {
  require_dim(m, 2, "row");
  const std::size_t rows = m.size(0), cols = m.size(1);
  if (i >= rows) throw DimensionError("row: index out of range");
  const auto d = m.data();
  std::vector<double> out(d.begin() + static_cast<std::ptrdiff_t>(i * cols),
                          d.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
  return make_result({cols}, std::move(out), {m}, [i, cols](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t j = 0; j < cols; ++j) g[i * cols + j] += self.grad[j];
    }
  });
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const std::size_t cols = rows[0].numel();
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    require_dim(r, 1, "stack_rows");
    if (r.numel() != cols) throw DimensionError("stack_rows: ragged rows");
    const auto v = r.data();
    out.insert(out.end(), v.begin(), v.end());
  }
  return make_result({rows.size(), cols}, std::move(out), {rows.begin(), rows.end()},
                     [cols](Node& self) {
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         if (double* g = pgrad(self, p)) {
                           for (std::size_t j = 0; j < cols; ++j) g[j] += self.grad[p * cols + j];
                         }
                       }
                     });
}

Tensor distance(const Tensor& a, const Tensor& b) {
  require_dim(a, 1, "distance");
  require_same_shape(a, b, "distance");
  const auto av = a.data(), bv = b.data();
  double acc = 0.0;
  for (std::size_t k = 0; k < av.size(); ++k) {
    const double diff = av[k] - bv[k];
    acc += diff * diff;
  }
  const double dist = std::sqrt(acc);
  return make_result({1}, {dist}, {a, b}, [](Node& self) {
    const double dist = self.value[0];
    if (dist == 0.0) return;
    const double* x = pval(self, 0);
    const double* y = pval(self, 1);
    const double up = self.grad[0] / dist;
    const auto n = self.parents[0]->value.size();
    if (double* g = pgrad(self, 0)) {
      for (std::size_t k = 0; k < n; ++k) g[k] += up * (x[k] - y[k]);
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t k = 0; k < n; ++k) g[k] -= up * (x[k] - y[k]);
    }
  });
}

}  // namespace scalefuse
