#include "nots/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nots {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Matmul: return "matmul";
    case OpKind::Conv1d: return "conv1d";
    case OpKind::ConvTranspose1d: return "conv1d-transpose";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Relu: return "relu";
    case OpKind::SoftmaxRows: return "softmax-rows";
    case OpKind::NormalizeRows: return "normalize-rows";
    case OpKind::ScaleRows: return "scale-rows";
    case OpKind::ShiftRows: return "shift-rows";
    case OpKind::ScaleCols: return "scale-cols";
    case OpKind::ShiftCols: return "shift-cols";
    case OpKind::MaeLoss: return "mae-loss";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Transpose: return "transpose";
    case OpKind::SliceRows: return "slice-rows";
    case OpKind::ConcatRows: return "concat-rows";
    case OpKind::SliceCols: return "slice-cols";
    case OpKind::ConcatCols: return "concat-cols";
    case OpKind::Rotary: return "rotary";
    case OpKind::CrossEntropy: return "cross-entropy";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_fail(OpKind k, const std::string& detail) {
  throw ShapeError(std::string(op_name(k)) + ": " + detail);
}

void require_2d(OpKind k, const Array& a, const char* which) {
  if (a.rank() != 2)
    shape_fail(k, std::string(which) + " must be 2-D, got " + shape_str(a.shape));
}

// Reflect index into [0, n) without repeating the edge sample.
inline int reflect_index(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

}  // namespace

VarId Tape::constant(Array v) {
  Node n;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::param(Array v, int param_id) {
  Node n;
  n.value = std::move(v);
  n.param_id = param_id;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  VarId id = static_cast<VarId>(nodes_.size() - 1);
  params_.emplace_back(param_id, id);
  return id;
}

VarId Tape::apply(OpKind kind, const std::vector<VarId>& inputs, OpAttrs attrs) {
  Node n;
  n.value = forward(kind, inputs, attrs);
  if (!n.value.all_finite()) {
    bool inputs_finite = true;
    for (VarId i : inputs) inputs_finite = inputs_finite && nodes_[i].value.all_finite();
    if (inputs_finite)
      throw std::runtime_error(std::string(op_name(kind)) +
                               ": non-finite output from finite inputs");
  }
  n.kind = kind;
  n.attrs = std::move(attrs);
  n.parents = inputs;
  n.is_leaf = false;
  for (VarId i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

Array Tape::forward(OpKind kind, const std::vector<VarId>& in, const OpAttrs& a) const {
  auto val = [&](std::size_t i) -> const Array& { return nodes_[in[i]].value; };
  switch (kind) {
    case OpKind::Matmul: {
      const Array& A = val(0);
      const Array& B = val(1);
      require_2d(kind, A, "lhs");
      require_2d(kind, B, "rhs");
      if (A.cols() != B.rows())
        shape_fail(kind, "inner dims " + shape_str(A.shape) + " x " + shape_str(B.shape));
      Array C({A.rows(), B.cols()});
      int m = A.rows(), k = A.cols(), n = B.cols();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double av = A.at(i, p);
          if (av == 0.0) continue;
          const double* brow = &B.data[static_cast<std::size_t>(p) * n];
          double* crow = &C.data[static_cast<std::size_t>(i) * n];
          for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      return C;
    }
    case OpKind::Conv1d: {
      const Array& X = val(0);
      const Array& W = val(1);
      require_2d(kind, X, "input");
      if (W.rank() != 3)
        shape_fail(kind, "weight must be 3-D (Cout,Cin,k), got " + shape_str(W.shape));
      int cin = X.shape[0], T = X.shape[1];
      int cout = W.shape[0], wcin = W.shape[1], k = W.shape[2];
      if (wcin != cin)
        shape_fail(kind, "input channels " + std::to_string(cin) + " vs weight " +
                             std::to_string(wcin));
      if (a.pad == PadMode::Reflect && k > T)
        shape_fail(kind, "kernel " + std::to_string(k) + " longer than signal " +
                             std::to_string(T));
      int left = (k - 1) / 2;
      int outT = (T - 1) / a.stride + 1;
      Array Y({cout, outT});
      for (int o = 0; o < cout; ++o)
        for (int t = 0; t < outT; ++t) {
          double acc = 0.0;
          for (int c = 0; c < cin; ++c)
            for (int j = 0; j < k; ++j) {
              int src = t * a.stride + j - left;
              double x;
              if (src >= 0 && src < T) {
                x = X.at(c, src);
              } else if (a.pad == PadMode::Reflect) {
                x = X.at(c, reflect_index(src, T));
              } else {
                continue;
              }
              acc += W.data[(static_cast<std::size_t>(o) * cin + c) * k + j] * x;
            }
          Y.at(o, t) = acc;
        }
      return Y;
    }
    case OpKind::ConvTranspose1d: {
      const Array& X = val(0);
      const Array& W = val(1);
      require_2d(kind, X, "input");
      if (W.rank() != 3)
        shape_fail(kind, "weight must be 3-D (Cin,Cout,k), got " + shape_str(W.shape));
      int cin = X.shape[0], G = X.shape[1];
      int wcin = W.shape[0], cout = W.shape[1], k = W.shape[2];
      if (wcin != cin)
        shape_fail(kind, "input channels " + std::to_string(cin) + " vs weight " +
                             std::to_string(wcin));
      if (a.out_len <= 0) shape_fail(kind, "out_len attribute required");
      int left = (k - 1) / 2;
      Array Y({cout, a.out_len});
      for (int c = 0; c < cin; ++c)
        for (int g = 0; g < G; ++g) {
          double xv = X.at(c, g);
          if (xv == 0.0) continue;
          for (int o = 0; o < cout; ++o)
            for (int j = 0; j < k; ++j) {
              int t = g * a.stride + j - left;
              if (t < 0 || t >= a.out_len) continue;
              Y.at(o, t) += W.data[(static_cast<std::size_t>(c) * cout + o) * k + j] * xv;
            }
        }
      return Y;
    }
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      const Array& A = val(0);
      const Array& B = val(1);
      if (!A.same_shape(B))
        shape_fail(kind, shape_str(A.shape) + " vs " + shape_str(B.shape));
      Array Y = A;
      for (std::size_t i = 0; i < Y.size(); ++i) {
        if (kind == OpKind::Add) Y.data[i] += B.data[i];
        else if (kind == OpKind::Sub) Y.data[i] -= B.data[i];
        else Y.data[i] *= B.data[i];
      }
      return Y;
    }
    case OpKind::Scale: {
      Array Y = val(0);
      for (double& v : Y.data) v *= a.scale;
      return Y;
    }
    case OpKind::Relu: {
      Array Y = val(0);
      for (double& v : Y.data) v = v > 0.0 ? v : 0.0;
      return Y;
    }
    case OpKind::SoftmaxRows: {
      const Array& X = val(0);
      require_2d(kind, X, "input");
      Array Y = X;
      int R = X.rows(), C = X.cols();
      for (int i = 0; i < R; ++i) {
        double mx = -1e300;
        for (int j = 0; j < C; ++j) mx = std::max(mx, X.at(i, j));
        double s = 0.0;
        for (int j = 0; j < C; ++j) {
          double e = std::exp(X.at(i, j) - mx);
          Y.at(i, j) = e;
          s += e;
        }
        for (int j = 0; j < C; ++j) Y.at(i, j) /= s;
      }
      return Y;
    }
    case OpKind::NormalizeRows: {
      const Array& X = val(0);
      require_2d(kind, X, "input");
      Array Y = X;
      int R = X.rows(), C = X.cols();
      for (int i = 0; i < R; ++i) {
        double mu = 0.0;
        for (int j = 0; j < C; ++j) mu += X.at(i, j);
        mu /= C;
        double var = 0.0;
        for (int j = 0; j < C; ++j) {
          double d = X.at(i, j) - mu;
          var += d * d;
        }
        var /= C;
        double inv = 1.0 / std::sqrt(var + a.eps);
        for (int j = 0; j < C; ++j) Y.at(i, j) = (X.at(i, j) - mu) * inv;
      }
      return Y;
    }
    case OpKind::ScaleRows:
    case OpKind::ShiftRows:
    case OpKind::ScaleCols:
    case OpKind::ShiftCols: {
      const Array& X = val(0);
      const Array& V = val(1);
      require_2d(kind, X, "input");
      bool rows = (kind == OpKind::ScaleRows || kind == OpKind::ShiftRows);
      int want = rows ? X.rows() : X.cols();
      if (V.rank() != 1 || V.shape[0] != want)
        shape_fail(kind, "vector " + shape_str(V.shape) + " vs matrix " + shape_str(X.shape));
      bool mulop = (kind == OpKind::ScaleRows || kind == OpKind::ScaleCols);
      Array Y = X;
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.cols(); ++j) {
          double v = V.data[rows ? i : j];
          if (mulop) Y.at(i, j) *= v;
          else Y.at(i, j) += v;
        }
      return Y;
    }
    case OpKind::MaeLoss: {
      const Array& A = val(0);
      const Array& B = val(1);
      if (!A.same_shape(B))
        shape_fail(kind, shape_str(A.shape) + " vs " + shape_str(B.shape));
      double s = 0.0;
      for (std::size_t i = 0; i < A.size(); ++i) s += std::abs(A.data[i] - B.data[i]);
      return Array::scalar(s / static_cast<double>(A.size()));
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      const Array& X = val(0);
      double s = 0.0;
      for (double v : X.data) s += v;
      if (kind == OpKind::Mean) s /= static_cast<double>(X.size());
      return Array::scalar(s);
    }
    case OpKind::Transpose: {
      const Array& X = val(0);
      require_2d(kind, X, "input");
      Array Y({X.cols(), X.rows()});
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.cols(); ++j) Y.at(j, i) = X.at(i, j);
      return Y;
    }
    case OpKind::SliceRows: {
      const Array& X = val(0);
      require_2d(kind, X, "input");
      if (a.start < 0 || a.len <= 0 || a.start + a.len > X.rows())
        shape_fail(kind, "range [" + std::to_string(a.start) + "," +
                             std::to_string(a.start + a.len) + ") of " +
                             std::to_string(X.rows()) + " rows");
      Array Y({a.len, X.cols()});
      for (int i = 0; i < a.len; ++i)
        for (int j = 0; j < X.cols(); ++j) Y.at(i, j) = X.at(a.start + i, j);
      return Y;
    }
    case OpKind::SliceCols: {
      const Array& X = val(0);
      require_2d(kind, X, "input");
      if (a.start < 0 || a.len <= 0 || a.start + a.len > X.cols())
        shape_fail(kind, "range [" + std::to_string(a.start) + "," +
                             std::to_string(a.start + a.len) + ") of " +
                             std::to_string(X.cols()) + " cols");
      Array Y({X.rows(), a.len});
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < a.len; ++j) Y.at(i, j) = X.at(i, a.start + j);
      return Y;
    }
    case OpKind::ConcatRows: {
      int cols = -1, rows = 0;
      for (VarId v : in) {
        const Array& X = nodes_[v].value;
        require_2d(kind, X, "input");
        if (cols < 0) cols = X.cols();
        else if (cols != X.cols())
          shape_fail(kind, "column mismatch " + std::to_string(cols) + " vs " +
                               std::to_string(X.cols()));
        rows += X.rows();
      }
      Array Y({rows, cols});
      int r = 0;
      for (VarId v : in) {
        const Array& X = nodes_[v].value;
        for (int i = 0; i < X.rows(); ++i, ++r)
          for (int j = 0; j < cols; ++j) Y.at(r, j) = X.at(i, j);
      }
      return Y;
    }
    case OpKind::ConcatCols: {
      int rows = -1, cols = 0;
      for (VarId v : in) {
        const Array& X = nodes_[v].value;
        require_2d(kind, X, "input");
        if (rows < 0) rows = X.rows();
        else if (rows != X.rows())
          shape_fail(kind, "row mismatch " + std::to_string(rows) + " vs " +
                               std::to_string(X.rows()));
        cols += X.cols();
      }
      Array Y({rows, cols});
      int c = 0;
      for (VarId v : in) {
        const Array& X = nodes_[v].value;
        for (int j = 0; j < X.cols(); ++j, ++c)
          for (int i = 0; i < rows; ++i) Y.at(i, c) = X.at(i, j);
      }
      return Y;
    }
    case OpKind::Rotary: {
      const Array& X = val(0);
      require_2d(kind, X, "input");
      int S = X.rows(), D = X.cols();
      if (D % 2 != 0) shape_fail(kind, "feature dim " + std::to_string(D) + " must be even");
      if (static_cast<int>(a.positions.size()) != S)
        shape_fail(kind, "positions size " + std::to_string(a.positions.size()) +
                             " vs rows " + std::to_string(S));
      Array Y = X;
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < D / 2; ++j) {
          double theta = std::pow(a.rotary_base, -2.0 * j / D) * a.positions[i];
          double c = std::cos(theta), s = std::sin(theta);
          double x = X.at(i, 2 * j), y = X.at(i, 2 * j + 1);
          Y.at(i, 2 * j) = x * c - y * s;
          Y.at(i, 2 * j + 1) = x * s + y * c;
        }
      return Y;
    }
    case OpKind::CrossEntropy: {
      const Array& L = val(0);
      const Array& Y = val(1);
      require_2d(kind, L, "logits");
      if (!L.same_shape(Y))
        shape_fail(kind, shape_str(L.shape) + " vs " + shape_str(Y.shape));
      double total = 0.0;
      for (int i = 0; i < L.rows(); ++i) {
        double mx = -1e300;
        for (int j = 0; j < L.cols(); ++j) mx = std::max(mx, L.at(i, j));
        double lse = 0.0, picked = 0.0;
        for (int j = 0; j < L.cols(); ++j) {
          lse += std::exp(L.at(i, j) - mx);
          picked += Y.at(i, j) * L.at(i, j);
        }
        total += mx + std::log(lse) - picked;
      }
      return Array::scalar(total / L.rows());
    }
  }
  throw std::logic_error("unhandled op kind");
}

void Tape::accumulate(VarId id, const Array& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = Array::zeros_like(n.value);
  for (std::size_t i = 0; i < g.size(); ++i) n.grad.data[i] += g.data[i];
}

void Tape::backward_op(Node& n) {
  const Array& gy = n.grad;
  auto pval = [&](std::size_t i) -> const Array& { return nodes_[n.parents[i]].value; };
  const OpAttrs& a = n.attrs;
  switch (n.kind) {
    case OpKind::Matmul: {
      const Array& A = pval(0);
      const Array& B = pval(1);
      int m = A.rows(), k = A.cols(), c = B.cols();
      if (nodes_[n.parents[0]].needs_grad) {
        Array gA({m, k});
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < c; ++j) {
            double g = gy.at(i, j);
            if (g == 0.0) continue;
            for (int p = 0; p < k; ++p) gA.at(i, p) += g * B.at(p, j);
          }
        accumulate(n.parents[0], gA);
      }
      if (nodes_[n.parents[1]].needs_grad) {
        Array gB({k, c});
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double av = A.at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < c; ++j) gB.at(p, j) += av * gy.at(i, j);
          }
        accumulate(n.parents[1], gB);
      }
      break;
    }
    case OpKind::Conv1d: {
      const Array& X = pval(0);
      const Array& W = pval(1);
      int cin = X.shape[0], T = X.shape[1];
      int cout = W.shape[0], k = W.shape[2];
      int left = (k - 1) / 2;
      int outT = gy.shape[1];
      Array gX({cin, T}), gW({cout, cin, k});
      for (int o = 0; o < cout; ++o)
        for (int t = 0; t < outT; ++t) {
          double g = gy.at(o, t);
          if (g == 0.0) continue;
          for (int c2 = 0; c2 < cin; ++c2)
            for (int j = 0; j < k; ++j) {
              int src = t * a.stride + j - left;
              int mapped;
              if (src >= 0 && src < T) mapped = src;
              else if (a.pad == PadMode::Reflect) mapped = reflect_index(src, T);
              else continue;
              gW.data[(static_cast<std::size_t>(o) * cin + c2) * k + j] +=
                  g * X.at(c2, mapped);
              gX.at(c2, mapped) +=
                  g * W.data[(static_cast<std::size_t>(o) * cin + c2) * k + j];
            }
        }
      accumulate(n.parents[0], gX);
      accumulate(n.parents[1], gW);
      break;
    }
    case OpKind::ConvTranspose1d: {
      const Array& X = pval(0);
      const Array& W = pval(1);
      int cin = X.shape[0], G = X.shape[1];
      int cout = W.shape[1], k = W.shape[2];
      int left = (k - 1) / 2;
      Array gX({cin, G}), gW({cin, cout, k});
      for (int c = 0; c < cin; ++c)
        for (int g = 0; g < G; ++g) {
          double acc = 0.0;
          for (int o = 0; o < cout; ++o)
            for (int j = 0; j < k; ++j) {
              int t = g * a.stride + j - left;
              if (t < 0 || t >= a.out_len) continue;
              double gv = gy.at(o, t);
              acc += W.data[(static_cast<std::size_t>(c) * cout + o) * k + j] * gv;
              gW.data[(static_cast<std::size_t>(c) * cout + o) * k + j] +=
                  gv * X.at(c, g);
            }
          gX.at(c, g) = acc;
        }
      accumulate(n.parents[0], gX);
      accumulate(n.parents[1], gW);
      break;
    }
    case OpKind::Add: {
      accumulate(n.parents[0], gy);
      accumulate(n.parents[1], gy);
      break;
    }
    case OpKind::Sub: {
      accumulate(n.parents[0], gy);
      Array gB = gy;
      for (double& v : gB.data) v = -v;
      accumulate(n.parents[1], gB);
      break;
    }
    case OpKind::Mul: {
      const Array& A = pval(0);
      const Array& B = pval(1);
      Array gA = gy, gB = gy;
      for (std::size_t i = 0; i < gy.size(); ++i) {
        gA.data[i] *= B.data[i];
        gB.data[i] *= A.data[i];
      }
      accumulate(n.parents[0], gA);
      accumulate(n.parents[1], gB);
      break;
    }
    case OpKind::Scale: {
      Array g = gy;
      for (double& v : g.data) v *= a.scale;
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::Relu: {
      const Array& X = pval(0);
      Array g = gy;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (X.data[i] <= 0.0) g.data[i] = 0.0;
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::SoftmaxRows: {
      const Array& Y = n.value;
      Array g = gy;
      int R = Y.rows(), C = Y.cols();
      for (int i = 0; i < R; ++i) {
        double dot = 0.0;
        for (int j = 0; j < C; ++j) dot += gy.at(i, j) * Y.at(i, j);
        for (int j = 0; j < C; ++j) g.at(i, j) = Y.at(i, j) * (gy.at(i, j) - dot);
      }
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::NormalizeRows: {
      const Array& X = pval(0);
      const Array& Y = n.value;
      int R = X.rows(), C = X.cols();
      Array g({R, C});
      for (int i = 0; i < R; ++i) {
        double mu = 0.0;
        for (int j = 0; j < C; ++j) mu += X.at(i, j);
        mu /= C;
        double var = 0.0;
        for (int j = 0; j < C; ++j) {
          double d = X.at(i, j) - mu;
          var += d * d;
        }
        var /= C;
        double inv = 1.0 / std::sqrt(var + a.eps);
        double gmean = 0.0, gymean = 0.0;
        for (int j = 0; j < C; ++j) {
          gmean += gy.at(i, j);
          gymean += gy.at(i, j) * Y.at(i, j);
        }
        gmean /= C;
        gymean /= C;
        for (int j = 0; j < C; ++j)
          g.at(i, j) = inv * (gy.at(i, j) - gmean - Y.at(i, j) * gymean);
      }
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::ScaleRows:
    case OpKind::ScaleCols: {
      const Array& X = pval(0);
      const Array& V = pval(1);
      bool rows = (n.kind == OpKind::ScaleRows);
      Array gX = gy;
      Array gV({V.shape[0]});
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.cols(); ++j) {
          int vi = rows ? i : j;
          gX.at(i, j) = gy.at(i, j) * V.data[vi];
          gV.data[vi] += gy.at(i, j) * X.at(i, j);
        }
      accumulate(n.parents[0], gX);
      accumulate(n.parents[1], gV);
      break;
    }
    case OpKind::ShiftRows:
    case OpKind::ShiftCols: {
      bool rows = (n.kind == OpKind::ShiftRows);
      const Array& X = pval(0);
      Array gV({pval(1).shape[0]});
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.cols(); ++j) gV.data[rows ? i : j] += gy.at(i, j);
      accumulate(n.parents[0], gy);
      accumulate(n.parents[1], gV);
      break;
    }
    case OpKind::MaeLoss: {
      const Array& A = pval(0);
      const Array& B = pval(1);
      double gl = gy.item() / static_cast<double>(A.size());
      Array gA = Array::zeros_like(A), gB = Array::zeros_like(B);
      for (std::size_t i = 0; i < A.size(); ++i) {
        double r = A.data[i] - B.data[i];
        // Subgradient 0 at an exactly-zero residual.
        double s = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        gA.data[i] = gl * s;
        gB.data[i] = -gl * s;
      }
      accumulate(n.parents[0], gA);
      accumulate(n.parents[1], gB);
      break;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      const Array& X = pval(0);
      double g = gy.item();
      if (n.kind == OpKind::Mean) g /= static_cast<double>(X.size());
      Array gX = Array::zeros_like(X);
      for (double& v : gX.data) v = g;
      accumulate(n.parents[0], gX);
      break;
    }
    case OpKind::Transpose: {
      Array g({gy.cols(), gy.rows()});
      for (int i = 0; i < gy.rows(); ++i)
        for (int j = 0; j < gy.cols(); ++j) g.at(j, i) = gy.at(i, j);
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::SliceRows: {
      const Array& X = pval(0);
      Array g = Array::zeros_like(X);
      for (int i = 0; i < a.len; ++i)
        for (int j = 0; j < X.cols(); ++j) g.at(a.start + i, j) = gy.at(i, j);
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::SliceCols: {
      const Array& X = pval(0);
      Array g = Array::zeros_like(X);
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < a.len; ++j) g.at(i, a.start + j) = gy.at(i, j);
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::ConcatRows: {
      int r = 0;
      for (VarId p : n.parents) {
        const Array& X = nodes_[p].value;
        Array g({X.rows(), X.cols()});
        for (int i = 0; i < X.rows(); ++i, ++r)
          for (int j = 0; j < X.cols(); ++j) g.at(i, j) = gy.at(r, j);
        accumulate(p, g);
      }
      break;
    }
    case OpKind::ConcatCols: {
      int c = 0;
      for (VarId p : n.parents) {
        const Array& X = nodes_[p].value;
        Array g({X.rows(), X.cols()});
        for (int j = 0; j < X.cols(); ++j, ++c)
          for (int i = 0; i < X.rows(); ++i) g.at(i, j) = gy.at(i, c);
        accumulate(p, g);
      }
      break;
    }
    case OpKind::Rotary: {
      int S = gy.rows(), D = gy.cols();
      Array g = gy;
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < D / 2; ++j) {
          double theta = std::pow(a.rotary_base, -2.0 * j / D) * a.positions[i];
          double c = std::cos(theta), s = std::sin(theta);
          double x = gy.at(i, 2 * j), y = gy.at(i, 2 * j + 1);
          // Adjoint of a rotation is the inverse rotation.
          g.at(i, 2 * j) = x * c + y * s;
          g.at(i, 2 * j + 1) = -x * s + y * c;
        }
      accumulate(n.parents[0], g);
      break;
    }
    case OpKind::CrossEntropy: {
      const Array& L = pval(0);
      const Array& Y = pval(1);
      double gl = gy.item() / L.rows();
      Array g = Array::zeros_like(L);
      for (int i = 0; i < L.rows(); ++i) {
        double mx = -1e300;
        for (int j = 0; j < L.cols(); ++j) mx = std::max(mx, L.at(i, j));
        double lse = 0.0;
        for (int j = 0; j < L.cols(); ++j) lse += std::exp(L.at(i, j) - mx);
        for (int j = 0; j < L.cols(); ++j)
          g.at(i, j) = gl * (std::exp(L.at(i, j) - mx) / lse - Y.at(i, j));
      }
      accumulate(n.parents[0], g);
      break;
    }
  }
}

std::unordered_map<int, Array> Tape::backward(VarId loss) {
  if (!nodes_[loss].value.is_scalar() && nodes_[loss].value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(nodes_[loss].value.shape));
  for (Node& n : nodes_) n.grad = Array();
  nodes_[loss].grad = Array::scalar(1.0);
  if (!nodes_[loss].value.is_scalar()) nodes_[loss].grad.shape = nodes_[loss].value.shape;
  for (int i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.is_leaf || !n.needs_grad || n.grad.size() == 0) continue;
    backward_op(n);
  }
  std::unordered_map<int, Array> out;
  for (auto& [pid, vid] : params_) {
    const Node& n = nodes_[vid];
    const Array& g = (n.grad.size() != 0) ? n.grad : Array();
    auto it = out.find(pid);
    Array gv = (n.grad.size() != 0) ? n.grad : Array::zeros_like(n.value);
    if (it == out.end()) {
      out.emplace(pid, std::move(gv));
    } else {
      for (std::size_t i = 0; i < gv.size(); ++i) it->second.data[i] += gv.data[i];
    }
    (void)g;
  }
  return out;
}

namespace ops {
VarId matmul(Tape& t, VarId a, VarId b) { return t.apply(OpKind::Matmul, {a, b}); }
VarId conv1d(Tape& t, VarId x, VarId w, int stride, PadMode pad) {
  OpAttrs at;
  at.stride = stride;
  at.pad = pad;
  return t.apply(OpKind::Conv1d, {x, w}, at);
}
VarId conv1d_transpose(Tape& t, VarId x, VarId w, int stride, int out_len) {
  OpAttrs at;
  at.stride = stride;
  at.out_len = out_len;
  return t.apply(OpKind::ConvTranspose1d, {x, w}, at);
}
VarId add(Tape& t, VarId a, VarId b) { return t.apply(OpKind::Add, {a, b}); }
VarId sub(Tape& t, VarId a, VarId b) { return t.apply(OpKind::Sub, {a, b}); }
VarId mul(Tape& t, VarId a, VarId b) { return t.apply(OpKind::Mul, {a, b}); }
VarId scale(Tape& t, VarId x, double s) {
  OpAttrs a;
  a.scale = s;
  return t.apply(OpKind::Scale, {x}, a);
}
VarId relu(Tape& t, VarId x) { return t.apply(OpKind::Relu, {x}); }
VarId softmax_rows(Tape& t, VarId x) { return t.apply(OpKind::SoftmaxRows, {x}); }
VarId normalize_rows(Tape& t, VarId x, double eps) {
  OpAttrs a;
  a.eps = eps;
  return t.apply(OpKind::NormalizeRows, {x}, a);
}
VarId scale_rows(Tape& t, VarId x, VarId g) { return t.apply(OpKind::ScaleRows, {x, g}); }
VarId shift_rows(Tape& t, VarId x, VarId b) { return t.apply(OpKind::ShiftRows, {x, b}); }
VarId scale_cols(Tape& t, VarId x, VarId g) { return t.apply(OpKind::ScaleCols, {x, g}); }
VarId shift_cols(Tape& t, VarId x, VarId b) { return t.apply(OpKind::ShiftCols, {x, b}); }
VarId mae(Tape& t, VarId pred, VarId target) {
  return t.apply(OpKind::MaeLoss, {pred, target});
}
VarId sum(Tape& t, VarId x) { return t.apply(OpKind::Sum, {x}); }
VarId mean(Tape& t, VarId x) { return t.apply(OpKind::Mean, {x}); }
VarId transpose(Tape& t, VarId x) { return t.apply(OpKind::Transpose, {x}); }
VarId slice_rows(Tape& t, VarId x, int start, int len) {
  OpAttrs a;
  a.start = start;
  a.len = len;
  return t.apply(OpKind::SliceRows, {x}, a);
}
VarId concat_rows(Tape& t, const std::vector<VarId>& xs) {
  return t.apply(OpKind::ConcatRows, xs);
}
VarId slice_cols(Tape& t, VarId x, int start, int len) {
  OpAttrs a;
  a.start = start;
  a.len = len;
  return t.apply(OpKind::SliceCols, {x}, a);
}
VarId concat_cols(Tape& t, const std::vector<VarId>& xs) {
  return t.apply(OpKind::ConcatCols, xs);
}
VarId rotary(Tape& t, VarId x, const std::vector<int>& positions, double base) {
  OpAttrs a;
  a.positions = positions;
  a.rotary_base = base;
  return t.apply(OpKind::Rotary, {x}, a);
}
VarId cross_entropy(Tape& t, VarId logits, VarId onehot) {
  return t.apply(OpKind::CrossEntropy, {logits, onehot});
}
}  // namespace ops

}  // namespace nots
