#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "nots/array.hpp"

namespace nots {

// Forward op kinds recorded on the tape.
enum class OpKind {
  Matmul,          // (m,k) x (k,n) -> (m,n)
  Conv1d,          // input (Cin,T), weight (Cout,Cin,k); stride, pad mode
  ConvTranspose1d, // input (Cin,G), weight (Cin,Cout,k); stride, out_len
  Add,             // elementwise, same shape
  Sub,
  Mul,
  Scale,           // y = attrs.scale * x
  Relu,
  SoftmaxRows,     // softmax over the last axis of a 2-D array
  NormalizeRows,   // (x - mean)/sqrt(var + eps) per row
  ScaleRows,       // 2-D x times per-row vector g
  ShiftRows,       // 2-D x plus per-row vector b
  ScaleCols,       // 2-D x times per-column vector g
  ShiftCols,       // 2-D x plus per-column vector b
  MaeLoss,         // mean |a - b| -> scalar
  Sum,             // sum of all entries -> scalar
  Mean,            // mean of all entries -> scalar
  Transpose,       // 2-D transpose
  SliceRows,       // rows [start, start+len)
  ConcatRows,      // stack inputs vertically
  SliceCols,
  ConcatCols,
  Rotary,          // pairwise rotation by position-dependent angles
  CrossEntropy,    // mean softmax cross-entropy vs one-hot rows -> scalar
};

const char* op_name(OpKind k);

enum class PadMode { Zero, Reflect };

struct OpAttrs {
  int stride = 1;
  PadMode pad = PadMode::Zero;
  double scale = 1.0;
  double eps = 1e-5;
  int start = 0;
  int len = 0;
  int out_len = 0;
  double rotary_base = 10000.0;
  std::vector<int> positions;  // within-group index per row (Rotary)
};

using VarId = int;

// Reverse-mode tape. Single-threaded per training step; values are
// immutable once recorded.
class Tape {
 public:
  // Leaf that never receives a gradient.
  VarId constant(Array v);
  // Leaf tied to an external parameter id; backward() exports its gradient.
  VarId param(Array v, int param_id);

  VarId apply(OpKind kind, const std::vector<VarId>& inputs, OpAttrs attrs = {});

  const Array& value(VarId id) const { return nodes_[id].value; }
  const Array& grad(VarId id) const { return nodes_[id].grad; }

  // Backward pass from a scalar loss. Each recorded op is visited exactly
  // once, in reverse order. Returns param_id -> gradient; every parameter
  // registered on this tape is present (zero if unused).
  std::unordered_map<int, Array> backward(VarId loss);

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Array value;
    OpKind kind{};
    OpAttrs attrs;
    std::vector<VarId> parents;
    int param_id = -1;
    bool is_leaf = true;
    bool needs_grad = false;
    Array grad;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<int, VarId>> params_;  // (param_id, node)

  Array forward(OpKind kind, const std::vector<VarId>& in, const OpAttrs& a) const;
  void backward_op(Node& n);
  void accumulate(VarId id, const Array& g);
};

// Convenience wrappers.
namespace ops {
VarId matmul(Tape& t, VarId a, VarId b);
VarId conv1d(Tape& t, VarId x, VarId w, int stride = 1, PadMode pad = PadMode::Zero);
VarId conv1d_transpose(Tape& t, VarId x, VarId w, int stride, int out_len);
VarId add(Tape& t, VarId a, VarId b);
VarId sub(Tape& t, VarId a, VarId b);
VarId mul(Tape& t, VarId a, VarId b);
VarId scale(Tape& t, VarId x, double s);
VarId relu(Tape& t, VarId x);
VarId softmax_rows(Tape& t, VarId x);
VarId normalize_rows(Tape& t, VarId x, double eps = 1e-5);
VarId scale_rows(Tape& t, VarId x, VarId g);
VarId shift_rows(Tape& t, VarId x, VarId b);
VarId scale_cols(Tape& t, VarId x, VarId g);
VarId shift_cols(Tape& t, VarId x, VarId b);
VarId mae(Tape& t, VarId pred, VarId target);
VarId sum(Tape& t, VarId x);
VarId mean(Tape& t, VarId x);
VarId transpose(Tape& t, VarId x);
VarId slice_rows(Tape& t, VarId x, int start, int len);
VarId concat_rows(Tape& t, const std::vector<VarId>& xs);
VarId slice_cols(Tape& t, VarId x, int start, int len);
VarId concat_cols(Tape& t, const std::vector<VarId>& xs);
VarId rotary(Tape& t, VarId x, const std::vector<int>& positions, double base = 10000.0);
VarId cross_entropy(Tape& t, VarId logits, VarId onehot);
}  // namespace ops

}  // namespace nots
