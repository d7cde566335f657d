#pragma once

#include <vector>

#include "gridface/tensor.hpp"

namespace gridface {
namespace ops {

// All ops compute eagerly. If `tape` is non-null and some input requires a
// gradient, a backward rule is recorded; with a null tape they act as pure
// inference kernels. Every output is checked for NaN/Inf.

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape* tape, const TensorPtr& a, double c);
TensorPtr add_scalar(Tape* tape, const TensorPtr& a, double c);
TensorPtr relu(Tape* tape, const TensorPtr& a);
TensorPtr sqrt_elem(Tape* tape, const TensorPtr& a);

TensorPtr sum(Tape* tape, const TensorPtr& a);
TensorPtr mean(Tape* tape, const TensorPtr& a);
TensorPtr mse(Tape* tape, const TensorPtr& a, const TensorPtr& b);

// View copy; gradient passes through unchanged.
TensorPtr reshape(Tape* tape, const TensorPtr& a, std::vector<int> new_shape);

// Cross-correlation, input [N,C,H,W] x kernel [K,C,kh,kw] -> [N,K,OH,OW]
// with OH = floor((H + 2*pad - kh) / stride) + 1.
TensorPtr conv2d(Tape* tape, const TensorPtr& input, const TensorPtr& kernel, int stride,
                 int padding);

// Adjoint of conv2d with respect to its data: maps [N,K,h,w] back to
// [N,C,out_h,out_w] through the same [K,C,kh,kw] kernel. out_h/out_w must
// be sizes that a forward conv2d would reduce to h/w.
TensorPtr conv2d_transpose(Tape* tape, const TensorPtr& input, const TensorPtr& kernel,
                           int stride, int padding, int out_h, int out_w);

// x [N,C,H,W] + bias [C], broadcast over N,H,W.
TensorPtr add_channel_bias(Tape* tape, const TensorPtr& x, const TensorPtr& bias);

// 2x2 window, stride 2. H and W must be even. Ties route the gradient to
// the first maximum in scan order.
TensorPtr max_pool2(Tape* tape, const TensorPtr& x);

// x [N,F] x weight [O,F] + bias [O] -> [N,O].
TensorPtr fully_connected(Tape* tape, const TensorPtr& x, const TensorPtr& weight,
                          const TensorPtr& bias);

// Row-wise x / ||x||; accepts [F] or [N,F]. Rows with near-zero norm are a
// contract violation.
TensorPtr l2_normalize(Tape* tape, const TensorPtr& x);

// Scalar node with an externally supplied value and an externally supplied
// gradient with respect to `dep`. Used where the true objective is only
// known through its gradient.
TensorPtr custom_scalar(Tape* tape, const TensorPtr& dep, double value,
                        std::vector<double> grad_wrt_dep);

}  // namespace ops
}  // namespace gridface
