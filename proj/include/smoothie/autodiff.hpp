#pragma once

#include <functional>
#include <vector>

#include "smoothie/matrix.hpp"
#include "smoothie/vocab.hpp"

namespace smoothie::ad {

// Tape-based reverse-mode autodiff over matrix-valued nodes. One tape per
// forward pass; ops append nodes in topological order and backward() walks
// them in reverse. Values and gradients are dense doubles.
class Tape {
public:
    using VarId = int;

    VarId leaf(Mat value);
    VarId constant(Mat value) { return leaf(std::move(value)); }

    const Mat& value(VarId id) const { return nodes_[id].value; }
    const Mat& grad(VarId id) const { return nodes_[id].grad; }

    VarId add(VarId a, VarId b);
    VarId scale(VarId a, double c);
    VarId matmul(VarId a, VarId b);     // A * B
    VarId matmul_nt(VarId a, VarId b);  // A * B^T
    VarId add_rowvec(VarId a, VarId bias);         // bias: 1 x cols
    VarId broadcast_row(VarId row, std::size_t rows);
    VarId relu(VarId a);
    VarId concat_cols(const std::vector<VarId>& parts);
    VarId slice_rows(VarId a, std::size_t count);  // first `count` rows

    // softmax over rows of (x + mask); mask is a constant additive matrix
    // (0 for visible entries, a large negative number for masked ones).
    VarId softmax_rows(VarId x, const Mat* mask = nullptr);

    // per-row layer norm with learned gain/shift (each 1 x cols)
    VarId layer_norm(VarId x, VarId gamma, VarId beta, double eps = 1e-5);

    // weighted mean over rows -> 1 x cols; weights.size() == rows
    VarId mean_rows(VarId x, const std::vector<double>& weights);

    // linear interpolation between rows floor(t) and floor(t)+1 of a table
    VarId interp_row(VarId table, double t);

    // scalar losses (1 x 1 nodes)
    VarId mse_loss(VarId pred, const Mat& target);
    VarId cross_entropy_loss(VarId logits, const std::vector<TokenId>& targets);

    void backward(VarId loss);

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void()> back;  // empty for leaves
    };

    VarId push(Mat value, std::function<void()> back = {});
    Mat& grad_ref(VarId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace smoothie::ad
