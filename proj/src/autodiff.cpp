#include "smoothie/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "smoothie/kernels.hpp"

namespace smoothie::ad {

Tape::VarId Tape::push(Mat value, std::function<void()> back) {
    Node n;
    n.grad = Mat(value.rows(), value.cols());
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size()) - 1;
}

Tape::VarId Tape::leaf(Mat value) { return push(std::move(value)); }

Tape::VarId Tape::add(VarId a, VarId b) {
    if (!value(a).same_shape(value(b)))
        throw std::invalid_argument("ad::add: shape mismatch");
    VarId out = push(value(a) + value(b));
    nodes_[out].back = [this, a, b, out] {
        kernels::axpy(1.0, grad(out).data(), grad_ref(a).data(),
                      grad(out).size());
        kernels::axpy(1.0, grad(out).data(), grad_ref(b).data(),
                      grad(out).size());
    };
    return out;
}

Tape::VarId Tape::scale(VarId a, double c) {
    VarId out = push(c * value(a));
    nodes_[out].back = [this, a, c, out] {
        kernels::axpy(c, grad(out).data(), grad_ref(a).data(),
                      grad(out).size());
    };
    return out;
}

Tape::VarId Tape::matmul(VarId a, VarId b) {
    VarId out = push(smoothie::matmul(value(a), value(b)));
    nodes_[out].back = [this, a, b, out] {
        Mat da = smoothie::matmul_nt(grad(out), value(b));
        kernels::axpy(1.0, da.data(), grad_ref(a).data(), da.size());
        Mat db = matmul_tn(value(a), grad(out));
        kernels::axpy(1.0, db.data(), grad_ref(b).data(), db.size());
    };
    return out;
}

Tape::VarId Tape::matmul_nt(VarId a, VarId b) {
    VarId out = push(smoothie::matmul_nt(value(a), value(b)));
    nodes_[out].back = [this, a, b, out] {
        Mat da = smoothie::matmul(grad(out), value(b));
        kernels::axpy(1.0, da.data(), grad_ref(a).data(), da.size());
        Mat db = matmul_tn(grad(out), value(a));
        kernels::axpy(1.0, db.data(), grad_ref(b).data(), db.size());
    };
    return out;
}

Tape::VarId Tape::add_rowvec(VarId a, VarId bias) {
    const Mat& x = value(a);
    const Mat& b = value(bias);
    if (b.rows() != 1 || b.cols() != x.cols())
        throw std::invalid_argument("ad::add_rowvec: bias shape");
    Mat y = x;
    for (std::size_t i = 0; i < y.rows(); ++i)
        kernels::axpy(1.0, b.row(0), y.row(i), y.cols());
    VarId out = push(std::move(y));
    nodes_[out].back = [this, a, bias, out] {
        const Mat& g = grad(out);
        kernels::axpy(1.0, g.data(), grad_ref(a).data(), g.size());
        Mat& gb = grad_ref(bias);
        for (std::size_t i = 0; i < g.rows(); ++i)
            kernels::axpy(1.0, g.row(i), gb.row(0), g.cols());
    };
    return out;
}

Tape::VarId Tape::broadcast_row(VarId row, std::size_t rows) {
    const Mat& r = value(row);
    if (r.rows() != 1)
        throw std::invalid_argument("ad::broadcast_row: expected row vector");
    Mat y(rows, r.cols());
    for (std::size_t i = 0; i < rows; ++i)
        std::memcpy(y.row(i), r.row(0), r.cols() * sizeof(double));
    VarId out = push(std::move(y));
    nodes_[out].back = [this, row, out] {
        const Mat& g = grad(out);
        Mat& gr = grad_ref(row);
        for (std::size_t i = 0; i < g.rows(); ++i)
            kernels::axpy(1.0, g.row(i), gr.row(0), g.cols());
    };
    return out;
}

Tape::VarId Tape::relu(VarId a) {
    Mat y = value(a);
    for (double& v : y.vec()) v = v > 0.0 ? v : 0.0;
    VarId out = push(std::move(y));
    nodes_[out].back = [this, a, out] {
        const Mat& x = value(a);
        const Mat& g = grad(out);
        Mat& ga = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    };
    return out;
}

Tape::VarId Tape::concat_cols(const std::vector<VarId>& parts) {
    if (parts.empty()) throw std::invalid_argument("ad::concat_cols: empty");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    for (VarId p : parts) {
        if (value(p).rows() != rows)
            throw std::invalid_argument("ad::concat_cols: row mismatch");
        cols += value(p).cols();
    }
    Mat y(rows, cols);
    std::size_t off = 0;
    for (VarId p : parts) {
        const Mat& x = value(p);
        for (std::size_t i = 0; i < rows; ++i)
            std::memcpy(y.row(i) + off, x.row(i), x.cols() * sizeof(double));
        off += x.cols();
    }
    VarId out = push(std::move(y));
    std::vector<VarId> ps = parts;
    nodes_[out].back = [this, ps, out] {
        const Mat& g = grad(out);
        std::size_t off = 0;
        for (VarId p : ps) {
            Mat& gp = grad_ref(p);
            for (std::size_t i = 0; i < g.rows(); ++i)
                kernels::axpy(1.0, g.row(i) + off, gp.row(i), gp.cols());
            off += gp.cols();
        }
    };
    return out;
}

Tape::VarId Tape::slice_rows(VarId a, std::size_t count) {
    const Mat& x = value(a);
    if (count > x.rows())
        throw std::invalid_argument("ad::slice_rows: count too large");
    Mat y(count, x.cols());
    std::memcpy(y.data(), x.data(), count * x.cols() * sizeof(double));
    VarId out = push(std::move(y));
    nodes_[out].back = [this, a, out] {
        const Mat& g = grad(out);
        kernels::axpy(1.0, g.data(), grad_ref(a).data(), g.size());
    };
    return out;
}

Tape::VarId Tape::softmax_rows(VarId x, const Mat* mask) {
    Mat y = value(x);
    if (mask) {
        if (!y.same_shape(*mask))
            throw std::invalid_argument("ad::softmax_rows: mask shape");
        kernels::axpby(1.0, y.data(), 1.0, mask->data(), y.data(), y.size());
    }
    for (std::size_t i = 0; i < y.rows(); ++i)
        kernels::softmax_row(y.row(i), y.cols());
    VarId out = push(std::move(y));
    nodes_[out].back = [this, x, out] {
        const Mat& y = value(out);
        const Mat& g = grad(out);
        Mat& gx = grad_ref(x);
        for (std::size_t i = 0; i < y.rows(); ++i) {
            const double inner = kernels::dot(g.row(i), y.row(i), y.cols());
            for (std::size_t j = 0; j < y.cols(); ++j)
                gx(i, j) += y(i, j) * (g(i, j) - inner);
        }
    };
    return out;
}

Tape::VarId Tape::layer_norm(VarId x, VarId gamma, VarId beta, double eps) {
    const Mat& in = value(x);
    const std::size_t c = in.cols();
    if (value(gamma).cols() != c || value(beta).cols() != c)
        throw std::invalid_argument("ad::layer_norm: gain/shift shape");
    Mat xhat(in.rows(), c);
    std::vector<double> inv_std(in.rows());
    for (std::size_t i = 0; i < in.rows(); ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += in(i, j);
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            var += (in(i, j) - mean) * (in(i, j) - mean);
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j)
            xhat(i, j) = (in(i, j) - mean) * inv_std[i];
    }
    Mat y(in.rows(), c);
    for (std::size_t i = 0; i < in.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j)
            y(i, j) = value(gamma)(0, j) * xhat(i, j) + value(beta)(0, j);
    VarId out = push(std::move(y));
    nodes_[out].back = [this, x, gamma, beta, out, xhat, inv_std] {
        const Mat& g = grad(out);
        const std::size_t c = g.cols();
        Mat& gx = grad_ref(x);
        Mat& gg = grad_ref(gamma);
        Mat& gb = grad_ref(beta);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double dxhat = g(i, j) * value(gamma)(0, j);
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat(i, j);
                gg(0, j) += g(i, j) * xhat(i, j);
                gb(0, j) += g(i, j);
            }
            const double n = static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j) {
                const double dxhat = g(i, j) * value(gamma)(0, j);
                gx(i, j) += inv_std[i] *
                            (dxhat - sum_dxhat / n -
                             xhat(i, j) * sum_dxhat_xhat / n);
            }
        }
    };
    return out;
}

Tape::VarId Tape::mean_rows(VarId x, const std::vector<double>& weights) {
    const Mat& in = value(x);
    if (weights.size() != in.rows())
        throw std::invalid_argument("ad::mean_rows: weight count");
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0)
        throw std::invalid_argument("ad::mean_rows: nonpositive total weight");
    Mat y(1, in.cols());
    for (std::size_t i = 0; i < in.rows(); ++i)
        kernels::axpy(weights[i] / total, in.row(i), y.row(0), in.cols());
    VarId out = push(std::move(y));
    nodes_[out].back = [this, x, weights, total, out] {
        const Mat& g = grad(out);
        Mat& gx = grad_ref(x);
        for (std::size_t i = 0; i < gx.rows(); ++i)
            kernels::axpy(weights[i] / total, g.row(0), gx.row(i), gx.cols());
    };
    return out;
}

Tape::VarId Tape::interp_row(VarId table, double t) {
    const Mat& tab = value(table);
    if (t < 0.0) throw std::invalid_argument("ad::interp_row: negative t");
    std::size_t lo = static_cast<std::size_t>(t);
    if (lo >= tab.rows()) lo = tab.rows() - 1;
    std::size_t hi = std::min(lo + 1, tab.rows() - 1);
    const double f = std::min(t - static_cast<double>(lo), 1.0);
    Mat y(1, tab.cols());
    for (std::size_t j = 0; j < tab.cols(); ++j)
        y(0, j) = (1.0 - f) * tab(lo, j) + f * tab(hi, j);
    VarId out = push(std::move(y));
    nodes_[out].back = [this, table, lo, hi, f, out] {
        const Mat& g = grad(out);
        Mat& gt = grad_ref(table);
        kernels::axpy(1.0 - f, g.row(0), gt.row(lo), g.cols());
        kernels::axpy(f, g.row(0), gt.row(hi), g.cols());
    };
    return out;
}

Tape::VarId Tape::mse_loss(VarId pred, const Mat& target) {
    const Mat& p = value(pred);
    if (!p.same_shape(target))
        throw std::invalid_argument("ad::mse_loss: shape mismatch");
    const double n = static_cast<double>(p.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p.data()[i] - target.data()[i];
        loss += d * d;
    }
    Mat y(1, 1);
    y(0, 0) = loss / n;
    VarId out = push(std::move(y));
    nodes_[out].back = [this, pred, target, n, out] {
        const double seed = grad(out)(0, 0);
        const Mat& p = value(pred);
        Mat& gp = grad_ref(pred);
        for (std::size_t i = 0; i < p.size(); ++i)
            gp.data()[i] +=
                seed * 2.0 * (p.data()[i] - target.data()[i]) / n;
    };
    return out;
}

Tape::VarId Tape::cross_entropy_loss(VarId logits,
                                     const std::vector<TokenId>& targets) {
    const Mat& z = value(logits);
    if (targets.size() != z.rows())
        throw std::invalid_argument("ad::cross_entropy_loss: target count");
    Mat probs = z;
    for (std::size_t i = 0; i < probs.rows(); ++i)
        kernels::softmax_row(probs.row(i), probs.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const TokenId id = targets[i];
        if (id < 0 || static_cast<std::size_t>(id) >= z.cols())
            throw std::out_of_range("ad::cross_entropy_loss: id out of range");
        loss -= std::log(std::max(probs(i, static_cast<std::size_t>(id)),
                                  1e-300));
    }
    const double n = static_cast<double>(z.rows());
    Mat y(1, 1);
    y(0, 0) = loss / n;
    VarId out = push(std::move(y));
    nodes_[out].back = [this, logits, targets, probs, n, out] {
        const double seed = grad(out)(0, 0);
        Mat& gz = grad_ref(logits);
        for (std::size_t i = 0; i < gz.rows(); ++i) {
            for (std::size_t j = 0; j < gz.cols(); ++j)
                gz(i, j) += seed * probs(i, j) / n;
            gz(i, static_cast<std::size_t>(targets[i])) -= seed / n;
        }
    };
    return out;
}

void Tape::backward(VarId loss) {
    Mat& g = grad_ref(loss);
    if (g.rows() != 1 || g.cols() != 1)
        throw std::invalid_argument("ad::backward: loss must be scalar");
    g(0, 0) = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->back) it->back();
}

}  // namespace smoothie::ad
