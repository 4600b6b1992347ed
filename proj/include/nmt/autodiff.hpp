#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nmt/augment.hpp"
#include "nmt/common.hpp"

namespace nmt::autodiff {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable tensor with its gradient accumulator and Adam state.
template <typename S>
struct Parameter {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
    Mat<S> adam_m, adam_v;

    Parameter() = default;
    Parameter(std::string n, Mat<S> v) : name(std::move(n)), value(std::move(v)) {
        grad = Mat<S>::Zero(value.rows(), value.cols());
        adam_m = grad;
        adam_v = grad;
    }
    void zero_grad() { grad.setZero(); }
};

/// Reverse-mode tape over dense matrices. Build a fresh graph per forward
/// pass; backward() walks the tape in reverse. Single-threaded by design so
/// seeded runs replay bit-identically.
template <typename S>
class Graph {
public:
    using Index = int;

    struct Node {
        Mat<S> val;
        Mat<S> grad;
        std::function<void(Graph&)> back;  // adds into upstream grads
    };

    void reset() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

    const Mat<S>& value(Index i) const { return nodes_[static_cast<std::size_t>(i)].val; }
    const Mat<S>& grad(Index i) const { return nodes_[static_cast<std::size_t>(i)].grad; }
    Mat<S>& grad_mut(Index i) { return nodes_[static_cast<std::size_t>(i)].grad; }

    Index constant(Mat<S> v) { return push(std::move(v), nullptr); }

    Index param(Parameter<S>& p) {
        Index idx = push(p.value, nullptr);
        node(idx).back = [&p, idx](Graph& g) { p.grad += g.grad(idx); };
        return idx;
    }

    /// Gathers rows of `a`; repeated ids accumulate their gradients.
    Index rows(Index a, std::vector<int> ids) {
        const Mat<S>& src = value(a);
        Mat<S> out(static_cast<Eigen::Index>(ids.size()), src.cols());
        for (std::size_t k = 0; k < ids.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = src.row(ids[k]);
        Index idx = push(std::move(out), nullptr);
        node(idx).back = [a, idx, ids = std::move(ids)](Graph& g) {
            const Mat<S>& d = g.grad(idx);
            Mat<S>& da = g.grad_mut(a);
            for (std::size_t k = 0; k < ids.size(); ++k)
                da.row(ids[k]) += d.row(static_cast<Eigen::Index>(k));
        };
        return idx;
    }

    Index matmul(Index a, Index b) {
        check(value(a).cols() == value(b).rows(), "matmul inner dims");
        Index idx = push(value(a) * value(b), nullptr);
        node(idx).back = [a, b, idx](Graph& g) {
            const Mat<S>& d = g.grad(idx);
            g.grad_mut(a).noalias() += d * g.value(b).transpose();
            g.grad_mut(b).noalias() += g.value(a).transpose() * d;
        };
        return idx;
    }

    /// a * b^T
    Index matmul_nt(Index a, Index b) {
        check(value(a).cols() == value(b).cols(), "matmul_nt inner dims");
        Index idx = push(value(a) * value(b).transpose(), nullptr);
        node(idx).back = [a, b, idx](Graph& g) {
            const Mat<S>& d = g.grad(idx);
            g.grad_mut(a).noalias() += d * g.value(b);
            g.grad_mut(b).noalias() += d.transpose() * g.value(a);
        };
        return idx;
    }

    Index add(Index a, Index b) {
        check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add shapes");
        Index idx = push(value(a) + value(b), nullptr);
        node(idx).back = [a, b, idx](Graph& g) {
            g.grad_mut(a) += g.grad(idx);
            g.grad_mut(b) += g.grad(idx);
        };
        return idx;
    }

    /// Adds a 1-by-cols bias row to every row of `a`.
    Index add_rowvec(Index a, Index b) {
        check(value(b).rows() == 1 && value(a).cols() == value(b).cols(), "add_rowvec shapes");
        Mat<S> out = value(a);
        out.rowwise() += value(b).row(0);
        Index idx = push(std::move(out), nullptr);
        node(idx).back = [a, b, idx](Graph& g) {
            g.grad_mut(a) += g.grad(idx);
            g.grad_mut(b).row(0) += g.grad(idx).colwise().sum();
        };
        return idx;
    }

    Index add_const(Index a, const Mat<S>& c) {
        check(value(a).rows() == c.rows() && value(a).cols() == c.cols(), "add_const shapes");
        Index idx = push(value(a) + c, nullptr);
        node(idx).back = [a, idx](Graph& g) { g.grad_mut(a) += g.grad(idx); };
        return idx;
    }

    Index scale(Index a, S c) {
        Index idx = push(value(a) * c, nullptr);
        node(idx).back = [a, c, idx](Graph& g) { g.grad_mut(a) += g.grad(idx) * c; };
        return idx;
    }

    /// Elementwise product with a constant matrix (dropout masks).
    Index hadamard_const(Index a, Mat<S> m) {
        check(value(a).rows() == m.rows() && value(a).cols() == m.cols(), "hadamard shapes");
        Index idx = push(value(a).cwiseProduct(m), nullptr);
        node(idx).back = [a, idx, m = std::move(m)](Graph& g) {
            g.grad_mut(a) += g.grad(idx).cwiseProduct(m);
        };
        return idx;
    }

    Index relu(Index a) {
        Index idx = push(value(a).cwiseMax(S(0)), nullptr);
        node(idx).back = [a, idx](Graph& g) {
            g.grad_mut(a) += g.grad(idx).cwiseProduct(
                (g.value(a).array() > S(0)).template cast<S>().matrix());
        };
        return idx;
    }

    /// Row-wise softmax, stable under large negative entries (-inf rows up to
    /// the diagonal are fine; a row must keep at least one finite entry).
    Index softmax_rows(Index a) {
        const Mat<S>& x = value(a);
        Mat<S> y(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            S m = x.row(r).maxCoeff();
            auto e = (x.row(r).array() - m).exp();
            y.row(r) = (e / e.sum()).matrix();
        }
        Index idx = push(std::move(y), nullptr);
        node(idx).back = [a, idx](Graph& g) {
            const Mat<S>& yv = g.value(idx);
            const Mat<S>& d = g.grad(idx);
            Mat<S>& da = g.grad_mut(a);
            for (Eigen::Index r = 0; r < yv.rows(); ++r) {
                S dot = yv.row(r).dot(d.row(r));
                da.row(r) += (yv.row(r).array() * (d.row(r).array() - dot)).matrix();
            }
        };
        return idx;
    }

    /// x_r / max(||x_r||, eps) per row; the eps branch keeps zero rows finite.
    Index normalize_rows(Index a, S eps) {
        const Mat<S>& x = value(a);
        Mat<S> y(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            S n = x.row(r).norm();
            y.row(r) = x.row(r) / std::max(n, eps);
        }
        Index idx = push(std::move(y), nullptr);
        node(idx).back = [a, idx, eps](Graph& g) {
            const Mat<S>& x = g.value(a);
            const Mat<S>& yv = g.value(idx);
            const Mat<S>& d = g.grad(idx);
            Mat<S>& da = g.grad_mut(a);
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                S n = x.row(r).norm();
                if (n > eps) {
                    S dot = yv.row(r).dot(d.row(r));
                    da.row(r) += (d.row(r) - dot * yv.row(r)) / n;
                } else {
                    da.row(r) += d.row(r) / eps;
                }
            }
        };
        return idx;
    }

    /// y = g * A where `gain` is a 1x1 node.
    Index scale_by_scalar(Index a, Index gain) {
        check(value(gain).rows() == 1 && value(gain).cols() == 1, "scale_by_scalar gain shape");
        Index idx = push(value(a) * value(gain)(0, 0), nullptr);
        node(idx).back = [a, gain, idx](Graph& g) {
            const Mat<S>& d = g.grad(idx);
            g.grad_mut(a) += d * g.value(gain)(0, 0);
            g.grad_mut(gain)(0, 0) += d.cwiseProduct(g.value(a)).sum();
        };
        return idx;
    }

    /// 1x1 view of one entry.
    Index cell(Index a, Eigen::Index r, Eigen::Index c) {
        Mat<S> v(1, 1);
        v(0, 0) = value(a)(r, c);
        Index idx = push(std::move(v), nullptr);
        node(idx).back = [a, r, c, idx](Graph& g) { g.grad_mut(a)(r, c) += g.grad(idx)(0, 0); };
        return idx;
    }

    /// scores - sum_k min(exp(s_k), cap) * M^k with 1x1 strength nodes. The
    /// cap keeps extreme strengths finite; beyond it the strength gradient is
    /// zero. With all-zero masks the result is bit-identical to `scores`.
    /// `masks` is captured by reference and must outlive backward().
    Index sub_mask_penalty(Index scores, const augment::MaskPair& masks, Index s1, Index s2,
                           double cap) {
        const Mat<S>& x = value(scores);
        const auto n = static_cast<std::size_t>(x.rows());
        check(x.rows() == x.cols() && n == masks.n, "mask/score shapes");
        const double p1 = std::min(std::exp(static_cast<double>(value(s1)(0, 0))), cap);
        const double p2 = std::min(std::exp(static_cast<double>(value(s2)(0, 0))), cap);
        Mat<S> out = x;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double pen = p1 * masks.at1(i, j) + p2 * masks.at2(i, j);
                if (pen != 0.0)
                    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -= static_cast<S>(pen);
            }
        Index idx = push(std::move(out), nullptr);
        node(idx).back = [scores, &masks, s1, s2, p1, p2, cap, idx](Graph& g) {
            const Mat<S>& d = g.grad(idx);
            g.grad_mut(scores) += d;
            const auto n = masks.n;
            double acc1 = 0, acc2 = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double dij = static_cast<double>(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                    if (masks.at1(i, j)) acc1 += dij;
                    if (masks.at2(i, j)) acc2 += dij;
                }
            if (p1 < cap) g.grad_mut(s1)(0, 0) -= static_cast<S>(p1 * acc1);
            if (p2 < cap) g.grad_mut(s2)(0, 0) -= static_cast<S>(p2 * acc2);
        };
        return idx;
    }

    /// Mean over non-pad positions of cross-entropy against the smoothed
    /// target distribution (1-eps) * one-hot + eps * uniform. Returns a 1x1
    /// loss node; `pad_id` rows are excluded (-1 disables padding).
    Index label_smoothed_nll(Index logits, std::vector<int> targets, S eps, int pad_id = -1) {
        const Mat<S>& z = value(logits);
        check(static_cast<Eigen::Index>(targets.size()) == z.rows(), "targets/logits rows");
        const auto vocab = static_cast<S>(z.cols());
        Mat<S> logp(z.rows(), z.cols());
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            S m = z.row(r).maxCoeff();
            S lse = std::log((z.row(r).array() - m).exp().sum()) + m;
            logp.row(r) = z.row(r).array() - lse;
        }
        S total = 0;
        int n_tokens = 0;
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            int t = targets[static_cast<std::size_t>(r)];
            if (t == pad_id) continue;
            ++n_tokens;
            total += -(S(1) - eps) * logp(r, t) - (eps / vocab) * logp.row(r).sum();
        }
        check(n_tokens > 0, "loss over zero tokens");
        Mat<S> v(1, 1);
        v(0, 0) = total / static_cast<S>(n_tokens);
        Index idx = push(std::move(v), nullptr);
        node(idx).back = [logits, idx, targets = std::move(targets), eps, pad_id, n_tokens](Graph& g) {
            const Mat<S>& z = g.value(logits);
            const S dy = g.grad(idx)(0, 0) / static_cast<S>(n_tokens);
            const auto vocab = static_cast<S>(z.cols());
            Mat<S>& dz = g.grad_mut(logits);
            for (Eigen::Index r = 0; r < z.rows(); ++r) {
                int t = targets[static_cast<std::size_t>(r)];
                if (t == pad_id) continue;
                S m = z.row(r).maxCoeff();
                auto e = (z.row(r).array() - m).exp();
                auto p = e / e.sum();
                dz.row(r) += (dy * (p - eps / vocab)).matrix();
                dz(r, t) -= dy * (S(1) - eps);
            }
        };
        return idx;
    }

    /// Seeds the loss gradient with `seed` and walks the tape backwards.
    void backward(Index loss, S seed = S(1)) {
        check(value(loss).rows() == 1 && value(loss).cols() == 1, "backward needs scalar loss");
        for (auto& nd : nodes_) nd.grad.setZero(nd.val.rows(), nd.val.cols());
        node(loss).grad(0, 0) = seed;
        for (Index i = loss; i >= 0; --i) {
            auto& nd = node(i);
            if (nd.back) nd.back(*this);
        }
    }

private:
    Node& node(Index i) { return nodes_[static_cast<std::size_t>(i)]; }

    Index push(Mat<S> v, std::function<void(Graph&)> back) {
        nodes_.push_back(Node{std::move(v), Mat<S>(), std::move(back)});
        return static_cast<Index>(nodes_.size() - 1);
    }

    static void check(bool ok, const char* what) {
        if (!ok) throw ShapeError(what);
    }

    std::vector<Node> nodes_;
};

}  // namespace nmt::autodiff
