#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfnet/distribution.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/matrix.hpp"

namespace sfnet {

// Trainable tensor. The gradient buffer always has the value's shape and is
// owned by the parameter so it survives across tapes.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;

    Param() = default;
    Param(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    void zero_grad() { grad.fill(0.0); }
};

using NodeId = uint32_t;

// Reverse-mode tape over Matrix-valued nodes. The forward pass appends one
// node per primitive; backward() replays the recorded closures in exact
// reverse order. Parameters are immutable while a tape is alive; their
// gradients accumulate into Param::grad. Single-threaded by construction,
// independent tapes share no state.
class Tape {
public:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&, NodeId)> backward;  // empty for leaves
    };

    const Matrix& value(NodeId id) const { return nodes_[id].value; }
    const Matrix& grad(NodeId id) const { return nodes_[id].grad; }
    size_t size() const { return nodes_.size(); }

    NodeId constant(Matrix v) {
        return push(std::move(v), nullptr);
    }

    // Leaf bound to a trainable parameter; backward flushes into p.grad.
    NodeId parameter(Param& p) {
        Param* ptr = &p;
        return push(Matrix(p.value), [ptr](Tape& t, NodeId id) {
            add_inplace(ptr->grad, t.nodes_[id].grad);
        });
    }

    NodeId matmul(NodeId a, NodeId b) {
        Matrix out = sfnet::matmul(nodes_[a].value, nodes_[b].value);
        return push(std::move(out), [a, b](Tape& t, NodeId id) {
            const Matrix& g = t.nodes_[id].grad;
            add_product_nt(t.nodes_[a].grad, g, t.nodes_[b].value);
            add_product_tn(t.nodes_[b].grad, t.nodes_[a].value, g);
        });
    }

    NodeId add(NodeId a, NodeId b) {
        check(nodes_[a].value.same_shape(nodes_[b].value), "Tape::add: shape mismatch");
        Matrix out = nodes_[a].value;
        add_inplace(out, nodes_[b].value);
        return push(std::move(out), [a, b](Tape& t, NodeId id) {
            add_inplace(t.nodes_[a].grad, t.nodes_[id].grad);
            add_inplace(t.nodes_[b].grad, t.nodes_[id].grad);
        });
    }

    // x (BxC) plus a 1xC bias broadcast over rows.
    NodeId add_row_broadcast(NodeId x, NodeId bias) {
        const Matrix& xv = nodes_[x].value;
        const Matrix& bv = nodes_[bias].value;
        check(bv.rows() == 1 && bv.cols() == xv.cols(), "Tape::add_row_broadcast: bad bias shape");
        Matrix out = xv;
        for (size_t i = 0; i < out.rows(); ++i) {
            auto r = out.row(i);
            for (size_t j = 0; j < out.cols(); ++j) r[j] += bv(0, j);
        }
        return push(std::move(out), [x, bias](Tape& t, NodeId id) {
            const Matrix& g = t.nodes_[id].grad;
            add_inplace(t.nodes_[x].grad, g);
            Matrix& gb = t.nodes_[bias].grad;
            for (size_t i = 0; i < g.rows(); ++i) {
                auto r = g.row(i);
                for (size_t j = 0; j < g.cols(); ++j) gb(0, j) += r[j];
            }
        });
    }

    NodeId tanh(NodeId x) {
        Matrix out = tanh_forward(nodes_[x].value);
        return push(std::move(out), [x](Tape& t, NodeId id) {
            const Matrix& y = t.nodes_[id].value;
            const Matrix& g = t.nodes_[id].grad;
            Matrix& gx = t.nodes_[x].grad;
            for (size_t i = 0; i < y.size(); ++i) {
                const double yi = y.data()[i];
                gx.data()[i] += g.data()[i] * (1.0 - yi * yi);
            }
        });
    }

    // Column-wise concatenation of nodes with equal row counts.
    NodeId concat_cols(std::span<const NodeId> parts) {
        check(!parts.empty(), "Tape::concat_cols: no inputs");
        const size_t rows = nodes_[parts[0]].value.rows();
        size_t cols = 0;
        for (NodeId p : parts) {
            check(nodes_[p].value.rows() == rows, "Tape::concat_cols: row mismatch");
            cols += nodes_[p].value.cols();
        }
        Matrix out(rows, cols);
        size_t offset = 0;
        for (NodeId p : parts) {
            const Matrix& v = nodes_[p].value;
            for (size_t i = 0; i < rows; ++i) {
                auto src = v.row(i);
                auto dst = out.row(i);
                std::copy(src.begin(), src.end(), dst.begin() + offset);
            }
            offset += v.cols();
        }
        std::vector<NodeId> ids(parts.begin(), parts.end());
        return push(std::move(out), [ids](Tape& t, NodeId id) {
            const Matrix& g = t.nodes_[id].grad;
            size_t offset = 0;
            for (NodeId p : ids) {
                Matrix& gp = t.nodes_[p].grad;
                for (size_t i = 0; i < g.rows(); ++i) {
                    auto src = g.row(i);
                    auto dst = gp.row(i);
                    for (size_t j = 0; j < gp.cols(); ++j) dst[j] += src[offset + j];
                }
                offset += gp.cols();
            }
        });
    }

    // Row lookup into an embedding table; backward scatters into table.grad.
    NodeId gather_rows(Param& table, std::vector<uint32_t> indices) {
        Param* ptr = &table;
        const size_t dim = table.value.cols();
        Matrix out(indices.size(), dim);
        for (size_t i = 0; i < indices.size(); ++i) {
            check(indices[i] < table.value.rows(),
                  "Tape::gather_rows: index " + std::to_string(indices[i]) +
                      " out of range for " + table.name);
            auto src = table.value.row(indices[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        auto idx = std::move(indices);
        return push(std::move(out), [ptr, idx](Tape& t, NodeId id) {
            const Matrix& g = t.nodes_[id].grad;
            for (size_t i = 0; i < idx.size(); ++i) {
                auto dst = ptr->grad.row(idx[i]);
                auto src = g.row(i);
                for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
            }
        });
    }

    // Row-wise stable softmax.
    NodeId softmax_rows(NodeId logits) {
        Matrix out = nodes_[logits].value;
        check(out.cols() >= 2, "Tape::softmax_rows: need at least 2 classes");
        for (size_t i = 0; i < out.rows(); ++i) softmax_inplace(out.row(i));
        return push(std::move(out), [logits](Tape& t, NodeId id) {
            const Matrix& p = t.nodes_[id].value;
            const Matrix& g = t.nodes_[id].grad;
            Matrix& gx = t.nodes_[logits].grad;
            for (size_t i = 0; i < p.rows(); ++i) {
                auto pr = p.row(i);
                auto gr = g.row(i);
                double dot = 0.0;
                for (size_t j = 0; j < pr.size(); ++j) dot += gr[j] * pr[j];
                auto o = gx.row(i);
                for (size_t j = 0; j < pr.size(); ++j) o[j] += pr[j] * (gr[j] - dot);
            }
        });
    }

    // Mean negative log-likelihood of the target class per row. The floor
    // clamps both the value and the gradient, keeping them consistent.
    NodeId cross_entropy_mean(NodeId probs, std::vector<uint32_t> targets) {
        const Matrix& p = nodes_[probs].value;
        check(targets.size() == p.rows(), "Tape::cross_entropy_mean: target count mismatch");
        double total = 0.0;
        for (size_t i = 0; i < targets.size(); ++i) {
            check(targets[i] < p.cols(), "Tape::cross_entropy_mean: target class out of range");
            total += -std::log(std::max(p(i, targets[i]), kProbFloor));
        }
        Matrix out(1, 1);
        out(0, 0) = total / static_cast<double>(targets.size());
        auto tg = std::move(targets);
        return push(std::move(out), [probs, tg](Tape& t, NodeId id) {
            const double g = t.nodes_[id].grad(0, 0);
            const Matrix& p = t.nodes_[probs].value;
            Matrix& gp = t.nodes_[probs].grad;
            const double inv_n = 1.0 / static_cast<double>(tg.size());
            for (size_t i = 0; i < tg.size(); ++i) {
                const double pi = p(i, tg[i]);
                if (pi > kProbFloor) {
                    gp(i, tg[i]) -= g * inv_n / pi;
                }
            }
        });
    }

    // coeff * sum of squared L2 norms over the given table rows.
    NodeId l2_rows(Param& table, std::vector<uint32_t> rows, double coeff) {
        Param* ptr = &table;
        double total = 0.0;
        for (uint32_t r : rows) {
            check(r < table.value.rows(), "Tape::l2_rows: row out of range");
            for (double v : table.value.row(r)) total += v * v;
        }
        Matrix out(1, 1);
        out(0, 0) = coeff * total;
        auto rs = std::move(rows);
        return push(std::move(out), [ptr, rs, coeff](Tape& t, NodeId id) {
            const double g = t.nodes_[id].grad(0, 0);
            for (uint32_t r : rs) {
                auto row = ptr->value.row(r);
                auto dst = ptr->grad.row(r);
                for (size_t j = 0; j < row.size(); ++j) dst[j] += g * 2.0 * coeff * row[j];
            }
        });
    }

    // coeff * squared Frobenius norm of a whole parameter tensor.
    NodeId l2_full(Param& p, double coeff) {
        Param* ptr = &p;
        double total = 0.0;
        for (size_t i = 0; i < p.value.size(); ++i) {
            total += p.value.data()[i] * p.value.data()[i];
        }
        Matrix out(1, 1);
        out(0, 0) = coeff * total;
        return push(std::move(out), [ptr, coeff](Tape& t, NodeId id) {
            const double g = t.nodes_[id].grad(0, 0);
            for (size_t i = 0; i < ptr->value.size(); ++i) {
                ptr->grad.data()[i] += g * 2.0 * coeff * ptr->value.data()[i];
            }
        });
    }

    NodeId add_scalars(std::span<const NodeId> parts) {
        check(!parts.empty(), "Tape::add_scalars: no inputs");
        double total = 0.0;
        for (NodeId p : parts) {
            check(nodes_[p].value.rows() == 1 && nodes_[p].value.cols() == 1,
                  "Tape::add_scalars: non-scalar input");
            total += nodes_[p].value(0, 0);
        }
        Matrix out(1, 1);
        out(0, 0) = total;
        std::vector<NodeId> ids(parts.begin(), parts.end());
        return push(std::move(out), [ids](Tape& t, NodeId id) {
            const double g = t.nodes_[id].grad(0, 0);
            for (NodeId p : ids) t.nodes_[p].grad(0, 0) += g;
        });
    }

    // Seeds d(loss)/d(loss) = 1 and replays every recorded operation in
    // reverse, accumulating parameter gradients into their Param buffers.
    void backward(NodeId loss) {
        check(loss < nodes_.size(), "Tape::backward: loss node not on this tape");
        check(nodes_[loss].value.rows() == 1 && nodes_[loss].value.cols() == 1,
              "Tape::backward: loss must be scalar");
        check(!backward_done_, "Tape::backward: tape already replayed");
        backward_done_ = true;
        nodes_[loss].grad(0, 0) = 1.0;
        for (size_t i = nodes_.size(); i-- > 0;) {
            if (nodes_[i].backward) {
                nodes_[i].backward(*this, static_cast<NodeId>(i));
            }
        }
    }

private:
    NodeId push(Matrix value, std::function<void(Tape&, NodeId)> backward) {
        Node n;
        n.grad = Matrix(value.rows(), value.cols());
        n.value = std::move(value);
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

}  // namespace sfnet
