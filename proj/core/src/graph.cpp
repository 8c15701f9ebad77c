#include "drex/nn/graph.hpp"

#include <cmath>

namespace drex::nn {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
} // namespace

Var Graph::make(Matrix value, bool needs_grad, std::function<void()> backward) {
    Node node;
    node.grad = Matrix::Zero(value.rows(), value.cols());
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Matrix value) { return make(std::move(value), true, nullptr); }

Var Graph::constant(Matrix value) { return make(std::move(value), false, nullptr); }

Var Graph::param(Parameter* p) {
    Var v = make(p->value, true, nullptr);
    nodes_[v.idx].backward = [this, v, p]() { p->grad += nodes_[v.idx].grad; };
    return v;
}

Var Graph::gather_rows(Parameter* table, const std::vector<int>& ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table->value.rows()) {
            throw Error("gather_rows: id " + std::to_string(ids[i]) + " out of range for " +
                        table->name);
        }
        out.row(static_cast<Eigen::Index>(i)) = table->value.row(ids[i]);
    }
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, table, ids]() {
        const Matrix& g = nodes_[v.idx].grad;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            table->grad.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
        }
    };
    return v;
}

Var Graph::add(Var a, Var b) {
    check(a);
    check(b);
    Var v = make(nodes_[a.idx].value + nodes_[b.idx].value, true, nullptr);
    nodes_[v.idx].backward = [this, v, a, b]() {
        nodes_[a.idx].grad += nodes_[v.idx].grad;
        nodes_[b.idx].grad += nodes_[v.idx].grad;
    };
    return v;
}

Var Graph::sub(Var a, Var b) {
    check(a);
    check(b);
    Var v = make(nodes_[a.idx].value - nodes_[b.idx].value, true, nullptr);
    nodes_[v.idx].backward = [this, v, a, b]() {
        nodes_[a.idx].grad += nodes_[v.idx].grad;
        nodes_[b.idx].grad -= nodes_[v.idx].grad;
    };
    return v;
}

Var Graph::cmul(Var a, Var b) {
    check(a);
    check(b);
    Var v = make(nodes_[a.idx].value.cwiseProduct(nodes_[b.idx].value), true, nullptr);
    nodes_[v.idx].backward = [this, v, a, b]() {
        nodes_[a.idx].grad += nodes_[v.idx].grad.cwiseProduct(nodes_[b.idx].value);
        nodes_[b.idx].grad += nodes_[v.idx].grad.cwiseProduct(nodes_[a.idx].value);
    };
    return v;
}

Var Graph::scale(Var a, double s) {
    check(a);
    Var v = make(nodes_[a.idx].value * s, true, nullptr);
    nodes_[v.idx].backward = [this, v, a, s]() { nodes_[a.idx].grad += s * nodes_[v.idx].grad; };
    return v;
}

Var Graph::add_rowvec(Var a, Var row) {
    check(a);
    check(row);
    const Matrix& r = nodes_[row.idx].value;
    if (r.rows() != 1 || r.cols() != nodes_[a.idx].value.cols()) {
        throw Error("add_rowvec: bias shape mismatch");
    }
    Matrix out = nodes_[a.idx].value;
    out.rowwise() += r.row(0);
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, a, row]() {
        nodes_[a.idx].grad += nodes_[v.idx].grad;
        nodes_[row.idx].grad += nodes_[v.idx].grad.colwise().sum();
    };
    return v;
}

Var Graph::matmul(Var a, Var b) {
    check(a);
    check(b);
    const Matrix& A = nodes_[a.idx].value;
    const Matrix& B = nodes_[b.idx].value;
    if (A.cols() != B.rows()) {
        throw Error("matmul: inner dimensions differ (" + std::to_string(A.cols()) + " vs " +
                    std::to_string(B.rows()) + ")");
    }
    Var v = make(A * B, true, nullptr);
    nodes_[v.idx].backward = [this, v, a, b]() {
        const Matrix& g = nodes_[v.idx].grad;
        nodes_[a.idx].grad.noalias() += g * nodes_[b.idx].value.transpose();
        nodes_[b.idx].grad.noalias() += nodes_[a.idx].value.transpose() * g;
    };
    return v;
}

Var Graph::transpose(Var a) {
    check(a);
    Var v = make(nodes_[a.idx].value.transpose(), true, nullptr);
    nodes_[v.idx].backward = [this, v, a]() {
        nodes_[a.idx].grad += nodes_[v.idx].grad.transpose();
    };
    return v;
}

Var Graph::slice_cols(Var a, Eigen::Index start, Eigen::Index n) {
    check(a);
    Var v = make(nodes_[a.idx].value.middleCols(start, n), true, nullptr);
    nodes_[v.idx].backward = [this, v, a, start, n]() {
        nodes_[a.idx].grad.middleCols(start, n) += nodes_[v.idx].grad;
    };
    return v;
}

Var Graph::slice_rows(Var a, Eigen::Index start, Eigen::Index n) {
    check(a);
    Var v = make(nodes_[a.idx].value.middleRows(start, n), true, nullptr);
    nodes_[v.idx].backward = [this, v, a, start, n]() {
        nodes_[a.idx].grad.middleRows(start, n) += nodes_[v.idx].grad;
    };
    return v;
}

Var Graph::select_cols(Var a, const std::vector<int>& indices) {
    check(a);
    const Matrix& in = nodes_[a.idx].value;
    Matrix out(in.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= in.cols()) {
            throw Error("select_cols: index out of range");
        }
        out.col(static_cast<Eigen::Index>(i)) = in.col(indices[i]);
    }
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, a, indices]() {
        const Matrix& g = nodes_[v.idx].grad;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            nodes_[a.idx].grad.col(indices[i]) += g.col(static_cast<Eigen::Index>(i));
        }
    };
    return v;
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error("concat_cols: no parts");
    Eigen::Index rows = nodes_[check(parts[0])].value.rows();
    Eigen::Index cols = 0;
    for (Var p : parts) cols += nodes_[check(p)].value.cols();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        const Matrix& m = nodes_[p.idx].value;
        out.middleCols(at, m.cols()) = m;
        at += m.cols();
    }
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, parts]() {
        Eigen::Index at = 0;
        for (Var p : parts) {
            Eigen::Index n = nodes_[p.idx].value.cols();
            nodes_[p.idx].grad += nodes_[v.idx].grad.middleCols(at, n);
            at += n;
        }
    };
    return v;
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error("concat_rows: no parts");
    Eigen::Index cols = nodes_[check(parts[0])].value.cols();
    Eigen::Index rows = 0;
    for (Var p : parts) rows += nodes_[check(p)].value.rows();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        const Matrix& m = nodes_[p.idx].value;
        out.middleRows(at, m.rows()) = m;
        at += m.rows();
    }
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, parts]() {
        Eigen::Index at = 0;
        for (Var p : parts) {
            Eigen::Index n = nodes_[p.idx].value.rows();
            nodes_[p.idx].grad += nodes_[v.idx].grad.middleRows(at, n);
            at += n;
        }
    };
    return v;
}

Var Graph::relu(Var a) {
    check(a);
    Var v = make(nodes_[a.idx].value.cwiseMax(0.0), true, nullptr);
    nodes_[v.idx].backward = [this, v, a]() {
        nodes_[a.idx].grad.array() +=
            nodes_[v.idx].grad.array() * (nodes_[a.idx].value.array() > 0.0).cast<double>();
    };
    return v;
}

Var Graph::gelu(Var a) {
    check(a);
    const Matrix& x = nodes_[a.idx].value;
    Matrix out = x.unaryExpr([](double t) { return 0.5 * t * (1.0 + std::erf(t * kInvSqrt2)); });
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, a]() {
        const Matrix& x = nodes_[a.idx].value;
        Matrix d = x.unaryExpr([](double t) {
            return 0.5 * (1.0 + std::erf(t * kInvSqrt2)) +
                   t * kInvSqrt2Pi * std::exp(-0.5 * t * t);
        });
        nodes_[a.idx].grad.array() += nodes_[v.idx].grad.array() * d.array();
    };
    return v;
}

Var Graph::tanh_(Var a) {
    check(a);
    Var v = make(nodes_[a.idx].value.array().tanh().matrix(), true, nullptr);
    nodes_[v.idx].backward = [this, v, a]() {
        const auto t = nodes_[v.idx].value.array();
        nodes_[a.idx].grad.array() += nodes_[v.idx].grad.array() * (1.0 - t * t);
    };
    return v;
}

namespace {
Matrix softmax_rows_value(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        Eigen::ArrayXd e = (x.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}
} // namespace

Var Graph::softmax_rows(Var a) {
    check(a);
    Var v = make(softmax_rows_value(nodes_[a.idx].value), true, nullptr);
    nodes_[v.idx].backward = [this, v, a]() {
        const Matrix& s = nodes_[v.idx].value;
        const Matrix& g = nodes_[v.idx].grad;
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            const double dot = g.row(r).dot(s.row(r));
            nodes_[a.idx].grad.row(r).array() +=
                s.row(r).array() * (g.row(r).array() - dot);
        }
    };
    return v;
}

Var Graph::log_softmax_rows(Var a) {
    check(a);
    const Matrix& x = nodes_[a.idx].value;
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        const double lse = m + std::log((x.row(r).array() - m).exp().sum());
        out.row(r) = x.row(r).array() - lse;
    }
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, a]() {
        const Matrix& ls = nodes_[v.idx].value;
        const Matrix& g = nodes_[v.idx].grad;
        for (Eigen::Index r = 0; r < ls.rows(); ++r) {
            const double gsum = g.row(r).sum();
            nodes_[a.idx].grad.row(r).array() +=
                g.row(r).array() - ls.row(r).array().exp() * gsum;
        }
    };
    return v;
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
    check(x);
    check(gain);
    check(bias);
    const Matrix& in = nodes_[x.idx].value;
    const Eigen::Index d = in.cols();
    if (nodes_[gain.idx].value.cols() != d || nodes_[bias.idx].value.cols() != d) {
        throw Error("layer_norm: gain/bias width mismatch");
    }
    Matrix normed(in.rows(), d);
    Eigen::VectorXd inv_std(in.rows());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
        const double mu = in.row(r).mean();
        const double var = (in.row(r).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std(r) = inv;
        normed.row(r) = (in.row(r).array() - mu) * inv;
    }
    Matrix out = normed;
    out.array().rowwise() *= nodes_[gain.idx].value.row(0).array();
    out.rowwise() += nodes_[bias.idx].value.row(0);
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, x, gain, bias, normed, inv_std]() {
        const Matrix& g = nodes_[v.idx].grad;
        const auto gain_row = nodes_[gain.idx].value.row(0).array();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            Eigen::ArrayXd gn = g.row(r).array() * gain_row;
            const double mean_gn = gn.mean();
            const double mean_gn_n = (gn * normed.row(r).array().transpose()).mean();
            nodes_[x.idx].grad.row(r).array() +=
                inv_std(r) * (gn - mean_gn - normed.row(r).array().transpose() * mean_gn_n);
        }
        nodes_[gain.idx].grad += (g.array() * normed.array()).colwise().sum().matrix();
        nodes_[bias.idx].grad += g.colwise().sum();
    };
    return v;
}

Var Graph::dropout(Var x, double p, Rng& rng, bool train) {
    check(x);
    if (!train || p <= 0.0) {
        // identity pass-through node keeps graph shape stable
        Var v = make(nodes_[x.idx].value, true, nullptr);
        nodes_[v.idx].backward = [this, v, x]() { nodes_[x.idx].grad += nodes_[v.idx].grad; };
        return v;
    }
    if (p >= 1.0) throw Error("dropout: p must be < 1");
    const Matrix& in = nodes_[x.idx].value;
    std::bernoulli_distribution keep(1.0 - p);
    Matrix mask(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
        for (Eigen::Index c = 0; c < in.cols(); ++c) {
            mask(r, c) = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
        }
    }
    Var v = make(in.cwiseProduct(mask), true, nullptr);
    nodes_[v.idx].backward = [this, v, x, mask]() {
        nodes_[x.idx].grad += nodes_[v.idx].grad.cwiseProduct(mask);
    };
    return v;
}

Var Graph::cross_entropy_rows(Var logits, const std::vector<int>& targets) {
    check(logits);
    const Matrix& x = nodes_[logits.idx].value;
    if (static_cast<Eigen::Index>(targets.size()) != x.rows()) {
        throw Error("cross_entropy_rows: target count does not match logit rows");
    }
    Matrix probs = softmax_rows_value(x);
    double loss = 0.0;
    int count = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int y = targets[static_cast<std::size_t>(r)];
        if (y < 0) continue;
        if (y >= x.cols()) throw Error("cross_entropy_rows: target out of range");
        loss -= std::log(std::max(probs(r, y), 1e-300));
        ++count;
    }
    if (count == 0) throw Error("cross_entropy_rows: no target tokens");
    Matrix out(1, 1);
    out(0, 0) = loss / count;
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, logits, targets, probs, count]() {
        const double g = nodes_[v.idx].grad(0, 0) / count;
        Matrix& dst = nodes_[logits.idx].grad;
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
            const int y = targets[static_cast<std::size_t>(r)];
            if (y < 0) continue;
            dst.row(r) += g * probs.row(r);
            dst(r, y) -= g;
        }
    };
    return v;
}

Var Graph::log_softmax_pick(Var logits_row, int index) {
    check(logits_row);
    const Matrix& x = nodes_[logits_row.idx].value;
    if (x.rows() != 1) throw Error("log_softmax_pick: expected a single row");
    if (index < 0 || index >= x.cols()) throw Error("log_softmax_pick: index out of range");
    Matrix probs = softmax_rows_value(x);
    Matrix out(1, 1);
    out(0, 0) = std::log(std::max(probs(0, index), 1e-300));
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, logits_row, index, probs]() {
        const double g = nodes_[v.idx].grad(0, 0);
        nodes_[logits_row.idx].grad -= g * probs;
        nodes_[logits_row.idx].grad(0, index) += g;
    };
    return v;
}

Var Graph::segment_reduce(Var scores_row, const std::vector<int>& segment_of, int num_segments,
                          int mode) {
    check(scores_row);
    const Matrix& x = nodes_[scores_row.idx].value;
    if (x.rows() != 1 || static_cast<Eigen::Index>(segment_of.size()) != x.cols()) {
        throw Error("segment_reduce: shape mismatch");
    }
    Matrix out = Matrix::Zero(1, num_segments);
    std::vector<int> argmax(static_cast<std::size_t>(num_segments), -1);
    std::vector<bool> seen(static_cast<std::size_t>(num_segments), false);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const int s = segment_of[static_cast<std::size_t>(i)];
        if (s < 0 || s >= num_segments) throw Error("segment_reduce: segment out of range");
        if (mode == 1) {
            out(0, s) += x(0, i);
            seen[static_cast<std::size_t>(s)] = true;
        } else {
            if (!seen[static_cast<std::size_t>(s)] || x(0, i) > out(0, s)) {
                out(0, s) = x(0, i);
                argmax[static_cast<std::size_t>(s)] = static_cast<int>(i);
                seen[static_cast<std::size_t>(s)] = true;
            }
        }
    }
    for (int s = 0; s < num_segments; ++s) {
        if (!seen[static_cast<std::size_t>(s)]) {
            throw Error("segment_reduce: segment " + std::to_string(s) + " has no members");
        }
    }
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, scores_row, segment_of, argmax, mode]() {
        const Matrix& g = nodes_[v.idx].grad;
        Matrix& dst = nodes_[scores_row.idx].grad;
        if (mode == 1) {
            for (std::size_t i = 0; i < segment_of.size(); ++i) {
                dst(0, static_cast<Eigen::Index>(i)) += g(0, segment_of[i]);
            }
        } else {
            for (std::size_t s = 0; s < argmax.size(); ++s) {
                dst(0, argmax[s]) += g(0, static_cast<Eigen::Index>(s));
            }
        }
    };
    return v;
}

Var Graph::sum_all(Var a) {
    check(a);
    Matrix out(1, 1);
    out(0, 0) = nodes_[a.idx].value.sum();
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, a]() {
        nodes_[a.idx].grad.array() += nodes_[v.idx].grad(0, 0);
    };
    return v;
}

Var Graph::mean_all(Var a) {
    check(a);
    const double n = static_cast<double>(nodes_[a.idx].value.size());
    Matrix out(1, 1);
    out(0, 0) = nodes_[a.idx].value.sum() / n;
    Var v = make(std::move(out), true, nullptr);
    nodes_[v.idx].backward = [this, v, a, n]() {
        nodes_[a.idx].grad.array() += nodes_[v.idx].grad(0, 0) / n;
    };
    return v;
}

void Graph::backward(Var loss) {
    const int root = check(loss);
    if (nodes_[root].value.size() != 1) {
        throw Error("backward: loss must be a 1 x 1 node");
    }
    nodes_[root].grad(0, 0) = 1.0;
    for (int i = root; i >= 0; --i) {
        if (nodes_[i].backward) {
            nodes_[i].backward();
        }
    }
}

} // namespace drex::nn
