#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drex/error.hpp"

namespace drex::nn {

using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// A named trainable tensor. Gradients accumulate across graph builds until
/// the optimizer consumes them.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
    bool has_grad() const { return !grad.isZero(0.0); }
    Eigen::Index size() const { return value.size(); }
};

/// Owns parameters so layers can hand out stable pointers.
class ParameterStore {
public:
    Parameter* add(std::string name, Matrix value) {
        params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
        return params_.back().get();
    }

    std::vector<Parameter*> all() const {
        std::vector<Parameter*> out;
        out.reserve(params_.size());
        for (const auto& p : params_) out.push_back(p.get());
        return out;
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

/// Handle to a node in a Graph tape.
struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

/// Dynamic reverse-mode autodiff tape over dense double matrices. One graph
/// per forward pass; backward() runs the tape in reverse.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // --- leaves -----------------------------------------------------------
    Var input(Matrix value);             // differentiable leaf (grad readable)
    Var constant(Matrix value);          // no gradient tracking
    Var param(Parameter* p);             // leaf bound to a Parameter
    /// Gathers rows of an embedding table; backward scatters into the table
    /// gradient without materializing a full-table node.
    Var gather_rows(Parameter* table, const std::vector<int>& ids);

    // --- elementwise / structural ------------------------------------------
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var cmul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_rowvec(Var a, Var row);      // broadcast a 1 x d row over all rows
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var slice_cols(Var a, Eigen::Index start, Eigen::Index n);
    Var slice_rows(Var a, Eigen::Index start, Eigen::Index n);
    Var select_cols(Var a, const std::vector<int>& indices);
    Var concat_cols(const std::vector<Var>& parts);
    Var concat_rows(const std::vector<Var>& parts);

    // --- nonlinearities -----------------------------------------------------
    Var relu(Var a);
    Var gelu(Var a);                     // exact erf form
    Var tanh_(Var a);
    Var softmax_rows(Var a);
    Var log_softmax_rows(Var a);

    /// Row-wise layer norm with learned gain/bias (1 x d each).
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

    /// Inverted dropout; identity when train is false or p == 0.
    Var dropout(Var x, double p, Rng& rng, bool train);

    // --- losses -------------------------------------------------------------
    /// Mean token cross entropy: logits is T x V, targets has T entries;
    /// positions with target < 0 are ignored. Returns a 1 x 1 node.
    Var cross_entropy_rows(Var logits, const std::vector<int>& targets);

    /// Picks log_softmax(row)[index] of a 1 x n logits row. Returns 1 x 1.
    Var log_softmax_pick(Var logits_row, int index);

    /// Per-segment reduction of a 1 x n score row into 1 x num_segments.
    /// mode: 0 = max (grad routed to the arg max, first on ties), 1 = sum.
    Var segment_reduce(Var scores_row, const std::vector<int>& segment_of, int num_segments,
                       int mode);

    Var sum_all(Var a);                  // 1 x 1
    Var mean_all(Var a);                 // 1 x 1

    // --- execution ----------------------------------------------------------
    void backward(Var loss);
    const Matrix& value(Var v) const { return nodes_[check(v)].value; }
    const Matrix& grad(Var v) const { return nodes_[check(v)].grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = true;
        std::function<void()> backward;
    };

    int check(Var v) const {
        if (!v.valid() || v.idx >= static_cast<int>(nodes_.size())) {
            throw Error("invalid graph node handle");
        }
        return v.idx;
    }

    Var make(Matrix value, bool needs_grad, std::function<void()> backward);

    Matrix& grad_ref(Var v) { return nodes_[v.idx].grad; }

    std::vector<Node> nodes_;
};

} // namespace drex::nn
