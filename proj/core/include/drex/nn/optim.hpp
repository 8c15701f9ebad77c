#pragma once

#include <vector>

#include "drex/nn/graph.hpp"

namespace drex::nn {

struct AdamWSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct ParamGroup {
    std::vector<Parameter*> params;
    double lr = 1e-3;
};

/// Decoupled-weight-decay Adam with per-group learning rates. A parameter
/// whose accumulated gradient is exactly zero is skipped entirely for the
/// step (no moment update, no decay), so branches whose loss coefficient is
/// zero leave their parameters untouched.
class AdamW {
public:
    AdamW(std::vector<ParamGroup> groups, AdamWSettings settings);

    void step();
    void zero_grad();

private:
    struct Slot {
        Matrix m;
        Matrix v;
        long t = 0;
    };

    std::vector<ParamGroup> groups_;
    std::vector<std::vector<Slot>> slots_;
    AdamWSettings settings_;
};

} // namespace drex::nn
