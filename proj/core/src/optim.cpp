#include "drex/nn/optim.hpp"

#include <cmath>

namespace drex::nn {

AdamW::AdamW(std::vector<ParamGroup> groups, AdamWSettings settings)
    : groups_(std::move(groups)), settings_(settings) {
    slots_.resize(groups_.size());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
        slots_[gi].resize(groups_[gi].params.size());
        for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
            const Parameter* p = groups_[gi].params[pi];
            slots_[gi][pi].m = Matrix::Zero(p->value.rows(), p->value.cols());
            slots_[gi][pi].v = Matrix::Zero(p->value.rows(), p->value.cols());
        }
    }
}

void AdamW::step() {
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
        const double lr = groups_[gi].lr;
        for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
            Parameter* p = groups_[gi].params[pi];
            if (!p->has_grad()) {
                continue;
            }
            Slot& slot = slots_[gi][pi];
            slot.t += 1;
            slot.m = settings_.beta1 * slot.m + (1.0 - settings_.beta1) * p->grad;
            slot.v = settings_.beta2 * slot.v.array().matrix() +
                     (1.0 - settings_.beta2) * p->grad.cwiseProduct(p->grad);
            const double bias1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(slot.t));
            const double bias2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(slot.t));
            Matrix m_hat = slot.m / bias1;
            Matrix v_hat = slot.v / bias2;
            p->value.array() -=
                lr * (m_hat.array() / (v_hat.array().sqrt() + settings_.eps) +
                      settings_.weight_decay * p->value.array());
            p->zero_grad();
        }
    }
}

void AdamW::zero_grad() {
    for (auto& group : groups_) {
        for (Parameter* p : group.params) {
            p->zero_grad();
        }
    }
}

} // namespace drex::nn
