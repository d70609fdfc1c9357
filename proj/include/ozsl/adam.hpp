#ifndef OZSL_ADAM_HPP
#define OZSL_ADAM_HPP

#include "ozsl/autodiff.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace ozsl {

struct adam_parameters {
    // WGAN-GP convention; the original Adam default is beta1 = 0.9.
    double learning_rate = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment estimates for one parameter group.
class AdamState {
  public:
    AdamState() = default;
    AdamState(std::span<const ad::Var> params, adam_parameters hp) : hp_{hp} {
        for (const auto &p : params) {
            first_.emplace_back(p.rows(), p.cols());
            second_.emplace_back(p.rows(), p.cols());
        }
    }

    [[nodiscard]] std::uint64_t step() const noexcept { return step_; }
    [[nodiscard]] const adam_parameters &hyper() const noexcept { return hp_; }
    void set_learning_rate(double lr) { hp_.learning_rate = lr; }
    [[nodiscard]] const std::vector<Matrix> &first_moment() const noexcept { return first_; }
    [[nodiscard]] const std::vector<Matrix> &second_moment() const noexcept { return second_; }

    /// One bias-corrected update. Throws training_error on a non-finite gradient.
    void update(std::span<ad::Var> params, std::span<const Matrix> grads) {
        if (params.size() != grads.size() || params.size() != first_.size()) {
            throw dimension_error("adam: parameter/gradient count mismatch");
        }
        for (std::size_t i = 0; i < grads.size(); ++i) {
            require_same_shape(params[i].value(), grads[i], "adam");
            if (!grads[i].all_finite()) {
                throw training_error("adam: non-finite gradient for parameter " + std::to_string(i));
            }
        }
        ++step_;
        const double t = static_cast<double>(step_);
        const double correction1 = 1.0 - std::pow(hp_.beta1, t);
        const double correction2 = 1.0 - std::pow(hp_.beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Matrix next = params[i].value();
            auto w = next.data();
            auto g = grads[i].data();
            auto m = first_[i].data();
            auto v = second_[i].data();
            for (std::size_t j = 0; j < w.size(); ++j) {
                m[j] = hp_.beta1 * m[j] + (1.0 - hp_.beta1) * g[j];
                v[j] = hp_.beta2 * v[j] + (1.0 - hp_.beta2) * g[j] * g[j];
                w[j] -= hp_.learning_rate * (m[j] / correction1) / (std::sqrt(v[j] / correction2) + hp_.epsilon);
            }
            params[i].assign(std::move(next));
        }
    }

  private:
    adam_parameters hp_{};
    std::vector<Matrix> first_;
    std::vector<Matrix> second_;
    std::uint64_t step_ = 0;
};

}  // namespace ozsl

#endif  // OZSL_ADAM_HPP
