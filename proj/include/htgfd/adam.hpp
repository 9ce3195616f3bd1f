#pragma once

#include "htgfd/params.hpp"

#include <cmath>

namespace htgfd {

// Adam with bias correction. Moments live alongside the parameter store they
// were created for; shapes are checked on every step.
template <class S>
class Adam {
 public:
  S lr = S(0.001);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);

  explicit Adam(const ParamStore<S>& params, S learning_rate = S(0.001))
      : lr(learning_rate) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_.push_back(Mat<S>::Zero(params.value(i).rows(), params.value(i).cols()));
      v_.push_back(Mat<S>::Zero(params.value(i).rows(), params.value(i).cols()));
    }
  }

  int64_t step_count() const { return t_; }

  void step(ParamStore<S>& params, const std::vector<Mat<S>>& grads) {
    require(params.size() == m_.size() && grads.size() == m_.size(),
            "adam: parameter/gradient count mismatch");
    ++t_;
    const S c1 = S(1) - std::pow(beta1, static_cast<S>(t_));
    const S c2 = S(1) - std::pow(beta2, static_cast<S>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Mat<S>& p = params.value(i);
      const Mat<S>& g = grads[i];
      require(g.rows() == p.rows() && g.cols() == p.cols(),
              "adam: gradient shape mismatch for " + params.name(i));
      m_[i] = beta1 * m_[i] + (S(1) - beta1) * g;
      v_[i] = beta2 * v_[i] + (S(1) - beta2) * g.cwiseProduct(g);
      p.array() -= lr * (m_[i].array() / c1) /
                   ((v_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  int64_t t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

}  // namespace htgfd
