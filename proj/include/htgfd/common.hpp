#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace htgfd {

// Dense row-major matrix templated on scalar. float for training runs,
// double for verification (gradient-check) runs.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

template <class S>
bool all_finite(const Mat<S>& m) {
  return m.allFinite();
}

}  // namespace htgfd
