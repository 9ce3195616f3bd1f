#pragma once

#include "htgfd/params.hpp"
#include "htgfd/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace htgfd {

// Scalar forward pass over a double-precision parameter store. When grads is
// non-null the implementation must also run its backward pass and fill one
// gradient per parameter (store order). kink receives the tape's branch
// signature so the checker can reject probes that cross a ReLU kink, a
// max-pool argmax flip, or a zero-norm guard.
using CheckedLoss = std::function<double(ParamStore<double>& params,
                                         std::vector<Mat<double>>* grads,
                                         uint64_t* kink)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  int probes = 0;
  int skipped = 0;  // probes discarded for straddling a kink
  std::string worst;

  bool ok(double tol) const { return probes > 0 && max_rel_err < tol; }
};

// Central finite differences (default step 1e-5) against analytic gradients
// on randomly sampled coordinates. Relative error uses a 1e-4 magnitude
// floor so that near-zero coordinate pairs are compared absolutely.
inline GradCheckReport grad_check(const CheckedLoss& fn,
                                  ParamStore<double>& params, int probe_count,
                                  uint64_t seed, double h = 1e-5) {
  std::vector<Mat<double>> grads;
  uint64_t kink0 = 0;
  double loss0 = fn(params, &grads, &kink0);
  require(std::isfinite(loss0), "grad_check: non-finite loss");

  Rng rng(seed);
  GradCheckReport rep;
  int attempts = 0;
  const int max_attempts = probe_count * 20;
  while (rep.probes < probe_count && attempts < max_attempts) {
    ++attempts;
    size_t p = static_cast<size_t>(rng.below(params.size()));
    Mat<double>& t = params.value(p);
    if (t.size() == 0) continue;
    Index c = static_cast<Index>(rng.below(static_cast<uint64_t>(t.size())));
    const double orig = t.data()[c];

    uint64_t kp = 0, km = 0;
    t.data()[c] = orig + h;
    double fp = fn(params, nullptr, &kp);
    t.data()[c] = orig - h;
    double fm = fn(params, nullptr, &km);
    t.data()[c] = orig;

    if (kp != km || kp != kink0) {
      ++rep.skipped;
      continue;
    }
    require(std::isfinite(fp) && std::isfinite(fm),
            "grad_check: non-finite perturbed loss");

    const double fd = (fp - fm) / (2.0 * h);
    const double an = grads[p].data()[c];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
    const double rel = std::abs(fd - an) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst = params.name(p) + "[" + std::to_string(c) +
                  "] analytic=" + std::to_string(an) +
                  " fd=" + std::to_string(fd);
    }
    ++rep.probes;
  }
  require(rep.probes > 0, "grad_check: every probe straddled a kink");
  return rep;
}

}  // namespace htgfd
