#pragma once

#include <vector>

#include "gcope/autodiff.hpp"

namespace gcope {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. step() applies the update and zeroes every grad.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg);

  void step();
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace gcope
