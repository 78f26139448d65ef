#pragma once

#include "hoimotion/nn/modules.hpp"

namespace hoimo::nn {

struct AdamWOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  AdamW(ParamMap& params, AdamWOptions opts);

  // Applies one update from the accumulated gradients and clears them.
  void step();
  void zero_grad();
  long step_count() const { return step_count_; }

 private:
  ParamMap& params_;
  AdamWOptions opts_;
  std::vector<Mat> m_, v_;
  long step_count_ = 0;
};

}  // namespace hoimo::nn
