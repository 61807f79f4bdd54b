#ifndef PROSODY_OPTIMIZER_HPP_
#define PROSODY_OPTIMIZER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/layers.hpp"

namespace prosody::nn {

enum class LrSchedule { warmup_inverse_sqrt, constant };

std::string to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& s);

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  LrSchedule schedule = LrSchedule::warmup_inverse_sqrt;
  double learning_rate = 1e-4;  // constant mode only
  int warmup_steps = 4000;
  int model_dim = 256;
  int batch_size = 16;
  int total_steps = 1000;
  std::uint64_t rng_seed = 1;
  // stop once a 10-step loss average drops below this fraction of the
  // step-0 loss; 0 disables early stopping
  double early_stop_ratio = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Learning rate at a 1-based step. warmup_inverse_sqrt is
// model_dim^-0.5 * min(step^-0.5, step * warmup_steps^-1.5).
double lr_at(const TrainConfig& cfg, int step);

// Adam with bias correction over the parameter buffers of one or more
// networks. Layers are registered once; moment buffers persist across steps.
class AdamOptimizer {
 public:
  void register_layers(const std::vector<Layer*>& layers);

  // Applies one update using lr_at(cfg, step). Throws NumericError when any
  // gradient is non-finite, naming the offending layer.
  void step(const TrainConfig& cfg, int step_number);

  int steps_taken() const { return steps_taken_; }

  nlohmann::json to_json(bool full_precision) const;
  // Layers must already be registered in the same order they were saved.
  void load_state(const nlohmann::json& j);

 private:
  std::vector<Layer*> layers_;
  std::vector<std::vector<double>> m_, v_;
  int steps_taken_ = 0;
};

}  // namespace prosody::nn

#endif  // PROSODY_OPTIMIZER_HPP_
