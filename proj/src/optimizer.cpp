#include "prosody/optimizer.hpp"

#include <cmath>

#include "prosody/error.hpp"

namespace prosody::nn {

using nlohmann::json;

std::string to_string(LrSchedule s) {
  return s == LrSchedule::warmup_inverse_sqrt ? "warmup_inverse_sqrt"
                                              : "constant";
}

LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "warmup_inverse_sqrt") return LrSchedule::warmup_inverse_sqrt;
  if (s == "constant") return LrSchedule::constant;
  throw ConfigError("unknown lr schedule: " + s);
}

void TrainConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in (0, 1)");
  }
  if (epsilon <= 0.0 || learning_rate <= 0.0 || warmup_steps <= 0 ||
      model_dim <= 0 || batch_size <= 0 || total_steps <= 0) {
    throw ConfigError("train config values must be positive");
  }
  if (early_stop_ratio < 0.0 || early_stop_ratio >= 1.0) {
    throw ConfigError("early_stop_ratio must lie in [0, 1)");
  }
}

json TrainConfig::to_json() const {
  return {{"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"schedule", to_string(schedule)},
          {"learning_rate", learning_rate},
          {"warmup_steps", warmup_steps},
          {"model_dim", model_dim},
          {"batch_size", batch_size},
          {"total_steps", total_steps},
          {"rng_seed", rng_seed},
          {"early_stop_ratio", early_stop_ratio}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig cfg;
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  if (j.contains("schedule")) {
    cfg.schedule = lr_schedule_from_string(j["schedule"].get<std::string>());
  }
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.warmup_steps = j.value("warmup_steps", cfg.warmup_steps);
  cfg.model_dim = j.value("model_dim", cfg.model_dim);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.total_steps = j.value("total_steps", cfg.total_steps);
  cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
  cfg.early_stop_ratio = j.value("early_stop_ratio", cfg.early_stop_ratio);
  cfg.validate();
  return cfg;
}

double lr_at(const TrainConfig& cfg, int step) {
  if (step < 1) throw ConfigError("learning rate is defined for steps >= 1");
  if (cfg.schedule == LrSchedule::constant) return cfg.learning_rate;
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup_steps);
  return std::pow(static_cast<double>(cfg.model_dim), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

void AdamOptimizer::register_layers(const std::vector<Layer*>& layers) {
  for (Layer* l : layers) {
    if (l->params().empty()) continue;
    layers_.push_back(l);
    m_.emplace_back(l->params().size(), 0.0);
    v_.emplace_back(l->params().size(), 0.0);
  }
}

void AdamOptimizer::step(const TrainConfig& cfg, int step_number) {
  const double lr = lr_at(cfg, step_number);
  const double bc1 = 1.0 - std::pow(cfg.beta1, step_number);
  const double bc2 = 1.0 - std::pow(cfg.beta2, step_number);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    auto& params = layers_[li]->params();
    auto& grads = layers_[li]->grads();
    auto& m = m_[li];
    auto& v = v_[li];
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in layer " +
                           layers_[li]->kind() + " at step " +
                           std::to_string(step_number));
      }
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
  ++steps_taken_;
}

json AdamOptimizer::to_json(bool full_precision) const {
  auto dump = [&](const std::vector<std::vector<double>>& buffers) {
    json out = json::array();
    for (const auto& buf : buffers) {
      json arr = json::array();
      for (double x : buf) {
        arr.push_back(full_precision
                          ? x
                          : static_cast<double>(static_cast<float>(x)));
      }
      out.push_back(std::move(arr));
    }
    return out;
  };
  json j;
  j["m"] = dump(m_);
  j["v"] = dump(v_);
  j["steps_taken"] = steps_taken_;
  return j;
}

void AdamOptimizer::load_state(const json& j) {
  const auto& jm = j.at("m");
  const auto& jv = j.at("v");
  if (jm.size() != m_.size() || jv.size() != v_.size()) {
    throw DataError("optimizer state layer count mismatch");
  }
  for (std::size_t li = 0; li < m_.size(); ++li) {
    if (jm[li].size() != m_[li].size()) {
      throw DataError("optimizer state buffer size mismatch");
    }
    for (std::size_t i = 0; i < m_[li].size(); ++i) {
      m_[li][i] = jm[li][i].get<double>();
      v_[li][i] = jv[li][i].get<double>();
    }
  }
  steps_taken_ = j.value("steps_taken", 0);
}

}  // namespace prosody::nn
