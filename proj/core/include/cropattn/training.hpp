#ifndef CROPATTN_TRAINING_HPP
#define CROPATTN_TRAINING_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cropattn/checkpoint.hpp"
#include "cropattn/kvconfig.hpp"
#include "cropattn/model.hpp"
#include "cropattn/types.hpp"

namespace cropattn {

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  double base_learning_rate = 0.003;
  double weight_decay = 0.000413;
  double focal_gamma = 2.0;
  int max_epochs = 100;
  int early_stop_check_every = 5;
  int warmup_steps = 4000;
  int batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
  /// Read any subset of the fields from key=value text; missing keys keep
  /// their defaults.
  static TrainConfig from_config(const KeyValueConfig& cfg);
};

/// Read model architecture fields (num_layers, num_heads, model_dim, key_dim,
/// value_dim, feed_forward_dim) from key=value text.
ModelConfig model_config_from(const KeyValueConfig& cfg);

/// -(1 - p_t)^gamma * log(p_t) for a [1, C] logit row; gamma = 0 is plain
/// cross-entropy.
double focal_loss(const Matrix& logits, int true_class, double gamma);

/// Warmup schedule: base * d^(-1/2) * min(step^(-1/2), step * warmup^(-3/2)).
double learning_rate(long step, const TrainConfig& config, int model_dim);

/// First and second moment accumulators, keyed by parameter name.
struct AdamState {
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;
};

/// One optimizer step: decoupled weight decay (params *= 1 - rate * decay)
/// followed by bias-corrected Adam at the given step number (1-based).
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state,
               long step, double rate, const TrainConfig& config);

struct EpochLog {
  int epoch = 0; // 1-based
  double train_loss = 0.0;
  double learning_rate = 0.0; // rate used by the epoch's last step
  bool validated = false;
  double validation_loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint; // parameters at the best validation check
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  int epochs_run = 0;
  long total_steps = 0;
  bool early_stopped = false;
};

/// Full training loop: shuffled minibatches, focal loss, Adam with the warmup
/// schedule, validation check every early_stop_check_every epochs, stop at
/// the first check that fails to improve the best validation loss.
/// Deterministic for a fixed seed.
TrainResult train(const Dataset& dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config);

} // namespace cropattn

#endif // CROPATTN_TRAINING_HPP
