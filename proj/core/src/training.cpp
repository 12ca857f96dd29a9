#include "cropattn/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cropattn/autodiff.hpp"
#include "cropattn/errors.hpp"
#include "cropattn/preprocess.hpp"
#include "cropattn/rng.hpp"

namespace cropattn {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidConfig(std::string(what) + " must be positive and finite");
    }
  };
  positive(base_learning_rate, "base_learning_rate");
  positive(epsilon, "epsilon");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw InvalidConfig("Adam betas must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw InvalidConfig("weight_decay must be nonnegative");
  if (focal_gamma < 0.0) throw InvalidConfig("focal_gamma must be nonnegative");
  if (max_epochs < 1) throw InvalidConfig("max_epochs must be >= 1");
  if (early_stop_check_every < 1) {
    throw InvalidConfig("early_stop_check_every must be >= 1");
  }
  if (max_epochs < early_stop_check_every) {
    throw InvalidConfig("max_epochs must be >= early_stop_check_every");
  }
  if (warmup_steps < 1) throw InvalidConfig("warmup_steps must be >= 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig out;
  out.beta1 = cfg.get_double_or("beta1", out.beta1);
  out.beta2 = cfg.get_double_or("beta2", out.beta2);
  out.epsilon = cfg.get_double_or("epsilon", out.epsilon);
  out.base_learning_rate = cfg.get_double_or("base_learning_rate", out.base_learning_rate);
  out.weight_decay = cfg.get_double_or("weight_decay", out.weight_decay);
  out.focal_gamma = cfg.get_double_or("focal_gamma", out.focal_gamma);
  out.max_epochs = cfg.get_int_or("max_epochs", out.max_epochs);
  out.early_stop_check_every = cfg.get_int_or("early_stop_check_every", out.early_stop_check_every);
  out.warmup_steps = cfg.get_int_or("warmup_steps", out.warmup_steps);
  out.batch_size = cfg.get_int_or("batch_size", out.batch_size);
  out.seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", static_cast<long long>(out.seed)));
  out.validate();
  return out;
}

ModelConfig model_config_from(const KeyValueConfig& cfg) {
  ModelConfig out;
  out.num_layers = cfg.get_int_or("num_layers", out.num_layers);
  out.num_heads = cfg.get_int_or("num_heads", out.num_heads);
  out.model_dim = cfg.get_int_or("model_dim", out.model_dim);
  out.key_dim = cfg.get_int_or("key_dim", out.key_dim);
  out.value_dim = cfg.get_int_or("value_dim", out.value_dim);
  out.feed_forward_dim = cfg.get_int_or("feed_forward_dim", out.feed_forward_dim);
  return out;
}

double focal_loss(const Matrix& logits, int true_class, double gamma) {
  if (!logits.allFinite()) throw NonFiniteLogits("focal_loss: non-finite logits");
  Tape tape;
  return tape.value(tape.focal_loss(tape.leaf(logits), true_class, gamma))(0, 0);
}

double learning_rate(long step, const TrainConfig& config, int model_dim) {
  if (step < 1) throw InvalidConfig("learning_rate: step must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(config.warmup_steps);
  return config.base_learning_rate / std::sqrt(static_cast<double>(model_dim)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state,
               long step, double rate, const TrainConfig& config) {
  if (step < 1) throw InvalidConfig("adam_step: step must be >= 1");
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));

  for_each_parameter_pair(params, grads, [&](const std::string& name, Matrix& p,
                                             const Matrix& g) {
    if (p.rows() != g.rows() || p.cols() != g.cols()) {
      throw ShapeMismatch("adam_step: gradient shape mismatch for '" + name + "'");
    }
    Matrix& m = state.m.try_emplace(name, Matrix::Zero(p.rows(), p.cols())).first->second;
    Matrix& v = state.v.try_emplace(name, Matrix::Zero(p.rows(), p.cols())).first->second;
    if (m.rows() != p.rows() || m.cols() != p.cols()) {
      throw ShapeMismatch("adam_step: stale optimizer state for '" + name + "'");
    }

    if (config.weight_decay > 0.0) p *= 1.0 - rate * config.weight_decay;
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * g.array().square();
    p.array() -= rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.epsilon);
  });
}

TrainResult train(const Dataset& dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  train_config.validate();
  if (dataset.splits.train.empty()) throw EmptySplit("training split is empty");
  if (dataset.splits.validation.empty()) throw EmptySplit("validation split is empty");
  if (dataset.class_vocabulary.size() < 2) {
    throw TooFewClasses("need at least 2 classes to train a classifier");
  }
  std::set<std::string> train_crops;
  for (std::size_t idx : dataset.splits.train) {
    train_crops.insert(dataset.parcels.at(idx).crop);
  }
  if (train_crops.size() < 2) {
    throw TooFewClasses("training split covers fewer than 2 classes");
  }

  ModelConfig cfg = model_config;
  if (cfg.num_classes == 0) cfg.num_classes = static_cast<int>(dataset.class_vocabulary.size());
  if (cfg.t_max == 0) cfg.t_max = dataset.max_series_length();
  cfg = cfg.resolved();

  Rng rng(train_config.seed);
  ParameterSet params = ParameterSet::init(cfg, rng);
  AdamState adam;

  // Validation loss = exact mean focal loss over the validation parcels.
  auto validation_loss = [&](const ParameterSet& p) {
    double total = 0.0;
    for (const auto& chunk : make_minibatches(dataset.splits.validation,
                                              train_config.batch_size)) {
      int t = 1;
      for (std::size_t idx : chunk) t = std::max(t, dataset.parcels.at(idx).length());
      const PaddedBatch batch = make_batch(dataset, chunk, t);
      total += batch_loss(batch, p, train_config.focal_gamma) * batch.size();
    }
    return total / static_cast<double>(dataset.splits.validation.size());
  };

  TrainResult result;
  result.best_validation_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order = dataset.splits.train;
  long step = 0;
  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    double last_rate = 0.0;
    for (const auto& chunk : make_minibatches(order, train_config.batch_size)) {
      int t = 1;
      for (std::size_t idx : chunk) t = std::max(t, dataset.parcels.at(idx).length());
      const PaddedBatch batch = make_batch(dataset, chunk, t);

      LossAndGradients lg;
      try {
        lg = loss_gradients(batch, params, train_config.focal_gamma);
      } catch (const NonFiniteLoss&) {
        throw DivergedLoss("training loss diverged at epoch " + std::to_string(epoch));
      } catch (const NonFiniteLogits&) {
        throw DivergedLoss("model outputs diverged at epoch " + std::to_string(epoch));
      }
      epoch_loss += lg.loss * batch.size();

      ++step;
      last_rate = learning_rate(step, train_config, cfg.model_dim);
      adam_step(params, lg.gradients, adam, step, last_rate, train_config);
    }
    epoch_loss /= static_cast<double>(order.size());

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss;
    log.learning_rate = last_rate;

    bool stop = false;
    if (epoch % train_config.early_stop_check_every == 0) {
      log.validated = true;
      log.validation_loss = validation_loss(params);
      if (!std::isfinite(log.validation_loss)) {
        throw DivergedLoss("validation loss diverged at epoch " + std::to_string(epoch));
      }
      if (log.validation_loss < result.best_validation_loss) {
        result.best_validation_loss = log.validation_loss;
        result.best_epoch = epoch;
        result.checkpoint.params = params;
        result.checkpoint.class_vocabulary = dataset.class_vocabulary;
      } else {
        stop = true; // first non-improving check ends the run
      }
    }
    result.log.push_back(log);
    result.epochs_run = epoch;
    if (stop) {
      result.early_stopped = true;
      break;
    }
  }
  result.total_steps = step;

  if (result.best_epoch == 0) {
    // max_epochs >= check_every guarantees at least one check, so this only
    // triggers if every check diverged -- which already threw above.
    throw DivergedLoss("no validation check completed");
  }
  return result;
}

} // namespace cropattn
