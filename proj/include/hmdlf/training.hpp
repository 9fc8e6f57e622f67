#pragma once

#include <string>
#include <vector>

#include "hmdlf/data.hpp"
#include "hmdlf/model.hpp"
#include "hmdlf/scaler.hpp"

namespace hmdlf {

/// Bias-corrected Adam. Moment tensors are allocated on the first step and
/// must keep matching the parameter list thereafter.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ParamRef>& params);

  std::int64_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Vec> m_, v_;
};

struct TrainConfig {
  Eigen::Index batch_size = 512;
  int max_epochs = 300;
  int patience = 10;
  Eigen::Index window = 20;  // lookup size; consumed by the windowing caller
  double learning_rate = 1e-3;
  double lambda = 1e-4;      // L2 penalty weight
  std::uint64_t seed = 42;
  bool early_stopping = true;
  bool grad_clip = false;    // when set, clips the global gradient norm at 5.0

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;          // 1-based
  double train_mse = 0.0; // mean of batch data terms, weighted by batch size
  double val_mse = 0.0;   // evaluation-mode MSE on the validation split
  double seconds = 0.0;   // wall clock; excluded from reproducibility checks
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  double final_train_mse = 0.0;  // evaluation mode, after restoration
  double final_val_mse = 0.0;
  bool stopped_early = false;
  double total_seconds = 0.0;
  Eigen::Index train_samples = 0;
  Eigen::Index val_samples = 0;
};

/// Evaluation-mode MSE of the model over the given samples.
double evaluate_mse(HmdlfModel& model, const WindowedSamples& samples, Eigen::Index batch_size);

/// Prediction over all samples in evaluation mode (normalized units).
Vec predict_all(HmdlfModel& model, const WindowedSamples& samples, Eigen::Index batch_size);

/// The optimization loop. `samples` must already be normalized; the split
/// into training and validation windows is chronological, first 80% /
/// last 20%. Per epoch: seeded shuffle, mini-batches (last partial batch
/// kept), Adam updates on the penalized objective; then an evaluation-mode
/// validation pass. Stops once validation MSE has not improved for
/// `patience` consecutive epochs and restores the best-epoch weights.
/// With early stopping disabled the loop runs to max_epochs and the final
/// weights are kept.
TrainReport train(HmdlfModel& model, const WindowedSamples& samples, const TrainConfig& cfg);

}  // namespace hmdlf
