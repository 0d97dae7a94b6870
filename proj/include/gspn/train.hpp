#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gspn/circuit.hpp"

namespace gspn {

// One term of the training objective: log of the mean density of its
// assignments. A single assignment is the plain log-likelihood; several give
// an averaged (Janossy / sub-graph) objective trained as one unit.
struct TrainingExample {
  std::vector<Assignment> terms;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 256;
  double step_size = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.82;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;
  // Worker threads for per-batch gradients; results depend only on this
  // value, never on scheduling.
  int threads = 1;
};

// Called once per epoch to (re)generate the data.
using TrainingSource = std::function<std::vector<TrainingExample>(int epoch)>;

struct FitReport {
  std::vector<double> epoch_nll;  // mean negative objective per epoch
};

// ADAM ascent on the mean objective; updates all unconstrained parameters
// jointly. Throws TrainingError on an empty dataset or a non-finite loss.
FitReport fit(Circuit& c, const TrainingSource& source, const TrainConfig& cfg,
              const std::function<void(int epoch, double nll)>& on_epoch = {});

// Convenience overload for a fixed dataset.
FitReport fit(Circuit& c, const std::vector<Assignment>& data, const TrainConfig& cfg);

// Mean objective of the examples under the current parameters.
double mean_log_likelihood(const Circuit& c, const std::vector<TrainingExample>& data);

}  // namespace gspn
