#include "gspn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "gspn/error.hpp"
#include "gspn/logspace.hpp"
#include "gspn/rng.hpp"

namespace gspn {

namespace {

struct BatchResult {
  Eigen::VectorXd grad;
  double objective = 0.0;  // sum over examples
  std::size_t bad_example = SIZE_MAX;
};

// Gradient of sum_e log mean_j p(terms_ej) over a slice of examples.
BatchResult slice_gradient(const Circuit& c, const std::vector<TrainingExample>& data,
                           std::span<const std::size_t> idx, double scale) {
  std::vector<Assignment> flat;
  for (std::size_t e : idx) flat.insert(flat.end(), data[e].terms.begin(), data[e].terms.end());
  BatchResult out;
  if (flat.empty()) {
    out.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.parameter_count()));
    return out;
  }
  out.grad = log_density_gradient(c, flat, [&](const Eigen::VectorXd& lv) {
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(lv.size());
    Eigen::Index pos = 0;
    for (std::size_t e : idx) {
      const auto n = static_cast<Eigen::Index>(data[e].terms.size());
      const auto seg = lv.segment(pos, n);
      const double obj = logmeanexp(seg);
      if (!std::isfinite(obj)) {
        out.bad_example = e;
        return Eigen::VectorXd(Eigen::VectorXd::Zero(lv.size()));
      }
      out.objective += obj;
      const double lse = logsumexp(seg);
      coeff.segment(pos, n) = (seg.array() - lse).exp() * scale;
      pos += n;
    }
    return coeff;
  });
  return out;
}

}  // namespace

double mean_log_likelihood(const Circuit& c, const std::vector<TrainingExample>& data) {
  if (data.empty()) throw TrainingError("empty dataset");
  std::vector<Assignment> flat;
  for (const auto& ex : data) flat.insert(flat.end(), ex.terms.begin(), ex.terms.end());
  const Eigen::VectorXd lv = log_density(c, flat);
  double total = 0.0;
  Eigen::Index pos = 0;
  for (const auto& ex : data) {
    const auto n = static_cast<Eigen::Index>(ex.terms.size());
    total += logmeanexp(lv.segment(pos, n));
    pos += n;
  }
  return total / static_cast<double>(data.size());
}

FitReport fit(Circuit& c, const TrainingSource& source, const TrainConfig& cfg,
              const std::function<void(int, double)>& on_epoch) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw TrainingError("epochs and batch size must be positive");
  if (!(cfg.step_size > 0 && cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1)) {
    throw TrainingError("ADAM settings out of range");
  }
  const auto np = static_cast<Eigen::Index>(c.parameter_count());
  Eigen::VectorXd theta = c.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(np);
  long long step = 0;
  const int threads = std::max(1, cfg.threads);

  FitReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<TrainingExample> data = source(epoch);
    if (data.empty()) throw TrainingError("empty dataset");
    for (std::size_t e = 0; e < data.size(); ++e) {
      if (data[e].terms.empty()) throw TrainingError("training example " + std::to_string(e) + " has no terms");
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(cfg.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    double epoch_obj = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double scale = 1.0 / static_cast<double>(batch.size());

      // Fixed slicing and an in-order reduction keep results independent of
      // thread timing.
      const std::size_t parts = std::min<std::size_t>(threads, batch.size());
      std::vector<BatchResult> results(parts);
      auto run = [&](std::size_t part) {
        const std::size_t lo = batch.size() * part / parts;
        const std::size_t hi = batch.size() * (part + 1) / parts;
        results[part] = slice_gradient(c, data, batch.subspan(lo, hi - lo), scale);
      };
      if (parts == 1) {
        run(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t part = 0; part < parts; ++part) pool.emplace_back(run, part);
        for (auto& t : pool) t.join();
      }
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(np);
      for (const auto& r : results) {
        if (r.bad_example != SIZE_MAX) {
          std::ostringstream msg;
          msg << "non-finite log-likelihood at epoch " << epoch << ", batch starting at " << start
              << ", example " << r.bad_example;
          throw TrainingError(msg.str());
        }
        grad += r.grad;
        epoch_obj += r.objective;
      }
      if (!grad.allFinite()) {
        throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch));
      }

      ++step;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      theta.array() += cfg.step_size * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
      c.set_parameters(theta);
    }
    const double nll = -epoch_obj / static_cast<double>(data.size());
    if (!std::isfinite(nll)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
    report.epoch_nll.push_back(nll);
    if (on_epoch) on_epoch(epoch, nll);
  }
  return report;
}

FitReport fit(Circuit& c, const std::vector<Assignment>& data, const TrainConfig& cfg) {
  std::vector<TrainingExample> examples;
  examples.reserve(data.size());
  for (const auto& a : data) examples.push_back({{a}});
  return fit(c, [&](int) { return examples; }, cfg);
}

}  // namespace gspn
