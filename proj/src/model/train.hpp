// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "metrics/metrics.hpp"
#include "model/model.hpp"

namespace tfk {

enum class Schedule { Cosine, Constant };

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 1e-4;
    bool decoupled_decay = true;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    Schedule schedule = Schedule::Cosine;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool augment = false;
    int max_shift = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Learning rate in effect during `epoch` (zero-based).
double scheduled_lr(const TrainConfig& config, std::size_t epoch);

/// Adam; weight decay either added to the gradient or applied directly to
/// the weights (decoupled).
template <typename Real>
class Adam {
public:
    Adam(ParamStore<Real>& store, const TrainConfig& config);
    void step(double lr);
    std::size_t steps() const { return t_; }

private:
    ParamStore<Real>& store_;
    TrainConfig config_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

struct LogRow {
    std::size_t epoch = 0;
    double lr = 0;
    double train_loss = 0;
    double val_avg = 0;
};

struct TrainResult {
    std::vector<LogRow> log;
    std::size_t best_epoch = 0;
    double best_val_avg = -1;
};

/// Trains on the train split, selects by validation avg (earliest epoch on
/// ties) and leaves the model holding the selected weights.
template <typename Real>
TrainResult train(TFormer<Real>& model, const Dataset& data, const TrainConfig& config,
                  const std::function<void(const LogRow&)>& on_epoch = {});

struct Evaluation {
    std::vector<std::string> ids;
    std::vector<LabelVector> preds;
    std::vector<LabelVector> truths;
    std::vector<std::vector<std::vector<double>>> probs;
    double loss = 0;
    MetricReport report;
};

template <typename Real>
Evaluation evaluate(const TFormer<Real>& model, const Dataset& data, Split split, std::size_t batch_size = 64);

/// CSV with header epoch,lr,train_loss,val_avg; reals printed with %.17g.
void write_log(const std::string& path, const std::vector<LogRow>& log);

}  // namespace tfk
