// SPDX-License-Identifier: Apache-2.0
#include "model/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace tfk {

void TrainConfig::validate() const {
    if (!(lr >= 0)) throw ConfigError("train.lr must be non-negative");
    if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be non-negative");
    if (epochs == 0) throw ConfigError("train.epochs must be positive");
    if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("train.beta1/beta2 outside [0, 1)");
    if (!(adam_eps > 0)) throw ConfigError("train.adam_eps must be positive");
    if (max_shift < 0) throw ConfigError("train.max_shift must be non-negative");
}

double scheduled_lr(const TrainConfig& config, std::size_t epoch) {
    if (config.schedule == Schedule::Constant) return config.lr;
    return 0.5 * config.lr * (1 + std::cos(std::numbers::pi * double(epoch) / double(config.epochs)));
}

template <typename Real>
Adam<Real>::Adam(ParamStore<Real>& store, const TrainConfig& config) : store_(store), config_(config) {
    for (const auto& p : store_.params()) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

template <typename Real>
void Adam<Real>::step(double lr) {
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2, wd = config_.weight_decay;
    const double c1 = 1 - std::pow(b1, double(t_)), c2 = 1 - std::pow(b2, double(t_));
    auto& params = store_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<Real>& t = params[i].tensor;
        if (!t.has_grad()) continue;
        auto w = t.mutable_data();
        auto g = t.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            double grad = double(g[j]);
            if (!config_.decoupled_decay) grad += wd * double(w[j]);
            m[j] = b1 * m[j] + (1 - b1) * grad;
            v[j] = b2 * v[j] + (1 - b2) * grad * grad;
            double update = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.adam_eps);
            if (config_.decoupled_decay) update += lr * wd * double(w[j]);
            w[j] = static_cast<Real>(double(w[j]) - update);
        }
    }
}

namespace {

template <typename Real>
std::vector<const Case*> gather_cases(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t begin,
                                      std::size_t end) {
    std::vector<const Case*> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(&data.cases[idx[i]]);
    return out;
}

}  // namespace

template <typename Real>
Evaluation evaluate(const TFormer<Real>& model, const Dataset& data, Split split, std::size_t batch_size) {
    const auto idx = data.indices(split);
    if (idx.empty()) throw DataError(std::string("the ") + split_name(split) + " split is empty");
    NoGradGuard guard;
    Evaluation ev;
    double loss_sum = 0;
    for (std::size_t b = 0; b < idx.size(); b += batch_size) {
        const std::size_t e = std::min(idx.size(), b + batch_size);
        const auto cases = gather_cases<Real>(data, idx, b, e);
        Batch<Real> batch = make_batch<Real>(cases);
        auto out = model.forward(batch.derm, batch.cli, batch.meta);
        loss_sum += double(multi_label_loss(out.logits, batch.labels, model.schema()).item()) * double(e - b);
        Prediction p = predict(out.logits);
        for (std::size_t i = 0; i < cases.size(); ++i) {
            ev.ids.push_back(cases[i]->id);
            ev.truths.push_back(cases[i]->labels);
            ev.preds.push_back(p.classes[i]);
            ev.probs.push_back(std::move(p.probs[i]));
        }
    }
    ev.loss = loss_sum / double(idx.size());
    ev.report = compute_metrics(confusion(ev.preds, ev.truths, model.schema()), model.schema());
    return ev;
}

template <typename Real>
TrainResult train(TFormer<Real>& model, const Dataset& data, const TrainConfig& config,
                  const std::function<void(const LogRow&)>& on_epoch) {
    config.validate();
    const auto train_idx = data.indices(Split::Train);
    if (train_idx.empty()) throw DataError("the train split is empty");
    if (data.indices(Split::Val).empty()) throw DataError("the val split is empty");

    const Rng root(config.seed);
    Adam<Real> adam(model.params(), config);
    TrainResult result;
    std::vector<std::vector<Real>> best;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = scheduled_lr(config, epoch);
        Rng epoch_rng = root.split(epoch);
        std::vector<std::size_t> order = train_idx;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[epoch_rng.below(i)]);
        double loss_sum = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const std::size_t e = std::min(order.size(), b + config.batch_size);
            std::vector<Case> augmented;
            std::vector<const Case*> cases;
            if (config.augment) {
                for (std::size_t i = b; i < e; ++i) {
                    Rng case_rng = epoch_rng.split(1 + order[i]);
                    augmented.push_back(augment(data.cases[order[i]], case_rng, config.max_shift));
                }
                for (const auto& c : augmented) cases.push_back(&c);
            } else {
                cases = gather_cases<Real>(data, order, b, e);
            }
            Batch<Real> batch = make_batch<Real>(cases);
            model.params().zero_grad();
            auto out = model.forward(batch.derm, batch.cli, batch.meta);
            Tensor<Real> loss = multi_label_loss(out.logits, batch.labels, model.schema());
            const double value = double(loss.item());
            if (!std::isfinite(value)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b / config.batch_size));
            }
            loss.backward();
            adam.step(lr);
            loss_sum += value * double(e - b);
        }
        LogRow row{epoch, lr, loss_sum / double(order.size()), evaluate(model, data, Split::Val).report.avg};
        result.log.push_back(row);
        if (row.val_avg > result.best_val_avg) {
            result.best_val_avg = row.val_avg;
            result.best_epoch = epoch;
            best.clear();
            for (const auto& p : model.params().params()) best.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
        }
        if (on_epoch) on_epoch(row);
    }
    auto& params = model.params().params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].tensor.mutable_data();
        std::copy(best[i].begin(), best[i].end(), w.begin());
    }
    model.params().zero_grad();
    return result;
}

void write_log(const std::string& path, const std::vector<LogRow>& log) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << "epoch,lr,train_loss,val_avg\n";
    char buf[128];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.train_loss, r.val_avg);
        f << buf;
    }
    if (!f) throw IoError("write failed for '" + path + "'");
}

template class Adam<float>;
template class Adam<double>;
template TrainResult train(TFormer<float>&, const Dataset&, const TrainConfig&, const std::function<void(const LogRow&)>&);
template TrainResult train(TFormer<double>&, const Dataset&, const TrainConfig&,
                           const std::function<void(const LogRow&)>&);
template Evaluation evaluate(const TFormer<float>&, const Dataset&, Split, std::size_t);
template Evaluation evaluate(const TFormer<double>&, const Dataset&, Split, std::size_t);

}  // namespace tfk
