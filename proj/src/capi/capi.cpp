// SPDX-License-Identifier: Apache-2.0
#include "tformer/tformer.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>

#include "config/config.hpp"
#include "core/checkpoint.hpp"
#include "data/image.hpp"
#include "model/gradsuite.hpp"

struct tfk_config {
    tfk::RunConfig run;
};

struct tfk_dataset {
    tfk::Dataset data;
    std::optional<tfk::BayesReport> bayes;
};

struct tfk_model {
    tfk::RunConfig run;
    std::variant<std::unique_ptr<tfk::TFormer<float>>, std::unique_ptr<tfk::TFormer<double>>> net;
};

namespace {

using namespace tfk;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

tfk_status status_of(Error::Kind kind) {
    switch (kind) {
        case Error::Kind::Config: return TFK_E_CONFIG;
        case Error::Kind::Data: return TFK_E_DATA;
        case Error::Kind::Numeric: return TFK_E_NUMERIC;
        case Error::Kind::Io: return TFK_E_IO;
        case Error::Kind::Contract: return TFK_E_CONTRACT;
        case Error::Kind::Dimension: return TFK_E_DIMENSION;
        case Error::Kind::Window: return TFK_E_WINDOW;
        case Error::Kind::Fusion: return TFK_E_FUSION;
        case Error::Kind::Label: return TFK_E_LABEL;
        case Error::Kind::Schema: return TFK_E_SCHEMA;
        case Error::Kind::Internal: return TFK_E_INTERNAL;
    }
    return TFK_E_INTERNAL;
}

template <typename F>
tfk_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return TFK_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return TFK_E_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return TFK_E_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return TFK_E_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("null argument: ") + what);
}

template <typename F>
auto visit_net(const tfk_model* model, F&& f) {
    return std::visit([&](const auto& ptr) { return f(*ptr); }, model->net);
}

template <typename F>
auto visit_net(tfk_model* model, F&& f) {
    return std::visit([&](auto& ptr) { return f(*ptr); }, model->net);
}

std::unique_ptr<tfk_model> build_model(const RunConfig& run) {
    auto m = std::make_unique<tfk_model>();
    m->run = run;
    if (run.precision == 64) {
        m->net = std::make_unique<TFormer<double>>(run.model);
    } else {
        m->net = std::make_unique<TFormer<float>>(run.model);
    }
    return m;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void write_predictions(const fs::path& path, const Evaluation& ev, const LabelSchema& schema) {
    auto out = open_out(path);
    out << "case_id";
    for (const auto& name : schema.names) out << ',' << name << ',' << name << "_true";
    out << '\n';
    for (std::size_t i = 0; i < ev.ids.size(); ++i) {
        out << ev.ids[i];
        for (std::size_t l = 0; l < kNumLabels; ++l) {
            out << ',' << schema.classes[l][ev.preds[i][l]] << ',' << schema.classes[l][ev.truths[i][l]];
        }
        out << '\n';
    }
}

std::string record_stem(const AttentionRecord& rec) {
    if (rec.branch == Branch::Meta) return "mtp_meta";
    return "stage" + std::to_string(rec.stage) + "_block" + std::to_string(rec.block) + "_" +
           branch_name(rec.branch);
}

void write_record(const fs::path& dir, const AttentionRecord& rec) {
    const std::string stem = record_stem(rec);
    auto csv = open_out(dir / (stem + ".csv"));
    csv << "head,query,key,weight\n";
    for (std::size_t h = 0; h < rec.heads; ++h)
        for (std::size_t q = 0; q < rec.queries; ++q)
            for (std::size_t k = 0; k < rec.keys; ++k) {
                csv << h << ',' << q << ',' << k << ',' << fmt("%.9g", rec.at(h, q, k)) << '\n';
            }
    if (!csv) throw IoError("write failed for '" + stem + ".csv'");
    for (std::size_t h = 0; h < rec.heads; ++h) {
        std::vector<std::uint8_t> gray(rec.queries * rec.keys);
        for (std::size_t q = 0; q < rec.queries; ++q)
            for (std::size_t k = 0; k < rec.keys; ++k) {
                const double w = std::clamp(rec.at(h, q, k), 0.0, 1.0);
                gray[q * rec.keys + k] = static_cast<std::uint8_t>(std::lround(255.0 * w));
            }
        write_pgm((dir / (stem + "_head" + std::to_string(h) + ".pgm")).string(), rec.queries, rec.keys, gray);
    }
}

template <typename Real>
int record_forward(const TFormer<Real>& net, const Case& c, std::vector<AttentionRecord>& recs) {
    Batch<Real> batch = make_batch<Real>({&c});
    const auto& m = net.config().modalities;
    ForwardContext ctx;
    ctx.records = &recs;
    NoGradGuard guard;
    net.forward(m.der ? batch.derm : Tensor<Real>{}, m.cli ? batch.cli : Tensor<Real>{},
                m.meta ? batch.meta : Tensor<Real>{}, ctx);
    return 0;
}

}  // namespace

extern "C" {

const char* tfk_last_error(void) { return g_last_error.c_str(); }

const char* tfk_status_name(tfk_status status) {
    switch (status) {
        case TFK_OK: return "ok";
        case TFK_E_CONFIG: return "config error";
        case TFK_E_DATA: return "data error";
        case TFK_E_NUMERIC: return "numeric error";
        case TFK_E_IO: return "io error";
        case TFK_E_CONTRACT: return "contract error";
        case TFK_E_DIMENSION: return "dimension error";
        case TFK_E_WINDOW: return "window error";
        case TFK_E_FUSION: return "fusion error";
        case TFK_E_LABEL: return "label error";
        case TFK_E_SCHEMA: return "schema error";
        case TFK_E_ARGUMENT: return "argument error";
        case TFK_E_INTERNAL: return "internal error";
    }
    return "unknown status";
}

tfk_status tfk_config_default(tfk_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new tfk_config{};
    });
}

tfk_status tfk_config_load(const char* path, tfk_config** out) {
    return guarded([&] {
        require(path && out, "path/out");
        *out = new tfk_config{load_config(path)};
    });
}

tfk_status tfk_config_parse(const char* text, tfk_config** out) {
    return guarded([&] {
        require(text && out, "text/out");
        *out = new tfk_config{parse_config(text)};
    });
}

tfk_status tfk_config_set(tfk_config* config, const char* key, const char* value) {
    return guarded([&] {
        require(config && key && value, "config/key/value");
        apply_setting(config->run, key, value);
    });
}

tfk_status tfk_config_resolve(tfk_config* config) {
    return guarded([&] {
        require(config, "config");
        config->run = resolve_config(config->run, {});
    });
}

tfk_status tfk_config_text(const tfk_config* config, char* buffer, size_t capacity, size_t* needed) {
    return guarded([&] {
        require(config, "config");
        const std::string text = config->run.canonical_text();
        if (needed) *needed = text.size() + 1;
        if (buffer && capacity > 0) {
            const std::size_t n = std::min(capacity - 1, text.size());
            std::memcpy(buffer, text.data(), n);
            buffer[n] = '\0';
        }
    });
}

tfk_status tfk_config_write(const tfk_config* config, const char* path) {
    return guarded([&] {
        require(config && path, "config/path");
        auto out = open_out(path);
        out << config->run.canonical_text();
        if (!out) throw IoError(std::string("write failed for '") + path + "'");
    });
}

void tfk_config_free(tfk_config* config) { delete config; }

tfk_status tfk_dataset_open(const tfk_config* config, tfk_dataset** out) {
    return guarded([&] {
        require(config && out, "config/out");
        const RunConfig& run = config->run;
        const auto& bb = run.model.backbone;
        auto ds = std::make_unique<tfk_dataset>();
        if (run.data.source == DataSource::Synthetic) {
            if (bb.image_height != bb.image_width) {
                throw ConfigError("synthetic data needs a square backbone.image_size");
            }
            SyntheticSpec spec = run.data.synthetic;
            spec.image_size = bb.image_height;
            SyntheticData syn = generate_synthetic(spec);
            ds->data = std::move(syn.data);
            ds->bayes = std::move(syn.report);
        } else {
            if (run.data.manifest.empty()) throw ConfigError("data.source = manifest needs data.manifest");
            ds->data = load_manifest(run.data.manifest, bb.image_height, bb.image_width);
        }
        *out = ds.release();
    });
}

tfk_status tfk_dataset_counts(const tfk_dataset* data, size_t* train, size_t* val, size_t* test) {
    return guarded([&] {
        require(data, "data");
        const SplitCounts c = data->data.counts();
        if (train) *train = c.train;
        if (val) *val = c.val;
        if (test) *test = c.test;
    });
}

tfk_status tfk_dataset_bayes(const tfk_dataset* data, const char* subset, double* out) {
    return guarded([&] {
        require(data && subset && out, "data/subset/out");
        if (!data->bayes) throw DataError("bayes accuracies exist only for synthetic data");
        *out = data->bayes->at(subset);
    });
}

tfk_status tfk_dataset_write(const tfk_dataset* data, const char* dir) {
    return guarded([&] {
        require(data && dir, "data/dir");
        write_manifest(dir, data->data);
        if (data->bayes) {
            auto out = open_out(fs::path(dir) / "bayes.csv");
            out << "subset,diag_accuracy\n";
            for (const auto& [name, acc] : data->bayes->entries) out << name << ',' << fmt("%.6f", acc) << '\n';
        }
    });
}

void tfk_dataset_free(tfk_dataset* data) { delete data; }

tfk_status tfk_model_create(const tfk_config* config, tfk_model** out) {
    return guarded([&] {
        require(config && out, "config/out");
        config->run.validate();
        *out = build_model(config->run).release();
    });
}

tfk_status tfk_model_load(const char* path, tfk_model** out) {
    return guarded([&] {
        require(path && out, "path/out");
        const CheckpointHeader header = read_checkpoint_header(path);
        RunConfig run = parse_config(header.config_text);
        run.validate();
        if (header.value_bytes * 8 != run.precision) {
            throw IoError(std::string("checkpoint '") + path + "' stores " + std::to_string(header.value_bytes * 8) +
                          "-bit values but its config says " + std::to_string(run.precision));
        }
        auto model = build_model(run);
        visit_net(model.get(), [&](auto& net) { load_checkpoint(path, net.params()); });
        *out = model.release();
    });
}

tfk_status tfk_model_save(const tfk_model* model, const char* path) {
    return guarded([&] {
        require(model && path, "model/path");
        const std::string text = model->run.canonical_text();
        visit_net(model, [&](const auto& net) { save_checkpoint(path, net.params(), text); });
    });
}

tfk_status tfk_model_config(const tfk_model* model, tfk_config** out) {
    return guarded([&] {
        require(model && out, "model/out");
        *out = new tfk_config{model->run};
    });
}

void tfk_model_free(tfk_model* model) { delete model; }

tfk_status tfk_model_train(tfk_model* model, const tfk_dataset* data, const char* log_csv, tfk_epoch_fn on_epoch,
                           void* user, tfk_train_summary* summary) {
    return guarded([&] {
        require(model && data, "model/data");
        auto callback = [&](const LogRow& row) {
            if (!on_epoch) return;
            const tfk_epoch e{row.epoch, row.lr, row.train_loss, row.val_avg};
            on_epoch(&e, user);
        };
        TrainResult result = visit_net(model, [&](auto& net) { return train(net, data->data, model->run.train, callback); });
        if (log_csv) write_log(log_csv, result.log);
        if (summary) *summary = tfk_train_summary{result.log.size(), result.best_epoch, result.best_val_avg};
    });
}

tfk_status tfk_model_evaluate(const tfk_model* model, const tfk_dataset* data, const char* split,
                              const char* report_dir, tfk_eval_summary* summary) {
    return guarded([&] {
        require(model && data && split, "model/data/split");
        const Split s = parse_split(split);
        Evaluation ev = visit_net(model, [&](const auto& net) { return evaluate(net, data->data, s); });
        if (report_dir) {
            emit_report(ev.report, report_dir);
            write_predictions(fs::path(report_dir) / "predictions.csv", ev, LabelSchema::derm7pt());
        }
        if (summary) {
            const MetricReport& r = ev.report;
            *summary = tfk_eval_summary{ev.ids.size(), ev.loss, r.avg, r.labels.empty() ? 0.0 : r.labels[0].accuracy,
                                        r.ave_sen, r.ave_spe, r.ave_pre, r.ave_f1, r.any_degenerate ? 1 : 0};
        }
    });
}

tfk_status tfk_model_param_count(const tfk_model* model, size_t* total) {
    return guarded([&] {
        require(model && total, "model/total");
        *total = visit_net(model, [](const auto& net) { return net.params().count(); });
    });
}

tfk_status tfk_model_param_groups(const tfk_model* model, tfk_group_fn fn, void* user) {
    return guarded([&] {
        require(model && fn, "model/fn");
        const ParameterCounts counts = visit_net(model, [](const auto& net) { return count_parameters(net.params()); });
        for (const auto& [group, n] : counts.groups) fn(group.c_str(), n, user);
    });
}

tfk_status tfk_model_hmt_blocks(const tfk_model* model, size_t* count) {
    return guarded([&] {
        require(model && count, "model/count");
        *count = visit_net(model, [](const auto& net) { return net.hmt_block_count(); });
    });
}

tfk_status tfk_model_export_attention(const tfk_model* model, const tfk_dataset* data, const char* case_id,
                                      const char* out_dir, size_t* records) {
    return guarded([&] {
        require(model && data && case_id && out_dir, "model/data/case_id/out_dir");
        const Case& c = data->data.find(case_id);
        std::vector<AttentionRecord> recs;
        visit_net(model, [&](const auto& net) { return record_forward(net, c, recs); });
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError(std::string("cannot create '") + out_dir + "': " + ec.message());
        for (const auto& rec : recs) write_record(out_dir, rec);
        if (records) *records = recs.size();
    });
}

uint64_t tfk_wmsa_flops(uint64_t h_tokens, uint64_t w_tokens, uint64_t channels, uint64_t window) {
    return wmsa_flops(h_tokens, w_tokens, channels, window);
}

tfk_status tfk_flops_csv(const tfk_config* config, const char* path) {
    return guarded([&] {
        require(config && path, "config/path");
        const BackboneConfig& bb = config->run.model.backbone;
        bb.validate();
        auto out = open_out(path);
        out << "stage,h_tokens,w_tokens,channels,window,blocks,flops_per_block,flops\n";
        std::uint64_t total = 0;
        for (std::size_t s = 0; s < 4; ++s) {
            const std::uint64_t per =
                wmsa_flops(bb.stage_height(s), bb.stage_width(s), bb.stage_channels(s), bb.stage_window(s));
            const std::uint64_t stage = per * bb.stage_depths[s];
            total += stage;
            out << s + 1 << ',' << bb.stage_height(s) << ',' << bb.stage_width(s) << ',' << bb.stage_channels(s)
                << ',' << bb.stage_window(s) << ',' << bb.stage_depths[s] << ',' << per << ',' << stage << '\n';
        }
        out << "total,,,,,,," << total << '\n';
        if (!out) throw IoError(std::string("write failed for '") + path + "'");
    });
}

tfk_status tfk_gradcheck(const tfk_config* config, uint64_t seed, double tolerance, tfk_grad_row* rows,
                         size_t capacity, size_t* count) {
    return guarded([&] {
        require(config, "config");
        const auto result = run_gradient_suite(config->run.model, seed, tolerance);
        if (count) *count = result.size();
        for (std::size_t i = 0; rows && i < std::min(capacity, result.size()); ++i) {
            tfk_grad_row& r = rows[i];
            std::memset(r.module, 0, sizeof r.module);
            std::strncpy(r.module, result[i].module.c_str(), sizeof r.module - 1);
            r.max_rel_error = result[i].max_rel_error;
            r.coordinates = result[i].coordinates;
            r.pass = result[i].pass ? 1 : 0;
        }
    });
}

void tfk_debug_corrupt_backward(const char* op) { debug::set_corrupt_backward(op ? op : ""); }

}  // extern "C"
