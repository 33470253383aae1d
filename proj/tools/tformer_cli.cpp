// SPDX-License-Identifier: Apache-2.0
// Command-line front end over the C API.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tformer/tformer.h"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 1 config, 2 data (including unreadable or malformed
// inputs), 3 numeric, 4 gradient check failed, 5 anything else.
constexpr int kExitGradFail = 4;
constexpr int kExitOther = 5;

struct Failure {
    int code;
};

int exit_code(tfk_status s) {
    switch (s) {
        case TFK_OK: return 0;
        case TFK_E_CONFIG:
        case TFK_E_ARGUMENT: return 1;
        case TFK_E_DATA:
        case TFK_E_IO:
        case TFK_E_SCHEMA:
        case TFK_E_LABEL: return 2;
        case TFK_E_NUMERIC: return 3;
        default: return kExitOther;
    }
}

void check(tfk_status s) {
    if (s == TFK_OK) return;
    std::fprintf(stderr, "tformer: %s: %s\n", tfk_status_name(s), tfk_last_error());
    throw Failure{exit_code(s)};
}

struct ConfigDeleter {
    void operator()(tfk_config* c) const { tfk_config_free(c); }
};
struct DatasetDeleter {
    void operator()(tfk_dataset* d) const { tfk_dataset_free(d); }
};
struct ModelDeleter {
    void operator()(tfk_model* m) const { tfk_model_free(m); }
};
using ConfigPtr = std::unique_ptr<tfk_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<tfk_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<tfk_model, ModelDeleter>;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
};

void apply_overrides(tfk_config* cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "tformer: override '%s' is not key=value\n", o.c_str());
            throw Failure{1};
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        check(tfk_config_set(cfg, trim(o.substr(0, eq)).c_str(), trim(o.substr(eq + 1)).c_str()));
    }
}

ConfigPtr resolved_config(const Common& c) {
    tfk_config* raw = nullptr;
    check(c.config_path.empty() ? tfk_config_default(&raw) : tfk_config_load(c.config_path.c_str(), &raw));
    ConfigPtr cfg(raw);
    apply_overrides(cfg.get(), c.overrides);
    check(tfk_config_resolve(cfg.get()));
    return cfg;
}

void make_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        std::fprintf(stderr, "tformer: cannot create '%s': %s\n", dir.c_str(), ec.message().c_str());
        throw Failure{2};
    }
}

void echo_config(const tfk_config* cfg, const std::string& dir) {
    make_out_dir(dir);
    check(tfk_config_write(cfg, (fs::path(dir) / "config.txt").c_str()));
}

ModelPtr load_model(const std::string& path) {
    tfk_model* raw = nullptr;
    check(tfk_model_load(path.c_str(), &raw));
    return ModelPtr(raw);
}

// Config of a checkpoint with data.* overrides applied (the model keys are
// fixed by the weights).
ConfigPtr checkpoint_config(const tfk_model* model, const std::vector<std::string>& overrides) {
    tfk_config* raw = nullptr;
    check(tfk_model_config(model, &raw));
    ConfigPtr cfg(raw);
    for (const auto& o : overrides) {
        if (o.rfind("data.", 0) != 0) {
            std::fprintf(stderr, "tformer: only data.* may be overridden for a checkpoint, got '%s'\n", o.c_str());
            throw Failure{1};
        }
    }
    apply_overrides(cfg.get(), overrides);
    return cfg;
}

DatasetPtr open_data(const tfk_config* cfg) {
    tfk_dataset* raw = nullptr;
    check(tfk_dataset_open(cfg, &raw));
    return DatasetPtr(raw);
}

void print_eval(const char* split, const tfk_eval_summary& s) {
    std::printf("%s: cases %zu loss %.4f avg %.4f DIAG %.4f AVE_SEN %.4f AVE_SPE %.4f AVE_PRE %.4f AVE_F1 %.4f%s\n",
                split, s.cases, s.loss, s.avg, s.diag_accuracy, s.ave_sen, s.ave_spe, s.ave_pre, s.ave_f1,
                s.degenerate ? " (degenerate ratios reported as 0)" : "");
}

int cmd_train(const Common& c, bool quiet) {
    ConfigPtr cfg = resolved_config(c);
    echo_config(cfg.get(), c.out_dir);
    DatasetPtr data = open_data(cfg.get());
    tfk_model* raw = nullptr;
    check(tfk_model_create(cfg.get(), &raw));
    ModelPtr model(raw);
    const fs::path out(c.out_dir);
    tfk_train_summary summary{};
    auto progress = [](const tfk_epoch* row, void*) {
        std::printf("epoch %zu lr %.3g train_loss %.6f val_avg %.4f\n", row->epoch, row->lr, row->train_loss,
                    row->val_avg);
        std::fflush(stdout);
    };
    check(tfk_model_train(model.get(), data.get(), (out / "train_log.csv").c_str(), quiet ? nullptr : +progress,
                          nullptr, &summary));
    check(tfk_model_save(model.get(), (out / "model.ckpt").c_str()));
    tfk_eval_summary eval{};
    check(tfk_model_evaluate(model.get(), data.get(), "test", (out / "report").c_str(), &eval));
    std::printf("best epoch %zu (val avg %.4f)\n", summary.best_epoch, summary.best_val_avg);
    print_eval("test", eval);
    return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& split) {
    ModelPtr model = load_model(checkpoint);
    ConfigPtr cfg = checkpoint_config(model.get(), c.overrides);
    echo_config(cfg.get(), c.out_dir);
    DatasetPtr data = open_data(cfg.get());
    tfk_eval_summary eval{};
    check(tfk_model_evaluate(model.get(), data.get(), split.c_str(), (fs::path(c.out_dir) / "report").c_str(),
                             &eval));
    print_eval(split.c_str(), eval);
    return 0;
}

int cmd_gradcheck(const Common& c, unsigned long long seed, double tolerance, const std::string& corrupt) {
    ConfigPtr cfg = resolved_config(c);
    echo_config(cfg.get(), c.out_dir);
    if (!corrupt.empty()) tfk_debug_corrupt_backward(corrupt.c_str());
    std::vector<tfk_grad_row> rows(16);
    size_t n = 0;
    const tfk_status s = tfk_gradcheck(cfg.get(), seed, tolerance, rows.data(), rows.size(), &n);
    tfk_debug_corrupt_backward(nullptr);
    check(s);
    rows.resize(std::min(n, rows.size()));
    FILE* csv = std::fopen((fs::path(c.out_dir) / "gradcheck.csv").c_str(), "w");
    if (!csv) {
        std::fprintf(stderr, "tformer: cannot write gradcheck.csv\n");
        return 2;
    }
    std::fprintf(csv, "module,max_rel_error,coordinates,status\n");
    std::printf("%-22s %14s %12s  %s\n", "module", "max_rel_error", "coordinates", "status");
    bool ok = true;
    for (const auto& r : rows) {
        const char* status = r.pass ? "PASS" : "FAIL";
        std::printf("%-22s %14.3e %12zu  %s\n", r.module, r.max_rel_error, r.coordinates, status);
        std::fprintf(csv, "%s,%.6e,%zu,%s\n", r.module, r.max_rel_error, r.coordinates, status);
        if (!r.pass) {
            ok = false;
            std::fprintf(stderr, "gradient check failed: %s\n", r.module);
        }
    }
    std::fclose(csv);
    return ok ? 0 : kExitGradFail;
}

int cmd_synth(const Common& c) {
    ConfigPtr cfg = resolved_config(c);
    echo_config(cfg.get(), c.out_dir);
    DatasetPtr data = open_data(cfg.get());
    check(tfk_dataset_write(data.get(), c.out_dir.c_str()));
    size_t tr = 0, va = 0, te = 0;
    check(tfk_dataset_counts(data.get(), &tr, &va, &te));
    std::printf("wrote %zu cases (train %zu, val %zu, test %zu) to %s\n", tr + va + te, tr, va, te, c.out_dir.c_str());
    for (const char* subset : {"derm", "cli", "meta", "derm+cli+meta"}) {
        double acc = 0;
        if (tfk_dataset_bayes(data.get(), subset, &acc) == TFK_OK) std::printf("bayes DIAG %-14s %.4f\n", subset, acc);
    }
    return 0;
}

int cmd_export(const Common& c, const std::string& checkpoint, const std::string& case_id) {
    ModelPtr model = load_model(checkpoint);
    ConfigPtr cfg = checkpoint_config(model.get(), c.overrides);
    echo_config(cfg.get(), c.out_dir);
    DatasetPtr data = open_data(cfg.get());
    size_t n = 0;
    check(tfk_model_export_attention(model.get(), data.get(), case_id.c_str(), c.out_dir.c_str(), &n));
    std::printf("exported %zu attention records for %s to %s\n", n, case_id.c_str(), c.out_dir.c_str());
    return 0;
}

int cmd_flops(const Common& c) {
    ConfigPtr cfg = resolved_config(c);
    echo_config(cfg.get(), c.out_dir);
    const fs::path path = fs::path(c.out_dir) / "flops.csv";
    check(tfk_flops_csv(cfg.get(), path.c_str()));
    FILE* f = std::fopen(path.c_str(), "r");
    if (f) {
        char line[256];
        while (std::fgets(line, sizeof line, f)) std::fputs(line, stdout);
        std::fclose(f);
    }
    return 0;
}

int cmd_params(const Common& c) {
    ConfigPtr cfg = resolved_config(c);
    echo_config(cfg.get(), c.out_dir);
    tfk_model* raw = nullptr;
    check(tfk_model_create(cfg.get(), &raw));
    ModelPtr model(raw);
    FILE* csv = std::fopen((fs::path(c.out_dir) / "params.csv").c_str(), "w");
    if (!csv) {
        std::fprintf(stderr, "tformer: cannot write params.csv\n");
        return 2;
    }
    std::fprintf(csv, "group,count\n");
    auto row = [](const char* group, size_t n, void* user) {
        std::printf("%-24s %12zu\n", group, n);
        std::fprintf(static_cast<FILE*>(user), "%s,%zu\n", group, n);
    };
    check(tfk_model_param_groups(model.get(), +row, csv));
    size_t total = 0, blocks = 0;
    check(tfk_model_param_count(model.get(), &total));
    check(tfk_model_hmt_blocks(model.get(), &blocks));
    std::fprintf(csv, "total,%zu\n", total);
    std::fclose(csv);
    std::printf("%-24s %12zu\nhmt blocks %zu\n", "total", total, blocks);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TFormer: multi-modal fusion transformer for skin lesion diagnosis"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common common;
    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) sub->add_option("-c,--config", common.config_path, "Config file (section.key = value)");
        sub->add_option("-s,--set", common.overrides, "Override, repeatable: section.key=value");
        sub->add_option("-o,--out-dir", common.out_dir, "Output directory")->capture_default_str();
    };

    bool quiet = false;
    auto* train = app.add_subcommand("train", "Train, save a checkpoint and report test metrics");
    add_common(train, true);
    train->add_flag("-q,--quiet", quiet, "No per-epoch lines");

    std::string checkpoint, split = "test", case_id;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    add_common(eval, false);
    eval->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--split", split, "train, val or test")->capture_default_str();

    unsigned long long seed = 1;
    double tolerance = 1e-4;
    std::string corrupt;
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every module (64-bit)");
    add_common(grad, true);
    grad->add_option("--seed", seed, "Seed for inputs and parameters")->capture_default_str();
    grad->add_option("--tolerance", tolerance, "Largest accepted relative error")->capture_default_str();
    grad->add_option("--corrupt-op", corrupt, "Test hook: scale this op's backward by 1.5")->group("");

    auto* synth = app.add_subcommand("synth", "Write the synthetic dataset as PNGs plus a manifest");
    add_common(synth, true);

    auto* exp = app.add_subcommand("export-attn", "Export HMT and MTP attention maps for one case");
    add_common(exp, false);
    exp->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
    exp->add_option("--case", case_id, "Case id")->required();

    auto* flops = app.add_subcommand("flops", "Per-stage WMSA FLOP table");
    add_common(flops, true);

    auto* params = app.add_subcommand("params", "Parameter counts by group");
    add_common(params, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train) return cmd_train(common, quiet);
        if (*eval) return cmd_eval(common, checkpoint, split);
        if (*grad) return cmd_gradcheck(common, seed, tolerance, corrupt);
        if (*synth) return cmd_synth(common);
        if (*exp) return cmd_export(common, checkpoint, case_id);
        if (*flops) return cmd_flops(common);
        if (*params) return cmd_params(common);
    } catch (const Failure& f) {
        return f.code;
    }
    return kExitOther;
}
