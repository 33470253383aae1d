// SPDX-License-Identifier: Apache-2.0
#include "config/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tfk {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
    throw ConfigError(key + " = '" + value + "': " + why);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected a non-negative integer");
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) bad(key, v, "expected a number");
    return d;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad(key, v, "expected true or false");
}

std::array<std::size_t, 4> to_quad(const std::string& key, const std::string& v) {
    std::array<std::size_t, 4> out{};
    std::stringstream ss(v);
    std::string item;
    std::size_t n = 0;
    while (std::getline(ss, item, ',')) {
        if (n == 4) bad(key, v, "expected exactly 4 comma-separated integers");
        out[n++] = to_size(key, trim(item));
    }
    if (n != 4) bad(key, v, "expected exactly 4 comma-separated integers");
    return out;
}

std::string quad(const std::array<std::size_t, 4>& q) {
    return std::to_string(q[0]) + "," + std::to_string(q[1]) + "," + std::to_string(q[2]) + "," + std::to_string(q[3]);
}

std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* flag(bool b) { return b ? "true" : "false"; }

}  // namespace

void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
    auto& bb = c.model.backbone;
    auto& fu = c.model.fusion;
    auto& md = c.model;
    auto& tr = c.train;
    auto& syn = c.data.synthetic;
    if (key == "backbone.image_size") {
        const auto x = v.find('x');
        bb.image_height = to_size(key, trim(v.substr(0, x)));
        bb.image_width = x == std::string::npos ? bb.image_height : to_size(key, trim(v.substr(x + 1)));
    } else if (key == "backbone.patch_size") bb.patch_size = to_size(key, v);
    else if (key == "backbone.base_channels") bb.base_channels = to_size(key, v);
    else if (key == "backbone.stage_depths") bb.stage_depths = to_quad(key, v);
    else if (key == "backbone.stage_heads") bb.stage_heads = to_quad(key, v);
    else if (key == "backbone.window") bb.window = to_size(key, v);
    else if (key == "backbone.shared_weights") bb.shared_weights = to_bool(key, v);
    else if (key == "backbone.mlp_ratio") bb.mlp_ratio = to_double(key, v);
    else if (key == "fusion.hmt_stage_counts") fu.stage_counts = to_quad(key, v);
    else if (key == "fusion.hmt_bridge") {
        if (v == "sum") fu.bridge = Bridge::Sum;
        else if (v == "backbone_only") fu.bridge = Bridge::BackboneOnly;
        else bad(key, v, "expected sum or backbone_only");
    } else if (key == "fusion.hmt_shift") fu.shift = to_bool(key, v);
    else if (key == "fusion.cli_to_der") fu.cli_to_der = to_bool(key, v);
    else if (key == "fusion.der_to_cli") fu.der_to_cli = to_bool(key, v);
    else if (key == "fusion.mlp_ratio") fu.mlp_ratio = to_double(key, v);
    else if (key == "fusion.head_dim") md.head_dim = to_size(key, v);
    else if (key == "fusion.mtp_heads") md.mtp_heads = to_size(key, v);
    else if (key == "fusion.use_mtp") md.use_mtp = to_bool(key, v);
    else if (key == "model.modalities") {
        md.modalities = {false, false, false};
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item == "der") md.modalities.der = true;
            else if (item == "cli") md.modalities.cli = true;
            else if (item == "meta") md.modalities.meta = true;
            else bad(key, v, "modalities are der, cli, meta");
        }
    } else if (key == "model.use_cli") md.selection.use_cli = to_bool(key, v);
    else if (key == "model.use_der") md.selection.use_der = to_bool(key, v);
    else if (key == "model.use_meta") md.selection.use_meta = to_bool(key, v);
    else if (key == "model.meta_length") md.meta_length = to_size(key, v);
    else if (key == "model.precision") {
        const auto p = to_size(key, v);
        if (p != 32 && p != 64) bad(key, v, "expected 32 or 64");
        c.precision = static_cast<unsigned>(p);
    } else if (key == "data.source") {
        if (v == "synthetic") c.data.source = DataSource::Synthetic;
        else if (v == "manifest") c.data.source = DataSource::Manifest;
        else bad(key, v, "expected synthetic or manifest");
    } else if (key == "data.manifest") c.data.manifest = v;
    else if (key == "data.num_cases") syn.num_cases = to_size(key, v);
    else if (key == "data.label_noise") syn.label_noise = to_double(key, v);
    else if (key == "data.pixel_noise") syn.pixel_noise = to_double(key, v);
    else if (key == "data.val_fraction") syn.val_fraction = to_double(key, v);
    else if (key == "data.test_fraction") syn.test_fraction = to_double(key, v);
    else if (key == "data.stratified") syn.stratified = to_bool(key, v);
    else if (key == "data.seed") syn.seed = to_u64(key, v);
    else if (key == "train.lr") tr.lr = to_double(key, v);
    else if (key == "train.weight_decay") tr.weight_decay = to_double(key, v);
    else if (key == "train.decoupled_decay") tr.decoupled_decay = to_bool(key, v);
    else if (key == "train.epochs") tr.epochs = to_size(key, v);
    else if (key == "train.batch_size") tr.batch_size = to_size(key, v);
    else if (key == "train.schedule") {
        if (v == "cosine") tr.schedule = Schedule::Cosine;
        else if (v == "constant") tr.schedule = Schedule::Constant;
        else bad(key, v, "expected cosine or constant");
    } else if (key == "train.beta1") tr.beta1 = to_double(key, v);
    else if (key == "train.beta2") tr.beta2 = to_double(key, v);
    else if (key == "train.adam_eps") tr.adam_eps = to_double(key, v);
    else if (key == "train.augment") tr.augment = to_bool(key, v);
    else if (key == "train.max_shift") tr.max_shift = static_cast<int>(to_size(key, v));
    else if (key == "train.seed") tr.seed = to_u64(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
        apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

RunConfig resolve_config(RunConfig config, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
        apply_setting(config, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    if (const char* seed = std::getenv("TFK_SEED"); seed && *seed) apply_setting(config, "train.seed", seed);
    config.model.init_seed = config.train.seed;
    config.validate();
    return config;
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (data.source == DataSource::Manifest && data.manifest.empty()) {
        throw ConfigError("data.manifest is required when data.source = manifest");
    }
    if (data.source == DataSource::Synthetic) {
        SyntheticSpec spec = data.synthetic;
        if (model.backbone.image_height != model.backbone.image_width) {
            throw ConfigError("synthetic data needs a square backbone.image_size");
        }
        spec.image_size = model.backbone.image_height;
        spec.validate();
        if (model.meta_length != MetaSchema::derm7pt().length()) {
            throw ConfigError("model.meta_length must be " + std::to_string(MetaSchema::derm7pt().length()));
        }
    }
    if (precision != 32 && precision != 64) throw ConfigError("model.precision must be 32 or 64");
}

std::string RunConfig::canonical_text() const {
    const auto& bb = model.backbone;
    const auto& fu = model.fusion;
    const auto& syn = data.synthetic;
    const auto& m = model.modalities;
    std::string mods;
    for (auto [on, name] : {std::pair{m.der, "der"}, std::pair{m.cli, "cli"}, std::pair{m.meta, "meta"}}) {
        if (on) mods += (mods.empty() ? "" : ",") + std::string(name);
    }
    std::ostringstream o;
    o << "backbone.image_size = " << bb.image_height << "x" << bb.image_width << "\n"
      << "backbone.patch_size = " << bb.patch_size << "\n"
      << "backbone.base_channels = " << bb.base_channels << "\n"
      << "backbone.stage_depths = " << quad(bb.stage_depths) << "\n"
      << "backbone.stage_heads = " << quad(bb.stage_heads) << "\n"
      << "backbone.window = " << bb.window << "\n"
      << "backbone.shared_weights = " << flag(bb.shared_weights) << "\n"
      << "backbone.mlp_ratio = " << real(bb.mlp_ratio) << "\n"
      << "fusion.hmt_stage_counts = " << quad(fu.stage_counts) << "\n"
      << "fusion.hmt_bridge = " << (fu.bridge == Bridge::Sum ? "sum" : "backbone_only") << "\n"
      << "fusion.hmt_shift = " << flag(fu.shift) << "\n"
      << "fusion.cli_to_der = " << flag(fu.cli_to_der) << "\n"
      << "fusion.der_to_cli = " << flag(fu.der_to_cli) << "\n"
      << "fusion.mlp_ratio = " << real(fu.mlp_ratio) << "\n"
      << "fusion.head_dim = " << model.head_dim << "\n"
      << "fusion.mtp_heads = " << model.mtp_heads << "\n"
      << "fusion.use_mtp = " << flag(model.use_mtp) << "\n"
      << "model.modalities = " << mods << "\n"
      << "model.use_cli = " << flag(model.selection.use_cli) << "\n"
      << "model.use_der = " << flag(model.selection.use_der) << "\n"
      << "model.use_meta = " << flag(model.selection.use_meta) << "\n"
      << "model.meta_length = " << model.meta_length << "\n"
      << "model.precision = " << precision << "\n"
      << "data.source = " << (data.source == DataSource::Synthetic ? "synthetic" : "manifest") << "\n"
      << "data.manifest = " << data.manifest << "\n"
      << "data.num_cases = " << syn.num_cases << "\n"
      << "data.label_noise = " << real(syn.label_noise) << "\n"
      << "data.pixel_noise = " << real(syn.pixel_noise) << "\n"
      << "data.val_fraction = " << real(syn.val_fraction) << "\n"
      << "data.test_fraction = " << real(syn.test_fraction) << "\n"
      << "data.stratified = " << flag(syn.stratified) << "\n"
      << "data.seed = " << syn.seed << "\n"
      << "train.lr = " << real(train.lr) << "\n"
      << "train.weight_decay = " << real(train.weight_decay) << "\n"
      << "train.decoupled_decay = " << flag(train.decoupled_decay) << "\n"
      << "train.epochs = " << train.epochs << "\n"
      << "train.batch_size = " << train.batch_size << "\n"
      << "train.schedule = " << (train.schedule == Schedule::Cosine ? "cosine" : "constant") << "\n"
      << "train.beta1 = " << real(train.beta1) << "\n"
      << "train.beta2 = " << real(train.beta2) << "\n"
      << "train.adam_eps = " << real(train.adam_eps) << "\n"
      << "train.augment = " << flag(train.augment) << "\n"
      << "train.max_shift = " << train.max_shift << "\n"
      << "train.seed = " << train.seed << "\n";
    return o.str();
}

}  // namespace tfk
