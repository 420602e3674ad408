#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "csr/attack.hpp"
#include "csr/dataset.hpp"
#include "csr/defense.hpp"
#include "csr/encoder.hpp"

namespace csr {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat `section.key = value` configuration with '#' comments. Unknown keys are
// rejected before any side effect; every field has a default.
struct RunConfig {
    // dataset
    uint64_t dataset_seed = 7;
    int dataset_classes = 6;
    int dataset_train_per_class = 100;
    int dataset_test_per_class = 50;
    int dataset_size = 64;
    double dataset_noise = 0.05;

    // model
    int model_patch = 8;
    int model_hidden = 128;
    int model_mid = 256;
    int model_embed = 64;
    double model_tau = 10.0;
    int model_epochs = 30;
    int model_batch = 32;
    double model_lr = 0.05;
    double model_momentum = 0.9;
    uint64_t model_seed = 1;

    // attack
    double attack_epsilon = 4.0 / 255.0;
    double attack_alpha = 1.0 / 255.0;
    int attack_steps = 10;
    int attack_restarts = 1;
    uint64_t attack_seed = 0;
    std::string attack_loss = "ce-untargeted";
    std::string attack_variant = "pgd";

    // defense
    double defense_radius = 0;  // 0 = auto (scaled from the 224-pixel reference)
    double defense_tau = 0.85;
    double defense_epsilon = 4.0 / 255.0;
    double defense_alpha = 2.0 / 255.0;
    int defense_steps = 3;
    double defense_lambda = 1.0;
    std::string defense_ablation = "full";
    std::string defense_modes = "none,lpf,csr";

    // analysis
    int analysis_radii = 8;       // geometric sweep, Nyquist/16 .. Nyquist
    std::string analysis_band_edges = "0,8,16,24,32";
    std::string analysis_epsilons = "1,2,4";  // units of 1/255
    int analysis_samples = 300;
    int analysis_band_samples = 100;
    int analysis_conflict_samples = 200;

    // output
    std::string output_dir = "out";
    bool output_plots = true;
    int workers = 1;

    void set(const std::string& key, const std::string& value);
    void load_file(const std::string& path);
    std::string render() const;  // resolved snapshot, parseable back

    AttackConfig attack_config() const {
        AttackConfig c;
        c.epsilon = attack_epsilon;
        c.alpha = attack_alpha;
        c.steps = attack_steps;
        c.restarts = attack_restarts;
        c.seed = attack_seed;
        c.loss = parse_attack_loss(attack_loss);
        c.variant = parse_attack_variant(attack_variant);
        return c;
    }

    DefenseConfig defense_config() const {
        DefenseConfig c;
        c.radius = defense_radius;
        c.tau = defense_tau;
        c.epsilon = defense_epsilon;
        c.alpha = defense_alpha;
        c.steps = defense_steps;
        c.lambda = defense_lambda;
        c.ablation = parse_ablation(defense_ablation);
        return c;
    }

    DatasetConfig dataset_config() const {
        DatasetConfig c;
        c.seed = dataset_seed;
        c.classes = dataset_classes;
        c.train_per_class = dataset_train_per_class;
        c.test_per_class = dataset_test_per_class;
        c.size = dataset_size;
        c.noise = dataset_noise;
        return c;
    }

    TrainConfig train_config() const {
        TrainConfig c;
        c.epochs = model_epochs;
        c.batch = model_batch;
        c.lr = model_lr;
        c.momentum = model_momentum;
        c.seed = model_seed;
        return c;
    }

    EncoderDims encoder_dims() const {
        EncoderDims d;
        d.size = dataset_size;
        d.channels = 3;
        d.patch = model_patch;
        d.hidden = model_hidden;
        d.mid = model_mid;
        d.embed = model_embed;
        d.classes = dataset_classes;
        return d;
    }

    std::vector<double> radii_grid() const {
        double nyquist = dataset_size / 2.0;
        double lo = nyquist / 16.0;
        std::vector<double> radii;
        for (int i = 0; i < analysis_radii; ++i) {
            double t = analysis_radii == 1 ? 0.0 : double(i) / (analysis_radii - 1);
            radii.push_back(lo * std::pow(nyquist / lo, t));
        }
        return radii;
    }

    std::vector<double> band_edge_list() const { return parse_double_list(analysis_band_edges); }

    std::vector<double> epsilon_list() const {
        std::vector<double> out;
        for (double v : parse_double_list(analysis_epsilons)) out.push_back(v / 255.0);
        return out;
    }

    static AttackLoss parse_attack_loss(const std::string& s) {
        if (s == "ce-untargeted") return AttackLoss::CeUntargeted;
        if (s == "ce-targeted") return AttackLoss::CeTargeted;
        if (s == "dlr-targeted") return AttackLoss::DlrTargeted;
        if (s == "cross-modal") return AttackLoss::CrossModal;
        if (s == "label-free") return AttackLoss::LabelFree;
        throw ConfigError("unknown attack.loss: " + s);
    }

    static AttackVariant parse_attack_variant(const std::string& s) {
        if (s == "pgd") return AttackVariant::Pgd;
        if (s == "apgd-lite") return AttackVariant::ApgdLite;
        throw ConfigError("unknown attack.variant: " + s);
    }

    static Ablation parse_ablation(const std::string& s) {
        if (s == "full") return Ablation::Full;
        if (s == "attraction-only") return Ablation::AttractionOnly;
        if (s == "repulsion-only") return Ablation::RepulsionOnly;
        if (s == "no-greedy") return Ablation::NoGreedy;
        throw ConfigError("unknown defense.ablation: " + s);
    }

    static std::vector<double> parse_double_list(const std::string& s) {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            out.push_back(std::stod(item));
        }
        return out;
    }
};

namespace detail {

template <class T>
T parse_scalar(const std::string& v);

template <>
inline int parse_scalar<int>(const std::string& v) {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw ConfigError("not an integer: " + v);
    return r;
}
template <>
inline uint64_t parse_scalar<uint64_t>(const std::string& v) {
    size_t pos = 0;
    auto r = std::stoull(v, &pos);
    if (pos != v.size()) throw ConfigError("not an integer: " + v);
    return r;
}
template <>
inline double parse_scalar<double>(const std::string& v) {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("not a number: " + v);
    return r;
}
template <>
inline bool parse_scalar<bool>(const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("not a boolean: " + v);
}
template <>
inline std::string parse_scalar<std::string>(const std::string& v) {
    return v;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
    static const char* keys_msg = "see README for the full key list";
    auto i = [&](int& f) { f = detail::parse_scalar<int>(value); };
    auto u = [&](uint64_t& f) { f = detail::parse_scalar<uint64_t>(value); };
    auto d = [&](double& f) { f = detail::parse_scalar<double>(value); };
    auto b = [&](bool& f) { f = detail::parse_scalar<bool>(value); };
    auto s = [&](std::string& f) { f = value; };

    if (key == "dataset.seed") u(dataset_seed);
    else if (key == "dataset.classes") i(dataset_classes);
    else if (key == "dataset.train_per_class") i(dataset_train_per_class);
    else if (key == "dataset.test_per_class") i(dataset_test_per_class);
    else if (key == "dataset.size") i(dataset_size);
    else if (key == "dataset.noise") d(dataset_noise);
    else if (key == "model.patch") i(model_patch);
    else if (key == "model.hidden") i(model_hidden);
    else if (key == "model.mid") i(model_mid);
    else if (key == "model.embed") i(model_embed);
    else if (key == "model.tau") d(model_tau);
    else if (key == "model.epochs") i(model_epochs);
    else if (key == "model.batch") i(model_batch);
    else if (key == "model.lr") d(model_lr);
    else if (key == "model.momentum") d(model_momentum);
    else if (key == "model.seed") u(model_seed);
    else if (key == "attack.epsilon") d(attack_epsilon);
    else if (key == "attack.alpha") d(attack_alpha);
    else if (key == "attack.steps") i(attack_steps);
    else if (key == "attack.restarts") i(attack_restarts);
    else if (key == "attack.seed") u(attack_seed);
    else if (key == "attack.loss") s(attack_loss);
    else if (key == "attack.variant") s(attack_variant);
    else if (key == "defense.radius") d(defense_radius);
    else if (key == "defense.tau") d(defense_tau);
    else if (key == "defense.epsilon") d(defense_epsilon);
    else if (key == "defense.alpha") d(defense_alpha);
    else if (key == "defense.steps") i(defense_steps);
    else if (key == "defense.lambda") d(defense_lambda);
    else if (key == "defense.ablation") s(defense_ablation);
    else if (key == "defense.modes") s(defense_modes);
    else if (key == "analysis.radii") i(analysis_radii);
    else if (key == "analysis.band_edges") s(analysis_band_edges);
    else if (key == "analysis.epsilons") s(analysis_epsilons);
    else if (key == "analysis.samples") i(analysis_samples);
    else if (key == "analysis.band_samples") i(analysis_band_samples);
    else if (key == "analysis.conflict_samples") i(analysis_conflict_samples);
    else if (key == "output.dir") s(output_dir);
    else if (key == "output.plots") b(output_plots);
    else if (key == "output.workers") i(workers);
    else throw ConfigError("unknown config key '" + key + "' (" + keys_msg + ")");
}

inline void RunConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string& s2) {
            size_t a = s2.find_first_not_of(" \t\r");
            size_t b2 = s2.find_last_not_of(" \t\r");
            s2 = a == std::string::npos ? "" : s2.substr(a, b2 - a + 1);
        };
        trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        trim(key);
        trim(value);
        set(key, value);
    }
}

inline std::string RunConfig::render() const {
    std::ostringstream os;
    os.precision(17);
    os << "dataset.seed = " << dataset_seed << "\n"
       << "dataset.classes = " << dataset_classes << "\n"
       << "dataset.train_per_class = " << dataset_train_per_class << "\n"
       << "dataset.test_per_class = " << dataset_test_per_class << "\n"
       << "dataset.size = " << dataset_size << "\n"
       << "dataset.noise = " << dataset_noise << "\n"
       << "model.patch = " << model_patch << "\n"
       << "model.hidden = " << model_hidden << "\n"
       << "model.mid = " << model_mid << "\n"
       << "model.embed = " << model_embed << "\n"
       << "model.tau = " << model_tau << "\n"
       << "model.epochs = " << model_epochs << "\n"
       << "model.batch = " << model_batch << "\n"
       << "model.lr = " << model_lr << "\n"
       << "model.momentum = " << model_momentum << "\n"
       << "model.seed = " << model_seed << "\n"
       << "attack.epsilon = " << attack_epsilon << "\n"
       << "attack.alpha = " << attack_alpha << "\n"
       << "attack.steps = " << attack_steps << "\n"
       << "attack.restarts = " << attack_restarts << "\n"
       << "attack.seed = " << attack_seed << "\n"
       << "attack.loss = " << attack_loss << "\n"
       << "attack.variant = " << attack_variant << "\n"
       << "defense.radius = " << defense_radius << "\n"
       << "defense.tau = " << defense_tau << "\n"
       << "defense.epsilon = " << defense_epsilon << "\n"
       << "defense.alpha = " << defense_alpha << "\n"
       << "defense.steps = " << defense_steps << "\n"
       << "defense.lambda = " << defense_lambda << "\n"
       << "defense.ablation = " << defense_ablation << "\n"
       << "defense.modes = " << defense_modes << "\n"
       << "analysis.radii = " << analysis_radii << "\n"
       << "analysis.band_edges = " << analysis_band_edges << "\n"
       << "analysis.epsilons = " << analysis_epsilons << "\n"
       << "analysis.samples = " << analysis_samples << "\n"
       << "analysis.band_samples = " << analysis_band_samples << "\n"
       << "analysis.conflict_samples = " << analysis_conflict_samples << "\n"
       << "output.dir = " << output_dir << "\n"
       << "output.plots = " << (output_plots ? "true" : "false") << "\n"
       << "output.workers = " << workers << "\n";
    return os.str();
}

}  // namespace csr
