// csrlab: command line driver for the spectral-consistency defense lab.
//
// Exit codes: 0 success, 1 usage or bad configuration, 2 runtime failure,
// 3 I/O failure.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "csr/config.hpp"
#include "csr/csv.hpp"
#include "csr/metrics.hpp"
#include "csr/parallel.hpp"
#include "csr/svg.hpp"

namespace fs = std::filesystem;
using namespace csr;

namespace {

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wrap a filesystem-touching call so the top level can map it to exit code 3.
template <class F>
auto io(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw IoFailure(e.what());
    }
}

std::string path_in(const RunConfig& cfg, const std::string& rel) {
    return cfg.output_dir + "/" + rel;
}

void ensure_out(const RunConfig& cfg) {
    io([&] { fs::create_directories(cfg.output_dir); });
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& facts,
                    double elapsed_ms) {
    io([&] {
        std::ofstream f(path_in(cfg, "manifest-" + command + ".txt"), std::ios::binary);
        if (!f) throw std::runtime_error("cannot write manifest");
        f << "command = " << command << "\n";
        for (const auto& [k, v] : facts) f << k << " = " << v << "\n";
        f << "elapsed_ms = " << CsvWriter::num(elapsed_ms) << "\n\n" << cfg.render();
    });
}

Dataset load_split(const RunConfig& cfg, const std::string& split) {
    return io([&] { return load_dataset(path_in(cfg, "data/" + split)); });
}

Model load_model(const RunConfig& cfg) {
    return io([&] { return load_checkpoint(path_in(cfg, "model.ckpt")); });
}

// Benign test images, the matching adversarial images from a prior `attack`
// run, and their labels, truncated to the shorter of the two sets.
struct PairedSets {
    std::vector<Tensor> benign, adversarial;
    std::vector<int> labels;
};

PairedSets load_paired(const RunConfig& cfg) {
    Dataset test = load_split(cfg, "test");
    Dataset adv = io([&] { return load_dataset(path_in(cfg, "adv")); });
    size_t n = std::min(test.images.size(), adv.images.size());
    PairedSets p;
    for (size_t i = 0; i < n; ++i) {
        if (test.labels[i] != adv.labels[i])
            throw std::runtime_error("adv/ labels do not match the test split; rerun attack");
        p.benign.push_back(test.images[i]);
        p.adversarial.push_back(adv.images[i]);
        p.labels.push_back(test.labels[i]);
    }
    return p;
}

std::vector<double> consistency_scores(const Model& m, const std::vector<Tensor>& images,
                                       double radius, int workers) {
    std::vector<double> scores(images.size());
    parallel_for(int(images.size()), workers, [&](int i) {
        Model local = m;  // per-task copy: forward counters are not thread safe
        scores[size_t(i)] = spectral_consistency(local, images[size_t(i)], radius);
    });
    return scores;
}

// ---- subcommands -----------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    DatasetConfig dc = cfg.dataset_config();
    Dataset train_set = generate_dataset(dc, true);
    Dataset test_set = generate_dataset(dc, false);
    io([&] {
        fs::create_directories(path_in(cfg, "data/train"));
        fs::create_directories(path_in(cfg, "data/test"));
        write_dataset(train_set, path_in(cfg, "data/train"));
        write_dataset(test_set, path_in(cfg, "data/test"));
    });
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    std::cout << "wrote " << train_set.images.size() << " train / " << test_set.images.size()
              << " test images to " << path_in(cfg, "data") << "\n"
              << "train fingerprint " << hex64(dataset_fingerprint(train_set)) << "\n"
              << "test fingerprint " << hex64(dataset_fingerprint(test_set)) << "\n";
    write_manifest(cfg, "gen-data",
                   {{"train_fingerprint", hex64(dataset_fingerprint(train_set))},
                    {"test_fingerprint", hex64(dataset_fingerprint(test_set))}},
                   ms);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Dataset train_set = load_split(cfg, "train");
    Dataset test_set = load_split(cfg, "test");
    Model m = init_model<float>(cfg.encoder_dims(), cfg.model_seed);
    m.tau = float(cfg.model_tau);
    TrainReport rep = train(m, train_set, cfg.train_config());

    double test_acc = batch_accuracy(m, test_set, 0, test_set.images.size());
    io([&] {
        save_checkpoint(m, path_in(cfg, "model.ckpt"),
                        {{"train_fingerprint", hex64(dataset_fingerprint(train_set))}});
        CsvWriter csv(path_in(cfg, "train.csv"));
        csv.header({"epoch", "loss", "train_accuracy"});
        for (size_t e = 0; e < rep.epoch_loss.size(); ++e)
            csv.row_strings({CsvWriter::num(int(e)), CsvWriter::num(rep.epoch_loss[e]),
                             CsvWriter::num(rep.epoch_accuracy[e])});
    });
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    std::cout << "final train accuracy " << rep.final_train_accuracy << "\n"
              << "test accuracy " << test_acc << "\n"
              << "checkpoint " << path_in(cfg, "model.ckpt") << "\n";
    write_manifest(cfg, "train",
                   {{"train_accuracy", CsvWriter::num(rep.final_train_accuracy)},
                    {"test_accuracy", CsvWriter::num(test_acc)}},
                   ms);
    return 0;
}

int cmd_attack(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Model m = load_model(cfg);
    Dataset test_set = load_split(cfg, "test");
    AttackConfig ac = cfg.attack_config();
    size_t n = std::min<size_t>(size_t(cfg.analysis_samples), test_set.images.size());

    std::vector<AdversarialResult<float>> results(n);
    parallel_for(int(n), cfg.workers, [&](int i) {
        Model local = m;
        AttackConfig c = ac;
        c.seed = ac.seed * 1000003 + uint64_t(i);  // per-image stream, order independent
        results[size_t(i)] =
            gradient_attack(local, test_set.images[size_t(i)], test_set.labels[size_t(i)], c);
    });

    int flipped = 0;
    io([&] {
        fs::create_directories(path_in(cfg, "adv"));
        std::ofstream labels(path_in(cfg, "adv/labels.csv"), std::ios::binary);
        if (!labels) throw std::runtime_error("cannot write adv labels.csv");
        labels << "filename,label\n";
        CsvWriter csv(path_in(cfg, "attack.csv"));
        csv.header({"index", "filename", "label", "target", "predicted", "success", "best_loss",
                    "delta_linf"});
        for (size_t i = 0; i < n; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "adv_%05zu.ppm", i);
            write_ppm(path_in(cfg, std::string("adv/") + name), results[i].image);
            labels << name << ',' << test_set.labels[i] << '\n';
            if (results[i].success) flipped++;
            csv.row_strings({CsvWriter::num(int(i)), name, CsvWriter::num(test_set.labels[i]),
                             CsvWriter::num(results[i].target),
                             CsvWriter::num(results[i].predicted),
                             results[i].success ? "1" : "0", CsvWriter::num(results[i].best_loss),
                             CsvWriter::num(double(linf_norm(results[i].delta)))});
        }
    });
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    std::cout << "attacked " << n << " images, success rate " << double(flipped) / double(n)
              << "\n";
    write_manifest(cfg, "attack",
                   {{"images", CsvWriter::num(int(n))},
                    {"success_rate", CsvWriter::num(double(flipped) / double(n))}},
                   ms);
    return 0;
}

int cmd_defend(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Model m = load_model(cfg);
    PairedSets p = load_paired(cfg);
    DefenseConfig dc = cfg.defense_config();

    std::vector<EvalMetrics> rows;
    std::stringstream modes(cfg.defense_modes);
    std::string mode;
    while (std::getline(modes, mode, ',')) {
        if (mode.empty()) continue;
        DefenseMode dm;
        if (mode == "none") dm = DefenseMode::None;
        else if (mode == "lpf") dm = DefenseMode::Lpf;
        else if (mode == "csr") dm = DefenseMode::Csr;
        else throw ConfigError("unknown defense mode: " + mode);
        rows.push_back(robust_accuracy_eval(m, dm, dc, p.benign, p.adversarial, p.labels));
    }

    io([&] {
        CsvWriter csv(path_in(cfg, "defense.csv"));
        csv.header({"mode", "clean_acc", "robust_acc", "gate_tpr", "gate_fpr", "mean_steps",
                    "wall_ms_per_image"});
        for (const auto& r : rows)
            csv.row_strings({r.mode, CsvWriter::num(r.clean_acc), CsvWriter::num(r.robust_acc),
                             CsvWriter::num(r.gate_tpr), CsvWriter::num(r.gate_fpr),
                             CsvWriter::num(r.mean_steps), CsvWriter::num(r.wall_ms_per_image)});
    });
    for (const auto& r : rows)
        std::cout << r.mode << ": clean " << r.clean_acc << " robust " << r.robust_acc
                  << " gate tpr " << r.gate_tpr << " fpr " << r.gate_fpr << "\n";
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(cfg, "defend", {{"pairs", CsvWriter::num(int(p.labels.size()))}}, ms);
    return 0;
}

int analyze_curves(const RunConfig& cfg, const Model& m) {
    PairedSets p = load_paired(cfg);
    size_t n = std::min<size_t>(size_t(cfg.analysis_samples), p.labels.size());
    p.benign.resize(n);
    p.adversarial.resize(n);
    // Gaussian-noise control population: sigma matched to the attack's
    // uniform linf budget (sigma = epsilon / sqrt(3)).
    std::vector<Tensor> noised;
    {
        Rng rng(cfg.attack_seed ^ 0x6e6f697365ULL);
        double sigma = cfg.attack_epsilon / std::sqrt(3.0);
        for (const auto& img : p.benign) {
            Tensor x = img;
            for (auto& v : x.data)
                v = float(std::min(1.0, std::max(0.0, double(v) + rng.normal() * sigma)));
            noised.push_back(std::move(x));
        }
    }
    std::map<std::string, std::vector<Tensor>> pops{{"benign", p.benign},
                                                    {"adversarial", p.adversarial},
                                                    {"gaussian", noised}};
    auto curves = consistency_curve(m, pops, cfg.radii_grid());
    io([&] {
        CsvWriter csv(path_in(cfg, "curves.csv"));
        csv.header({"population", "radius", "mean", "stddev"});
        for (const auto& c : curves)
            for (size_t i = 0; i < c.radii.size(); ++i)
                csv.row_strings({c.population, CsvWriter::num(c.radii[i]),
                                 CsvWriter::num(c.mean[i]), CsvWriter::num(c.stddev[i])});
        if (cfg.output_plots) {
            SvgChart chart("Spectral consistency vs filter radius", "radius",
                           "mean consistency");
            for (const auto& c : curves) chart.add({c.population, c.radii, c.mean});
            chart.write(path_in(cfg, "curves.svg"));
        }
    });
    return 0;
}

int analyze_sgm(const RunConfig& cfg, const Model& m) {
    Dataset test_set = load_split(cfg, "test");
    size_t n = std::min<size_t>(size_t(cfg.analysis_samples), test_set.images.size());
    std::vector<Tensor> images(test_set.images.begin(), test_set.images.begin() + long(n));
    std::vector<int> labels(test_set.labels.begin(), test_set.labels.begin() + long(n));
    SgmGrid grid = sgm_heatmap(m, images, labels);
    io([&] {
        CsvWriter csv(path_in(cfg, "sgm.csv"));
        csv.header({"u", "v", "value"});
        for (int u = 0; u < grid.h; ++u)
            for (int v = 0; v < grid.w; ++v)
                csv.row_strings({CsvWriter::num(u), CsvWriter::num(v),
                                 CsvWriter::num(grid.at(u, v))});
    });
    std::cout << "sgm heatmap over " << grid.samples << " images -> " << path_in(cfg, "sgm.csv")
              << "\n";
    return 0;
}

int analyze_bands(const RunConfig& cfg, const Model& m) {
    Dataset test_set = load_split(cfg, "test");
    size_t n = std::min<size_t>(size_t(cfg.analysis_band_samples), test_set.images.size());
    std::vector<Tensor> images(test_set.images.begin(), test_set.images.begin() + long(n));
    AttackConfig ac = cfg.attack_config();
    BandDriftTable table = band_drift_sweep(m, images, cfg.band_edge_list(), cfg.epsilon_list(),
                                            ac);
    io([&] {
        CsvWriter csv(path_in(cfg, "bands.csv"));
        csv.header({"band_lo", "band_hi", "epsilon", "mean_drift"});
        for (size_t b = 0; b < table.bands.size(); ++b)
            for (size_t e = 0; e < table.epsilons.size(); ++e)
                csv.row_strings({CsvWriter::num(table.bands[b].first),
                                 CsvWriter::num(table.bands[b].second),
                                 CsvWriter::num(table.epsilons[e]),
                                 CsvWriter::num(table.mean_drift[b][e])});
        if (cfg.output_plots) {
            SvgChart chart("Feature drift by frequency band", "epsilon", "mean drift");
            for (size_t b = 0; b < table.bands.size(); ++b) {
                char name[48];
                std::snprintf(name, sizeof(name), "[%g, %g)", table.bands[b].first,
                              table.bands[b].second);
                chart.add({name, table.epsilons, table.mean_drift[b]});
            }
            chart.write(path_in(cfg, "bands.svg"));
        }
    });
    return 0;
}

int analyze_conflict(const RunConfig& cfg, const Model& m) {
    PairedSets p = load_paired(cfg);
    size_t n = std::min<size_t>(size_t(cfg.analysis_conflict_samples), p.labels.size());
    double radius = cfg.defense_config().effective_radius(p.benign.at(0).shape[0]);
    int negative = 0, skipped = 0;
    std::vector<double> values;
    io([&] {
        CsvWriter csv(path_in(cfg, "conflict.csv"));
        csv.header({"index", "cosine"});
        for (size_t i = 0; i < n; ++i) {
            Tensor delta(p.benign[i].shape);
            for (size_t j = 0; j < delta.data.size(); ++j)
                delta.data[j] = p.adversarial[i].data[j] - p.benign[i].data[j];
            if (linf_norm(delta) == 0.0f) {
                skipped++;
                continue;
            }
            double c = gradient_conflict(m, p.benign[i], delta, radius);
            values.push_back(c);
            if (c < 0) negative++;
            csv.row_strings({CsvWriter::num(int(i)), CsvWriter::num(c)});
        }
    });
    if (values.empty()) throw std::runtime_error("conflict: no nonzero perturbations found");
    std::cout << "negative alignment on " << negative << "/" << values.size() << " samples ("
              << skipped << " zero-delta skipped)\n";
    return 0;
}

int analyze_roc(const RunConfig& cfg, const Model& m) {
    PairedSets p = load_paired(cfg);
    double radius = cfg.defense_config().effective_radius(p.benign.at(0).shape[0]);
    auto ben = consistency_scores(m, p.benign, radius, cfg.workers);
    auto adv = consistency_scores(m, p.adversarial, radius, cfg.workers);
    RocCurve roc = roc_auc(ben, adv);
    io([&] {
        CsvWriter csv(path_in(cfg, "roc.csv"));
        csv.header({"threshold", "fpr", "tpr"});
        for (size_t i = 0; i < roc.thresholds.size(); ++i)
            csv.row_strings({CsvWriter::num(roc.thresholds[i]), CsvWriter::num(roc.fpr[i]),
                             CsvWriter::num(roc.tpr[i])});
        csv.row_strings({"auc", CsvWriter::num(roc.auc), ""});
        if (cfg.output_plots) {
            SvgChart chart("Detection ROC", "false positive rate", "true positive rate");
            chart.add({"consistency gate", roc.fpr, roc.tpr});
            chart.write(path_in(cfg, "roc.svg"));
        }
    });
    std::cout << "auc " << roc.auc << " over " << ben.size() << " pairs\n";
    return 0;
}

int cmd_analyze(const RunConfig& cfg, const std::string& which) {
    auto t0 = std::chrono::steady_clock::now();
    Model m = load_model(cfg);
    int rc;
    if (which == "curves") rc = analyze_curves(cfg, m);
    else if (which == "sgm") rc = analyze_sgm(cfg, m);
    else if (which == "bands") rc = analyze_bands(cfg, m);
    else if (which == "conflict") rc = analyze_conflict(cfg, m);
    else if (which == "roc") rc = analyze_roc(cfg, m);
    else throw ConfigError("unknown analysis: " + which);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(cfg, "analyze-" + which, {}, ms);
    return rc;
}

int cmd_calibrate_tau(RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Model m = load_model(cfg);
    PairedSets p = load_paired(cfg);
    double radius = cfg.defense_config().effective_radius(p.benign.at(0).shape[0]);
    auto ben = consistency_scores(m, p.benign, radius, cfg.workers);
    auto adv = consistency_scores(m, p.adversarial, radius, cfg.workers);
    TauCalibration cal = calibrate_tau(ben, adv);
    io([&] {
        std::ofstream f(path_in(cfg, "tau.txt"), std::ios::binary);
        if (!f) throw std::runtime_error("cannot write tau.txt");
        f << "tau = " << CsvWriter::num(cal.tau) << "\nyouden_j = " << CsvWriter::num(cal.youden_j)
          << "\nauc = " << CsvWriter::num(cal.roc.auc)
          << "\ndegenerate = " << (cal.degenerate ? "true" : "false")
          << "\nradius = " << CsvWriter::num(radius) << "\n";
    });
    if (cal.degenerate)
        std::cerr << "warning: score populations are inseparable; tau set to the midpoint\n";
    std::cout << "tau " << cal.tau << " (J " << cal.youden_j << ", auc " << cal.roc.auc << ")\n";
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(cfg, "calibrate-tau",
                   {{"tau", CsvWriter::num(cal.tau)}, {"auc", CsvWriter::num(cal.roc.auc)}}, ms);
    return 0;
}

int cmd_bench(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Model m = load_model(cfg);
    Dataset test_set = load_split(cfg, "test");
    DefenseConfig dc = cfg.defense_config();
    size_t pool = std::min<size_t>(16, test_set.images.size());

    // Benign-gated path: gate passes, input returned unchanged. Rectified
    // path: gate forced to flag by an unreachable threshold just under 1.
    DefenseConfig gate_open = dc;
    gate_open.tau = 1e-6;
    DefenseConfig gate_forced = dc;
    gate_forced.tau = 1.0 - 1e-9;

    struct Entry {
        std::string name;
        std::function<void(const Tensor&)> fn;
    };
    std::vector<Entry> entries = {
        {"plain_inference", [&](const Tensor& x) { classify_image(m, x); }},
        {"gated_benign", [&](const Tensor& x) { csr_defend(m, x, gate_open); }},
        {"rectified", [&](const Tensor& x) { csr_defend(m, x, gate_forced); }},
    };
    const int warmup = 10, iters = 100;
    io([&] {
        CsvWriter csv(path_in(cfg, "bench.csv"));
        csv.header({"path", "iterations", "mean_ms", "median_ms"});
        for (auto& e : entries) {
            for (int i = 0; i < warmup; ++i) e.fn(test_set.images[size_t(i) % pool]);
            std::vector<double> times;
            for (int i = 0; i < iters; ++i) {
                const Tensor& x = test_set.images[size_t(i) % pool];
                auto b0 = std::chrono::steady_clock::now();
                e.fn(x);
                times.push_back(std::chrono::duration<double, std::milli>(
                                    std::chrono::steady_clock::now() - b0)
                                    .count());
            }
            std::sort(times.begin(), times.end());
            double mean = 0;
            for (double t : times) mean += t;
            mean /= times.size();
            double median = 0.5 * (times[times.size() / 2] + times[(times.size() - 1) / 2]);
            csv.row_strings({e.name, CsvWriter::num(iters), CsvWriter::num(mean),
                             CsvWriter::num(median)});
            std::cout << e.name << " mean " << mean << " ms, median " << median << " ms\n";
        }
    });
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(cfg, "bench", {}, ms);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral-consistency adversarial defense lab"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = -1;
    int workers = 0;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "configuration file (section.key = value lines)");
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--seed", seed, "master seed (sets dataset, model, and attack seeds)");
    app.add_option("--workers", workers, "worker threads (overrides output.workers)");
    app.add_option("--set", overrides, "extra key=value overrides, applied after --config");

    auto* gen = app.add_subcommand("gen-data", "generate the procedural shape dataset");
    auto* tr = app.add_subcommand("train", "train the encoder on out/data/train");
    auto* atk = app.add_subcommand("attack", "attack the test split, writing out/adv");
    auto* def = app.add_subcommand("defend", "evaluate defenses on the attacked split");
    auto* ana = app.add_subcommand("analyze", "frequency-domain analyses");
    std::string which;
    ana->add_option("--which", which, "curves|sgm|bands|conflict|roc")->required();
    auto* cal = app.add_subcommand("calibrate-tau", "pick the detection threshold from ROC");
    auto* bench = app.add_subcommand("bench", "timings for the core operations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& kv : overrides) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (workers > 0) cfg.workers = workers;
        if (seed >= 0) {
            cfg.dataset_seed = uint64_t(seed);
            cfg.model_seed = uint64_t(seed) + 1;
            cfg.attack_seed = uint64_t(seed) + 2;
        }
        ensure_out(cfg);

        if (gen->parsed()) return cmd_gen_data(cfg);
        if (tr->parsed()) return cmd_train(cfg);
        if (atk->parsed()) return cmd_attack(cfg);
        if (def->parsed()) return cmd_defend(cfg);
        if (ana->parsed()) return cmd_analyze(cfg, which);
        if (cal->parsed()) return cmd_calibrate_tau(cfg);
        if (bench->parsed()) return cmd_bench(cfg);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoFailure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}
