#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "risvi/harness.hpp"
#include "risvi/inference.hpp"
#include "risvi/io.hpp"
#include "risvi/threading.hpp"

namespace fs = std::filesystem;
using namespace risvi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed_override, "override the config seed")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--threads", args.threads, "worker thread cap (RIS_VI_THREADS as fallback)");
}

io::RunConfig load_config(const CommonArgs& args) {
    io::RunConfig cfg = io::load_run_config(args.config_path);
    if (args.seed_given) cfg.seed = args.seed_override;
    return cfg;
}

void write_echo(const CommonArgs& args, const io::RunConfig& cfg, const std::string& command) {
    fs::create_directories(args.out_dir);
    io::write_text_file((fs::path(args.out_dir) / (command + "_config_echo.json")).string(),
                        io::echo_run_config(cfg));
}

inference::EstimatorKind parse_kind(const std::string& kind) {
    if (kind == "jce") return inference::EstimatorKind::JCE;
    if (kind == "jcce") return inference::EstimatorKind::JCCE;
    throw config_error("kind must be 'jce' or 'jcce'");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int cmd_gen_data(const CommonArgs& args, const std::string& kind_name) {
    const io::RunConfig cfg = load_config(args);
    const inference::EstimatorKind kind = parse_kind(kind_name);
    write_echo(args, cfg, "gen-data");

    RandomStream scenario(cfg.seed);
    const auto model = inference::init_models(kind, cfg.scenario, cfg.heads, cfg.priors, scenario);
    RandomStream data_rng = scenario.child("data");

    io::Dataset ds;
    ds.kind = kind;
    ds.cfg = cfg.scenario;
    ds.seed = cfg.seed;
    ds.plan = model.plan;
    ds.clusters = model.clusters;
    ds.set = inference::generate_dataset(model, cfg.train.dataset_size, data_rng, args.threads);

    const std::string path = (fs::path(args.out_dir) / ("dataset_" + kind_name + ".bin")).string();
    io::write_dataset(path, ds);
    std::cout << "wrote " << ds.set.signals.size() << " records to " << path << "\n";
    return kExitOk;
}

int cmd_train(const CommonArgs& args, const std::string& kind_name, const std::string& data_path) {
    const io::RunConfig cfg = load_config(args);
    const inference::EstimatorKind kind = parse_kind(kind_name);
    write_echo(args, cfg, "train");

    const inference::TrainingSet* set = nullptr;
    inference::TrainingSet loaded;
    if (!data_path.empty()) {
        const io::Dataset ds = io::read_dataset(data_path);
        if (ds.kind != kind) throw config_error("dataset kind does not match --kind");
        if (ds.cfg.M != cfg.scenario.M || ds.cfg.N != cfg.scenario.N ||
            ds.cfg.N_p != cfg.scenario.N_p || ds.cfg.N_b != cfg.scenario.N_b) {
            throw config_error("dataset dimensions do not match the scenario");
        }
        if (ds.seed != cfg.seed) {
            throw config_error("dataset seed does not match the config seed (pilot plans differ)");
        }
        loaded = ds.set;
        set = &loaded;
    }

    RandomStream scenario(cfg.seed);
    const auto result = inference::train_amortized(kind, cfg.scenario, cfg.train, cfg.heads,
                                                   cfg.priors, scenario, args.threads, set);

    const std::string ckpt = (fs::path(args.out_dir) / ("checkpoint_" + kind_name + ".bin")).string();
    io::write_checkpoint(ckpt, result.model);

    std::ostringstream curve;
    curve << "step,train_loss,holdout_loss,lr\n";
    for (const auto& pt : result.curve) {
        curve << pt.step << ',' << fmt(pt.train_loss) << ',' << fmt(pt.holdout_loss) << ','
              << fmt(pt.lr) << '\n';
    }
    io::write_text_file((fs::path(args.out_dir) / ("train_curve_" + kind_name + ".csv")).string(),
                        curve.str());
    std::cout << "trained " << result.steps_run << " steps; best holdout loss "
              << fmt(result.best_holdout) << "; checkpoint " << ckpt << "\n";
    return kExitOk;
}

int cmd_sweep(const CommonArgs& args, const std::vector<std::string>& jce_ckpts,
              const std::vector<std::string>& jcce_ckpts, const std::string& scenario_id) {
    const io::RunConfig cfg = load_config(args);
    write_echo(args, cfg, "sweep");

    harness::SweepScenario sc;
    sc.id = scenario_id;
    sc.cfg = cfg.scenario;
    sc.protocol = cfg.protocol;

    // checkpoints pin the pilot plan and clusters; otherwise derive them
    // from the seed exactly like training would
    std::vector<inference::EncoderPair> models;
    models.reserve(jce_ckpts.size() + jcce_ckpts.size());
    auto add_models = [&](const std::vector<std::string>& paths, bool jce) {
        for (const auto& p : paths) {
            inference::EncoderPair model = io::read_checkpoint(p);
            if ((model.kind == inference::EstimatorKind::JCE) != jce) {
                throw config_error("checkpoint kind mismatch: " + p);
            }
            if (model.cfg.M != cfg.scenario.M || model.cfg.N != cfg.scenario.N ||
                model.cfg.N_p != cfg.scenario.N_p || model.cfg.N_b != cfg.scenario.N_b) {
                throw config_error("checkpoint dimensions do not match the scenario: " + p);
            }
            models.push_back(std::move(model));
        }
    };
    add_models(jce_ckpts, true);
    add_models(jcce_ckpts, false);

    if (!models.empty()) {
        sc.plan = models.front().plan;
        sc.clusters = models.front().clusters;
    } else {
        RandomStream scenario(cfg.seed);
        const auto fresh = inference::init_models(inference::EstimatorKind::JCE, cfg.scenario,
                                                  cfg.heads, cfg.priors, scenario);
        sc.plan = fresh.plan;
        sc.clusters = fresh.clusters;
    }
    for (const auto& model : models) {
        const double snr_db = 10.0 * std::log10(model.cfg.rho);
        // keys are rounded to the config grid to avoid float-compare misses
        double key = snr_db;
        for (double s : cfg.sweep_snr_db) {
            if (std::abs(s - snr_db) < 1e-9) key = s;
        }
        if (model.kind == inference::EstimatorKind::JCE) {
            sc.jce_models[key] = &model;
        } else {
            sc.jcce_models[key] = &model;
        }
    }

    RandomStream rng(cfg.seed);
    RandomStream sweep_rng = rng.child("sweep");
    const auto records = harness::run_sweep({sc}, cfg.sweep_snr_db, cfg.sweep_trials,
                                            cfg.sweep_methods, sweep_rng, args.threads);

    std::ostringstream os;
    harness::write_metrics_csv(os, records);
    const std::string path = (fs::path(args.out_dir) / "metrics.csv").string();
    io::write_text_file(path, os.str());
    std::cout << "wrote " << records.size() << " records to " << path << "\n";
    return kExitOk;
}

int cmd_report(const std::string& metrics_path) {
    std::ifstream is(metrics_path);
    if (!is) throw missing_artifact_error("cannot open: " + metrics_path);
    const auto records = harness::read_metrics_csv(is);

    struct Agg {
        int n = 0;
        double capacity = 0.0, eff = 0.0, nmse_h = 0.0, nmse_G = 0.0, nmse_d = 0.0, align = 0.0;
        int n_eff = 0, n_h = 0, n_G = 0, n_d = 0, n_align = 0;
    };
    std::map<std::pair<double, std::string>, Agg> table;
    for (const auto& r : records) {
        Agg& a = table[{r.snr_db, harness::method_name(r.method)}];
        a.n += 1;
        a.capacity += r.capacity;
        if (r.effective_capacity) {
            a.eff += *r.effective_capacity;
            a.n_eff += 1;
        }
        if (r.nmse_h) {
            a.nmse_h += *r.nmse_h;
            a.n_h += 1;
        }
        if (r.nmse_G) {
            a.nmse_G += *r.nmse_G;
            a.n_G += 1;
        }
        if (r.nmse_d) {
            a.nmse_d += *r.nmse_d;
            a.n_d += 1;
        }
        if (r.eig_alignment) {
            a.align += *r.eig_alignment;
            a.n_align += 1;
        }
    }
    std::printf("%8s  %-13s %6s %10s %10s %10s %10s %10s %10s\n", "snr_db", "method", "n", "capacity",
                "eff_cap", "nmse_h", "nmse_G", "nmse_d", "alignment");
    for (const auto& [key, a] : table) {
        auto cell = [](double sum, int n) {
            if (n == 0) return std::string("-");
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", sum / n);
            return std::string(buf);
        };
        std::printf("%8.2f  %-13s %6d %10s %10s %10s %10s %10s %10s\n", key.first, key.second.c_str(),
                    a.n, cell(a.capacity, a.n).c_str(), cell(a.eff, a.n_eff).c_str(),
                    cell(a.nmse_h, a.n_h).c_str(), cell(a.nmse_G, a.n_G).c_str(),
                    cell(a.nmse_d, a.n_d).c_str(), cell(a.align, a.n_align).c_str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"link-level simulator and variational channel estimators for passive RIS uplinks"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, sweep_args;
    std::string gen_kind = "jce", train_kind = "jce", train_data, metrics_path;
    std::string sweep_id = "scenario";
    std::vector<std::string> jce_ckpts, jcce_ckpts;

    CLI::App* gen = app.add_subcommand("gen-data", "generate a channel + training-signal dataset");
    add_common(gen, gen_args);
    gen->add_option("--kind", gen_kind, "jce or jcce")->required();

    CLI::App* train = app.add_subcommand("train", "train the amortized encoder pair");
    add_common(train, train_args);
    train->add_option("--kind", train_kind, "jce or jcce")->required();
    train->add_option("--data", train_data, "pre-generated dataset file (optional)");

    CLI::App* sweep = app.add_subcommand("sweep", "run a Monte-Carlo metric sweep");
    add_common(sweep, sweep_args);
    sweep->add_option("--scenario-id", sweep_id, "label written to the CSV");
    sweep->add_option("--jce-checkpoint", jce_ckpts, "JCE checkpoint (repeat per SNR point)");
    sweep->add_option("--jcce-checkpoint", jcce_ckpts, "JCCE checkpoint (repeat per SNR point)");

    CLI::App* report = app.add_subcommand("report", "summarize a metrics CSV");
    report->add_option("--metrics", metrics_path, "metrics.csv from a sweep")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_args, gen_kind);
        if (train->parsed()) return cmd_train(train_args, train_kind, train_data);
        if (sweep->parsed()) return cmd_sweep(sweep_args, jce_ckpts, jcce_ckpts, sweep_id);
        if (report->parsed()) return cmd_report(metrics_path);
    } catch (const missing_artifact_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissing;
    } catch (const numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const training_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
