#include "risvi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "risvi/numerics.hpp"
#include "risvi/threading.hpp"

namespace risvi::harness {

std::string method_name(Method m) {
    switch (m) {
        case Method::JCE: return "jce";
        case Method::JCCE: return "jcce";
        case Method::PerfectCsi: return "perfect_csi";
        case Method::PcPcov: return "pc_pcov";
        case Method::RandomPhase: return "random_phase";
    }
    throw contract_error("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
    if (name == "jce") return Method::JCE;
    if (name == "jcce") return Method::JCCE;
    if (name == "perfect_csi") return Method::PerfectCsi;
    if (name == "pc_pcov") return Method::PcPcov;
    if (name == "random_phase") return Method::RandomPhase;
    throw config_error("unknown method: " + name);
}

namespace {

double nmse_impl(double err2, double ref2) {
    if (ref2 <= 0.0) throw std::domain_error("nmse: reference has zero norm");
    return err2 / ref2;
}

}  // namespace

double nmse(const CVec& est, const CVec& truth) {
    require_dim(est.size() == truth.size(), "nmse: size mismatch");
    return nmse_impl((est - truth).squaredNorm(), truth.squaredNorm());
}

double nmse(const CMat& est, const CMat& truth) {
    require_dim(est.rows() == truth.rows() && est.cols() == truth.cols(), "nmse: shape mismatch");
    return nmse_impl((est - truth).squaredNorm(), truth.squaredNorm());
}

double nmse(const RVec& est, const RVec& truth) {
    require_dim(est.size() == truth.size(), "nmse: size mismatch");
    return nmse_impl((est - truth).squaredNorm(), truth.squaredNorm());
}

double effective_capacity(double capacity, double alpha) {
    require(alpha >= 0.0 && alpha <= 1.0, "effective_capacity: alpha must be in [0, 1]");
    return (1.0 - alpha) * capacity;
}

double overhead_fraction(const ProtocolSpec& p, int N_p, int N_b) {
    require(p.T_G_ms >= p.T_h_ms && p.T_h_ms > 0.0, "overhead_fraction: need T_G >= T_h > 0");
    require(p.slots_per_block >= 1, "overhead_fraction: slots_per_block must be >= 1");
    require(N_p >= 0 && N_b >= 1, "overhead_fraction: bad pilot counts");
    double alpha = 0.0;
    if (p.scheme == Scheme::JCE) {
        alpha = static_cast<double>(N_p) / p.slots_per_block;
    } else {
        const double blocks_per_window = std::floor(p.T_G_ms / p.T_h_ms);
        alpha = static_cast<double>(N_p) * N_b / (p.slots_per_block * blocks_per_window);
    }
    require(alpha <= 1.0, "overhead_fraction: pilots exceed the transmission budget");
    return alpha;
}

double overhead_fraction(const ProtocolSpec& p, const SystemConfig& cfg) {
    return overhead_fraction(p, cfg.N_p, cfg.N_b);
}

namespace {

CVec top_direction(const CMat& A) {
    if (A.rows() == A.cols()) {
        const double scale = std::max(A.norm(), 1e-300);
        if ((A - A.adjoint()).norm() <= 1e-8 * scale) {
            return numerics::eigh(0.5 * (A + A.adjoint())).P.col(0);
        }
    }
    return numerics::svd(A).V.col(0);
}

}  // namespace

double eig_alignment(const CMat& A_hat, const CMat& A_ref) {
    const CVec a = top_direction(A_hat);
    const CVec b = top_direction(A_ref);
    require_dim(a.size() == b.size(), "eig_alignment: dimension mismatch");
    return std::abs((a.adjoint() * b)(0, 0));
}

long long flop_count(FlopModel model, FlopEncoder enc, long long M, long long N, long long N_p) {
    require(M >= 1 && N >= 1 && N_p >= 1, "flop_count: dimensions must be positive");
    const long long obs = M * N_p;
    if (model == FlopModel::JCE) {
        const long long head = enc == FlopEncoder::F ? 3600 * N : 3600 * M * N;
        return 1087 * obs + head + 163740;
    }
    const long long preprocess = 4 * obs * N * (obs + 1) + 2 * obs;
    const long long head = enc == FlopEncoder::F ? 600 * N : 3600 * M * N;
    return preprocess + 1087 * obs * obs + head + 163740;
}

namespace {

struct TrialOutput {
    std::vector<MetricRecord> records;
};

MetricRecord score_method(const SweepScenario& sc, const SystemConfig& cfg, double snr_db,
                          int trial, Method method, const channel::ChannelRealization& real,
                          const RVec& d_true, const CMat& R_true, const CVec& h_eval,
                          const CMat* Y, const CMat* Ytil, RandomStream& trial_rng) {
    MetricRecord rec;
    rec.scenario = sc.id;
    rec.snr_db = snr_db;
    rec.trial = trial;
    rec.method = method;

    ProtocolSpec proto = sc.protocol;
    switch (method) {
        case Method::PerfectCsi: {
            const auto v = phaseopt::phases_icsi(real.G, real.h);
            rec.capacity = phaseopt::capacity(real.G, v.v, real.h, cfg.rho);
            proto.scheme = Scheme::JCE;
            rec.effective_capacity =
                effective_capacity(rec.capacity, overhead_fraction(proto, cfg));
            break;
        }
        case Method::RandomPhase: {
            RandomStream phase_rng = trial_rng.child("random_phase");
            RVec theta(cfg.N);
            for (int i = 0; i < cfg.N; ++i) theta(i) = phase_rng.uniform(0.0, kTwoPi);
            const auto v = phaseopt::PhaseConfig::from_theta(theta);
            rec.capacity = phaseopt::capacity(real.G, v.v, real.h, cfg.rho);
            rec.effective_capacity = rec.capacity;  // no training budget spent
            break;
        }
        case Method::PcPcov: {
            const auto v = phaseopt::phases_scsi(real.G, R_true);
            rec.capacity = phaseopt::capacity(real.G, v.v, h_eval, cfg.rho);
            proto.scheme = Scheme::JCCE;
            rec.effective_capacity =
                effective_capacity(rec.capacity, overhead_fraction(proto, cfg));
            break;
        }
        case Method::JCE: {
            const auto it = sc.jce_models.find(snr_db);
            if (it == sc.jce_models.end() || !it->second) {
                throw missing_artifact_error("run_sweep: no JCE checkpoint for scenario '" + sc.id +
                                             "' at " + std::to_string(snr_db) + " dB");
            }
            const auto est = inference::estimate_jce(*it->second, *Y);
            const auto v = phaseopt::phases_icsi(est.G_hat, est.h_hat);
            rec.capacity = phaseopt::capacity(real.G, v.v, real.h, cfg.rho);
            proto.scheme = Scheme::JCE;
            rec.effective_capacity =
                effective_capacity(rec.capacity, overhead_fraction(proto, cfg));
            rec.nmse_h = nmse(est.h_hat, real.h);
            rec.nmse_G = nmse(est.G_hat, real.G);
            rec.eig_alignment = eig_alignment(est.G_hat, real.G);
            break;
        }
        case Method::JCCE: {
            const auto it = sc.jcce_models.find(snr_db);
            if (it == sc.jcce_models.end() || !it->second) {
                throw missing_artifact_error("run_sweep: no JCCE checkpoint for scenario '" + sc.id +
                                             "' at " + std::to_string(snr_db) + " dB");
            }
            // two-timescale semantics: the deployment's quasi-static G with
            // this trial's user-side scene
            const inference::EncoderPair& model = *it->second;
            const auto est = inference::estimate_jcce(model, *Ytil);
            const auto v = phaseopt::phases_scsi(est.G_hat, est.R_h_hat);
            rec.capacity = phaseopt::capacity(model.static_G, v.v, h_eval, cfg.rho);
            proto.scheme = Scheme::JCCE;
            rec.effective_capacity =
                effective_capacity(rec.capacity, overhead_fraction(proto, cfg));
            rec.nmse_G = nmse(est.G_hat, model.static_G);
            rec.nmse_d = nmse(est.d_hat, d_true);
            rec.eig_alignment = eig_alignment(est.R_h_hat, R_true);
            break;
        }
    }
    return rec;
}

}  // namespace

std::vector<MetricRecord> run_sweep(const std::vector<SweepScenario>& scenarios,
                                    const std::vector<double>& snr_db, int trials,
                                    const std::vector<Method>& methods, RandomStream& rng,
                                    int threads) {
    require(trials >= 0, "run_sweep: trials must be >= 0");
    std::vector<MetricRecord> all;
    if (trials == 0 || methods.empty() || snr_db.empty() || scenarios.empty()) return all;

    const bool wants_jce = std::count(methods.begin(), methods.end(), Method::JCE) > 0;
    const bool wants_jcce = std::count(methods.begin(), methods.end(), Method::JCCE) > 0;

    for (std::size_t si = 0; si < scenarios.size(); ++si) {
        const SweepScenario& sc = scenarios[si];
        sc.cfg.validate();
        RandomStream scen_rng = rng.child(sc.id).child(static_cast<std::uint64_t>(si));
        for (std::size_t pi = 0; pi < snr_db.size(); ++pi) {
            SystemConfig cfg = sc.cfg;
            cfg.rho = std::pow(10.0, snr_db[pi] / 10.0);
            RandomStream point_rng = scen_rng.child(static_cast<std::uint64_t>(pi));

            std::vector<std::vector<MetricRecord>> per_trial(static_cast<std::size_t>(trials));
            parallel_for(
                static_cast<std::size_t>(trials),
                [&](std::size_t t) {
                    RandomStream trial_rng = point_rng.child(static_cast<std::uint64_t>(t));
                    RandomStream chan_rng = trial_rng.child("chan");
                    const channel::ClusterSet* clusters =
                        cfg.angle_mode == channel::AngleMode::Mode2 ? &sc.clusters : nullptr;
                    const auto real = channel::gen_channels(cfg, chan_rng, clusters);
                    const RVec d_true =
                        channel::angular_spectrum(channel::ccm_ground_truth(real, cfg));
                    const CMat R_true = channel::ccm_from_d(d_true);
                    RandomStream h_rng = trial_rng.child("h_eval");
                    const CVec h_eval = channel::sample_h_from_d(d_true, h_rng);

                    CMat Y, Ytil;
                    if (wants_jce) {
                        RandomStream rx_rng = trial_rng.child("rx_jce");
                        Y = signal::rx_train_jce(real, sc.plan, cfg.rho, rx_rng);
                    }
                    if (wants_jcce) {
                        const auto it = sc.jcce_models.find(snr_db[pi]);
                        if (it == sc.jcce_models.end() || !it->second) {
                            throw missing_artifact_error(
                                "run_sweep: no JCCE checkpoint for scenario '" + sc.id + "' at " +
                                std::to_string(snr_db[pi]) + " dB");
                        }
                        RandomStream rx_rng = trial_rng.child("rx_jcce");
                        Ytil = signal::rx_train_jcce(it->second->static_G, d_true, sc.plan, cfg, rx_rng);
                    }
                    for (Method m : methods) {
                        per_trial[t].push_back(score_method(sc, cfg, snr_db[pi],
                                                            static_cast<int>(t), m, real, d_true,
                                                            R_true, h_eval, &Y, &Ytil, trial_rng));
                    }
                },
                threads);
            for (auto& recs : per_trial) {
                for (auto& r : recs) all.push_back(std::move(r));
            }
        }
    }
    return all;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); }

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<MetricRecord>& records) {
    os << "scenario,snr_db,trial,method,capacity,effective_capacity,nmse_h,nmse_G,nmse_d,eig_alignment\n";
    for (const auto& r : records) {
        os << r.scenario << ',' << fmt_double(r.snr_db) << ',' << r.trial << ','
           << method_name(r.method) << ',' << fmt_double(r.capacity) << ','
           << fmt_opt(r.effective_capacity) << ',' << fmt_opt(r.nmse_h) << ',' << fmt_opt(r.nmse_G)
           << ',' << fmt_opt(r.nmse_d) << ',' << fmt_opt(r.eig_alignment) << '\n';
    }
}

std::vector<MetricRecord> read_metrics_csv(std::istream& is) {
    std::vector<MetricRecord> out;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 10) fields.emplace_back();
        MetricRecord r;
        r.scenario = fields[0];
        r.snr_db = std::stod(fields[1]);
        r.trial = std::stoi(fields[2]);
        r.method = method_from_name(fields[3]);
        r.capacity = std::stod(fields[4]);
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        r.effective_capacity = opt(fields[5]);
        r.nmse_h = opt(fields[6]);
        r.nmse_G = opt(fields[7]);
        r.nmse_d = opt(fields[8]);
        r.eig_alignment = opt(fields[9]);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace risvi::harness
