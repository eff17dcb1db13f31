#include "risvi/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace risvi::io {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace {

using nlohmann::json;

// --- strict JSON helpers ---

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw config_error("unknown key '" + item.key() + "' in " + where);
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

// --- binary primitives ---

struct Writer {
    std::FILE* f = nullptr;

    explicit Writer(const std::string& path) {
        f = std::fopen(path.c_str(), "wb");
        if (!f) throw missing_artifact_error("cannot open for writing: " + path);
    }
    ~Writer() {
        if (f) std::fclose(f);
    }
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void bytes(const void* p, std::size_t n) {
        if (std::fwrite(p, 1, n, f) != n) throw numerical_error("short write");
    }
    void u32(std::uint32_t v) { bytes(&v, sizeof(v)); }
    void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
    void f64(double v) { bytes(&v, sizeof(v)); }
    void rvec(const RVec& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    }
    void rmat(const RMat& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
    void cmat(const CMat& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        bytes(m.data(), sizeof(cxd) * static_cast<std::size_t>(m.size()));
    }
    void cvec(const CVec& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        bytes(v.data(), sizeof(cxd) * static_cast<std::size_t>(v.size()));
    }
};

struct Reader {
    std::FILE* f = nullptr;
    std::string path;

    explicit Reader(const std::string& p) : path(p) {
        f = std::fopen(p.c_str(), "rb");
        if (!f) throw missing_artifact_error("cannot open: " + p);
    }
    ~Reader() {
        if (f) std::fclose(f);
    }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    void bytes(void* p, std::size_t n) {
        if (std::fread(p, 1, n, f) != n) throw config_error("truncated file: " + path);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        bytes(&v, sizeof(v));
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        bytes(&v, sizeof(v));
        return v;
    }
    double f64() {
        double v = 0;
        bytes(&v, sizeof(v));
        return v;
    }
    RVec rvec() {
        const auto n = static_cast<Eigen::Index>(u64());
        RVec v(n);
        bytes(v.data(), sizeof(double) * static_cast<std::size_t>(n));
        return v;
    }
    RMat rmat() {
        const auto r = static_cast<Eigen::Index>(u64());
        const auto c = static_cast<Eigen::Index>(u64());
        RMat m(r, c);
        bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
        return m;
    }
    CMat cmat() {
        const auto r = static_cast<Eigen::Index>(u64());
        const auto c = static_cast<Eigen::Index>(u64());
        CMat m(r, c);
        bytes(m.data(), sizeof(cxd) * static_cast<std::size_t>(m.size()));
        return m;
    }
    CVec cvec() {
        const auto n = static_cast<Eigen::Index>(u64());
        CVec v(n);
        bytes(v.data(), sizeof(cxd) * static_cast<std::size_t>(n));
        return v;
    }
};

void write_magic(Writer& w, const char magic[8]) { w.bytes(magic, 8); }

void expect_magic(Reader& r, const char magic[8], const char* what) {
    char buf[8];
    r.bytes(buf, 8);
    if (std::memcmp(buf, magic, 8) != 0) {
        throw config_error(std::string("not a ") + what + " file: " + r.path);
    }
}

void write_scenario(Writer& w, const channel::SystemConfig& cfg) {
    w.u32(static_cast<std::uint32_t>(cfg.M));
    w.u32(static_cast<std::uint32_t>(cfg.N));
    w.u32(static_cast<std::uint32_t>(cfg.N_p));
    w.u32(static_cast<std::uint32_t>(cfg.N_b));
    w.u32(static_cast<std::uint32_t>(cfg.P));
    w.u32(static_cast<std::uint32_t>(cfg.Q));
    w.u32(cfg.angle_mode == channel::AngleMode::Mode1 ? 0u : 1u);
    w.u32(static_cast<std::uint32_t>(cfg.cluster_count));
    w.f64(cfg.rho);
}

channel::SystemConfig read_scenario(Reader& r) {
    channel::SystemConfig cfg;
    cfg.M = static_cast<int>(r.u32());
    cfg.N = static_cast<int>(r.u32());
    cfg.N_p = static_cast<int>(r.u32());
    cfg.N_b = static_cast<int>(r.u32());
    cfg.P = static_cast<int>(r.u32());
    cfg.Q = static_cast<int>(r.u32());
    cfg.angle_mode = r.u32() == 0 ? channel::AngleMode::Mode1 : channel::AngleMode::Mode2;
    cfg.cluster_count = static_cast<int>(r.u32());
    cfg.rho = r.f64();
    return cfg;
}

void write_clusters(Writer& w, const channel::ClusterSet& cs) {
    w.u32(static_cast<std::uint32_t>(cs.intervals.size()));
    for (int idx : cs.intervals) w.u32(static_cast<std::uint32_t>(idx));
}

channel::ClusterSet read_clusters(Reader& r) {
    channel::ClusterSet cs;
    const std::uint32_t n = r.u32();
    cs.intervals.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) cs.intervals[i] = static_cast<int>(r.u32());
    return cs;
}

void write_encoder(Writer& w, const encoder::EncoderWeights& e) {
    w.u32(static_cast<std::uint32_t>(e.input_dim));
    w.u32(static_cast<std::uint32_t>(e.hidden));
    w.f64(e.dropout_keep);
    w.f64(e.bn_momentum);
    w.f64(e.bn_eps);
    w.u32(static_cast<std::uint32_t>(e.head_specs.size()));
    for (const auto& spec : e.head_specs) {
        w.u32(static_cast<std::uint32_t>(spec.kind));
        w.u32(static_cast<std::uint32_t>(spec.out));
        w.f64(spec.constant);
    }
    auto bn = [&](const encoder::BatchNormParams& p) {
        w.rvec(p.gamma);
        w.rvec(p.beta);
        w.rvec(p.run_mean);
        w.rvec(p.run_var);
    };
    bn(e.bn0);
    w.rmat(e.fc1.W);
    w.rvec(e.fc1.b);
    bn(e.bn1);
    w.rmat(e.fc2.W);
    w.rvec(e.fc2.b);
    bn(e.bn2);
    for (const auto& h : e.heads) {
        w.rmat(h.W);
        w.rvec(h.b);
    }
}

encoder::EncoderWeights read_encoder(Reader& r) {
    encoder::EncoderWeights e;
    e.input_dim = static_cast<int>(r.u32());
    e.hidden = static_cast<int>(r.u32());
    e.dropout_keep = r.f64();
    e.bn_momentum = r.f64();
    e.bn_eps = r.f64();
    const std::uint32_t n_heads = r.u32();
    for (std::uint32_t h = 0; h < n_heads; ++h) {
        encoder::HeadSpec spec;
        spec.kind = static_cast<encoder::HeadKind>(r.u32());
        spec.out = static_cast<int>(r.u32());
        spec.constant = r.f64();
        e.head_specs.push_back(spec);
    }
    auto bn = [&]() {
        encoder::BatchNormParams p;
        p.gamma = r.rvec();
        p.beta = r.rvec();
        p.run_mean = r.rvec();
        p.run_var = r.rvec();
        return p;
    };
    e.bn0 = bn();
    e.fc1.W = r.rmat();
    e.fc1.b = r.rvec();
    e.bn1 = bn();
    e.fc2.W = r.rmat();
    e.fc2.b = r.rvec();
    e.bn2 = bn();
    for (std::uint32_t h = 0; h < n_heads; ++h) {
        encoder::LayerParams lp;
        lp.W = r.rmat();
        lp.b = r.rvec();
        e.heads.push_back(std::move(lp));
    }
    if (!all_finite(e.fc1.W) || !all_finite(e.fc2.W)) {
        throw config_error("checkpoint holds non-finite weights: " + r.path);
    }
    return e;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    check_keys(doc, "config", {"seed", "scenario", "train", "heads", "priors", "protocol", "sweep"});

    RunConfig cfg;
    read_field(doc, "seed", cfg.seed);

    if (!doc.contains("scenario")) throw config_error("config: missing 'scenario'");
    {
        const json& s = doc.at("scenario");
        check_keys(s, "scenario",
                   {"M", "N", "N_p", "N_b", "rho", "rho_db", "P", "Q", "angle_mode", "cluster_count"});
        read_field(s, "M", cfg.scenario.M);
        read_field(s, "N", cfg.scenario.N);
        read_field(s, "N_p", cfg.scenario.N_p);
        read_field(s, "N_b", cfg.scenario.N_b);
        read_field(s, "P", cfg.scenario.P);
        read_field(s, "Q", cfg.scenario.Q);
        read_field(s, "cluster_count", cfg.scenario.cluster_count);
        if (s.contains("rho") && s.contains("rho_db")) {
            throw config_error("scenario: give either 'rho' or 'rho_db', not both");
        }
        if (s.contains("rho")) cfg.scenario.rho = s.at("rho").get<double>();
        if (s.contains("rho_db")) cfg.scenario.rho = std::pow(10.0, s.at("rho_db").get<double>() / 10.0);
        if (s.contains("angle_mode")) {
            const std::string mode = s.at("angle_mode").get<std::string>();
            if (mode == "mode1") {
                cfg.scenario.angle_mode = channel::AngleMode::Mode1;
            } else if (mode == "mode2") {
                cfg.scenario.angle_mode = channel::AngleMode::Mode2;
            } else {
                throw config_error("scenario.angle_mode must be 'mode1' or 'mode2'");
            }
        }
        try {
            cfg.scenario.validate();
        } catch (const std::exception& e) {
            throw config_error(std::string("scenario: ") + e.what());
        }
    }

    if (doc.contains("train")) {
        const json& t = doc.at("train");
        check_keys(t, "train",
                   {"dataset_size", "mc_samples", "l3_mc_samples", "initial_lr", "max_steps",
                    "plateau_patience", "batch_size", "holdout_frac", "eval_every", "max_lr_halvings",
                    "eval_mc_samples", "warmup_steps"});
        read_field(t, "dataset_size", cfg.train.dataset_size);
        read_field(t, "mc_samples", cfg.train.mc_samples);
        read_field(t, "l3_mc_samples", cfg.train.l3_mc_samples);
        read_field(t, "initial_lr", cfg.train.initial_lr);
        read_field(t, "max_steps", cfg.train.max_steps);
        read_field(t, "plateau_patience", cfg.train.plateau_patience);
        read_field(t, "batch_size", cfg.train.batch_size);
        read_field(t, "holdout_frac", cfg.train.holdout_frac);
        read_field(t, "eval_every", cfg.train.eval_every);
        read_field(t, "max_lr_halvings", cfg.train.max_lr_halvings);
        read_field(t, "eval_mc_samples", cfg.train.eval_mc_samples);
        read_field(t, "warmup_steps", cfg.train.warmup_steps);
        try {
            cfg.train.validate();
        } catch (const std::exception& e) {
            throw config_error(std::string("train: ") + e.what());
        }
    }

    if (doc.contains("heads")) {
        const json& h = doc.at("heads");
        check_keys(h, "heads", {"c_mean_f", "c_mean_g", "c_b_f", "c_b_g", "kappa"});
        read_field(h, "c_mean_f", cfg.heads.c_mean_f);
        read_field(h, "c_mean_g", cfg.heads.c_mean_g);
        read_field(h, "c_b_f", cfg.heads.c_b_f);
        read_field(h, "c_b_g", cfg.heads.c_b_g);
        read_field(h, "kappa", cfg.heads.kappa);
    }

    if (doc.contains("priors")) {
        const json& p = doc.at("priors");
        check_keys(p, "priors", {"alpha_h", "alpha_G", "alpha_d"});
        read_field(p, "alpha_h", cfg.priors.alpha_h);
        read_field(p, "alpha_G", cfg.priors.alpha_G);
        read_field(p, "alpha_d", cfg.priors.alpha_d);
        if (cfg.priors.alpha_h <= 0 || cfg.priors.alpha_G <= 0 || cfg.priors.alpha_d <= 0) {
            throw config_error("priors: scales must be positive");
        }
    }

    if (doc.contains("protocol")) {
        const json& p = doc.at("protocol");
        check_keys(p, "protocol", {"T_G_ms", "T_h_ms", "slots_per_block"});
        read_field(p, "T_G_ms", cfg.protocol.T_G_ms);
        read_field(p, "T_h_ms", cfg.protocol.T_h_ms);
        read_field(p, "slots_per_block", cfg.protocol.slots_per_block);
    }

    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        check_keys(s, "sweep", {"snr_db", "trials", "methods"});
        if (s.contains("snr_db")) cfg.sweep_snr_db = s.at("snr_db").get<std::vector<double>>();
        read_field(s, "trials", cfg.sweep_trials);
        if (s.contains("methods")) {
            cfg.sweep_methods.clear();
            for (const auto& name : s.at("methods")) {
                cfg.sweep_methods.push_back(harness::method_from_name(name.get<std::string>()));
            }
        }
        if (cfg.sweep_trials < 0) throw config_error("sweep.trials must be >= 0");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

std::string echo_run_config(const RunConfig& cfg) {
    json doc;
    doc["seed"] = cfg.seed;
    doc["scenario"] = {{"M", cfg.scenario.M},
                       {"N", cfg.scenario.N},
                       {"N_p", cfg.scenario.N_p},
                       {"N_b", cfg.scenario.N_b},
                       {"rho", cfg.scenario.rho},
                       {"P", cfg.scenario.P},
                       {"Q", cfg.scenario.Q},
                       {"angle_mode",
                        cfg.scenario.angle_mode == channel::AngleMode::Mode1 ? "mode1" : "mode2"},
                       {"cluster_count", cfg.scenario.cluster_count}};
    doc["train"] = {{"dataset_size", cfg.train.dataset_size},
                    {"mc_samples", cfg.train.mc_samples},
                    {"l3_mc_samples", cfg.train.l3_mc_samples},
                    {"initial_lr", cfg.train.initial_lr},
                    {"max_steps", cfg.train.max_steps},
                    {"plateau_patience", cfg.train.plateau_patience},
                    {"batch_size", cfg.train.batch_size},
                    {"holdout_frac", cfg.train.holdout_frac},
                    {"eval_every", cfg.train.eval_every},
                    {"max_lr_halvings", cfg.train.max_lr_halvings},
                    {"eval_mc_samples", cfg.train.eval_mc_samples},
                    {"warmup_steps", cfg.train.warmup_steps}};
    doc["heads"] = {{"c_mean_f", cfg.heads.c_mean_f},
                    {"c_mean_g", cfg.heads.c_mean_g},
                    {"c_b_f", cfg.heads.c_b_f},
                    {"c_b_g", cfg.heads.c_b_g},
                    {"kappa", cfg.heads.kappa}};
    doc["priors"] = {{"alpha_h", cfg.priors.alpha_h},
                     {"alpha_G", cfg.priors.alpha_G},
                     {"alpha_d", cfg.priors.alpha_d}};
    doc["protocol"] = {{"T_G_ms", cfg.protocol.T_G_ms},
                       {"T_h_ms", cfg.protocol.T_h_ms},
                       {"slots_per_block", cfg.protocol.slots_per_block}};
    std::vector<std::string> method_names;
    for (auto m : cfg.sweep_methods) method_names.push_back(harness::method_name(m));
    doc["sweep"] = {{"snr_db", cfg.sweep_snr_db}, {"trials", cfg.sweep_trials}, {"methods", method_names}};
    return doc.dump(2) + "\n";
}

void write_dataset(const std::string& path, const Dataset& ds) {
    Writer w(path);
    write_magic(w, "RISVIDS1");
    w.u32(ds.kind == inference::EstimatorKind::JCE ? 0u : 1u);
    write_scenario(w, ds.cfg);
    w.u64(ds.seed);
    write_clusters(w, ds.clusters);
    w.cmat(ds.plan.Phi);
    w.cvec(ds.plan.x);
    w.u64(static_cast<std::uint64_t>(ds.set.signals.size()));
    for (std::size_t i = 0; i < ds.set.signals.size(); ++i) {
        if (ds.kind == inference::EstimatorKind::JCE) {
            w.cvec(ds.set.h_true[i]);
        } else {
            w.rvec(ds.set.d_true[i]);
        }
        w.cmat(ds.set.G_true[i]);
        w.cmat(ds.set.signals[i]);
    }
}

Dataset read_dataset(const std::string& path) {
    Reader r(path);
    expect_magic(r, "RISVIDS1", "dataset");
    Dataset ds;
    ds.kind = r.u32() == 0 ? inference::EstimatorKind::JCE : inference::EstimatorKind::JCCE;
    ds.cfg = read_scenario(r);
    ds.seed = r.u64();
    ds.clusters = read_clusters(r);
    ds.plan.Phi = r.cmat();
    ds.plan.x = r.cvec();
    const std::uint64_t count = r.u64();
    ds.set.kind = ds.kind;
    for (std::uint64_t i = 0; i < count; ++i) {
        if (ds.kind == inference::EstimatorKind::JCE) {
            ds.set.h_true.push_back(r.cvec());
        } else {
            ds.set.d_true.push_back(r.rvec());
        }
        ds.set.G_true.push_back(r.cmat());
        ds.set.signals.push_back(r.cmat());
    }
    return ds;
}

void write_checkpoint(const std::string& path, const inference::EncoderPair& model) {
    Writer w(path);
    write_magic(w, "RISVICK1");
    w.u32(model.kind == inference::EstimatorKind::JCE ? 0u : 1u);
    write_scenario(w, model.cfg);
    write_clusters(w, model.clusters);
    w.cmat(model.plan.Phi);
    w.cvec(model.plan.x);
    w.f64(model.heads.c_mean_f);
    w.f64(model.heads.c_mean_g);
    w.f64(model.heads.c_b_f);
    w.f64(model.heads.c_b_g);
    w.f64(model.heads.kappa);
    w.f64(model.priors.alpha_h);
    w.f64(model.priors.alpha_G);
    w.f64(model.priors.alpha_d);
    w.cmat(model.static_G);
    write_encoder(w, model.F);
    write_encoder(w, model.G);
}

inference::EncoderPair read_checkpoint(const std::string& path) {
    Reader r(path);
    expect_magic(r, "RISVICK1", "checkpoint");
    inference::EncoderPair model;
    model.kind = r.u32() == 0 ? inference::EstimatorKind::JCE : inference::EstimatorKind::JCCE;
    model.cfg = read_scenario(r);
    model.clusters = read_clusters(r);
    model.plan.Phi = r.cmat();
    model.plan.x = r.cvec();
    model.heads.c_mean_f = r.f64();
    model.heads.c_mean_g = r.f64();
    model.heads.c_b_f = r.f64();
    model.heads.c_b_g = r.f64();
    model.heads.kappa = r.f64();
    model.priors.alpha_h = r.f64();
    model.priors.alpha_G = r.f64();
    model.priors.alpha_d = r.f64();
    model.static_G = r.cmat();
    model.F = read_encoder(r);
    model.G = read_encoder(r);
    return model;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw missing_artifact_error("cannot open for writing: " + path);
    os << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw missing_artifact_error("cannot open: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace risvi::io
