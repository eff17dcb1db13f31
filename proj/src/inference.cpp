#include "risvi/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "risvi/numerics.hpp"
#include "risvi/threading.hpp"

namespace risvi::inference {

using encoder::EncoderWeights;
using encoder::ForwardOptions;
using encoder::ForwardTrace;
using encoder::HeadKind;
using encoder::HeadSpec;

void TrainConfig::validate() const {
    require(dataset_size >= 1, "TrainConfig: dataset_size must be >= 1");
    require(mc_samples >= 1 && l3_mc_samples >= 1 && eval_mc_samples >= 1,
            "TrainConfig: sample counts must be >= 1");
    require(initial_lr > 0.0, "TrainConfig: initial_lr must be > 0");
    require(max_steps >= 0, "TrainConfig: max_steps must be >= 0");
    require(plateau_patience >= 1, "TrainConfig: plateau_patience must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(holdout_frac >= 0.0 && holdout_frac < 1.0, "TrainConfig: holdout_frac out of range");
    require(eval_every >= 1, "TrainConfig: eval_every must be >= 1");
    require(warmup_steps >= 0, "TrainConfig: warmup_steps must be >= 0");
}

int encoder_input_dim(EstimatorKind kind, const SystemConfig& cfg) {
    const int obs = cfg.M * cfg.N_p;
    return kind == EstimatorKind::JCE ? 2 * obs : 2 * obs * obs;
}

EncoderPair init_models(EstimatorKind kind, const SystemConfig& cfg, const HeadConfig& heads,
                        const elbo::PriorParams& priors, RandomStream& scenario_rng) {
    cfg.validate();
    EncoderPair pair;
    pair.kind = kind;
    pair.cfg = cfg;
    pair.heads = heads;
    pair.priors = priors;

    RandomStream plan_rng = scenario_rng.child("pilot");
    pair.plan = signal::make_pilot_plan(cfg, plan_rng);
    if (cfg.angle_mode == channel::AngleMode::Mode2) {
        RandomStream cluster_rng = scenario_rng.child("clusters");
        pair.clusters = channel::pick_clusters(cfg, cluster_rng);
    }

    const int in_dim = encoder_input_dim(kind, cfg);
    const double c_b_f = heads.c_b_f > 0.0 ? heads.c_b_f : static_cast<double>(cfg.N);
    const double c_b_g = heads.c_b_g > 0.0 ? heads.c_b_g : static_cast<double>(cfg.M) * cfg.N;

    std::vector<HeadSpec> f_heads;
    if (kind == EstimatorKind::JCE) {
        f_heads = {{HeadKind::MeanTanh, 2 * cfg.N, heads.c_mean_f},
                   {HeadKind::ScaleSoftmax, cfg.N, c_b_f}};
    } else {
        f_heads = {{HeadKind::ShapeSigmoid, cfg.N, heads.kappa}};
    }
    const std::vector<HeadSpec> g_heads = {{HeadKind::MeanTanh, 2 * cfg.M * cfg.N, heads.c_mean_g},
                                           {HeadKind::ScaleSoftmax, cfg.M * cfg.N, c_b_g}};

    RandomStream init_f = scenario_rng.child("init_f");
    RandomStream init_g = scenario_rng.child("init_g");
    pair.F = encoder::init_encoder(in_dim, f_heads, init_f);
    pair.G = encoder::init_encoder(in_dim, g_heads, init_g);

    if (kind == EstimatorKind::JCCE) {
        RandomStream g_rng = scenario_rng.child("static_G");
        const channel::ClusterSet* cl =
            cfg.angle_mode == channel::AngleMode::Mode2 ? &pair.clusters : nullptr;
        pair.static_G = channel::gen_channels(cfg, g_rng, cl).G;
    }
    return pair;
}

TrainingSet generate_dataset(const EncoderPair& model, int count, RandomStream& scenario_rng,
                             int threads) {
    require(count >= 1, "generate_dataset: count must be >= 1");
    const SystemConfig& cfg = model.cfg;
    TrainingSet set;
    set.kind = model.kind;
    set.signals.resize(static_cast<std::size_t>(count));
    set.G_true.resize(static_cast<std::size_t>(count));
    if (model.kind == EstimatorKind::JCE) {
        set.h_true.resize(static_cast<std::size_t>(count));
    } else {
        set.d_true.resize(static_cast<std::size_t>(count));
    }

    RandomStream base = scenario_rng.child("samples");
    const channel::ClusterSet* clusters =
        cfg.angle_mode == channel::AngleMode::Mode2 ? &model.clusters : nullptr;

    parallel_for(
        static_cast<std::size_t>(count),
        [&](std::size_t i) {
            RandomStream rng = base.child(static_cast<std::uint64_t>(i));
            const auto real = channel::gen_channels(cfg, rng, clusters);
            if (model.kind == EstimatorKind::JCE) {
                set.G_true[i] = real.G;
                set.h_true[i] = real.h;
                set.signals[i] = signal::rx_train_jce(real, model.plan, cfg.rho, rng);
            } else {
                // fresh user-side scene over the scenario's quasi-static G
                set.G_true[i] = model.static_G;
                const RVec d = channel::angular_spectrum(channel::ccm_ground_truth(real, cfg));
                set.d_true[i] = d;
                set.signals[i] = signal::rx_train_jcce(model.static_G, d, model.plan, cfg, rng);
            }
        },
        threads);
    return set;
}

elbo::AuxParamsJCE aux_jce_from_heads(const std::vector<RVec>& f_out, const std::vector<RVec>& g_out,
                                      int M, int N) {
    elbo::AuxParamsJCE p;
    p.m = encoder::complex_from_head(f_out[0]);
    p.b = f_out[1].cwiseMax(elbo::kScaleFloor);
    const CVec mm = encoder::complex_from_head(g_out[0]);
    p.Mm = Eigen::Map<const CMat>(mm.data(), M, N);
    p.B = Eigen::Map<const RMat>(g_out[1].data(), M, N).cwiseMax(elbo::kScaleFloor);
    return p;
}

elbo::AuxParamsJCCE aux_jcce_from_heads(const std::vector<RVec>& f_out, const std::vector<RVec>& g_out,
                                        int M, int N) {
    elbo::AuxParamsJCCE p;
    p.k = f_out[0];
    const CVec mm = encoder::complex_from_head(g_out[0]);
    p.Mm = Eigen::Map<const CMat>(mm.data(), M, N);
    p.B = Eigen::Map<const RMat>(g_out[1].data(), M, N).cwiseMax(elbo::kScaleFloor);
    return p;
}

namespace {

RVec encoder_input(const EncoderPair& model, const CMat& signal) {
    if (model.kind == EstimatorKind::JCE) return encoder::complex_to_input(signal);
    return encoder::complex_to_input(signal::preprocess_jcce(signal, static_cast<int>(signal.cols())));
}

std::vector<RVec> heads_at_col(const ForwardTrace& trace, Eigen::Index col) {
    std::vector<RVec> out;
    out.reserve(trace.head_out.size());
    for (const auto& m : trace.head_out) out.push_back(m.col(col));
    return out;
}

struct SampleLoss {
    double value = 0.0;
    std::vector<RVec> up_f;
    std::vector<RVec> up_g;
};

// Per-sample loss and the upstream gradients for both encoders. The stream
// must be unique per (step, sample) so thread count cannot matter.
SampleLoss sample_loss(const EncoderPair& model, const elbo::JcePrecomp& pre, const CMat& signal,
                       const std::vector<RVec>& f_out, const std::vector<RVec>& g_out, int D, int S,
                       RandomStream rng) {
    const int M = model.cfg.M, N = model.cfg.N;
    SampleLoss out;
    if (model.kind == EstimatorKind::JCE) {
        const elbo::AuxParamsJCE p = aux_jce_from_heads(f_out, g_out, M, N);
        const elbo::JceLoss loss =
            elbo::jce_total_loss(p, signal, pre, model.cfg.rho, model.priors, D, rng);
        out.value = loss.value;
        out.up_f = {encoder::complex_grad_to_head(loss.grad.m), loss.grad.b};
        const Eigen::Map<const CVec> gm(loss.grad.Mm.data(), M * N);
        const Eigen::Map<const RVec> gb(loss.grad.B.data(), M * N);
        out.up_g = {encoder::complex_grad_to_head(gm), gb};
    } else {
        const elbo::AuxParamsJCCE p = aux_jcce_from_heads(f_out, g_out, M, N);
        const elbo::JcceLoss loss =
            elbo::jcce_total_loss(p, signal, model.plan, model.cfg, model.priors, D, S, rng);
        out.value = loss.value;
        out.up_f = {loss.grad.k};
        const Eigen::Map<const CVec> gm(loss.grad.Mm.data(), M * N);
        const Eigen::Map<const RVec> gb(loss.grad.B.data(), M * N);
        out.up_g = {encoder::complex_grad_to_head(gm), gb};
    }
    return out;
}

double holdout_score(EncoderPair& model, const elbo::JcePrecomp& pre, const TrainingSet& set,
                     const std::vector<int>& holdout, const RMat& inputs, const TrainConfig& tc,
                     RandomStream& fixed_rng, int threads) {
    if (holdout.empty()) return 0.0;
    ForwardOptions opt;  // eval mode
    RandomStream unused(0);
    RMat X(inputs.rows(), static_cast<Eigen::Index>(holdout.size()));
    for (std::size_t j = 0; j < holdout.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = inputs.col(holdout[j]);
    const ForwardTrace tf = encoder::forward(model.F, X, opt, unused);
    const ForwardTrace tg = encoder::forward(model.G, X, opt, unused);

    std::vector<double> values(holdout.size(), 0.0);
    parallel_for(
        holdout.size(),
        [&](std::size_t j) {
            const Eigen::Index col = static_cast<Eigen::Index>(j);
            // per-sample streams fixed across evaluations so scores compare
            RandomStream rng = fixed_rng.child(static_cast<std::uint64_t>(holdout[j]));
            values[j] = sample_loss(model, pre, set.signals[static_cast<std::size_t>(holdout[j])],
                                    heads_at_col(tf, col), heads_at_col(tg, col), tc.eval_mc_samples,
                                    tc.l3_mc_samples, rng)
                            .value;
        },
        threads);
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(holdout.size());
}

}  // namespace

TrainResult train_amortized(EstimatorKind kind, const SystemConfig& cfg, const TrainConfig& tc,
                            const HeadConfig& heads, const elbo::PriorParams& priors,
                            RandomStream& scenario_rng, int threads, const TrainingSet* dataset) {
    tc.validate();
    TrainResult result;
    result.model = init_models(kind, cfg, heads, priors, scenario_rng);
    EncoderPair& model = result.model;

    TrainingSet generated;
    if (!dataset) {
        RandomStream data_rng = scenario_rng.child("data");
        generated = generate_dataset(model, tc.dataset_size, data_rng, threads);
        dataset = &generated;
    }
    const int n = static_cast<int>(dataset->signals.size());

    const elbo::JcePrecomp pre = kind == EstimatorKind::JCE
                                     ? elbo::make_jce_precomp(model.plan, cfg.M)
                                     : elbo::JcePrecomp{};

    // cached encoder inputs
    const int in_dim = encoder_input_dim(kind, cfg);
    RMat inputs(in_dim, n);
    parallel_for(
        static_cast<std::size_t>(n),
        [&](std::size_t i) {
            inputs.col(static_cast<Eigen::Index>(i)) =
                encoder_input(model, dataset->signals[i]);
        },
        threads);

    // deterministic holdout split
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    RandomStream split_rng = scenario_rng.child("split");
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(split_rng.uniform() * (i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    const int n_holdout = std::min(n - 1, static_cast<int>(std::lround(tc.holdout_frac * n)));
    const std::vector<int> holdout(order.begin(), order.begin() + n_holdout);
    const std::vector<int> train(order.begin() + n_holdout, order.end());
    require(!train.empty(), "train_amortized: no training samples after the holdout split");

    encoder::AdamState adam_f = encoder::AdamState::like(model.F);
    encoder::AdamState adam_g = encoder::AdamState::like(model.G);

    RandomStream batch_rng = scenario_rng.child("batches");
    RandomStream dropout_rng = scenario_rng.child("dropout");
    RandomStream mc_rng = scenario_rng.child("mc");
    RandomStream holdout_rng = scenario_rng.child("holdout_mc");

    double lr = tc.initial_lr;
    int halvings = 0;
    int since_best = 0;
    double best = std::numeric_limits<double>::infinity();
    EncoderWeights best_f = model.F;
    EncoderWeights best_g = model.G;

    if (tc.max_steps == 0) {
        result.best_holdout =
            holdout_score(model, pre, *dataset, holdout, inputs, tc, holdout_rng, threads);
        return result;
    }

    const int B = std::min(tc.batch_size, static_cast<int>(train.size()));
    for (int step = 1; step <= tc.max_steps; ++step) {
        RandomStream step_batch = batch_rng.child(static_cast<std::uint64_t>(step));
        RMat X(in_dim, B);
        std::vector<int> chosen(static_cast<std::size_t>(B));
        for (int j = 0; j < B; ++j) {
            chosen[static_cast<std::size_t>(j)] =
                train[static_cast<std::size_t>(step_batch.uniform() * train.size())];
            X.col(j) = inputs.col(chosen[static_cast<std::size_t>(j)]);
        }

        ForwardOptions opt;
        opt.train = true;
        RandomStream step_dropout = dropout_rng.child(static_cast<std::uint64_t>(step));
        const ForwardTrace tf = encoder::forward(model.F, X, opt, step_dropout);
        const ForwardTrace tg = encoder::forward(model.G, X, opt, step_dropout);

        RandomStream step_mc = mc_rng.child(static_cast<std::uint64_t>(step));
        std::vector<SampleLoss> losses(static_cast<std::size_t>(B));
        parallel_for(
            static_cast<std::size_t>(B),
            [&](std::size_t j) {
                const Eigen::Index col = static_cast<Eigen::Index>(j);
                losses[j] = sample_loss(model, pre,
                                        dataset->signals[static_cast<std::size_t>(chosen[j])],
                                        heads_at_col(tf, col), heads_at_col(tg, col), tc.mc_samples,
                                        tc.l3_mc_samples, step_mc.child(static_cast<std::uint64_t>(j)));
            },
            threads);

        double train_loss = 0.0;
        const double inv_B = 1.0 / static_cast<double>(B);
        std::vector<RMat> up_f, up_g;
        for (std::size_t h = 0; h < model.F.heads.size(); ++h) {
            up_f.emplace_back(RMat::Zero(model.F.head_specs[h].out, B));
        }
        for (std::size_t h = 0; h < model.G.heads.size(); ++h) {
            up_g.emplace_back(RMat::Zero(model.G.head_specs[h].out, B));
        }
        for (int j = 0; j < B; ++j) {
            const SampleLoss& sl = losses[static_cast<std::size_t>(j)];
            train_loss += sl.value * inv_B;
            for (std::size_t h = 0; h < up_f.size(); ++h) up_f[h].col(j) = inv_B * sl.up_f[h];
            for (std::size_t h = 0; h < up_g.size(); ++h) up_g[h].col(j) = inv_B * sl.up_g[h];
        }
        if (!std::isfinite(train_loss)) {
            throw training_error("train_amortized: loss diverged at step " + std::to_string(step));
        }

        const RVec grad_f = encoder::backward(model.F, tf, up_f).pack(model.F);
        const RVec grad_g = encoder::backward(model.G, tg, up_g).pack(model.G);
        double lr_step = lr;
        if (tc.warmup_steps > 0 && step <= tc.warmup_steps) {
            lr_step = lr * static_cast<double>(step) / tc.warmup_steps;
        }
        encoder::adam_step(model.F, grad_f, adam_f, lr_step);
        encoder::adam_step(model.G, grad_g, adam_g, lr_step);
        result.steps_run = step;

        if (step % tc.eval_every == 0 || step == tc.max_steps) {
            const double score =
                holdout_score(model, pre, *dataset, holdout, inputs, tc, holdout_rng, threads);
            result.curve.push_back({step, train_loss, score, lr});
            if (!std::isfinite(score)) {
                throw training_error("train_amortized: holdout loss diverged at step " +
                                     std::to_string(step));
            }
            if (!std::isfinite(best) || score < best - 1e-9 * std::abs(best)) {
                best = score;
                best_f = model.F;
                best_g = model.G;
                since_best = 0;
            } else {
                ++since_best;
                if (since_best >= tc.plateau_patience) {
                    since_best = 0;
                    ++halvings;
                    if (halvings > tc.max_lr_halvings) break;
                    lr *= 0.5;
                }
            }
        }
    }

    model.F = best_f;
    model.G = best_g;
    result.best_holdout = best;
    return result;
}

CVec h_from_angular(const CVec& h_vir) {
    const Eigen::Index N = h_vir.size();
    const CMat& F_N = numerics::dft_matrix_cached(N);
    return (1.0 / static_cast<double>(N)) * (F_N.adjoint() * h_vir);
}

CMat g_from_angular(const CMat& G_vir) {
    const Eigen::Index M = G_vir.rows(), N = G_vir.cols();
    const CMat& F_M = numerics::dft_matrix_cached(M);
    const CMat& F_N = numerics::dft_matrix_cached(N);
    return (1.0 / static_cast<double>(M * N)) * (F_M.adjoint() * G_vir * F_N.adjoint());
}

EstimateJCE estimate_jce(const EncoderPair& model, const CMat& Y) {
    require(model.kind == EstimatorKind::JCE, "estimate_jce: model was trained for JCCE");
    require_dim(Y.rows() == model.cfg.M && Y.cols() == model.cfg.N_p,
                "estimate_jce: signal shape mismatch");
    const RVec input = encoder::complex_to_input(Y);
    const auto f_out = encoder::forward_eval(model.F, input);
    const auto g_out = encoder::forward_eval(model.G, input);

    EstimateJCE est;
    est.h_vir_hat = encoder::complex_from_head(f_out[0]);
    est.b = f_out[1];
    const CVec mm = encoder::complex_from_head(g_out[0]);
    est.G_vir_hat = Eigen::Map<const CMat>(mm.data(), model.cfg.M, model.cfg.N);
    est.B = Eigen::Map<const RMat>(g_out[1].data(), model.cfg.M, model.cfg.N);
    est.h_hat = h_from_angular(est.h_vir_hat);
    est.G_hat = g_from_angular(est.G_vir_hat);
    return est;
}

namespace {

// The JCCE likelihood ties (G, d) with (G T_s^H, cyclically shifted d)
// exactly, for every s: the angular frame is a discrete label the training
// signal cannot carry. Estimates are therefore reported in the frame that
// best matches the deployment's stored quasi-static RIS-BS geometry.
int resolve_frame_shift(const CMat& G_vir_hat, const CMat& G_static_vir) {
    const Eigen::Index N = G_vir_hat.cols();
    int best_shift = 0;
    double best = -1.0;
    for (int s = 0; s < N; ++s) {
        cxd acc(0, 0);
        for (Eigen::Index k = 0; k < N; ++k) {
            acc += (G_static_vir.col((k + s) % N).adjoint() * G_vir_hat.col(k))(0, 0);
        }
        if (std::abs(acc) > best) {
            best = std::abs(acc);
            best_shift = s;
        }
    }
    return best_shift;
}

}  // namespace

EstimateJCCE estimate_jcce(const EncoderPair& model, const CMat& Ytil) {
    require(model.kind == EstimatorKind::JCCE, "estimate_jcce: model was trained for JCE");
    require_dim(Ytil.rows() == static_cast<Eigen::Index>(model.cfg.M) * model.cfg.N_p,
                "estimate_jcce: signal shape mismatch");
    const RVec input = encoder_input(model, Ytil);
    const auto f_out = encoder::forward_eval(model.F, input);
    const auto g_out = encoder::forward_eval(model.G, input);

    EstimateJCCE est;
    est.k = f_out[0];
    est.d_hat = (est.k.array() - 1.0).cwiseMax(0.0);
    const CVec mm = encoder::complex_from_head(g_out[0]);
    est.G_vir_hat = Eigen::Map<const CMat>(mm.data(), model.cfg.M, model.cfg.N);

    if (model.static_G.size() > 0) {
        const Eigen::Index N = model.cfg.N;
        const CMat& F_M = numerics::dft_matrix_cached(model.cfg.M);
        const CMat& F_N = numerics::dft_matrix_cached(N);
        const CMat G_static_vir = F_M * model.static_G * F_N;
        const int s = resolve_frame_shift(est.G_vir_hat, G_static_vir);
        if (s != 0) {
            CMat shifted(est.G_vir_hat.rows(), N);
            RVec d_shifted(N);
            RVec k_shifted(N);
            for (Eigen::Index kcol = 0; kcol < N; ++kcol) {
                shifted.col((kcol + s) % N) = est.G_vir_hat.col(kcol);
                d_shifted((kcol + s) % N) = est.d_hat(kcol);
                k_shifted((kcol + s) % N) = est.k(kcol);
            }
            est.G_vir_hat = std::move(shifted);
            est.d_hat = std::move(d_shifted);
            est.k = std::move(k_shifted);
        }
    }

    est.G_hat = g_from_angular(est.G_vir_hat);
    est.R_h_hat = channel::ccm_from_d(est.d_hat);
    return est;
}

}  // namespace risvi::inference
