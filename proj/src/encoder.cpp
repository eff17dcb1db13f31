#include "risvi/encoder.hpp"

#include <cmath>

namespace risvi::encoder {

namespace {

RMat init_linear_W(int out, int in, RandomStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    RMat W(out, in);
    for (int j = 0; j < in; ++j) {
        for (int i = 0; i < out; ++i) W(i, j) = rng.uniform(-bound, bound);
    }
    return W;
}

RVec init_linear_b(int out, int in, RandomStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    RVec b(out);
    for (int i = 0; i < out; ++i) b(i) = rng.uniform(-bound, bound);
    return b;
}

BatchNormParams init_bn(int n) {
    BatchNormParams bn;
    bn.gamma = RVec::Ones(n);
    bn.beta = RVec::Zero(n);
    bn.run_mean = RVec::Zero(n);
    bn.run_var = RVec::Ones(n);
    return bn;
}

RMat bn_forward(const BatchNormParams& p, const RMat& x, bool batch_stats, double eps,
                BatchNormCache& cache) {
    cache.batch_stats = batch_stats;
    if (batch_stats) {
        cache.mu = x.rowwise().mean();
        RMat centered = x.colwise() - cache.mu;
        cache.var = centered.array().square().rowwise().mean();
        const RVec inv_std = (cache.var.array() + eps).sqrt().inverse();
        cache.xhat = inv_std.asDiagonal() * centered;
    } else {
        cache.mu = p.run_mean;
        cache.var = p.run_var;
        const RVec inv_std = (cache.var.array() + eps).sqrt().inverse();
        cache.xhat = inv_std.asDiagonal() * (x.colwise() - cache.mu);
    }
    RMat out = p.gamma.asDiagonal() * cache.xhat;
    out.colwise() += p.beta;
    return out;
}

// With batch statistics the mean and variance depend on every column, so the
// two reduction terms appear; with running statistics the map is affine.
RMat bn_backward(const BatchNormParams& p, const BatchNormCache& cache, const RMat& dout, double eps,
                 RVec& dgamma, RVec& dbeta) {
    dgamma = (dout.array() * cache.xhat.array()).rowwise().sum();
    dbeta = dout.rowwise().sum();
    const RVec inv_std = (cache.var.array() + eps).sqrt().inverse();
    const RMat dxhat = p.gamma.asDiagonal() * dout;
    if (!cache.batch_stats) {
        return inv_std.asDiagonal() * dxhat;
    }
    const double B = static_cast<double>(dout.cols());
    const RVec sum_dxhat = dxhat.rowwise().sum();
    const RVec sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum();
    RMat dx = B * dxhat;
    dx.colwise() -= sum_dxhat;
    dx -= sum_dxhat_xhat.asDiagonal() * cache.xhat;
    return (inv_std / B).asDiagonal() * dx;
}

RMat apply_head_activation(const HeadSpec& spec, const RMat& z) {
    switch (spec.kind) {
        case HeadKind::MeanTanh:
            return spec.constant * z.array().tanh();
        case HeadKind::ScaleSoftmax: {
            RMat out(z.rows(), z.cols());
            for (Eigen::Index j = 0; j < z.cols(); ++j) {
                const double zmax = z.col(j).maxCoeff();
                const RVec e = (z.col(j).array() - zmax).exp();
                out.col(j) = (spec.constant / e.sum()) * e;
            }
            return out;
        }
        case HeadKind::ShapeSigmoid: {
            return (1.0 + spec.constant * (1.0 + (-z.array()).exp()).inverse()).matrix();
        }
    }
    throw contract_error("apply_head_activation: unknown head kind");
}

RMat head_activation_backward(const HeadSpec& spec, const RMat& y, const RMat& dy) {
    switch (spec.kind) {
        case HeadKind::MeanTanh: {
            const auto t = y.array() / spec.constant;  // tanh(z)
            return (dy.array() * spec.constant * (1.0 - t.square())).matrix();
        }
        case HeadKind::ScaleSoftmax: {
            RMat dz(y.rows(), y.cols());
            for (Eigen::Index j = 0; j < y.cols(); ++j) {
                const RVec s = y.col(j) / spec.constant;
                const double dot = dy.col(j).dot(s);
                dz.col(j) = spec.constant * (s.array() * (dy.col(j).array() - dot)).matrix();
            }
            return dz;
        }
        case HeadKind::ShapeSigmoid: {
            const auto sig = (y.array() - 1.0) / spec.constant;
            return (dy.array() * spec.constant * sig * (1.0 - sig)).matrix();
        }
    }
    throw contract_error("head_activation_backward: unknown head kind");
}

RMat draw_dropout_mask(Eigen::Index rows, Eigen::Index cols, double keep, RandomStream& rng) {
    RMat mask(rows, cols);
    const double inv = 1.0 / keep;
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < keep ? inv : 0.0;
    }
    return mask;
}

void update_running(BatchNormParams& p, const BatchNormCache& cache, double momentum) {
    p.run_mean = momentum * p.run_mean + (1.0 - momentum) * cache.mu;
    p.run_var = momentum * p.run_var + (1.0 - momentum) * cache.var;
}

// Shared fixed parameter order for pack/unpack/grads.
template <typename W, typename F>
void visit_tensors(W& w, F&& f) {
    f(w.bn0.gamma);
    f(w.bn0.beta);
    f(w.fc1.W);
    f(w.fc1.b);
    f(w.bn1.gamma);
    f(w.bn1.beta);
    f(w.fc2.W);
    f(w.fc2.b);
    f(w.bn2.gamma);
    f(w.bn2.beta);
    for (auto& h : w.heads) {
        f(h.W);
        f(h.b);
    }
}

}  // namespace

Eigen::Index EncoderWeights::trainable_count() const {
    Eigen::Index n = 0;
    visit_tensors(*this, [&](const auto& t) { n += t.size(); });
    return n;
}

RVec EncoderWeights::pack() const {
    RVec flat(trainable_count());
    Eigen::Index pos = 0;
    visit_tensors(*this, [&](const auto& t) {
        flat.segment(pos, t.size()) = Eigen::Map<const RVec>(t.data(), t.size());
        pos += t.size();
    });
    return flat;
}

void EncoderWeights::unpack(const RVec& flat) {
    require_dim(flat.size() == trainable_count(), "EncoderWeights::unpack: size mismatch");
    Eigen::Index pos = 0;
    visit_tensors(*this, [&](auto& t) {
        Eigen::Map<RVec>(t.data(), t.size()) = flat.segment(pos, t.size());
        pos += t.size();
    });
}

EncoderWeights init_encoder(int input_dim, const std::vector<HeadSpec>& heads, RandomStream& rng,
                            int hidden) {
    require_dim(input_dim >= 1 && hidden >= 1, "init_encoder: bad dimensions");
    require_dim(!heads.empty(), "init_encoder: at least one head required");
    EncoderWeights w;
    w.input_dim = input_dim;
    w.hidden = hidden;
    w.bn0 = init_bn(input_dim);
    w.bn1 = init_bn(hidden);
    w.bn2 = init_bn(hidden);
    w.fc1.W = init_linear_W(hidden, input_dim, rng);
    w.fc1.b = init_linear_b(hidden, input_dim, rng);
    w.fc2.W = init_linear_W(hidden, hidden, rng);
    w.fc2.b = init_linear_b(hidden, hidden, rng);
    w.head_specs = heads;
    for (const auto& spec : heads) {
        require_dim(spec.out >= 1, "init_encoder: head output must be >= 1");
        LayerParams lp;
        lp.W = init_linear_W(spec.out, hidden, rng);
        lp.b = init_linear_b(spec.out, hidden, rng);
        if (spec.kind == HeadKind::ShapeSigmoid) {
            // start the shapes near the k = 1 floor: a sigmoid biased at the
            // midpoint would open every spectral bin at once and the
            // likelihood then slams the whole head into saturation
            lp.b.array() -= 2.0;
        }
        w.heads.push_back(std::move(lp));
    }
    return w;
}

ForwardTrace forward(EncoderWeights& w, const RMat& X, const ForwardOptions& opt, RandomStream& rng) {
    require_dim(X.rows() == w.input_dim, "encoder forward: input dimension mismatch");
    ForwardTrace t;
    t.x0 = X;

    const bool dropout = opt.train && w.dropout_keep < 1.0;
    if (dropout) {
        t.mask0 = draw_dropout_mask(X.rows(), X.cols(), w.dropout_keep, rng);
        t.d0 = X.cwiseProduct(t.mask0);
    } else {
        t.d0 = X;
    }
    t.n0 = bn_forward(w.bn0, t.d0, opt.train, w.bn_eps, t.bn0);
    t.z1 = (w.fc1.W * t.n0).colwise() + w.fc1.b;
    t.a1 = t.z1.cwiseMax(0.0);

    if (dropout) {
        t.mask1 = draw_dropout_mask(t.a1.rows(), t.a1.cols(), w.dropout_keep, rng);
        t.d1 = t.a1.cwiseProduct(t.mask1);
    } else {
        t.d1 = t.a1;
    }
    t.n1 = bn_forward(w.bn1, t.d1, opt.train, w.bn_eps, t.bn1);
    t.z2 = (w.fc2.W * t.n1).colwise() + w.fc2.b;
    t.a2 = t.z2.cwiseMax(0.0);

    t.n2 = bn_forward(w.bn2, t.a2, opt.train, w.bn_eps, t.bn2);
    t.head_z.reserve(w.heads.size());
    t.head_out.reserve(w.heads.size());
    for (std::size_t h = 0; h < w.heads.size(); ++h) {
        RMat z = (w.heads[h].W * t.n2).colwise() + w.heads[h].b;
        t.head_out.push_back(apply_head_activation(w.head_specs[h], z));
        t.head_z.push_back(std::move(z));
    }

    if (opt.train && opt.update_running) {
        update_running(w.bn0, t.bn0, w.bn_momentum);
        update_running(w.bn1, t.bn1, w.bn_momentum);
        update_running(w.bn2, t.bn2, w.bn_momentum);
    }
    return t;
}

std::vector<RVec> forward_eval(const EncoderWeights& w, const RVec& x) {
    RandomStream unused(0);
    ForwardOptions opt;  // eval defaults, never mutates the weights
    ForwardTrace t = forward(const_cast<EncoderWeights&>(w), RMat(x), opt, unused);
    std::vector<RVec> outs;
    outs.reserve(t.head_out.size());
    for (const auto& m : t.head_out) outs.push_back(m.col(0));
    return outs;
}

EncoderGrads backward(const EncoderWeights& w, const ForwardTrace& t,
                      const std::vector<RMat>& upstream) {
    require_dim(upstream.size() == w.heads.size(), "encoder backward: upstream head count mismatch");

    EncoderGrads g;
    g.g_head_W.resize(w.heads.size());
    g.g_head_b.resize(w.heads.size());

    RMat dn2 = RMat::Zero(t.n2.rows(), t.n2.cols());
    for (std::size_t h = 0; h < w.heads.size(); ++h) {
        const RMat dz = head_activation_backward(w.head_specs[h], t.head_out[h], upstream[h]);
        g.g_head_W[h] = dz * t.n2.transpose();
        g.g_head_b[h] = dz.rowwise().sum();
        dn2.noalias() += w.heads[h].W.transpose() * dz;
    }

    const RMat da2 = bn_backward(w.bn2, t.bn2, dn2, w.bn_eps, g.g_bn2_gamma, g.g_bn2_beta);
    const RMat dz2 = da2.cwiseProduct((t.z2.array() > 0.0).cast<double>().matrix());
    g.g_W2 = dz2 * t.n1.transpose();
    g.g_b2 = dz2.rowwise().sum();

    const RMat dn1 = w.fc2.W.transpose() * dz2;
    const RMat dd1 = bn_backward(w.bn1, t.bn1, dn1, w.bn_eps, g.g_bn1_gamma, g.g_bn1_beta);
    const RMat da1 = t.mask1.size() > 0 ? RMat(dd1.cwiseProduct(t.mask1)) : dd1;
    const RMat dz1 = da1.cwiseProduct((t.z1.array() > 0.0).cast<double>().matrix());
    g.g_W1 = dz1 * t.n0.transpose();
    g.g_b1 = dz1.rowwise().sum();

    const RMat dn0 = w.fc1.W.transpose() * dz1;
    bn_backward(w.bn0, t.bn0, dn0, w.bn_eps, g.g_bn0_gamma, g.g_bn0_beta);
    return g;
}

RVec EncoderGrads::pack(const EncoderWeights& shape) const {
    RVec flat(shape.trainable_count());
    Eigen::Index pos = 0;
    auto put = [&](const auto& t) {
        flat.segment(pos, t.size()) = Eigen::Map<const RVec>(t.data(), t.size());
        pos += t.size();
    };
    put(g_bn0_gamma);
    put(g_bn0_beta);
    put(g_W1);
    put(g_b1);
    put(g_bn1_gamma);
    put(g_bn1_beta);
    put(g_W2);
    put(g_b2);
    put(g_bn2_gamma);
    put(g_bn2_beta);
    for (std::size_t h = 0; h < g_head_W.size(); ++h) {
        put(g_head_W[h]);
        put(g_head_b[h]);
    }
    require_dim(pos == flat.size(), "EncoderGrads::pack: size mismatch");
    return flat;
}

AdamState AdamState::like(const EncoderWeights& w) {
    AdamState st;
    st.m = RVec::Zero(w.trainable_count());
    st.v = RVec::Zero(w.trainable_count());
    return st;
}

void adam_step(EncoderWeights& w, const RVec& flat_grads, AdamState& st, double lr) {
    require_dim(flat_grads.size() == st.m.size(), "adam_step: gradient size mismatch");
    st.step += 1;
    st.m = st.beta1 * st.m + (1.0 - st.beta1) * flat_grads;
    st.v = st.beta2 * st.v + (1.0 - st.beta2) * flat_grads.cwiseProduct(flat_grads);
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    RVec theta = w.pack();
    const RVec denom = ((st.v / bc2).cwiseSqrt().array() + st.eps).matrix();
    theta -= (lr / bc1) * st.m.cwiseQuotient(denom);
    if (!theta.allFinite()) throw numerical_error("adam_step: parameters became non-finite");
    w.unpack(theta);
}

RVec complex_to_input(const CMat& X) {
    const Eigen::Index n = X.size();
    RVec out(2 * n);
    const Eigen::Map<const CVec> flat(X.data(), n);
    out.head(n) = flat.real();
    out.tail(n) = flat.imag();
    return out;
}

CVec complex_from_head(const RVec& head_out) {
    require_dim(head_out.size() % 2 == 0, "complex_from_head: odd length");
    const Eigen::Index n = head_out.size() / 2;
    CVec out(n);
    out.real() = head_out.head(n);
    out.imag() = head_out.tail(n);
    return out;
}

RVec complex_grad_to_head(const CVec& g) {
    RVec out(2 * g.size());
    out.head(g.size()) = g.real();
    out.tail(g.size()) = g.imag();
    return out;
}

}  // namespace risvi::encoder
