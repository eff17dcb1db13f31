#pragma once

#include <vector>

#include "risvi/rng.hpp"
#include "risvi/types.hpp"

namespace risvi::encoder {

enum class HeadKind {
    MeanTanh,      // c * tanh(z); real/imag halves reassembled by the caller
    ScaleSoftmax,  // c * softmax(z): positive, sums to the budget c
    ShapeSigmoid,  // 1 + c * sigmoid(z): shapes in (1, 1+c)
};

struct HeadSpec {
    HeadKind kind;
    int out;          // number of real outputs
    double constant;  // c_mean / c_b / kappa
};

struct LayerParams {
    RMat W;  // out x in
    RVec b;
};

struct BatchNormParams {
    RVec gamma, beta;
    RVec run_mean, run_var;
};

// Two 300-unit hidden layers. Each hidden block is
//   dropout -> batchnorm -> linear -> ReLU,
// and the output block is batchnorm -> per-head linear -> head activation.
struct EncoderWeights {
    int input_dim = 0;
    int hidden = 300;
    double dropout_keep = 0.9;
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;

    BatchNormParams bn0, bn1, bn2;
    LayerParams fc1, fc2;
    std::vector<HeadSpec> head_specs;
    std::vector<LayerParams> heads;

    Eigen::Index trainable_count() const;
    RVec pack() const;               // trainables only, fixed order
    void unpack(const RVec& flat);   // inverse of pack
};

EncoderWeights init_encoder(int input_dim, const std::vector<HeadSpec>& heads, RandomStream& rng,
                            int hidden = 300);

struct BatchNormCache {
    RVec mu, var;
    RMat xhat;
    bool batch_stats = false;
};

// Everything the backward pass needs, recorded for one batch.
struct ForwardTrace {
    RMat x0;
    RMat mask0, mask1;  // inverted-dropout masks (empty when inactive)
    RMat d0, d1;
    BatchNormCache bn0, bn1, bn2;
    RMat n0, n1, n2;
    RMat z1, a1, z2, a2;
    std::vector<RMat> head_z;
    std::vector<RMat> head_out;
};

struct ForwardOptions {
    bool train = false;          // dropout active, batch statistics in BN
    bool update_running = true;  // refresh running stats (train mode only)
};

// Batch forward; columns of X are samples. rng is consumed only when
// dropout is active.
ForwardTrace forward(EncoderWeights& w, const RMat& X, const ForwardOptions& opt, RandomStream& rng);

// Deterministic single-sample evaluation with running statistics.
std::vector<RVec> forward_eval(const EncoderWeights& w, const RVec& x);

// Same-shape container for parameter gradients.
struct EncoderGrads {
    RVec g_bn0_gamma, g_bn0_beta, g_bn1_gamma, g_bn1_beta, g_bn2_gamma, g_bn2_beta;
    RMat g_W1, g_W2;
    RVec g_b1, g_b2;
    std::vector<RMat> g_head_W;
    std::vector<RVec> g_head_b;

    RVec pack(const EncoderWeights& shape) const;
};

// Exact reverse-mode gradients of sum_h <upstream[h], head_out[h]> with the
// upstream factors supplied by the loss layer.
EncoderGrads backward(const EncoderWeights& w, const ForwardTrace& trace,
                      const std::vector<RMat>& upstream);

struct AdamState {
    RVec m, v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState like(const EncoderWeights& w);
};

// Standard bias-corrected Adam update on the packed parameter vector.
void adam_step(EncoderWeights& w, const RVec& flat_grads, AdamState& st, double lr);

// --- real/complex marshalling conventions ---

// [Re(vec(X)); Im(vec(X))] with column-major vec.
RVec complex_to_input(const CMat& X);

// Inverse of the mean-head convention: first half real parts, second half
// imaginary parts.
CVec complex_from_head(const RVec& head_out);

// Maps a complex gradient (dRe + j dIm convention) back onto head reals.
RVec complex_grad_to_head(const CVec& g);

}  // namespace risvi::encoder
