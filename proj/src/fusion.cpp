#include "gazekit/fusion.hpp"

#include <cmath>

namespace gaze {

namespace {

// ---------------------------------------------------------------------------
// building blocks with caches for the hand-written backward pass

constexpr double kLnEps = 1e-5;

struct LnCache {
    Eigen::MatrixXd x_hat;     // normalized rows
    Eigen::VectorXd inv_std;   // per row
};

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const LayerNormParams& p, LnCache* cache) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    Eigen::MatrixXd out(rows, cols);
    Eigen::MatrixXd x_hat(rows, cols);
    Eigen::VectorXd inv_std(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std[r] = is;
        x_hat.row(r) = (x.row(r).array() - mean) * is;
        out.row(r) = x_hat.row(r).cwiseProduct(p.gain.transpose()) + p.bias.transpose();
    }
    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const LnCache& cache,
                                    const LayerNormParams& p, LayerNormParams& grad) {
    const Eigen::Index rows = dy.rows(), cols = dy.cols();
    Eigen::MatrixXd dx(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::RowVectorXd g = dy.row(r).cwiseProduct(p.gain.transpose());
        const double g_mean = g.mean();
        const double gx_mean = g.cwiseProduct(cache.x_hat.row(r)).mean();
        dx.row(r) = cache.inv_std[r] *
                    (g.array() - g_mean - cache.x_hat.row(r).array() * gx_mean);
        grad.gain += dy.row(r).cwiseProduct(cache.x_hat.row(r)).transpose();
        grad.bias += dy.row(r).transpose();
    }
    return dx;
}

struct MhsaCache {
    Eigen::MatrixXd x, q, k, v;            // l x d
    std::vector<Eigen::MatrixXd> attn;     // per head, l x l, rows sum to 1
    Eigen::MatrixXd concat;                // l x d
};

Eigen::MatrixXd mhsa(const Eigen::MatrixXd& x, const EncoderLayerParams& lp, int n_heads,
                     MhsaCache* cache) {
    const Eigen::Index d = x.cols();
    const Eigen::Index dk = d / n_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    const Eigen::MatrixXd q = x * lp.wq;
    const Eigen::MatrixXd k = x * lp.wk;
    const Eigen::MatrixXd v = x * lp.wv;

    Eigen::MatrixXd concat(x.rows(), d);
    std::vector<Eigen::MatrixXd> attn;
    attn.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        const auto qh = q.middleCols(h * dk, dk);
        const auto kh = k.middleCols(h * dk, dk);
        const auto vh = v.middleCols(h * dk, dk);
        Eigen::MatrixXd scores = qh * kh.transpose() * inv_sqrt_dk;
        for (Eigen::Index r = 0; r < scores.rows(); ++r) {
            const double mx = scores.row(r).maxCoeff();
            scores.row(r) = (scores.row(r).array() - mx).exp();
            scores.row(r) /= scores.row(r).sum();
        }
        concat.middleCols(h * dk, dk) = scores * vh;
        attn.push_back(std::move(scores));
    }

    Eigen::MatrixXd out = concat * lp.wo;
    if (cache) {
        cache->x = x;
        cache->q = q;
        cache->k = k;
        cache->v = v;
        cache->attn = std::move(attn);
        cache->concat = std::move(concat);
    }
    return out;
}

Eigen::MatrixXd mhsa_backward(const Eigen::MatrixXd& dout, const MhsaCache& c,
                              const EncoderLayerParams& lp, int n_heads,
                              EncoderLayerParams& grad) {
    const Eigen::Index d = c.x.cols();
    const Eigen::Index dk = d / n_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    grad.wo += c.concat.transpose() * dout;
    const Eigen::MatrixXd dconcat = dout * lp.wo.transpose();

    Eigen::MatrixXd dq(c.x.rows(), d), dk_mat(c.x.rows(), d), dv(c.x.rows(), d);
    for (int h = 0; h < n_heads; ++h) {
        const auto qh = c.q.middleCols(h * dk, dk);
        const auto kh = c.k.middleCols(h * dk, dk);
        const auto vh = c.v.middleCols(h * dk, dk);
        const Eigen::MatrixXd& a = c.attn[static_cast<std::size_t>(h)];
        const auto doh = dconcat.middleCols(h * dk, dk);

        Eigen::MatrixXd da = doh * vh.transpose();
        dv.middleCols(h * dk, dk) = a.transpose() * doh;

        // softmax backward, row by row
        Eigen::MatrixXd ds(a.rows(), a.cols());
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            const double dot = da.row(r).cwiseProduct(a.row(r)).sum();
            ds.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
        }
        ds *= inv_sqrt_dk;

        dq.middleCols(h * dk, dk) = ds * kh;
        dk_mat.middleCols(h * dk, dk) = ds.transpose() * qh;
    }

    grad.wq += c.x.transpose() * dq;
    grad.wk += c.x.transpose() * dk_mat;
    grad.wv += c.x.transpose() * dv;
    return dq * lp.wq.transpose() + dk_mat * lp.wk.transpose() + dv * lp.wv.transpose();
}

struct FfCache {
    Eigen::MatrixXd x, hidden; // hidden after ReLU
};

Eigen::MatrixXd feed_forward(const Eigen::MatrixXd& x, const EncoderLayerParams& lp,
                             FfCache* cache) {
    Eigen::MatrixXd hidden = x * lp.ff_w1;
    hidden.rowwise() += lp.ff_b1.transpose();
    hidden = hidden.cwiseMax(0.0);
    Eigen::MatrixXd out = hidden * lp.ff_w2;
    out.rowwise() += lp.ff_b2.transpose();
    if (cache) {
        cache->x = x;
        cache->hidden = std::move(hidden);
    }
    return out;
}

Eigen::MatrixXd feed_forward_backward(const Eigen::MatrixXd& dout, const FfCache& c,
                                      const EncoderLayerParams& lp, EncoderLayerParams& grad) {
    grad.ff_w2 += c.hidden.transpose() * dout;
    grad.ff_b2 += dout.colwise().sum().transpose();
    Eigen::MatrixXd dhidden = dout * lp.ff_w2.transpose();
    dhidden = dhidden.cwiseProduct((c.hidden.array() > 0.0).cast<double>().matrix());
    grad.ff_w1 += c.x.transpose() * dhidden;
    grad.ff_b1 += dhidden.colwise().sum().transpose();
    return dhidden * lp.ff_w1.transpose();
}

struct DropoutMask {
    Eigen::MatrixXd scale; // 0 or 1/(1-p)
    bool active = false;
};

Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& x, double rate, RunMode mode, Rng* rng,
                              DropoutMask* mask) {
    if (mode != RunMode::Training || rate <= 0.0 || rng == nullptr) {
        if (mask) mask->active = false;
        return x;
    }
    const double keep = 1.0 - rate;
    Eigen::MatrixXd scale(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            scale(r, c) = rng->uniform() < rate ? 0.0 : 1.0 / keep;
        }
    }
    Eigen::MatrixXd out = x.cwiseProduct(scale);
    if (mask) {
        mask->scale = std::move(scale);
        mask->active = true;
    }
    return out;
}

Eigen::MatrixXd dropout_backward(const Eigen::MatrixXd& dy, const DropoutMask& mask) {
    return mask.active ? dy.cwiseProduct(mask.scale).eval() : dy;
}

struct BlockCache {
    LnCache ln1, ln2;
    MhsaCache mhsa;
    FfCache ff;
    DropoutMask drop_attn, drop_ff;
};

Eigen::MatrixXd block_forward(const Eigen::MatrixXd& x, const EncoderLayerParams& lp,
                              const HyperParams& hp, RunMode mode, Rng* rng, BlockCache* cache) {
    LnCache* ln1 = cache ? &cache->ln1 : nullptr;
    LnCache* ln2 = cache ? &cache->ln2 : nullptr;
    MhsaCache* mc = cache ? &cache->mhsa : nullptr;
    FfCache* fc = cache ? &cache->ff : nullptr;
    DropoutMask* da = cache ? &cache->drop_attn : nullptr;
    DropoutMask* df = cache ? &cache->drop_ff : nullptr;

    switch (hp.variant) {
    case EncoderVariant::PreLN: {
        const Eigen::MatrixXd a = layer_norm(x, lp.ln1, ln1);
        const Eigen::MatrixXd s = apply_dropout(mhsa(a, lp, hp.n_heads, mc), hp.dropout_attn, mode, rng, da);
        const Eigen::MatrixXd x_prime = s + x;
        const Eigen::MatrixXd b = layer_norm(x_prime, lp.ln2, ln2);
        const Eigen::MatrixXd f = apply_dropout(feed_forward(b, lp, fc), hp.dropout_ff, mode, rng, df);
        return f + x_prime;
    }
    case EncoderVariant::PostLN: {
        const Eigen::MatrixXd s = apply_dropout(mhsa(x, lp, hp.n_heads, mc), hp.dropout_attn, mode, rng, da);
        const Eigen::MatrixXd x_prime = layer_norm(s + x, lp.ln1, ln1);
        const Eigen::MatrixXd f = apply_dropout(feed_forward(x_prime, lp, fc), hp.dropout_ff, mode, rng, df);
        return layer_norm(f + x_prime, lp.ln2, ln2);
    }
    case EncoderVariant::B2T: {
        const Eigen::MatrixXd s = apply_dropout(mhsa(x, lp, hp.n_heads, mc), hp.dropout_attn, mode, rng, da);
        const Eigen::MatrixXd x_prime = layer_norm(s + x, lp.ln1, ln1);
        const Eigen::MatrixXd f = apply_dropout(feed_forward(x_prime, lp, fc), hp.dropout_ff, mode, rng, df);
        // bottom-to-top: the block input feeds the final normalization too
        return layer_norm(f + x_prime + x, lp.ln2, ln2);
    }
    }
    throw ConfigError("encoder block: unknown variant");
}

Eigen::MatrixXd block_backward(const Eigen::MatrixXd& dy, const BlockCache& c,
                               const EncoderLayerParams& lp, const HyperParams& hp,
                               EncoderLayerParams& grad) {
    switch (hp.variant) {
    case EncoderVariant::PreLN: {
        // y = drop(FF(LN2(x'))) + x';  x' = drop(MHSA(LN1(x))) + x
        Eigen::MatrixXd dx_prime = dy;
        const Eigen::MatrixXd df = dropout_backward(dy, c.drop_ff);
        const Eigen::MatrixXd db = feed_forward_backward(df, c.ff, lp, grad);
        dx_prime += layer_norm_backward(db, c.ln2, lp.ln2, grad.ln2);
        Eigen::MatrixXd dx = dx_prime;
        const Eigen::MatrixXd ds = dropout_backward(dx_prime, c.drop_attn);
        const Eigen::MatrixXd da = mhsa_backward(ds, c.mhsa, lp, hp.n_heads, grad);
        dx += layer_norm_backward(da, c.ln1, lp.ln1, grad.ln1);
        return dx;
    }
    case EncoderVariant::PostLN: {
        // y = LN2(drop(FF(x')) + x');  x' = LN1(drop(MHSA(x)) + x)
        const Eigen::MatrixXd dw = layer_norm_backward(dy, c.ln2, lp.ln2, grad.ln2);
        Eigen::MatrixXd dx_prime = dw;
        const Eigen::MatrixXd df = dropout_backward(dw, c.drop_ff);
        dx_prime += feed_forward_backward(df, c.ff, lp, grad);
        const Eigen::MatrixXd du = layer_norm_backward(dx_prime, c.ln1, lp.ln1, grad.ln1);
        Eigen::MatrixXd dx = du;
        const Eigen::MatrixXd ds = dropout_backward(du, c.drop_attn);
        dx += mhsa_backward(ds, c.mhsa, lp, hp.n_heads, grad);
        return dx;
    }
    case EncoderVariant::B2T: {
        // y = LN2(drop(FF(x')) + x' + x);  x' = LN1(drop(MHSA(x)) + x)
        const Eigen::MatrixXd dw = layer_norm_backward(dy, c.ln2, lp.ln2, grad.ln2);
        Eigen::MatrixXd dx = dw; // the bottom-to-top residual
        Eigen::MatrixXd dx_prime = dw;
        const Eigen::MatrixXd df = dropout_backward(dw, c.drop_ff);
        dx_prime += feed_forward_backward(df, c.ff, lp, grad);
        const Eigen::MatrixXd du = layer_norm_backward(dx_prime, c.ln1, lp.ln1, grad.ln1);
        dx += du;
        const Eigen::MatrixXd ds = dropout_backward(du, c.drop_attn);
        dx += mhsa_backward(ds, c.mhsa, lp, hp.n_heads, grad);
        return dx;
    }
    }
    throw ConfigError("encoder block: unknown variant");
}

struct ForwardCache {
    Eigen::MatrixXd z0;
    std::vector<BlockCache> blocks;
    Eigen::MatrixXd z_final;
};

Eigen::MatrixXd assemble_input(const TokenSet& tokens, const FusionParams& params,
                               const HyperParams& hp) {
    if (tokens.rows() != hp.n_tokens - 1) {
        throw TokenCountMismatchError("fusion: expected " + std::to_string(hp.n_tokens - 1) +
                                      " feature tokens, got " + std::to_string(tokens.rows()));
    }
    if (tokens.cols() != hp.d_model) {
        throw ShapeMismatchError("fusion: token width does not match d_model");
    }
    if (!tokens.allFinite()) throw ShapeMismatchError("fusion: non-finite token values");

    Eigen::MatrixXd z(hp.n_tokens, hp.d_model);
    z.row(0) = params.class_token.transpose();
    z.bottomRows(hp.n_tokens - 1) = tokens;
    z += hp.positional == PositionalEncoding::Learned
             ? params.positional
             : sinusoidal_positional(hp.n_tokens, hp.d_model);
    return z;
}

Eigen::Vector2d forward_cached(const TokenSet& tokens, const FusionParams& params,
                               const HyperParams& hp, RunMode mode, Rng* rng,
                               ForwardCache* cache) {
    Eigen::MatrixXd z = assemble_input(tokens, params, hp);
    if (cache) {
        cache->z0 = z;
        cache->blocks.resize(static_cast<std::size_t>(hp.n_layers));
    }
    for (int l = 0; l < hp.n_layers; ++l) {
        BlockCache* bc = cache ? &cache->blocks[static_cast<std::size_t>(l)] : nullptr;
        z = block_forward(z, params.layers[static_cast<std::size_t>(l)], hp, mode, rng, bc);
    }
    if (cache) cache->z_final = z;
    return params.head_w.transpose() * z.row(0).transpose() + params.head_b;
}

/// Backward from d(prediction); accumulates into grads, returns nothing.
void backward_cached(const Eigen::Vector2d& dpred, const ForwardCache& cache,
                     const FusionParams& params, const HyperParams& hp, FusionParams& grads) {
    grads.head_b += dpred;
    grads.head_w += cache.z_final.row(0).transpose() * dpred.transpose();

    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(hp.n_tokens, hp.d_model);
    dz.row(0) = (params.head_w * dpred).transpose();

    for (int l = hp.n_layers - 1; l >= 0; --l) {
        dz = block_backward(dz, cache.blocks[static_cast<std::size_t>(l)],
                            params.layers[static_cast<std::size_t>(l)], hp,
                            grads.layers[static_cast<std::size_t>(l)]);
    }

    grads.class_token += dz.row(0).transpose();
    if (hp.positional == PositionalEncoding::Learned) grads.positional += dz;
}

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
    }
    return m;
}

// ---------------------------------------------------------------------------
// MLP substitute

struct VecLnCache {
    Eigen::VectorXd x_hat;
    double inv_std = 0.0;
};

Eigen::VectorXd vec_layer_norm(const Eigen::VectorXd& x, const LayerNormParams& p,
                               VecLnCache* cache) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + kLnEps);
    Eigen::VectorXd x_hat = (x.array() - mean) * is;
    Eigen::VectorXd out = x_hat.cwiseProduct(p.gain) + p.bias;
    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = is;
    }
    return out;
}

Eigen::VectorXd vec_layer_norm_backward(const Eigen::VectorXd& dy, const VecLnCache& cache,
                                        const LayerNormParams& p, LayerNormParams& grad) {
    const Eigen::VectorXd g = dy.cwiseProduct(p.gain);
    const double g_mean = g.mean();
    const double gx_mean = g.cwiseProduct(cache.x_hat).mean();
    grad.gain += dy.cwiseProduct(cache.x_hat);
    grad.bias += dy;
    return cache.inv_std * (g.array() - g_mean - cache.x_hat.array() * gx_mean);
}

Eigen::VectorXd vec_dropout(const Eigen::VectorXd& x, double rate, RunMode mode, Rng* rng,
                            Eigen::VectorXd* mask) {
    if (mode != RunMode::Training || rate <= 0.0 || rng == nullptr) {
        if (mask) mask->resize(0);
        return x;
    }
    Eigen::VectorXd scale(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        scale[i] = rng->uniform() < rate ? 0.0 : 1.0 / (1.0 - rate);
    }
    Eigen::VectorXd out = x.cwiseProduct(scale);
    if (mask) *mask = std::move(scale);
    return out;
}

struct MlpCache {
    Eigen::VectorXd input, x1, x4, x5, x8; // stage outputs needed by backward
    Eigen::VectorXd pre1;                  // pre-activation of the first LN output
    VecLnCache ln1, ln2;
    Eigen::VectorXd mask1, mask2, mask3;
};

Eigen::Vector2d mlp_forward_cached(const TokenSet& tokens, const MlpSubstituteParams& p,
                                   RunMode mode, Rng* rng, MlpCache* cache) {
    const Eigen::Index n_in = tokens.rows() * tokens.cols();
    if (p.w_in.rows() != n_in) {
        throw ShapeMismatchError("mlp substitute: flattened token size " + std::to_string(n_in) +
                                 " does not match the input layer (" +
                                 std::to_string(p.w_in.rows()) + ")");
    }
    Eigen::VectorXd input(n_in);
    for (Eigen::Index t = 0; t < tokens.rows(); ++t) {
        input.segment(t * tokens.cols(), tokens.cols()) = tokens.row(t).transpose();
    }

    MlpCache local;
    MlpCache& c = cache ? *cache : local;
    c.input = input;
    c.x1 = vec_dropout(input, p.dropout, mode, rng, &c.mask1);
    const Eigen::VectorXd x2 = p.w_in.transpose() * c.x1 + p.b_in;
    const Eigen::VectorXd x3 = vec_layer_norm(x2, p.ln1, &c.ln1);
    c.pre1 = x3;
    c.x4 = x3.cwiseMax(0.0);
    c.x5 = vec_dropout(c.x4, p.dropout, mode, rng, &c.mask2);
    const Eigen::VectorXd x6 = p.w_hidden.transpose() * c.x5 + p.b_hidden;
    const Eigen::VectorXd x7 = vec_layer_norm(x6, p.ln2, &c.ln2);
    c.x8 = vec_dropout(x7, p.dropout, mode, rng, &c.mask3);
    return p.w_out.transpose() * c.x8 + p.b_out;
}

void mlp_backward_cached(const Eigen::Vector2d& dpred, const MlpCache& c,
                         const MlpSubstituteParams& p, MlpSubstituteParams& grad) {
    grad.b_out += dpred;
    grad.w_out += c.x8 * dpred.transpose();
    Eigen::VectorXd dx8 = p.w_out * dpred;
    if (c.mask3.size()) dx8 = dx8.cwiseProduct(c.mask3);
    const Eigen::VectorXd dx6 = vec_layer_norm_backward(dx8, c.ln2, p.ln2, grad.ln2);
    grad.b_hidden += dx6;
    grad.w_hidden += c.x5 * dx6.transpose();
    Eigen::VectorXd dx5 = p.w_hidden * dx6;
    if (c.mask2.size()) dx5 = dx5.cwiseProduct(c.mask2);
    const Eigen::VectorXd dx3 =
        dx5.cwiseProduct((c.pre1.array() > 0.0).cast<double>().matrix());
    const Eigen::VectorXd dx2 = vec_layer_norm_backward(dx3, c.ln1, p.ln1, grad.ln1);
    grad.b_in += dx2;
    grad.w_in += c.x1 * dx2.transpose();
}

} // namespace

// ---------------------------------------------------------------------------
// public surface

void HyperParams::validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
        throw ConfigError("hyperparams: d_model must be divisible by n_heads");
    }
    if (n_tokens < 2) throw ConfigError("hyperparams: need the class token plus one feature token");
    if (n_layers < 1 || d_ff < 1) throw ConfigError("hyperparams: layer sizes must be positive");
    if (dropout_attn < 0.0 || dropout_attn >= 1.0 || dropout_ff < 0.0 || dropout_ff >= 1.0) {
        throw ConfigError("hyperparams: dropout rates must lie in [0, 1)");
    }
}

FusionParams FusionParams::zeros(const HyperParams& hp) {
    FusionParams p;
    p.class_token = Eigen::VectorXd::Zero(hp.d_model);
    p.positional = Eigen::MatrixXd::Zero(hp.n_tokens, hp.d_model);
    p.layers.resize(static_cast<std::size_t>(hp.n_layers));
    for (auto& l : p.layers) {
        l.wq = l.wk = l.wv = l.wo = Eigen::MatrixXd::Zero(hp.d_model, hp.d_model);
        l.ln1.gain = l.ln1.bias = l.ln2.gain = l.ln2.bias = Eigen::VectorXd::Zero(hp.d_model);
        l.ff_w1 = Eigen::MatrixXd::Zero(hp.d_model, hp.d_ff);
        l.ff_b1 = Eigen::VectorXd::Zero(hp.d_ff);
        l.ff_w2 = Eigen::MatrixXd::Zero(hp.d_ff, hp.d_model);
        l.ff_b2 = Eigen::VectorXd::Zero(hp.d_model);
    }
    p.head_w = Eigen::MatrixXd::Zero(hp.d_model, 2);
    p.head_b = Eigen::Vector2d::Zero();
    return p;
}

FusionParams FusionParams::init(const HyperParams& hp, std::uint64_t seed) {
    hp.validate();
    Rng rng(seed);
    FusionParams p = zeros(hp);
    const double bd = 1.0 / std::sqrt(static_cast<double>(hp.d_model));
    const double bf = 1.0 / std::sqrt(static_cast<double>(hp.d_ff));

    p.positional = uniform_matrix(hp.n_tokens, hp.d_model, bd, rng);
    for (auto& l : p.layers) {
        l.wq = uniform_matrix(hp.d_model, hp.d_model, bd, rng);
        l.wk = uniform_matrix(hp.d_model, hp.d_model, bd, rng);
        l.wv = uniform_matrix(hp.d_model, hp.d_model, bd, rng);
        l.wo = uniform_matrix(hp.d_model, hp.d_model, bd, rng);
        l.ln1.gain.setOnes();
        l.ln2.gain.setOnes();
        l.ff_w1 = uniform_matrix(hp.d_model, hp.d_ff, bd, rng);
        l.ff_b1 = uniform_matrix(hp.d_ff, 1, bd, rng);
        l.ff_w2 = uniform_matrix(hp.d_ff, hp.d_model, bf, rng);
        l.ff_b2 = uniform_matrix(hp.d_model, 1, bf, rng);
    }
    p.head_w = uniform_matrix(hp.d_model, 2, bd, rng);
    p.head_b = uniform_matrix(2, 1, bd, rng);
    return p;
}

MlpSubstituteParams MlpSubstituteParams::zeros(int n_tokens_fed, int d_model, int d_ff) {
    MlpSubstituteParams p;
    const Eigen::Index n_in = static_cast<Eigen::Index>(n_tokens_fed) * d_model;
    p.w_in = Eigen::MatrixXd::Zero(n_in, d_ff);
    p.b_in = Eigen::VectorXd::Zero(d_ff);
    p.ln1.gain = p.ln1.bias = Eigen::VectorXd::Zero(d_ff);
    p.w_hidden = Eigen::MatrixXd::Zero(d_ff, d_ff);
    p.b_hidden = Eigen::VectorXd::Zero(d_ff);
    p.ln2.gain = p.ln2.bias = Eigen::VectorXd::Zero(d_ff);
    p.w_out = Eigen::MatrixXd::Zero(d_ff, 2);
    p.b_out = Eigen::Vector2d::Zero();
    return p;
}

MlpSubstituteParams MlpSubstituteParams::init(int n_tokens_fed, int d_model, int d_ff,
                                              std::uint64_t seed) {
    Rng rng(seed);
    MlpSubstituteParams p = zeros(n_tokens_fed, d_model, d_ff);
    const Eigen::Index n_in = p.w_in.rows();
    const double b_in = 1.0 / std::sqrt(static_cast<double>(n_in));
    const double b_ff = 1.0 / std::sqrt(static_cast<double>(d_ff));
    p.w_in = uniform_matrix(n_in, d_ff, b_in, rng);
    p.b_in = uniform_matrix(d_ff, 1, b_in, rng);
    p.ln1.gain.setOnes();
    p.w_hidden = uniform_matrix(d_ff, d_ff, b_ff, rng);
    p.b_hidden = uniform_matrix(d_ff, 1, b_ff, rng);
    p.ln2.gain.setOnes();
    p.w_out = uniform_matrix(d_ff, 2, b_ff, rng);
    p.b_out = uniform_matrix(2, 1, b_ff, rng);
    return p;
}

Eigen::VectorXd project_to_token(const Eigen::VectorXd& features, const Eigen::MatrixXd& weights,
                                 const Eigen::VectorXd& bias) {
    if (weights.rows() != features.size() || weights.cols() != bias.size()) {
        throw ShapeMismatchError("project_to_token: weight shape does not match features/bias");
    }
    return (weights.transpose() * features + bias).cwiseMax(0.0);
}

Eigen::MatrixXd mhsa_forward(const Eigen::MatrixXd& x, const EncoderLayerParams& layer,
                             int n_heads) {
    if (n_heads < 1 || x.cols() % n_heads != 0) {
        throw ShapeMismatchError("mhsa_forward: d_model must be divisible by n_heads");
    }
    if (layer.wq.rows() != x.cols() || layer.wq.cols() != x.cols()) {
        throw ShapeMismatchError("mhsa_forward: projection shapes do not match the input");
    }
    return mhsa(x, layer, n_heads, nullptr);
}

Eigen::MatrixXd encoder_block_forward(const Eigen::MatrixXd& x, const EncoderLayerParams& layer,
                                      const HyperParams& hp) {
    if (x.cols() != hp.d_model) {
        throw ShapeMismatchError("encoder_block_forward: input width does not match d_model");
    }
    return block_forward(x, layer, hp, RunMode::Inference, nullptr, nullptr);
}

GazeAngles fusion_forward(const TokenSet& tokens, const FusionParams& params, const HyperParams& hp,
                          RunMode mode, Rng* rng) {
    const Eigen::Vector2d out = forward_cached(tokens, params, hp, mode, rng, nullptr);
    return GazeAngles{out[0], out[1]};
}

GazeAngles mlp_substitute_forward(const TokenSet& tokens, const MlpSubstituteParams& params,
                                  RunMode mode, Rng* rng) {
    const Eigen::Vector2d out = mlp_forward_cached(tokens, params, mode, rng, nullptr);
    return GazeAngles{out[0], out[1]};
}

GazeAngles apply_subject_bias(const GazeAngles& prediction, const SubjectBias& bias) {
    return GazeAngles{prediction.pitch * (1.0 + bias.scale_pitch) + bias.offset_pitch,
                      prediction.yaw * (1.0 + bias.scale_yaw) + bias.offset_yaw};
}

Eigen::MatrixXd sinusoidal_positional(int n_tokens, int d_model) {
    Eigen::MatrixXd pe(n_tokens, d_model);
    for (int pos = 0; pos < n_tokens; ++pos) {
        for (int i = 0; i < d_model; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / d_model;
            const double angle = pos / std::pow(10000.0, exponent);
            pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

// ---------------------------------------------------------------------------
// parameter traversal

std::vector<TensorRef> tensor_refs(FusionParams& p) {
    std::vector<TensorRef> refs;
    refs.push_back({"class_token", p.class_token.data(), p.class_token.size(), 1});
    refs.push_back({"positional", p.positional.data(), p.positional.rows(), p.positional.cols()});
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        auto& l = p.layers[i];
        const std::string prefix = "layer" + std::to_string(i) + ".";
        refs.push_back({prefix + "wq", l.wq.data(), l.wq.rows(), l.wq.cols()});
        refs.push_back({prefix + "wk", l.wk.data(), l.wk.rows(), l.wk.cols()});
        refs.push_back({prefix + "wv", l.wv.data(), l.wv.rows(), l.wv.cols()});
        refs.push_back({prefix + "wo", l.wo.data(), l.wo.rows(), l.wo.cols()});
        refs.push_back({prefix + "ln1.gain", l.ln1.gain.data(), l.ln1.gain.size(), 1});
        refs.push_back({prefix + "ln1.bias", l.ln1.bias.data(), l.ln1.bias.size(), 1});
        refs.push_back({prefix + "ff_w1", l.ff_w1.data(), l.ff_w1.rows(), l.ff_w1.cols()});
        refs.push_back({prefix + "ff_b1", l.ff_b1.data(), l.ff_b1.size(), 1});
        refs.push_back({prefix + "ff_w2", l.ff_w2.data(), l.ff_w2.rows(), l.ff_w2.cols()});
        refs.push_back({prefix + "ff_b2", l.ff_b2.data(), l.ff_b2.size(), 1});
        refs.push_back({prefix + "ln2.gain", l.ln2.gain.data(), l.ln2.gain.size(), 1});
        refs.push_back({prefix + "ln2.bias", l.ln2.bias.data(), l.ln2.bias.size(), 1});
    }
    refs.push_back({"head.w", p.head_w.data(), p.head_w.rows(), p.head_w.cols()});
    refs.push_back({"head.b", p.head_b.data(), p.head_b.size(), 1});
    return refs;
}

std::vector<TensorRef> tensor_refs(MlpSubstituteParams& p) {
    std::vector<TensorRef> refs;
    refs.push_back({"w_in", p.w_in.data(), p.w_in.rows(), p.w_in.cols()});
    refs.push_back({"b_in", p.b_in.data(), p.b_in.size(), 1});
    refs.push_back({"ln1.gain", p.ln1.gain.data(), p.ln1.gain.size(), 1});
    refs.push_back({"ln1.bias", p.ln1.bias.data(), p.ln1.bias.size(), 1});
    refs.push_back({"w_hidden", p.w_hidden.data(), p.w_hidden.rows(), p.w_hidden.cols()});
    refs.push_back({"b_hidden", p.b_hidden.data(), p.b_hidden.size(), 1});
    refs.push_back({"ln2.gain", p.ln2.gain.data(), p.ln2.gain.size(), 1});
    refs.push_back({"ln2.bias", p.ln2.bias.data(), p.ln2.bias.size(), 1});
    refs.push_back({"w_out", p.w_out.data(), p.w_out.rows(), p.w_out.cols()});
    refs.push_back({"b_out", p.b_out.data(), p.b_out.size(), 1});
    return refs;
}

namespace {

template <typename Params>
Eigen::VectorXd flatten_impl(Params& p) {
    auto refs = tensor_refs(p);
    Eigen::Index total = 0;
    for (const auto& r : refs) total += r.size();
    Eigen::VectorXd flat(total);
    Eigen::Index offset = 0;
    for (const auto& r : refs) {
        flat.segment(offset, r.size()) = Eigen::Map<const Eigen::VectorXd>(r.data, r.size());
        offset += r.size();
    }
    return flat;
}

template <typename Params>
void unflatten_impl(const Eigen::VectorXd& flat, Params& p) {
    auto refs = tensor_refs(p);
    Eigen::Index total = 0;
    for (const auto& r : refs) total += r.size();
    if (flat.size() != total) throw ShapeMismatchError("unflatten: size mismatch");
    Eigen::Index offset = 0;
    for (const auto& r : refs) {
        Eigen::Map<Eigen::VectorXd>(r.data, r.size()) = flat.segment(offset, r.size());
        offset += r.size();
    }
}

} // namespace

Eigen::VectorXd flatten_params(FusionParams& p) { return flatten_impl(p); }
void unflatten_params(const Eigen::VectorXd& flat, FusionParams& p) { unflatten_impl(flat, p); }
Eigen::VectorXd flatten_params(MlpSubstituteParams& p) { return flatten_impl(p); }
void unflatten_params(const Eigen::VectorXd& flat, MlpSubstituteParams& p) {
    unflatten_impl(flat, p);
}

// ---------------------------------------------------------------------------
// losses and training

double fusion_batch_loss(const std::vector<TrainingSample>& batch, const FusionParams& params,
                         const HyperParams& hp) {
    if (batch.empty()) throw EmptyDatasetError("fusion_batch_loss: empty batch");
    double loss = 0.0;
    for (const auto& sample : batch) {
        const Eigen::Vector2d pred =
            forward_cached(sample.tokens, params, hp, RunMode::Inference, nullptr, nullptr);
        loss += (pred - sample.target).squaredNorm();
    }
    return loss / static_cast<double>(batch.size());
}

double mlp_batch_loss(const std::vector<TrainingSample>& batch, const MlpSubstituteParams& params) {
    if (batch.empty()) throw EmptyDatasetError("mlp_batch_loss: empty batch");
    double loss = 0.0;
    for (const auto& sample : batch) {
        const Eigen::Vector2d pred =
            mlp_forward_cached(sample.tokens, params, RunMode::Inference, nullptr, nullptr);
        loss += (pred - sample.target).squaredNorm();
    }
    return loss / static_cast<double>(batch.size());
}

namespace {

double fusion_step(const std::vector<TrainingSample>& batch, const FusionParams& params,
                   const HyperParams& hp, FusionParams& grads, RunMode mode, Rng* rng) {
    if (batch.empty()) throw EmptyDatasetError("fusion_backward: empty batch");
    grads = FusionParams::zeros(hp);
    const double inv_m = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& sample : batch) {
        ForwardCache cache;
        const Eigen::Vector2d pred = forward_cached(sample.tokens, params, hp, mode, rng, &cache);
        const Eigen::Vector2d err = pred - sample.target;
        loss += err.squaredNorm() * inv_m;
        backward_cached(2.0 * inv_m * err, cache, params, hp, grads);
    }
    return loss;
}

} // namespace

double fusion_backward(const std::vector<TrainingSample>& batch, const FusionParams& params,
                       const HyperParams& hp, FusionParams& grads) {
    return fusion_step(batch, params, hp, grads, RunMode::Inference, nullptr);
}

double mlp_backward(const std::vector<TrainingSample>& batch, const MlpSubstituteParams& params,
                    MlpSubstituteParams& grads) {
    if (batch.empty()) throw EmptyDatasetError("mlp_backward: empty batch");
    grads = MlpSubstituteParams::zeros(1, static_cast<int>(params.w_in.rows()),
                                       static_cast<int>(params.b_in.size()));
    const double inv_m = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& sample : batch) {
        MlpCache cache;
        const Eigen::Vector2d pred =
            mlp_forward_cached(sample.tokens, params, RunMode::Inference, nullptr, &cache);
        const Eigen::Vector2d err = pred - sample.target;
        loss += err.squaredNorm() * inv_m;
        mlp_backward_cached(2.0 * inv_m * err, cache, params, grads);
    }
    return loss;
}

Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& loss,
                                 const Eigen::VectorXd& params, double eps) {
    if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
    Eigen::VectorXd grad(params.size());
    Eigen::VectorXd x = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        x[i] = params[i] + eps;
        const double up = loss(x);
        x[i] = params[i] - eps;
        const double down = loss(x);
        x[i] = params[i];
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (state.m.size() != params.size()) {
        state.m = Eigen::VectorXd::Zero(params.size());
        state.v = Eigen::VectorXd::Zero(params.size());
        state.step = 0;
    }
    if (grads.size() != params.size()) throw ShapeMismatchError("adam_step: gradient size mismatch");
    ++state.step;
    state.m = beta1 * state.m + (1.0 - beta1) * grads;
    state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    params -= (lr / bc1) * state.m.cwiseQuotient(((state.v / bc2).cwiseSqrt().array() + eps).matrix());
}

FitResult fit_toy(const std::vector<TrainingSample>& dataset, const HyperParams& hp,
                  const FitConfig& config) {
    if (dataset.empty()) throw EmptyDatasetError("fit_toy: empty dataset");
    hp.validate();

    FitResult result;
    result.params = FusionParams::init(hp, config.seed);
    Rng rng(config.seed + 1);

    Eigen::VectorXd flat = flatten_params(result.params);
    AdamState adam;
    double lr = config.learning_rate;

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<TrainingSample> batch;
    FusionParams grads;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch > 0 && config.lr_decay != 1.0 && config.lr_decay_epochs > 0 &&
            epoch % config.lr_decay_epochs == 0) {
            lr *= config.lr_decay;
        }
        rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            batch.clear();
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);

            const double loss =
                fusion_step(batch, result.params, hp, grads, RunMode::Training, &rng);
            epoch_loss += loss * static_cast<double>(batch.size());
            seen += batch.size();

            const Eigen::VectorXd grad_flat = flatten_params(grads);
            adam_step(flat, grad_flat, adam, lr);
            unflatten_params(flat, result.params);
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(seen));
    }
    return result;
}

} // namespace gaze
