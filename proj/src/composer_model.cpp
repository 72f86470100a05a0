#include "composer_model.hpp"

#include "vcomp/error.hpp"
#include "vcomp/util.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace vcomp {

ParamLayout ParamLayout::build(const ModelConfig& c, std::size_t vocab_size) {
    if (c.width == 0 || c.depth == 0 || c.heads == 0 || c.ffn_mult == 0 || c.context_window == 0) {
        fail(ErrorCode::kInvalidArgument, "model dimensions must be positive");
    }
    if (c.width % c.heads != 0) {
        fail(ErrorCode::kInvalidArgument, "width " + std::to_string(c.width) + " is not divisible by " +
                                              std::to_string(c.heads) + " heads");
    }
    if (c.rope_base != 0.0 && ((c.width / c.heads) % 2 != 0 || !(c.rope_base > 1.0))) {
        fail(ErrorCode::kInvalidArgument, "rotary encoding needs an even head width and a base above 1");
    }
    if (c.visual_dim == 0 || c.audio_dim == 0) fail(ErrorCode::kInvalidArgument, "projector input dims must be positive");
    if (vocab_size < 4) fail(ErrorCode::kInvalidArgument, "vocabulary too small");
    ParamLayout l;
    const auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        l.tensors.push_back({std::move(name), l.total, rows, cols});
        l.total += rows * cols;
    };
    const std::size_t d = c.width, f = c.width * c.ffn_mult;
    add("tok_emb", vocab_size, d);
    add("kind_emb", kNumInputKinds, d);
    add("pos_emb", c.context_window, d);
    add("seg_emb", c.max_segments, d);
    add("proj_v.w", c.visual_dim, d);
    add("proj_v.b", 1, d);
    add("proj_a.w", c.audio_dim, d);
    add("proj_a.b", 1, d);
    for (std::size_t i = 0; i < c.depth; ++i) {
        const std::string p = "blk" + std::to_string(i) + ".";
        add(p + "ln1.g", 1, d);
        add(p + "ln1.b", 1, d);
        if (c.token_shift) add(p + "shift", 1, d);
        add(p + "qkv.w", d, 3 * d);
        add(p + "qkv.b", 1, 3 * d);
        add(p + "out.w", d, d);
        add(p + "out.b", 1, d);
        add(p + "ln2.g", 1, d);
        add(p + "ln2.b", 1, d);
        add(p + "ff1.w", d, f);
        add(p + "ff1.b", 1, f);
        add(p + "ff2.w", f, d);
        add(p + "ff2.b", 1, d);
    }
    add("lnf.g", 1, d);
    add("lnf.b", 1, d);
    if (!c.tie_embeddings) add("head.w", d, vocab_size);
    add("head.b", 1, vocab_size);
    return l;
}

const ParamTensor& ParamLayout::get(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    fail(ErrorCode::kNotFound, "no parameter tensor '" + name + "'");
}

namespace detail {

Offsets Offsets::of(const ParamLayout& l, std::size_t depth) {
    Offsets o;
    o.tok = l.get("tok_emb").offset;
    o.kind = l.get("kind_emb").offset;
    o.pos = l.get("pos_emb").offset;
    o.seg = l.get("seg_emb").offset;
    o.pv_w = l.get("proj_v.w").offset;
    o.pv_b = l.get("proj_v.b").offset;
    o.pa_w = l.get("proj_a.w").offset;
    o.pa_b = l.get("proj_a.b").offset;
    for (std::size_t i = 0; i < depth; ++i) {
        const std::string p = "blk" + std::to_string(i) + ".";
        const auto at = [&](const char* n) { return l.get(p + n).offset; };
        o.layers.push_back({at("ln1.g"), at("ln1.b"), at("qkv.w"), at("qkv.b"), at("out.w"), at("out.b"), at("ln2.g"),
                            at("ln2.b"), at("ff1.w"), at("ff1.b"), at("ff2.w"), at("ff2.b")});
        for (const auto& t : l.tensors) {
            if (t.name == p + "shift") {
                o.layers.back().shift = t.offset;
                o.layers.back().has_shift = true;
            }
        }
    }
    o.lnf_g = l.get("lnf.g").offset;
    o.lnf_b = l.get("lnf.b").offset;
    o.tied = std::none_of(l.tensors.begin(), l.tensors.end(), [](const ParamTensor& t) { return t.name == "head.w"; });
    o.head_w = o.tied ? o.tok : l.get("head.w").offset;
    o.head_b = l.get("head.b").offset;
    return o;
}

namespace {

using Eigen::Index;

template <typename Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using Row = Eigen::Matrix<Real, 1, Eigen::Dynamic>;
template <typename Real>
using CMap = Eigen::Map<const Mat<Real>>;
template <typename Real>
using MMap = Eigen::Map<Mat<Real>>;
template <typename Real>
using CRow = Eigen::Map<const Row<Real>>;
template <typename Real>
using MRow = Eigen::Map<Row<Real>>;

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

template <typename Real>
Real gelu(Real u) {
    const Real t = std::tanh(Real(kGeluC) * (u + Real(kGeluA) * u * u * u));
    return Real(0.5) * u * (Real(1) + t);
}

template <typename Real>
Real gelu_grad(Real u) {
    const Real t = std::tanh(Real(kGeluC) * (u + Real(kGeluA) * u * u * u));
    return Real(0.5) * (Real(1) + t) +
           Real(0.5) * u * (Real(1) - t * t) * Real(kGeluC) * (Real(1) + Real(3 * kGeluA) * u * u);
}

template <typename Real>
void layer_norm(const Mat<Real>& x, const Real* g, const Real* b, Mat<Real>& xhat, std::vector<Real>& rstd,
                Mat<Real>& y) {
    const Index n = x.rows(), d = x.cols();
    xhat.resize(n, d);
    y.resize(n, d);
    rstd.resize(static_cast<std::size_t>(n));
    const CRow<Real> gm(g, d), bm(b, d);
    for (Index t = 0; t < n; ++t) {
        const Real mu = x.row(t).mean();
        const Real var = (x.row(t).array() - mu).square().mean();
        const Real r = Real(1) / std::sqrt(var + Real(kLnEps));
        rstd[static_cast<std::size_t>(t)] = r;
        xhat.row(t) = (x.row(t).array() - mu) * r;
        y.row(t) = xhat.row(t).cwiseProduct(gm) + bm;
    }
}

// Accumulates d(input) into dx and the gain/bias gradients into dg/db.
template <typename Real>
void layer_norm_backward(const Mat<Real>& dy, const Mat<Real>& xhat, const std::vector<Real>& rstd, const Real* g,
                         Real* dg, Real* db, Mat<Real>& dx) {
    const Index n = dy.rows(), d = dy.cols();
    const CRow<Real> gm(g, d);
    MRow<Real>(dg, d) += dy.cwiseProduct(xhat).colwise().sum();
    MRow<Real>(db, d) += dy.colwise().sum();
    for (Index t = 0; t < n; ++t) {
        const Row<Real> dxhat = dy.row(t).cwiseProduct(gm);
        const Real m1 = dxhat.mean();
        const Real m2 = dxhat.cwiseProduct(xhat.row(t)).mean();
        dx.row(t).array() += rstd[static_cast<std::size_t>(t)] * (dxhat.array() - m1 - xhat.row(t).array() * m2);
    }
}

template <typename Real>
struct LayerCache {
    Mat<Real> xhat1, a, as, qkv, att, xhat2, b, u, g;  // as: shifted, scaled a feeding the keys
    std::vector<Real> rstd1, rstd2;
    std::vector<Mat<Real>> probs;  // per head, causal attention weights
};

bool is_media(std::uint8_t kind) {
    return kind == static_cast<std::uint8_t>(SlotKind::kVisual) || kind == static_cast<std::uint8_t>(SlotKind::kAudio);
}

// Rotates each (2i, 2i+1) pair of every head's slice of `row` by pos * base^(-2i/dh).
// sign -1 applies the inverse rotation (used on gradients).
template <typename Real>
void rotate(Real* row, std::size_t pos, std::size_t width, std::size_t dh, double base, double sign) {
    for (std::size_t i = 0; i < dh / 2; ++i) {
        const double angle = sign * static_cast<double>(pos) * std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dh));
        const Real cs = static_cast<Real>(std::cos(angle)), sn = static_cast<Real>(std::sin(angle));
        for (std::size_t h = 0; h < width; h += dh) {
            Real& x0 = row[h + 2 * i];
            Real& x1 = row[h + 2 * i + 1];
            const Real a = x0, b = x1;
            x0 = a * cs - b * sn;
            x1 = a * sn + b * cs;
        }
    }
}

// Embedding row for one position: token or projected features, plus kind
// and position embeddings.
template <typename Real, typename Out>
void embed(const ModelConfig& c, const Offsets& o, std::size_t vocab, const Real* p, std::uint8_t kind, TokenId token,
           const Embedding* features, std::int32_t segment, std::size_t pos, Out&& row) {
    const Index d = static_cast<Index>(c.width);
    if (kind >= kNumInputKinds) fail(ErrorCode::kInvalidArgument, "unknown input kind " + std::to_string(kind));
    if (is_media(kind)) {
        const bool visual = kind == static_cast<std::uint8_t>(SlotKind::kVisual);
        const std::size_t dim = visual ? c.visual_dim : c.audio_dim;
        if (features == nullptr || features->size() != dim) {
            fail(ErrorCode::kInvalidArgument, std::string(visual ? "visual" : "audio") + " slot needs a " +
                                                  std::to_string(dim) + "-d feature vector");
        }
        const Eigen::Map<const Eigen::Matrix<float, 1, Eigen::Dynamic>> f(features->data(), static_cast<Index>(dim));
        row = f.template cast<Real>() * CMap<Real>(p + (visual ? o.pv_w : o.pa_w), static_cast<Index>(dim), d) +
              CRow<Real>(p + (visual ? o.pv_b : o.pa_b), d);
    } else {
        if (token < 0 || static_cast<std::size_t>(token) >= vocab) {
            fail(ErrorCode::kOutOfRange, "token id " + std::to_string(token) + " outside vocabulary");
        }
        row = CRow<Real>(p + o.tok + static_cast<std::size_t>(token) * c.width, d);
    }
    row += CRow<Real>(p + o.kind + kind * c.width, d) + CRow<Real>(p + o.pos + pos * c.width, d);
    if (segment >= 0) {
        if (static_cast<std::size_t>(segment) >= c.max_segments) {
            fail(ErrorCode::kOutOfRange, "segment " + std::to_string(segment) + " exceeds the model's " +
                                             std::to_string(c.max_segments) + " segment embeddings");
        }
        row += CRow<Real>(p + o.seg + static_cast<std::size_t>(segment) * c.width, d);
    }
}

}  // namespace

template <typename Real>
LossStats forward_backward(const ModelConfig& c, const Offsets& o, std::size_t vocab, const Real* p,
                           const SequenceInput& in, Real scale, Real* grad, std::vector<float>* all_logits) {
    const Index n = static_cast<Index>(in.size());
    const Index d = static_cast<Index>(c.width), heads = static_cast<Index>(c.heads), dh = d / heads;
    const Index f = d * static_cast<Index>(c.ffn_mult), v = static_cast<Index>(vocab);
    if (in.tokens.size() != in.size() || in.features.size() != in.size() || in.segments.size() != in.size() ||
        (!in.labels.empty() && in.labels.size() != in.size())) {
        fail(ErrorCode::kInvalidArgument, "sequence input fields differ in length");
    }
    if (in.size() > c.context_window) {
        fail(ErrorCode::kTooLong, "sequence of " + std::to_string(in.size()) + " positions exceeds window of " +
                                      std::to_string(c.context_window));
    }
    if (n == 0) return {};

    Mat<Real> x(n, d);
    for (Index t = 0; t < n; ++t) {
        const auto i = static_cast<std::size_t>(t);
        embed<Real>(c, o, vocab, p, in.kinds[i], in.tokens[i], in.features[i], in.segments[i], i, x.row(t));
    }

    const Real att_scale = Real(1) / std::sqrt(static_cast<Real>(dh));
    std::vector<LayerCache<Real>> caches(c.depth);
    for (std::size_t l = 0; l < c.depth; ++l) {
        auto& cc = caches[l];
        const auto& lo = o.layers[l];
        layer_norm(x, p + lo.ln1_g, p + lo.ln1_b, cc.xhat1, cc.rstd1, cc.a);
        const CMap<Real> wqkv(p + lo.qkv_w, d, 3 * d);
        cc.qkv = cc.a * wqkv;
        cc.qkv.rowwise() += CRow<Real>(p + lo.qkv_b, 3 * d);
        if (lo.has_shift) {
            // keys also see the left neighbour's normalized input, scaled per channel
            cc.as = Mat<Real>::Zero(n, d);
            if (n > 1) {
                cc.as.bottomRows(n - 1) = (cc.a.topRows(n - 1).array().rowwise() * CRow<Real>(p + lo.shift, d).array()).matrix();
            }
            cc.qkv.middleCols(d, d) += cc.as * wqkv.middleCols(d, d);
        }
        if (c.rope_base != 0.0) {
            // Rows are contiguous: q then k, each `width` wide.
            for (Index t = 0; t < n; ++t) {
                Real* r = cc.qkv.data() + t * 3 * d;
                rotate(r, static_cast<std::size_t>(t), c.width, static_cast<std::size_t>(dh), c.rope_base, 1.0);
                rotate(r + d, static_cast<std::size_t>(t), c.width, static_cast<std::size_t>(dh), c.rope_base, 1.0);
            }
        }
        cc.att.resize(n, d);
        cc.probs.resize(static_cast<std::size_t>(heads));
        for (Index h = 0; h < heads; ++h) {
            const auto q = cc.qkv.block(0, h * dh, n, dh);
            const auto k = cc.qkv.block(0, d + h * dh, n, dh);
            const auto vv = cc.qkv.block(0, 2 * d + h * dh, n, dh);
            Mat<Real> s = (q * k.transpose()) * att_scale;
            for (Index i = 0; i < n; ++i) {
                auto head = s.row(i).head(i + 1);
                const Real mx = head.maxCoeff();
                head = (head.array() - mx).exp().matrix();
                head /= head.sum();
                s.row(i).tail(n - i - 1).setZero();
            }
            cc.att.block(0, h * dh, n, dh) = s * vv;
            cc.probs[static_cast<std::size_t>(h)] = std::move(s);
        }
        x += cc.att * CMap<Real>(p + lo.out_w, d, d);
        x.rowwise() += CRow<Real>(p + lo.out_b, d);
        layer_norm(x, p + lo.ln2_g, p + lo.ln2_b, cc.xhat2, cc.rstd2, cc.b);
        cc.u = cc.b * CMap<Real>(p + lo.ff1_w, d, f);
        cc.u.rowwise() += CRow<Real>(p + lo.ff1_b, f);
        cc.g = cc.u.unaryExpr([](Real u) { return gelu(u); });
        x += cc.g * CMap<Real>(p + lo.ff2_w, f, d);
        x.rowwise() += CRow<Real>(p + lo.ff2_b, d);
    }

    Mat<Real> xhatf, z;
    std::vector<Real> rstdf;
    layer_norm(x, p + o.lnf_g, p + o.lnf_b, xhatf, rstdf, z);

    std::vector<Index> rows;
    for (Index t = 0; t < n; ++t) {
        if (all_logits != nullptr || (!in.labels.empty() && in.labels[static_cast<std::size_t>(t)] >= 0)) rows.push_back(t);
    }
    if (rows.empty()) return {};
    const Index r = static_cast<Index>(rows.size());
    Mat<Real> zs(r, d);
    for (Index i = 0; i < r; ++i) zs.row(i) = z.row(rows[static_cast<std::size_t>(i)]);
    Mat<Real> logits = o.tied ? Mat<Real>(zs * CMap<Real>(p + o.tok, v, d).transpose())
                              : Mat<Real>(zs * CMap<Real>(p + o.head_w, d, v));
    logits.rowwise() += CRow<Real>(p + o.head_b, v);
    if (all_logits != nullptr) {
        all_logits->resize(static_cast<std::size_t>(r * v));
        for (Index i = 0; i < r * v; ++i) (*all_logits)[static_cast<std::size_t>(i)] = static_cast<float>(logits.data()[i]);
    }

    LossStats st;
    Mat<Real> dlogits;
    if (grad != nullptr) dlogits = Mat<Real>::Zero(r, v);
    for (Index i = 0; i < r; ++i) {
        const Index t = rows[static_cast<std::size_t>(i)];
        const TokenId label = in.labels.empty() ? -1 : in.labels[static_cast<std::size_t>(t)];
        if (label < 0) continue;
        if (label >= v) fail(ErrorCode::kOutOfRange, "label " + std::to_string(label) + " outside vocabulary");
        Index arg = 0;
        const Real mx = logits.row(i).maxCoeff(&arg);
        const Row<Real> e = (logits.row(i).array() - mx).exp().matrix();
        const Real sum = e.sum();
        st.nll += static_cast<double>(mx + std::log(sum) - logits(i, label));
        st.count += 1;
        if (arg == label) st.correct += 1;
        if (grad != nullptr) {
            dlogits.row(i) = e * (scale / sum);
            dlogits(i, label) -= scale;
        }
    }
    if (grad == nullptr) return st;

    Real* g = grad;
    MRow<Real>(g + o.head_b, v) += dlogits.colwise().sum();
    Mat<Real> dzs;
    if (o.tied) {
        MMap<Real>(g + o.tok, v, d) += dlogits.transpose() * zs;
        dzs = dlogits * CMap<Real>(p + o.tok, v, d);
    } else {
        MMap<Real>(g + o.head_w, d, v) += zs.transpose() * dlogits;
        dzs = dlogits * CMap<Real>(p + o.head_w, d, v).transpose();
    }
    Mat<Real> dz = Mat<Real>::Zero(n, d);
    for (Index i = 0; i < r; ++i) dz.row(rows[static_cast<std::size_t>(i)]) += dzs.row(i);
    Mat<Real> dx = Mat<Real>::Zero(n, d);
    layer_norm_backward(dz, xhatf, rstdf, p + o.lnf_g, g + o.lnf_g, g + o.lnf_b, dx);

    for (std::size_t l = c.depth; l-- > 0;) {
        const auto& cc = caches[l];
        const auto& lo = o.layers[l];
        // feed-forward branch
        MMap<Real>(g + lo.ff2_w, f, d) += cc.g.transpose() * dx;
        MRow<Real>(g + lo.ff2_b, d) += dx.colwise().sum();
        Mat<Real> du = dx * CMap<Real>(p + lo.ff2_w, f, d).transpose();
        du.array() *= cc.u.unaryExpr([](Real u) { return gelu_grad(u); }).array();
        MMap<Real>(g + lo.ff1_w, d, f) += cc.b.transpose() * du;
        MRow<Real>(g + lo.ff1_b, f) += du.colwise().sum();
        const Mat<Real> db = du * CMap<Real>(p + lo.ff1_w, d, f).transpose();
        layer_norm_backward(db, cc.xhat2, cc.rstd2, p + lo.ln2_g, g + lo.ln2_g, g + lo.ln2_b, dx);

        // attention branch
        MMap<Real>(g + lo.out_w, d, d) += cc.att.transpose() * dx;
        MRow<Real>(g + lo.out_b, d) += dx.colwise().sum();
        const Mat<Real> datt = dx * CMap<Real>(p + lo.out_w, d, d).transpose();
        Mat<Real> dqkv(n, 3 * d);
        for (Index h = 0; h < heads; ++h) {
            const auto q = cc.qkv.block(0, h * dh, n, dh);
            const auto k = cc.qkv.block(0, d + h * dh, n, dh);
            const auto vv = cc.qkv.block(0, 2 * d + h * dh, n, dh);
            const Mat<Real>& pr = cc.probs[static_cast<std::size_t>(h)];
            const auto dout = datt.block(0, h * dh, n, dh);
            const Mat<Real> dp = dout * vv.transpose();
            dqkv.block(0, 2 * d + h * dh, n, dh) = pr.transpose() * dout;
            const Eigen::Matrix<Real, Eigen::Dynamic, 1> rs = pr.cwiseProduct(dp).rowwise().sum();
            Mat<Real> ds = (pr.array() * (dp.array().colwise() - rs.array())).matrix() * att_scale;
            dqkv.block(0, h * dh, n, dh) = ds * k;
            dqkv.block(0, d + h * dh, n, dh) = ds.transpose() * q;
        }
        if (c.rope_base != 0.0) {
            for (Index t = 0; t < n; ++t) {
                Real* r = dqkv.data() + t * 3 * d;
                rotate(r, static_cast<std::size_t>(t), c.width, static_cast<std::size_t>(dh), c.rope_base, -1.0);
                rotate(r + d, static_cast<std::size_t>(t), c.width, static_cast<std::size_t>(dh), c.rope_base, -1.0);
            }
        }
        const CMap<Real> wqkv(p + lo.qkv_w, d, 3 * d);
        MMap<Real> gqkv(g + lo.qkv_w, d, 3 * d);
        gqkv += cc.a.transpose() * dqkv;
        MRow<Real>(g + lo.qkv_b, 3 * d) += dqkv.colwise().sum();
        Mat<Real> da = dqkv * wqkv.transpose();
        if (lo.has_shift) {
            const auto dk = dqkv.middleCols(d, d);
            gqkv.middleCols(d, d) += cc.as.transpose() * dk;
            if (n > 1) {
                const Mat<Real> das = (dk * wqkv.middleCols(d, d).transpose()).bottomRows(n - 1);
                MRow<Real>(g + lo.shift, d) += cc.a.topRows(n - 1).cwiseProduct(das).colwise().sum();
                da.topRows(n - 1) += (das.array().rowwise() * CRow<Real>(p + lo.shift, d).array()).matrix();
            }
        }
        layer_norm_backward(da, cc.xhat1, cc.rstd1, p + lo.ln1_g, g + lo.ln1_g, g + lo.ln1_b, dx);
    }

    for (Index t = 0; t < n; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const std::uint8_t kind = in.kinds[i];
        MRow<Real>(g + o.kind + kind * c.width, d) += dx.row(t);
        MRow<Real>(g + o.pos + i * c.width, d) += dx.row(t);
        if (in.segments[i] >= 0) MRow<Real>(g + o.seg + static_cast<std::size_t>(in.segments[i]) * c.width, d) += dx.row(t);
        if (is_media(kind)) {
            const bool visual = kind == static_cast<std::uint8_t>(SlotKind::kVisual);
            const Index dim = static_cast<Index>(visual ? c.visual_dim : c.audio_dim);
            const Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, 1>> fv(in.features[i]->data(), dim);
            MMap<Real>(g + (visual ? o.pv_w : o.pa_w), dim, d) += fv.template cast<Real>() * dx.row(t);
            MRow<Real>(g + (visual ? o.pv_b : o.pa_b), d) += dx.row(t);
        } else {
            MRow<Real>(g + o.tok + static_cast<std::size_t>(in.tokens[i]) * c.width, d) += dx.row(t);
        }
    }
    return st;
}

template LossStats forward_backward<float>(const ModelConfig&, const Offsets&, std::size_t, const float*,
                                           const SequenceInput&, float, float*, std::vector<float>*);
template LossStats forward_backward<double>(const ModelConfig&, const Offsets&, std::size_t, const double*,
                                            const SequenceInput&, double, double*, std::vector<float>*);

void init_parameters(const ModelConfig& c, const ParamLayout& layout, ParamVector& params) {
    params.assign(layout.total, 0.0f);
    Rng rng(hash_combine(c.init_seed, 0x696e6974ULL));
    const auto ends_with = [](const std::string& s, std::string_view suf) {
        return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
    };
    // auto: 1.2/sqrt(width), i.e. 0.15 at width 64. A fixed scale that suits
    // width 64 keeps wider models from ever learning to copy trigger words.
    const double scale = c.init_scale > 0.0 ? c.init_scale : 1.2 / std::sqrt(static_cast<double>(c.width));
    const double residual_scale = scale / std::sqrt(2.0 * static_cast<double>(c.depth));
    for (const auto& t : layout.tensors) {
        float* w = params.data() + t.offset;
        if (ends_with(t.name, ".g")) {
            std::fill(w, w + t.size(), 1.0f);
        } else if (ends_with(t.name, ".b")) {
            continue;
        } else if (ends_with(t.name, ".shift")) {
            std::fill(w, w + t.size(), 0.5f);
        } else if (t.name == "pos_emb" || t.name == "seg_emb") {
            // sinusoidal start, scaled to the other embeddings
            for (std::size_t pos = 0; pos < t.rows; ++pos) {
                for (std::size_t i = 0; i < t.cols; ++i) {
                    const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(t.cols));
                    const double angle = static_cast<double>(pos) * freq;
                    w[pos * t.cols + i] = static_cast<float>(scale * (i % 2 == 0 ? std::sin(angle) : std::cos(angle)));
                }
            }
        } else {
            const double sd = ends_with(t.name, "out.w") || ends_with(t.name, "ff2.w") ? residual_scale : scale;
            for (std::size_t i = 0; i < t.size(); ++i) w[i] = static_cast<float>(sd * rng.normal());
        }
    }
}

IncrementalDecoder::IncrementalDecoder(const ModelConfig& config, const Offsets& off, std::size_t vocab,
                                       const float* params)
    : c_(config), o_(off), vocab_(vocab), p_(params), k_(config.depth), v_(config.depth), prev_a_(config.depth) {}

void IncrementalDecoder::step(std::uint8_t kind, TokenId token, const Embedding* features, std::int32_t segment,
                              std::vector<float>* logits) {
    using RowF = Row<float>;
    if (t_ >= c_.context_window) {
        fail(ErrorCode::kTooLong, "decoding exceeds window of " + std::to_string(c_.context_window));
    }
    const Index d = static_cast<Index>(c_.width), heads = static_cast<Index>(c_.heads), dh = d / heads;
    const Index f = d * static_cast<Index>(c_.ffn_mult);
    const float att_scale = 1.0f / std::sqrt(static_cast<float>(dh));
    const auto ln = [d](const RowF& x, const float* g, const float* b) {
        const float mu = x.mean();
        const float var = (x.array() - mu).square().mean();
        const float r = 1.0f / std::sqrt(var + static_cast<float>(kLnEps));
        RowF y = ((x.array() - mu) * r).matrix();
        return RowF(y.cwiseProduct(CRow<float>(g, d)) + CRow<float>(b, d));
    };

    RowF x(d);
    embed<float>(c_, o_, vocab_, p_, kind, token, features, segment, t_, x);
    const std::size_t need = (t_ + 1) * c_.width;
    for (std::size_t l = 0; l < c_.depth; ++l) {
        const auto& lo = o_.layers[l];
        const RowF a = ln(x, p_ + lo.ln1_g, p_ + lo.ln1_b);
        const CMap<float> wqkv(p_ + lo.qkv_w, d, 3 * d);
        RowF qkv = a * wqkv + CRow<float>(p_ + lo.qkv_b, 3 * d);
        if (lo.has_shift) {
            auto& prev = prev_a_[l];
            if (t_ > 0) {
                const RowF as = CRow<float>(prev.data(), d).cwiseProduct(CRow<float>(p_ + lo.shift, d));
                qkv.segment(d, d) += as * wqkv.middleCols(d, d);
            }
            prev.assign(a.data(), a.data() + d);
        }
        if (c_.rope_base != 0.0) {
            rotate(qkv.data(), t_, c_.width, static_cast<std::size_t>(dh), c_.rope_base, 1.0);
            rotate(qkv.data() + d, t_, c_.width, static_cast<std::size_t>(dh), c_.rope_base, 1.0);
        }
        auto& kc = k_[l];
        auto& vc = v_[l];
        if (kc.size() < need) {
            kc.resize(std::max(need, 2 * kc.size()));
            vc.resize(kc.size());
        }
        std::copy(qkv.data() + d, qkv.data() + 2 * d, kc.data() + t_ * c_.width);
        std::copy(qkv.data() + 2 * d, qkv.data() + 3 * d, vc.data() + t_ * c_.width);
        const Index len = static_cast<Index>(t_ + 1);
        const CMap<float> km(kc.data(), len, d), vm(vc.data(), len, d);
        RowF att(d);
        for (Index h = 0; h < heads; ++h) {
            Eigen::VectorXf s = km.block(0, h * dh, len, dh) * qkv.segment(h * dh, dh).transpose() * att_scale;
            s = (s.array() - s.maxCoeff()).exp().matrix();
            s /= s.sum();
            att.segment(h * dh, dh) = s.transpose() * vm.block(0, h * dh, len, dh);
        }
        x += att * CMap<float>(p_ + lo.out_w, d, d) + CRow<float>(p_ + lo.out_b, d);
        const RowF b = ln(x, p_ + lo.ln2_g, p_ + lo.ln2_b);
        RowF u = b * CMap<float>(p_ + lo.ff1_w, d, f) + CRow<float>(p_ + lo.ff1_b, f);
        u = u.unaryExpr([](float z) { return gelu(z); });
        x += u * CMap<float>(p_ + lo.ff2_w, f, d) + CRow<float>(p_ + lo.ff2_b, d);
    }
    ++t_;
    if (logits == nullptr) return;
    const RowF z = ln(x, p_ + o_.lnf_g, p_ + o_.lnf_b);
    const Index v = static_cast<Index>(vocab_);
    const RowF out = (o_.tied ? RowF(z * CMap<float>(p_ + o_.tok, v, d).transpose())
                              : RowF(z * CMap<float>(p_ + o_.head_w, d, v))) +
                     CRow<float>(p_ + o_.head_b, v);
    logits->assign(out.data(), out.data() + v);
}

}  // namespace detail
}  // namespace vcomp
