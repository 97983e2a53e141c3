#include "planoforge/denoiser.hpp"

#include <cmath>

namespace planoforge {

nlohmann::json DenoiserConfig::to_json() const {
    return {{"in_channels", in_channels},
            {"widths", {widths[0], widths[1], widths[2]}},
            {"time_embed_dim", time_embed_dim},
            {"attention", attention}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    const auto w = j.at("widths");
    c.widths = {w.at(0).get<int>(), w.at(1).get<int>(), w.at(2).get<int>()};
    c.time_embed_dim = j.at("time_embed_dim").get<int>();
    c.attention = j.at("attention").get<bool>();
    return c;
}

Tensor DenoiserModel::time_embedding(int t, int total_steps, int dim) {
    // rescale so any T covers the same frequency range as a 1000-step run
    const double tv = static_cast<double>(t) * (1000.0 / static_cast<double>(total_steps));
    const int half = dim / 2;
    Tensor e = Tensor::zeros({1, static_cast<std::size_t>(dim)});
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                     static_cast<double>(std::max(1, half - 1)));
        e.data[static_cast<std::size_t>(i)] = std::sin(tv * freq);
        e.data[static_cast<std::size_t>(half + i)] = std::cos(tv * freq);
    }
    return e;
}

namespace {

Tensor he_conv(std::size_t oc, std::size_t ic, std::size_t kh, std::size_t kw, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(ic * kh * kw));
    return Tensor::randn({oc, ic, kh, kw}, rng, std);
}

void init_resblock(std::map<std::string, Tensor>& p, const std::string& prefix, int cin, int cout,
                   int temb, Rng& rng) {
    const auto ci = static_cast<std::size_t>(cin);
    const auto co = static_cast<std::size_t>(cout);
    p[prefix + ".c1.w"] = he_conv(co, ci, 3, 3, rng);
    p[prefix + ".c1.b"] = Tensor::zeros({co});
    p[prefix + ".t.w"] =
        Tensor::randn({static_cast<std::size_t>(temb), co}, rng,
                      std::sqrt(2.0 / static_cast<double>(temb)));
    p[prefix + ".c2.w"] = he_conv(co, co, 3, 3, rng);
    p[prefix + ".c2.b"] = Tensor::zeros({co});
    if (cin != cout) p[prefix + ".s.w"] = he_conv(co, ci, 1, 1, rng);
}

}  // namespace

DenoiserModel DenoiserModel::init(const DenoiserConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    std::map<std::string, Tensor> p;
    const auto [w1, w2, w3] = cfg.widths;
    const int cin = cfg.in_channels + 2;  // plus position planes

    p["in.w"] = he_conv(static_cast<std::size_t>(w1), static_cast<std::size_t>(cin), 3, 3, rng);
    p["in.b"] = Tensor::zeros({static_cast<std::size_t>(w1)});
    init_resblock(p, "d0", w1, w1, cfg.time_embed_dim, rng);
    p["down1.w"] = he_conv(static_cast<std::size_t>(w2), static_cast<std::size_t>(w1), 3, 3, rng);
    p["down1.b"] = Tensor::zeros({static_cast<std::size_t>(w2)});
    init_resblock(p, "d1", w2, w2, cfg.time_embed_dim, rng);
    p["down2.w"] = he_conv(static_cast<std::size_t>(w3), static_cast<std::size_t>(w2), 3, 3, rng);
    p["down2.b"] = Tensor::zeros({static_cast<std::size_t>(w3)});
    init_resblock(p, "m0", w3, w3, cfg.time_embed_dim, rng);
    if (cfg.attention) {
        const auto c = static_cast<std::size_t>(w3);
        p["att.q.w"] = he_conv(c, c, 1, 1, rng);
        p["att.k.w"] = he_conv(c, c, 1, 1, rng);
        p["att.v.w"] = he_conv(c, c, 1, 1, rng);
        p["att.o.w"] = Tensor::zeros({c, c, 1, 1});
    }
    init_resblock(p, "m1", w3, w3, cfg.time_embed_dim, rng);
    init_resblock(p, "u1", w3 + w2, w2, cfg.time_embed_dim, rng);
    init_resblock(p, "u0", w2 + w1, w1, cfg.time_embed_dim, rng);
    p["out.w"] = Tensor::zeros({static_cast<std::size_t>(cfg.in_channels),
                                static_cast<std::size_t>(w1), 3, 3});
    p["out.b"] = Tensor::zeros({static_cast<std::size_t>(cfg.in_channels)});
    return DenoiserModel(cfg, std::move(p));
}

std::size_t DenoiserModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

NodeId DenoiserModel::predict(Graph& g, NodeId x, int t, int total_steps, bool trainable) const {
    const Shape& xs = g.value(x).shape;
    if (xs.size() != 3 || xs[0] != static_cast<std::size_t>(cfg_.in_channels))
        throw ShapeError("denoiser: expected {" + std::to_string(cfg_.in_channels) +
                         ",S,K} input, got " + shape_str(xs));
    const std::size_t s = xs[1], k = xs[2];

    auto P = [&](const std::string& name) {
        const auto it = params_.find(name);
        if (it == params_.end()) throw ValueError("denoiser: missing parameter " + name);
        return trainable ? g.param(name, it->second) : g.input(it->second);
    };

    const NodeId temb = g.input(time_embedding(t, total_steps, cfg_.time_embed_dim));

    auto resblock = [&](const std::string& prefix, NodeId in, int cin, int cout) {
        NodeId h = g.add_bias(g.conv2d(in, P(prefix + ".c1.w")), P(prefix + ".c1.b"));
        const NodeId tp = g.reshape(g.matmul(temb, P(prefix + ".t.w")),
                                    {static_cast<std::size_t>(cout)});
        h = g.silu(g.add_bias(h, tp));
        h = g.add_bias(g.conv2d(h, P(prefix + ".c2.w")), P(prefix + ".c2.b"));
        const NodeId skip = (cin == cout) ? in : g.conv2d(in, P(prefix + ".s.w"));
        return g.add(h, skip);
    };

    // constant position planes: row and column fraction in [-1, 1]
    Tensor pos = Tensor::zeros({2, s, k});
    for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            pos.at3(0, r, c) = s == 1 ? 0.0 : 2.0 * static_cast<double>(r) / (s - 1.0) - 1.0;
            pos.at3(1, r, c) = k == 1 ? 0.0 : 2.0 * static_cast<double>(c) / (k - 1.0) - 1.0;
        }

    const auto [w1, w2, w3] = cfg_.widths;
    NodeId h = g.concat({x, g.input(pos)}, 0);
    h = g.add_bias(g.conv2d(h, P("in.w")), P("in.b"));
    const NodeId h0 = resblock("d0", h, w1, w1);

    NodeId h1 = g.silu(g.add_bias(g.conv2d(h0, P("down1.w"), 2), P("down1.b")));
    h1 = resblock("d1", h1, w2, w2);
    const Shape s1 = g.value(h1).shape;

    NodeId h2 = g.silu(g.add_bias(g.conv2d(h1, P("down2.w"), 2), P("down2.b")));
    h2 = resblock("m0", h2, w3, w3);

    if (cfg_.attention) {
        const Shape s2 = g.value(h2).shape;
        const std::size_t n = s2[1] * s2[2];
        const auto c = static_cast<std::size_t>(w3);
        auto flat = [&](NodeId v) { return g.transpose(g.reshape(v, {c, n})); };
        const NodeId q = flat(g.conv2d(h2, P("att.q.w")));
        const NodeId kk = flat(g.conv2d(h2, P("att.k.w")));
        const NodeId v = flat(g.conv2d(h2, P("att.v.w")));
        const NodeId scores =
            g.softmax_rows(g.affine(g.matmul(q, g.transpose(kk)), 1.0 / std::sqrt(w3), 0.0));
        const NodeId mixed = g.reshape(g.transpose(g.matmul(scores, v)), s2);
        h2 = g.add(h2, g.conv2d(mixed, P("att.o.w")));
    }
    h2 = resblock("m1", h2, w3, w3);

    NodeId u = g.slice(g.upsample2x(h2), {0, 0, 0}, {static_cast<std::size_t>(w3), s1[1], s1[2]});
    u = resblock("u1", g.concat({u, h1}, 0), w3 + w2, w2);

    u = g.slice(g.upsample2x(u), {0, 0, 0}, {static_cast<std::size_t>(w2), s, k});
    u = resblock("u0", g.concat({u, h0}, 0), w2 + w1, w1);

    return g.add_bias(g.conv2d(u, P("out.w")), P("out.b"));
}

Tensor DenoiserModel::predict_value(const Tensor& x, int t, int total_steps) const {
    Graph g;
    const NodeId out = predict(g, g.input(x), t, total_steps, false);
    return g.value(out);
}

}  // namespace planoforge
