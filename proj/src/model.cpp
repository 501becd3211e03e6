#include "sta/model.hpp"

#include <string>

#include "sta/errors.hpp"
#include "sta/io.hpp"

namespace sta {

const char* group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::kMain: return "main";
        case ParamGroup::kSpatial: return "spatial";
        case ParamGroup::kTemporal: return "temporal";
    }
    return "?";
}

bool GroupMask::contains(ParamGroup g) const {
    switch (g) {
        case ParamGroup::kMain: return main;
        case ParamGroup::kSpatial: return spatial;
        case ParamGroup::kTemporal: return temporal;
    }
    return false;
}

STAModel STAModel::zeros(const ModelShape& shape) {
    if (shape.joints == 0 || shape.classes == 0 || shape.main_layers == 0 || shape.main_hidden == 0 ||
        shape.spatial_hidden == 0 || shape.score_hidden == 0 || shape.temporal_hidden == 0) {
        throw ContractError("model shape has a zero dimension");
    }
    STAModel m;
    m.shape = shape;
    m.spatial = SpatialAttnParams::zeros(shape.joints, shape.spatial_hidden, shape.score_hidden);
    m.temporal = TemporalAttnParams::zeros(shape.input_size(), shape.temporal_hidden);
    for (std::size_t l = 0; l < shape.main_layers; ++l) {
        m.main.push_back(LstmParams::zeros(l == 0 ? shape.input_size() : shape.main_hidden, shape.main_hidden));
    }
    m.proj_w = Tensor({shape.classes, shape.main_hidden});
    m.proj_b = Tensor({shape.classes});
    return m;
}

void STAModel::validate() const {
    spatial.validate();
    temporal.validate();
    if (main.empty()) throw DimensionError("model has no main LSTM layers");
    const std::size_t d = input_size();
    if (temporal.input_size() != d) throw DimensionError("temporal subnetwork input size differs from D");
    for (std::size_t l = 0; l < main.size(); ++l) {
        main[l].validate();
        const std::size_t expected = l == 0 ? d : main[l - 1].hidden_size();
        if (main[l].input_size() != expected) {
            throw DimensionError("main layer " + std::to_string(l) + " input " +
                                 std::to_string(main[l].input_size()) + " != " + std::to_string(expected));
        }
    }
    const std::size_t h = main.back().hidden_size();
    if (proj_w.rank() != 2 || proj_w.dim(1) != h || proj_b.shape() != Shape{proj_w.dim(0)}) {
        throw DimensionError("class projection " + shape_string(proj_w.shape()) + " does not fit H=" +
                             std::to_string(h));
    }
}

namespace {

const char* const kGateNames[kGateCount] = {"i", "f", "c", "o"};

template <typename Ref, typename Model>
std::vector<Ref> collect(Model& m) {
    std::vector<Ref> out;
    auto lstm = [&](const std::string& prefix, auto& p, ParamGroup g) {
        for (std::size_t k = 0; k < kGateCount; ++k) out.push_back({prefix + ".wx." + kGateNames[k], g, true, &p.wx[k]});
        for (std::size_t k = 0; k < kGateCount; ++k) out.push_back({prefix + ".wh." + kGateNames[k], g, true, &p.wh[k]});
        for (std::size_t k = 0; k < kGateCount; ++k) out.push_back({prefix + ".b." + kGateNames[k], g, false, &p.b[k]});
    };
    for (std::size_t l = 0; l < m.main.size(); ++l) lstm("main." + std::to_string(l), m.main[l], ParamGroup::kMain);
    out.push_back({"proj.w", ParamGroup::kMain, true, &m.proj_w});
    out.push_back({"proj.b", ParamGroup::kMain, false, &m.proj_b});
    lstm("spatial.lstm", m.spatial.lstm, ParamGroup::kSpatial);
    out.push_back({"spatial.w_x", ParamGroup::kSpatial, true, &m.spatial.w_x});
    out.push_back({"spatial.w_h", ParamGroup::kSpatial, true, &m.spatial.w_h});
    out.push_back({"spatial.b", ParamGroup::kSpatial, false, &m.spatial.b});
    out.push_back({"spatial.u", ParamGroup::kSpatial, true, &m.spatial.u});
    out.push_back({"spatial.b_u", ParamGroup::kSpatial, false, &m.spatial.b_u});
    lstm("temporal.lstm", m.temporal.lstm, ParamGroup::kTemporal);
    out.push_back({"temporal.w_x", ParamGroup::kTemporal, true, &m.temporal.w_x});
    out.push_back({"temporal.w_h", ParamGroup::kTemporal, true, &m.temporal.w_h});
    out.push_back({"temporal.b", ParamGroup::kTemporal, false, &m.temporal.b});
    return out;
}

}  // namespace

std::vector<ParamRef> STAModel::parameters() { return collect<ParamRef>(*this); }
std::vector<ConstParamRef> STAModel::parameters() const { return collect<ConstParamRef>(*this); }

std::uint64_t STAModel::digest(ParamGroup g) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : parameters()) {
        if (p.group != g) continue;
        const std::string& n = p.name;
        h = fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(n.data()), n.size()), h);
        h = fnv1a64(p.tensor->values(), h);
    }
    return h;
}

bool STAModel::identical(const STAModel& other) const {
    const auto a = parameters();
    const auto b = other.parameters();
    if (a.size() != b.size() || spatial_bypass != other.spatial_bypass || temporal_bypass != other.temporal_bypass) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name || !a[i].tensor->identical(*b[i].tensor)) return false;
    }
    return true;
}

// ---- initialization ----------------------------------------------------------

void init_gaussian(Tensor& t, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> n(0.0, stddev);
    for (double& v : t.values()) v = n(rng);
}

void init_lstm(LstmParams& p, std::mt19937_64& rng, double stddev) {
    for (std::size_t k = 0; k < kGateCount; ++k) {
        init_gaussian(p.wx[k], rng, stddev);
        init_gaussian(p.wh[k], rng, stddev);
        p.b[k].fill(0.0);
    }
}

STAModel init_params(const ModelShape& shape, std::mt19937_64& rng, double stddev) {
    STAModel m = STAModel::zeros(shape);
    for (auto& p : m.parameters()) {
        if (p.is_weight)
            init_gaussian(*p.tensor, rng, stddev);
        else
            p.tensor->fill(0.0);
    }
    return m;
}

STAModel init_params(const ModelShape& shape, std::uint64_t seed, double stddev) {
    std::mt19937_64 rng(seed);
    return init_params(shape, rng, stddev);
}

void grow_main(STAModel& m, std::size_t layers, std::mt19937_64& rng, double stddev) {
    if (layers == 0) throw ContractError("grow_main: need at least one layer");
    const std::size_t h = m.shape.main_hidden;
    m.main.resize(std::min(layers, m.main.size()));
    while (m.main.size() < layers) {
        LstmParams p = LstmParams::zeros(h, h);
        init_lstm(p, rng, stddev);
        m.main.push_back(std::move(p));
    }
    m.shape.main_layers = layers;
}

void reset_main(STAModel& m, std::size_t layers, std::mt19937_64& rng, double stddev) {
    if (layers == 0) throw ContractError("reset_main: need at least one layer");
    m.main.clear();
    for (std::size_t l = 0; l < layers; ++l) {
        LstmParams p = LstmParams::zeros(l == 0 ? m.input_size() : m.shape.main_hidden, m.shape.main_hidden);
        init_lstm(p, rng, stddev);
        m.main.push_back(std::move(p));
    }
    init_gaussian(m.proj_w, rng, stddev);
    m.proj_b.fill(0.0);
    m.shape.main_layers = layers;
}

// ---- forward -----------------------------------------------------------------

bool STAModel::group_active(ParamGroup g) const {
    switch (g) {
        case ParamGroup::kMain: return true;
        case ParamGroup::kSpatial: return !spatial_bypass;
        case ParamGroup::kTemporal: return !temporal_bypass;
    }
    return true;
}

BoundModel bind(ad::Graph& g, const STAModel& m, const GroupMask& trainable) {
    m.validate();
    BoundModel b;
    for (const auto& layer : m.main) b.main.push_back(bind(g, layer, trainable.main));
    b.proj_w = g.param(m.proj_w, trainable.main);
    b.proj_b = g.param(m.proj_b, trainable.main);
    b.spatial = bind(g, m.spatial, trainable.spatial);
    b.temporal = bind(g, m.temporal, trainable.temporal);

    // Same order as STAModel::parameters().
    auto lstm = [&](const LstmVars& v) {
        for (const auto& w : v.wx) b.leaves.push_back(w);
        for (const auto& w : v.wh) b.leaves.push_back(w);
        for (const auto& w : v.b) b.leaves.push_back(w);
    };
    for (const auto& v : b.main) lstm(v);
    b.leaves.push_back(b.proj_w);
    b.leaves.push_back(b.proj_b);
    lstm(b.spatial.lstm);
    for (const auto& v : {b.spatial.w_x, b.spatial.w_h, b.spatial.b, b.spatial.u, b.spatial.b_u})
        b.leaves.push_back(v);
    lstm(b.temporal.lstm);
    for (const auto& v : {b.temporal.w_x, b.temporal.w_h, b.temporal.b}) b.leaves.push_back(v);
    return b;
}

ForwardGraph forward(ad::Graph& g, const STAModel& m, const BoundModel& vars, const SkeletonSequence& seq,
                     const ForwardOptions& opts) {
    const std::size_t k = m.joints();
    if (seq.joints != k) {
        throw DimensionError("sequence has " + std::to_string(seq.joints) + " joints, model expects " +
                             std::to_string(k));
    }
    const std::size_t steps = seq.valid_len;
    if (steps == 0) throw ContractError("forward: sequence has no valid frames");
    if (steps > seq.length()) throw ContractError("forward: valid length exceeds stored frames");

    std::vector<ad::Var> xs;
    xs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto f = seq.frame(t);
        xs.push_back(g.input(Tensor({f.size()}, std::vector<double>(f.begin(), f.end()))));
    }

    ForwardGraph out;
    out.trace.frames = steps;
    out.trace.joints = k;

    std::vector<ad::Var> main_in;
    if (m.spatial_bypass) {
        main_in = xs;
        out.trace.alphas.assign(steps * k, 1.0);
    } else {
        out.alphas = spatial_attention(vars.spatial, xs);
        main_in.reserve(steps);
        out.trace.alphas.reserve(steps * k);
        for (std::size_t t = 0; t < steps; ++t) {
            main_in.push_back(modulate(xs[t], out.alphas[t]));
            const auto a = out.alphas[t].value().values();
            out.trace.alphas.insert(out.trace.alphas.end(), a.begin(), a.end());
        }
    }

    const auto top = lstm_stack(vars.main, main_in, opts.dropout, opts.training, opts.rng);

    std::vector<ad::Var> terms;
    terms.reserve(steps);
    if (m.temporal_bypass) {
        out.trace.betas.assign(steps, 1.0);
        for (std::size_t t = 0; t < steps; ++t) terms.push_back(ad::affine(vars.proj_w, top[t], vars.proj_b));
    } else {
        out.betas = temporal_attention(vars.temporal, xs);
        for (std::size_t t = 0; t < steps; ++t) {
            const ad::Var z = ad::affine(vars.proj_w, top[t], vars.proj_b);
            terms.push_back(ad::mul(out.betas[t], z));
            out.trace.betas.push_back(out.betas[t].item());
        }
    }
    out.o = ad::add_n(terms);
    out.p = ad::softmax(out.o);
    return out;
}

Prediction forward(const STAModel& m, const SkeletonSequence& seq) {
    ad::Graph g;
    const BoundModel vars = bind(g, m, GroupMask::none());
    ForwardGraph fg = forward(g, m, vars, seq);
    Prediction p;
    p.o.assign(fg.o.value().values().begin(), fg.o.value().values().end());
    p.p.assign(fg.p.value().values().begin(), fg.p.value().values().end());
    p.trace = std::move(fg.trace);
    return p;
}

std::size_t argmax(std::span<const double> p) {
    if (p.empty()) throw ContractError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

std::size_t predict(const STAModel& m, const SkeletonSequence& seq) { return argmax(forward(m, seq).p); }

}  // namespace sta
