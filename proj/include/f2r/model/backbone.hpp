#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "f2r/align/faam.hpp"
#include "f2r/align/fdam.hpp"
#include "f2r/autograd/ops.hpp"
#include "f2r/core/checksum.hpp"
#include "f2r/core/rng.hpp"

namespace f2r {

enum class Mode { blind, nonblind };
enum class SkipKind { faam, fdam, direct };

inline const char* to_string(Mode m) { return m == Mode::blind ? "blind" : "nonblind"; }
inline const char* to_string(SkipKind k) {
    switch (k) {
        case SkipKind::faam: return "faam";
        case SkipKind::fdam: return "fdam";
        default: return "direct";
    }
}

// Architecture constants shared by the Blind Estimator and the Spatial
// Refiner. Encoder/decoder shapes depend only on these, never on the
// skip-module choice, which is what makes the two stages' backbones
// interchangeable.
struct ArchConfig {
    int levels = 4;
    int base_ch = 16;       // C; channel schedule doubles per level, capped
    int cap_mult = 4;
    int data_ch = 3;        // Ch of the frames (residual output width)
    int input_ch = 6;       // per-frame network input channels (2*Ch joint)
    int window = 5;         // T
    int faam_ratio = 4;
    int faam_spatial_k = 7;
    int dcn_k = 3;
    int dcn_groups = 8;
    double offset_clamp = 10.0;
    double lrelu_slope = 0.1;
    bool stacked_input = false;  // ablation baseline: frames concatenated at the head

    int level_ch(int l) const { return std::min(base_ch << l, base_ch * cap_mult); }

    void validate() const {
        if (levels < 2) throw ConfigError("arch: levels must be >= 2");
        if (base_ch < 1) throw ConfigError("arch: base_ch must be >= 1");
        if (window < 3 || window % 2 == 0) throw ConfigError("arch: window must be odd and >= 3");
        if (base_ch % dcn_groups != 0)
            throw ConfigError("arch: dcn_groups " + std::to_string(dcn_groups) +
                              " must divide base channels " + std::to_string(base_ch));
        if (faam_spatial_k % 2 == 0 || dcn_k % 2 == 0)
            throw ConfigError("arch: attention/deformable kernels must be odd");
    }
};

template <class S>
struct ModelStateT {
    Mode mode = Mode::blind;
    SkipKind skip = SkipKind::faam;
    ArchConfig arch;
    std::vector<std::pair<std::string, TensorT<S>>> params;  // creation order is the wire order

    TensorT<S>& param(const std::string& name) {
        for (auto& [n, t] : params)
            if (n == name) return t;
        throw InputError("model: unknown parameter '" + name + "'");
    }
    const TensorT<S>& param(const std::string& name) const {
        return const_cast<ModelStateT*>(this)->param(name);
    }

    uint64_t params_checksum() const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& [n, t] : params) {
            h = fnv1a64(n, h);
            h = checksum(t, h);
        }
        return h;
    }

    template <class T2>
    ModelStateT<T2> cast() const {
        ModelStateT<T2> out;
        out.mode = mode;
        out.skip = skip;
        out.arch = arch;
        for (const auto& [n, t] : params) out.params.emplace_back(n, t.template cast<T2>());
        return out;
    }

    // Number of maps entering a FAAM stack at each level.
    int faam_inputs() const {
        return (mode == Mode::nonblind && skip == SkipKind::faam) ? arch.window : arch.window - 1;
    }

    static ModelStateT create(Mode mode, SkipKind skip, const ArchConfig& arch, uint64_t seed);
};

using ModelState = ModelStateT<float>;

namespace detail_model {

template <class S>
void add_conv(ModelStateT<S>& st, const std::string& name, int cout, int cin, int kh, int kw,
              uint64_t seed, bool zero = false) {
    TensorT<S> w({cout, cin, kh, kw});
    if (!zero) {
        Rng rng(hash_seed(seed, fnv1a64(name)));
        const double std = std::sqrt(2.0 / (static_cast<double>(cin) * kh * kw));
        for (auto& v : w.data) v = static_cast<S>(std * rng.gaussian());
    }
    st.params.emplace_back(name + ".w", std::move(w));
    st.params.emplace_back(name + ".b", TensorT<S>({cout}));
}

}  // namespace detail_model

template <class S>
ModelStateT<S> ModelStateT<S>::create(Mode mode, SkipKind skip, const ArchConfig& arch,
                                      uint64_t seed) {
    arch.validate();
    if (mode == Mode::blind && skip == SkipKind::direct && !arch.stacked_input)
        throw ConfigError("direct skips require the stacked-input wiring");
    ModelStateT st;
    st.mode = mode;
    st.skip = skip;
    st.arch = arch;
    const int L = arch.levels;
    using detail_model::add_conv;

    add_conv(st, "head", arch.level_ch(0), arch.input_ch, 3, 3, seed);
    for (int l = 0; l < L; ++l) {
        const int c = arch.level_ch(l);
        add_conv(st, "enc" + std::to_string(l) + ".c1", c, c, 3, 3, seed);
        add_conv(st, "enc" + std::to_string(l) + ".c2", c, c, 3, 3, seed);
        if (l < L - 1) add_conv(st, "down" + std::to_string(l), arch.level_ch(l + 1), c, 3, 3, seed);
    }

    if (skip == SkipKind::faam) {
        const int n_in = st.faam_inputs();
        for (int l = 0; l < L; ++l) {
            const int c = arch.level_ch(l);
            const int m = n_in * c;
            const int hidden = std::max(1, m / arch.faam_ratio);
            const std::string p = "faam" + std::to_string(l);
            add_conv(st, p + ".fc1", hidden, m, 1, 1, seed);
            add_conv(st, p + ".fc2", m, hidden, 1, 1, seed);
            add_conv(st, p + ".sp", 1, 2, arch.faam_spatial_k, arch.faam_spatial_k, seed);
            add_conv(st, p + ".agg", c, m, 1, 1, seed);
        }
    } else if (skip == SkipKind::fdam) {
        const bool has_center = mode == Mode::nonblind;
        const int kk = arch.dcn_k * arch.dcn_k;
        for (int l = 0; l < L; ++l) {
            const int c = arch.level_ch(l);
            const std::string p = "fdam" + std::to_string(l);
            add_conv(st, p + ".off1", c, (has_center ? 3 : 2) * c + 2, 3, 3, seed);
            add_conv(st, p + ".off2", c, c, 3, 3, seed);
            // Offset head starts at zero so sampling begins exactly on the
            // flow-initialized taps.
            add_conv(st, p + ".off3", arch.dcn_groups * kk * 2, c, 3, 3, seed, /*zero=*/true);
            add_conv(st, p + ".dcn", c, c, arch.dcn_k, arch.dcn_k, seed);
            add_conv(st, p + ".fuse", c, (arch.window - 1) * c, 1, 1, seed);
            if (has_center)
                st.params.emplace_back(p + ".beta", TensorT<S>({1}));  // identity at init
        }
    }

    for (int l = L - 2; l >= 0; --l) {
        const int c = arch.level_ch(l);
        const std::string p = "dec" + std::to_string(l);
        add_conv(st, p + ".up", c, arch.level_ch(l + 1), 3, 3, seed);
        add_conv(st, p + ".c1", c, 2 * c, 3, 3, seed);
        add_conv(st, p + ".c2", c, c, 3, 3, seed);
    }
    add_conv(st, "tail", arch.data_ch, arch.level_ch(0), 3, 3, seed);
    return st;
}

// --- tape-side forward passes ---------------------------------------------

namespace ag {

template <class S>
struct BoundModel {
    Tape<S>* tape = nullptr;
    const ModelStateT<S>* state = nullptr;
    std::unordered_map<std::string, VarId> vars;

    VarId v(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw InputError("bound model: unknown parameter '" + name + "'");
        return it->second;
    }
    S slope() const { return static_cast<S>(state->arch.lrelu_slope); }
};

template <class S>
BoundModel<S> bind_model(Tape<S>& t, const ModelStateT<S>& st, bool trainable) {
    BoundModel<S> bm;
    bm.tape = &t;
    bm.state = &st;
    for (const auto& [n, w] : st.params) bm.vars.emplace(n, t.leaf(w, trainable));
    return bm;
}

// Strictly per-frame feature extraction; all cross-frame computation is
// deferred to the skip connections. Returns features per level.
template <class S>
std::vector<VarId> encode_frame(BoundModel<S>& bm, VarId input) {
    Tape<S>& t = *bm.tape;
    const auto& arch = bm.state->arch;
    if (t.val(input).dim(0) != arch.input_ch)
        throw InputError("encode: input has " + std::to_string(t.val(input).dim(0)) +
                         " channels, expected " + std::to_string(arch.input_ch));
    std::vector<VarId> feats;
    VarId s = leaky_relu(t, conv2d(t, input, bm.v("head.w"), bm.v("head.b")), bm.slope());
    for (int l = 0; l < arch.levels; ++l) {
        const std::string p = "enc" + std::to_string(l);
        s = leaky_relu(t, conv2d(t, s, bm.v(p + ".c1.w"), bm.v(p + ".c1.b")), bm.slope());
        s = leaky_relu(t, conv2d(t, s, bm.v(p + ".c2.w"), bm.v(p + ".c2.b")), bm.slope());
        feats.push_back(s);
        if (l < arch.levels - 1) {
            const std::string d = "down" + std::to_string(l);
            s = leaky_relu(t, conv2d(t, s, bm.v(d + ".w"), bm.v(d + ".b"), /*stride=*/2), bm.slope());
        }
    }
    return feats;
}

template <class S>
std::vector<std::vector<VarId>> encode_frames(BoundModel<S>& bm, const std::vector<VarId>& inputs) {
    std::vector<std::vector<VarId>> out;
    out.reserve(inputs.size());
    for (VarId id : inputs) out.push_back(encode_frame(bm, id));
    return out;
}

template <class S>
FaamVars faam_vars(const BoundModel<S>& bm, int level) {
    const std::string p = "faam" + std::to_string(level);
    return FaamVars{bm.v(p + ".fc1.w"), bm.v(p + ".fc1.b"), bm.v(p + ".fc2.w"),
                    bm.v(p + ".fc2.b"), bm.v(p + ".sp.w"),  bm.v(p + ".sp.b"),
                    bm.v(p + ".agg.w"), bm.v(p + ".agg.b")};
}

template <class S>
FdamVars fdam_vars(const BoundModel<S>& bm, int level, bool has_center) {
    const std::string p = "fdam" + std::to_string(level);
    FdamVars v;
    v.off1_w = bm.v(p + ".off1.w");
    v.off1_b = bm.v(p + ".off1.b");
    v.off2_w = bm.v(p + ".off2.w");
    v.off2_b = bm.v(p + ".off2.b");
    v.off3_w = bm.v(p + ".off3.w");
    v.off3_b = bm.v(p + ".off3.b");
    v.dcn_w = bm.v(p + ".dcn.w");
    v.dcn_b = bm.v(p + ".dcn.b");
    v.fuse_w = bm.v(p + ".fuse.w");
    v.fuse_b = bm.v(p + ".fuse.b");
    v.beta = has_center ? bm.v(p + ".beta") : -1;
    v.groups = bm.state->arch.dcn_groups;
    v.offset_clamp = bm.state->arch.offset_clamp;
    return v;
}

template <class S>
VarId decode(BoundModel<S>& bm, const std::vector<VarId>& skips) {
    Tape<S>& t = *bm.tape;
    const auto& arch = bm.state->arch;
    VarId d = skips[static_cast<std::size_t>(arch.levels - 1)];
    for (int l = arch.levels - 2; l >= 0; --l) {
        const std::string p = "dec" + std::to_string(l);
        d = leaky_relu(t, conv2d(t, upsample_nn2(t, d), bm.v(p + ".up.w"), bm.v(p + ".up.b")),
                       bm.slope());
        d = concat_ch(t, {d, skips[static_cast<std::size_t>(l)]});
        d = leaky_relu(t, conv2d(t, d, bm.v(p + ".c1.w"), bm.v(p + ".c1.b")), bm.slope());
        d = leaky_relu(t, conv2d(t, d, bm.v(p + ".c2.w"), bm.v(p + ".c2.b")), bm.slope());
    }
    return conv2d(t, d, bm.v("tail.w"), bm.v("tail.b"));
}

// flows[neighbor][level], pixel units at each level's resolution.
template <class S>
VarId forward_blind(BoundModel<S>& bm, const std::vector<VarId>& neighbor_inputs,
                    const std::vector<std::vector<VarId>>& flows) {
    Tape<S>& t = *bm.tape;
    const auto& st = *bm.state;
    if (st.mode != Mode::blind) throw ModeError("forward_blind: state is not a blind estimator");
    if (static_cast<int>(neighbor_inputs.size()) != st.arch.window - 1)
        throw InputError("forward_blind: expected " + std::to_string(st.arch.window - 1) +
                         " neighbors, got " + std::to_string(neighbor_inputs.size()));
    if (flows.size() != neighbor_inputs.size())
        throw InputError("forward_blind: flow pyramid count mismatch");

    auto feats = encode_frames(bm, neighbor_inputs);
    std::vector<VarId> skips;
    for (int l = 0; l < st.arch.levels; ++l) {
        std::vector<VarId> fl, vl;
        for (std::size_t n = 0; n < feats.size(); ++n) {
            fl.push_back(feats[n][static_cast<std::size_t>(l)]);
            vl.push_back(flows[n][static_cast<std::size_t>(l)]);
        }
        if (st.skip == SkipKind::faam) {
            skips.push_back(faam_forward(t, fl, vl, faam_vars(bm, l), bm.slope()));
        } else if (st.skip == SkipKind::fdam) {
            skips.push_back(fdam_forward(t, -1, fl, vl, fdam_vars(bm, l, false), bm.slope()));
        } else {
            throw ModeError("forward_blind: direct skips have no per-frame wiring");
        }
    }
    return decode(bm, skips);
}

template <class S>
VarId forward_nonblind(BoundModel<S>& bm, VarId center_input,
                       const std::vector<VarId>& neighbor_inputs,
                       const std::vector<std::vector<VarId>>& flows) {
    Tape<S>& t = *bm.tape;
    const auto& st = *bm.state;
    if (st.mode != Mode::nonblind)
        throw ModeError("forward_nonblind: state is not a spatial refiner");
    if (static_cast<int>(neighbor_inputs.size()) != st.arch.window - 1)
        throw InputError("forward_nonblind: expected " + std::to_string(st.arch.window - 1) +
                         " neighbors, got " + std::to_string(neighbor_inputs.size()));
    if (flows.size() != neighbor_inputs.size())
        throw InputError("forward_nonblind: flow pyramid count mismatch");

    auto center_feats = encode_frame(bm, center_input);
    auto feats = encode_frames(bm, neighbor_inputs);
    std::vector<VarId> skips;
    for (int l = 0; l < st.arch.levels; ++l) {
        std::vector<VarId> fl, vl;
        for (std::size_t n = 0; n < feats.size(); ++n) {
            fl.push_back(feats[n][static_cast<std::size_t>(l)]);
            vl.push_back(flows[n][static_cast<std::size_t>(l)]);
        }
        const VarId fc = center_feats[static_cast<std::size_t>(l)];
        if (st.skip == SkipKind::fdam) {
            skips.push_back(fdam_forward(t, fc, fl, vl, fdam_vars(bm, l, true), bm.slope()));
        } else if (st.skip == SkipKind::faam) {
            // Non-blind FAAM stacks the center as an extra input with zero flow.
            const auto& cshape = t.val(fc).shape;
            std::vector<VarId> fl2{fc}, vl2{t.leaf(TensorT<S>({2, cshape[1], cshape[2]}))};
            fl2.insert(fl2.end(), fl.begin(), fl.end());
            vl2.insert(vl2.end(), vl.begin(), vl.end());
            skips.push_back(faam_forward(t, fl2, vl2, faam_vars(bm, l), bm.slope()));
        } else {
            throw ModeError("forward_nonblind: direct skips have no per-frame wiring");
        }
    }
    return decode(bm, skips);
}

// Ablation baseline: all frames concatenated channel-wise into one stream,
// encoder features pass straight through as skips.
template <class S>
VarId forward_stacked(BoundModel<S>& bm, VarId stacked_input) {
    const auto& st = *bm.state;
    if (!st.arch.stacked_input) throw ModeError("forward_stacked: state is not a stacked model");
    auto feats = encode_frame(bm, stacked_input);
    return decode(bm, feats);
}

}  // namespace ag

// --- convenience tensor-level forwards (no gradients) ----------------------

template <class S>
TensorT<S> run_blind(const ModelStateT<S>& st, const std::vector<TensorT<S>>& neighbors,
                     const std::vector<std::vector<TensorT<S>>>& flows) {
    ag::Tape<S> tape;
    auto bm = ag::bind_model(tape, st, false);
    std::vector<ag::VarId> ins;
    for (const auto& z : neighbors) ins.push_back(tape.leaf(z));
    std::vector<std::vector<ag::VarId>> fls;
    for (const auto& pyr : flows) {
        std::vector<ag::VarId> lv;
        for (const auto& f : pyr) lv.push_back(tape.leaf(f));
        fls.push_back(std::move(lv));
    }
    return tape.val(ag::forward_blind(bm, ins, fls));
}

template <class S>
TensorT<S> run_nonblind(const ModelStateT<S>& st, const TensorT<S>& center,
                        const std::vector<TensorT<S>>& neighbors,
                        const std::vector<std::vector<TensorT<S>>>& flows) {
    ag::Tape<S> tape;
    auto bm = ag::bind_model(tape, st, false);
    ag::VarId c = tape.leaf(center);
    std::vector<ag::VarId> ins;
    for (const auto& z : neighbors) ins.push_back(tape.leaf(z));
    std::vector<std::vector<ag::VarId>> fls;
    for (const auto& pyr : flows) {
        std::vector<ag::VarId> lv;
        for (const auto& f : pyr) lv.push_back(tape.leaf(f));
        fls.push_back(std::move(lv));
    }
    return tape.val(ag::forward_nonblind(bm, c, ins, fls));
}

// Model (de)serialization: versioned binary with mode/skip tags, the
// architecture constants, the parameter blob and a trailing checksum.
void save_model(const ModelState& st, const std::string& path);
ModelState load_model(const std::string& path);

class BinWriter;
class BinReader;
void write_model(BinWriter& w, const ModelState& st);
ModelState read_model(BinReader& r, const std::string& path);

}  // namespace f2r
