#include "f2r/train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "f2r/core/serialize.hpp"
#include "f2r/eval/metrics.hpp"

namespace fs = std::filesystem;

namespace f2r {

namespace {
constexpr uint64_t kCropSalt = 0xc309;
constexpr uint64_t kRecorruptSalt = 0x4e01;
}  // namespace

uint64_t PriorSet::checksum() const {
    const uint64_t d = denoiser->param_checksum();
    const uint64_t f = flow->param_checksum();
    return hash_seed(d, f);
}

PriorSet make_priors(const PriorConfig& cfg) {
    PriorSet p;
    if (cfg.denoiser == "classical") {
        p.denoiser = std::make_shared<GaussianSmoother>(cfg.smoother_sigma);
    } else if (cfg.denoiser == "identity") {
        p.denoiser = std::make_shared<IdentityDenoiser>();
    } else if (cfg.denoiser.rfind("learned:", 0) == 0) {
        p.denoiser = std::make_shared<LearnedDenoiser>(
            LearnedDenoiser::load(cfg.denoiser.substr(8)));
    } else {
        throw ConfigError("prior.denoiser: unknown variant '" + cfg.denoiser + "'");
    }
    if (cfg.flow == "ground_truth") {
        p.flow = std::make_shared<GroundTruthFlowPrior>();
    } else if (cfg.flow == "block_matching") {
        p.flow = std::make_shared<BlockMatchingFlow>(cfg.bm_radius, cfg.bm_block);
    } else {
        throw ConfigError("prior.flow: unknown variant '" + cfg.flow + "'");
    }
    return p;
}

double cosine_lr(double lr0, int iter, int total) {
    if (total <= 0) throw ConfigError("cosine_lr: total iterations must be > 0");
    return lr0 * (1.0 + std::cos(3.14159265358979323846 * iter / total)) / 2.0;
}

// --- Adam -------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(const ModelState& st) {
    for (const auto& [n, t] : st.params) {
        m_.emplace_back(t.shape);
        v_.emplace_back(t.shape);
    }
}

void AdamOptimizer::step(ModelState& st, const std::vector<Tensor>& grads, double lr,
                         double clip_norm) {
    if (grads.size() != st.params.size() || m_.size() != grads.size())
        throw InputError("adam: gradient list does not match the parameter list");
    double sq = 0.0;
    for (const auto& g : grads)
        for (float v : g.data) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(0.9, t_);
    const double bc2 = 1.0 - std::pow(0.999, t_);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto& p = st.params[i].second;
        auto& m = m_[i];
        auto& v = v_[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            const double gj = static_cast<double>(g.data[j]) * scale;
            m.data[j] = static_cast<float>(0.9 * m.data[j] + 0.1 * gj);
            v.data[j] = static_cast<float>(0.999 * v.data[j] + 0.001 * gj * gj);
            const double mh = m.data[j] / bc1;
            const double vh = v.data[j] / bc2;
            p.data[j] -= static_cast<float>(lr * mh / (std::sqrt(vh) + 1e-8));
        }
    }
}

void AdamOptimizer::write(BinWriter& w) const {
    w.pod<uint32_t>(0x4f505431u);  // "OPT1"
    w.pod<int32_t>(t_);
    w.pod<uint32_t>(static_cast<uint32_t>(m_.size()));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        w.tensor_f32(m_[i]);
        w.tensor_f32(v_[i]);
    }
}

AdamOptimizer AdamOptimizer::read(BinReader& r) {
    if (r.pod<uint32_t>() != 0x4f505431u) throw IoError("checkpoint: missing optimizer section");
    AdamOptimizer o;
    o.t_ = r.pod<int32_t>();
    const uint32_t n = r.pod<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        o.m_.push_back(r.tensor_f32());
        o.v_.push_back(r.tensor_f32());
    }
    return o;
}

void save_checkpoint(const std::string& path, const ModelState& st, const AdamOptimizer& opt,
                     int iter) {
    BinWriter w(path);
    write_model(w, st);
    opt.write(w);
    w.pod<int32_t>(iter);
    if (!w.good()) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    BinReader r(path);
    Checkpoint c;
    c.model = read_model(r, path);
    c.opt = AdamOptimizer::read(r);
    c.iter = r.pod<int32_t>();
    return c;
}

// --- sample assembly --------------------------------------------------------

namespace {

Tensor joint_concat(const Tensor& baseline, const Tensor& frame) {
    Tensor z({2 * baseline.dim(0), baseline.dim(1), baseline.dim(2)});
    std::copy(baseline.data.begin(), baseline.data.end(), z.data.begin());
    for (std::size_t i = 0; i < baseline.numel(); ++i)
        z.data[baseline.numel() + i] = frame.data[i] - baseline.data[i];
    return z;
}

template <class BaselineOf, class FlowOf>
PreparedBlind assemble_blind(const TemporalWindow& w, const TrainConfig& cfg,
                             BaselineOf&& baseline_of, FlowOf&& flow_of) {
    PreparedBlind p;
    const Tensor center_base = baseline_of(w.center_pos);
    p.center_baseline = center_base;
    const Tensor& yt = w.center_frame();
    if (cfg.joint_inputs) {
        p.target = Tensor(yt.shape);
        for (std::size_t i = 0; i < yt.numel(); ++i)
            p.target.data[i] = yt.data[i] - center_base.data[i];
    } else {
        p.target = yt;
    }
    for (int slot = 0; slot < w.window_size; ++slot) {
        if (slot == w.center_pos) continue;
        const Tensor& yi = w.frames[static_cast<std::size_t>(slot)];
        p.inputs.push_back(cfg.joint_inputs ? joint_concat(baseline_of(slot), yi) : yi);
        if (!cfg.stacked)
            p.pyramids.push_back(build_flow_pyramid(flow_of(slot), cfg.arch.levels));
        p.materialized.push_back(slot);
    }
    // Structural blindness hook: the center slot must never have been
    // turned into a network input.
    for (int s : p.materialized)
        if (s == w.center_pos)
            throw ModeError("stage-1 preparation materialized the center frame");
    return p;
}

std::vector<std::vector<Tensor>> pyramid_levels(const std::vector<FlowPyramid>& pyr) {
    std::vector<std::vector<Tensor>> out;
    out.reserve(pyr.size());
    for (const auto& p : pyr) out.push_back(p.levels);
    return out;
}

}  // namespace

PreparedBlind prepare_blind_window(const TemporalWindow& w, const PriorSet& priors,
                                   const TrainConfig& cfg) {
    // Denoise each distinct window slot once.
    std::vector<Tensor> baselines(static_cast<std::size_t>(w.window_size));
    for (int s = 0; s < w.window_size; ++s)
        baselines[static_cast<std::size_t>(s)] =
            denoise_frame(*priors.denoiser, w.frames[static_cast<std::size_t>(s)]);
    auto baseline_of = [&](int slot) { return baselines[static_cast<std::size_t>(slot)]; };
    auto flow_of = [&](int slot) {
        const int src = w.source_positions[static_cast<std::size_t>(slot)];
        if (src == w.center_source) {
            const auto& f = w.center_frame();
            return Tensor({2, f.dim(1), f.dim(2)});
        }
        FlowQuery q;
        q.src_pos = src;
        q.dst_pos = w.center_source;
        q.gt = w.gt_flow.get();
        q.crop_y = w.crop_y;
        q.crop_x = w.crop_x;
        return estimate_flow(*priors.flow, baselines[static_cast<std::size_t>(slot)],
                             baselines[static_cast<std::size_t>(w.center_pos)], &q);
    };
    return assemble_blind(w, cfg, baseline_of, flow_of);
}

PreparedBlind prepare_blind_window_with_flows(const TemporalWindow& w, const PriorSet& priors,
                                              const TrainConfig& cfg,
                                              const std::vector<FlowPyramid>& pyramids) {
    std::vector<Tensor> baselines(static_cast<std::size_t>(w.window_size));
    for (int s = 0; s < w.window_size; ++s)
        baselines[static_cast<std::size_t>(s)] =
            denoise_frame(*priors.denoiser, w.frames[static_cast<std::size_t>(s)]);
    auto baseline_of = [&](int slot) { return baselines[static_cast<std::size_t>(slot)]; };
    return assemble_blind(w, cfg, baseline_of, [&](int slot) {
        const int idx = slot < w.center_pos ? slot : slot - 1;  // window slot -> neighbor index
        return pyramids[static_cast<std::size_t>(idx)].levels[0];
    });
}

AnchorFrame compute_anchor(const ModelState& blind_state, const TemporalWindow& w,
                           const PriorSet& priors, const TrainConfig& cfg) {
    if (blind_state.mode != Mode::blind) throw ModeError("compute_anchor: state is not blind");
    PreparedBlind p = prepare_blind_window(w, priors, cfg);
    const Tensor pred = run_blind(blind_state, p.inputs, pyramid_levels(p.pyramids));
    AnchorFrame a;
    a.x_hat_s1 = p.center_baseline;
    a.x_hat_s1.add_(pred);
    a.seq_id = w.seq_id;
    a.center_source = w.center_source;
    a.crop_y = w.crop_y;
    a.crop_x = w.crop_x;
    a.stage1_checksum = blind_state.params_checksum();
    return a;
}

std::pair<TemporalWindow, Tensor> recorrupt_window(const TemporalWindow& w,
                                                   const AnchorFrame& anchor,
                                                   const NoiseModel& model, uint64_t seed) {
    if (anchor.seq_id != w.seq_id || anchor.center_source != w.center_source ||
        anchor.crop_y != w.crop_y || anchor.crop_x != w.crop_x)
        throw ProvenanceError("recorrupt_window: anchor does not belong to this window");
    if (anchor.x_hat_s1.shape != w.center_frame().shape)
        throw ProvenanceError("recorrupt_window: anchor shape mismatch");
    const Tensor n = sample_recorruption(anchor.x_hat_s1.shape, model, &anchor.x_hat_s1, seed);
    TemporalWindow out = w;  // neighbors share storage semantics: copied values, bit-identical
    Tensor yprime = anchor.x_hat_s1;
    yprime.add_(n);
    // Report the noise actually embedded in y'_t so that identities such as
    // r'_t = -n' under an identity denoiser hold exactly in float.
    Tensor n_eff(yprime.shape);
    for (std::size_t i = 0; i < n_eff.numel(); ++i)
        n_eff.data[i] = yprime.data[i] - anchor.x_hat_s1.data[i];
    out.frames[static_cast<std::size_t>(w.center_pos)] = std::move(yprime);
    return {std::move(out), std::move(n_eff)};
}

// --- Preproc ----------------------------------------------------------------

Preproc::Preproc(const Dataset* data, PriorSet priors) : data_(data), priors_(std::move(priors)) {
    cache_[0].resize(data_->train_noisy.size());
    for (std::size_t i = 0; i < data_->train_noisy.size(); ++i)
        cache_[0][i].resize(static_cast<std::size_t>(data_->train_noisy[i].length()));
    cache_[1].resize(data_->val_noisy.size());
    for (std::size_t i = 0; i < data_->val_noisy.size(); ++i)
        cache_[1][i].resize(static_cast<std::size_t>(data_->val_noisy[i].length()));
}

const Tensor& Preproc::baseline(bool val, int clip, int frame) const {
    std::lock_guard<std::mutex> lk(mu_);
    auto& slot = cache_[val ? 1 : 0][static_cast<std::size_t>(clip)][static_cast<std::size_t>(frame)];
    if (!slot) {
        const auto& seq = val ? data_->val_noisy[static_cast<std::size_t>(clip)]
                              : data_->train_noisy[static_cast<std::size_t>(clip)];
        slot = denoise_frame(*priors_.denoiser, seq.frames[static_cast<std::size_t>(frame)]);
    }
    return *slot;
}

Tensor Preproc::flow_sliced(bool val, int clip, int src, int dst, int y0, int x0, int h,
                            int w) const {
    if (src == dst) return Tensor({2, h, w});
    const auto& seq = val ? data_->val_noisy[static_cast<std::size_t>(clip)]
                          : data_->train_noisy[static_cast<std::size_t>(clip)];
    if (priors_.flow->describe() == "ground_truth") {
        FlowQuery q;
        q.src_pos = src;
        q.dst_pos = dst;
        q.gt = seq.gt_flow.get();
        q.crop_y = y0;
        q.crop_x = x0;
        // the gt variant reads only the query and the dst shape
        const Tensor shape_carrier({1, h, w});
        return priors_.flow->estimate(shape_carrier, shape_carrier, &q);
    }
    // block matching: estimate once on the full denoised frames, cache, slice
    const auto key = std::make_tuple(val ? 1 : 0, clip, src, dst);
    Tensor full;
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = flow_cache_.find(key);
        if (it != flow_cache_.end()) full = it->second;
    }
    if (full.empty()) {
        const Tensor& a = baseline(val, clip, src);
        const Tensor& b = baseline(val, clip, dst);
        full = estimate_flow(*priors_.flow, a, b, nullptr);
        std::lock_guard<std::mutex> lk(mu_);
        flow_cache_.emplace(key, full);
    }
    return slice_spatial(full, y0, x0, h, w);
}

// --- SampleFactory ----------------------------------------------------------

SampleFactory::SampleFactory(const Dataset* data, const Preproc* preproc, const TrainConfig* cfg)
    : data_(data), preproc_(preproc), cfg_(cfg) {}

SampleFactory::Draw SampleFactory::draw(int iter, int k) const {
    Draw d;
    d.seed = hash_seed(cfg_->seed, static_cast<uint64_t>(iter), static_cast<uint64_t>(k));
    Rng rng(d.seed);
    d.clip = rng.uniform_int(static_cast<int>(data_->train_noisy.size()));
    const auto& seq = data_->train_noisy[static_cast<std::size_t>(d.clip)];
    d.t = rng.uniform_int(seq.length());
    TemporalWindow w = extract_window(seq, d.t, cfg_->window);
    d.window = crop_patch(w, cfg_->patch, hash_seed(d.seed, kCropSalt));
    d.crop_y = d.window.crop_y;
    d.crop_x = d.window.crop_x;
    return d;
}

PreparedBlind SampleFactory::blind_sample(const Draw& d) const {
    const auto& w = d.window;
    auto baseline_of = [&](int slot) {
        const int src = w.source_positions[static_cast<std::size_t>(slot)];
        return slice_spatial(preproc_->baseline(false, d.clip, src), d.crop_y, d.crop_x,
                             cfg_->patch, cfg_->patch);
    };
    auto flow_of = [&](int slot) {
        const int src = w.source_positions[static_cast<std::size_t>(slot)];
        return preproc_->flow_sliced(false, d.clip, src, w.center_source, d.crop_y, d.crop_x,
                                     cfg_->patch, cfg_->patch);
    };
    return assemble_blind(w, *cfg_, baseline_of, flow_of);
}

Tensor SampleFactory::stacked_input(const PreparedBlind& p) const {
    int ctot = 0;
    for (const auto& t : p.inputs) ctot += t.dim(0);
    Tensor out({ctot, p.inputs[0].dim(1), p.inputs[0].dim(2)});
    std::size_t off = 0;
    for (const auto& t : p.inputs) {
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
        off += t.numel();
    }
    return out;
}

PreparedRefine SampleFactory::refine_sample(const Draw& d, const ModelState* stage1) const {
    PreparedRefine r;
    r.stage1_view = blind_sample(d);

    AnchorFrame a;
    if (cfg_->anchor_mode == AnchorMode::stage1) {
        if (stage1 == nullptr)
            throw ConfigError("stage-2 sample needs a stage-1 state (training.stage1_ckpt)");
        const Tensor pred =
            run_blind(*stage1, r.stage1_view.inputs, pyramid_levels(r.stage1_view.pyramids));
        a.x_hat_s1 = r.stage1_view.center_baseline;
        a.x_hat_s1.add_(pred);
        a.stage1_checksum = stage1->params_checksum();
    } else {
        // Stage-2-alone ablation: recorrupt the initial joint-input baseline.
        a.x_hat_s1 = r.stage1_view.center_baseline;
    }
    a.seq_id = d.window.seq_id;
    a.center_source = d.window.center_source;
    a.crop_y = d.window.crop_y;
    a.crop_x = d.window.crop_x;
    r.anchor = a;

    auto [wprime, n_eff] =
        recorrupt_window(d.window, a, data_->noise, hash_seed(d.seed, kRecorruptSalt));
    r.recorruption_noise = std::move(n_eff);
    r.center_noisy = wprime.center_frame();

    const Tensor xh = denoise_frame(*preproc_->priors().denoiser, r.center_noisy);
    r.center_input = joint_concat(xh, r.center_noisy);
    r.target = Tensor(xh.shape);
    for (std::size_t i = 0; i < xh.numel(); ++i)
        r.target.data[i] = a.x_hat_s1.data[i] - xh.data[i];

    // V' is re-derived from the updated denoised sequence D(Y'): the only
    // frame that changed is the center, which is the flow target.
    const bool gt = preproc_->priors().flow->describe() == "ground_truth";
    for (int slot = 0; slot < d.window.window_size; ++slot) {
        if (slot == d.window.center_pos) continue;
        const int src = d.window.source_positions[static_cast<std::size_t>(slot)];
        Tensor field;
        if (gt || src == d.window.center_source) {
            field = preproc_->flow_sliced(false, d.clip, src, d.window.center_source, d.crop_y,
                                          d.crop_x, cfg_->patch, cfg_->patch);
        } else {
            const Tensor src_base = slice_spatial(preproc_->baseline(false, d.clip, src),
                                                  d.crop_y, d.crop_x, cfg_->patch, cfg_->patch);
            field = estimate_flow(*preproc_->priors().flow, src_base, xh, nullptr);
        }
        r.pyramids.push_back(build_flow_pyramid(field, cfg_->arch.levels));
    }
    return r;
}

// --- full-frame estimators ----------------------------------------------------

Tensor stage1_estimate_frame(const ModelState& st, const VideoSequence& noisy, int t,
                             const PriorSet& priors, const TrainConfig& cfg) {
    TemporalWindow w = extract_window(noisy, t, cfg.window);
    PreparedBlind p = prepare_blind_window(w, priors, cfg);
    Tensor pred;
    if (cfg.stacked) {
        ag::Tape<float> tape;
        auto bm = ag::bind_model(tape, st, false);
        int ctot = 0;
        for (const auto& z : p.inputs) ctot += z.dim(0);
        Tensor stacked({ctot, p.inputs[0].dim(1), p.inputs[0].dim(2)});
        std::size_t off = 0;
        for (const auto& z : p.inputs) {
            std::copy(z.data.begin(), z.data.end(), stacked.data.begin() + off);
            off += z.numel();
        }
        pred = tape.val(ag::forward_stacked(bm, tape.leaf(stacked)));
    } else {
        pred = run_blind(st, p.inputs, pyramid_levels(p.pyramids));
    }
    if (!cfg.joint_inputs) return pred;
    Tensor out = p.center_baseline;
    out.add_(pred);
    return out;
}

Tensor refine_estimate_frame(const ModelState& st, const VideoSequence& noisy, int t,
                             const PriorSet& priors, const TrainConfig& cfg) {
    if (st.mode != Mode::nonblind) throw ModeError("refine estimate: state is not a spatial refiner");
    TemporalWindow w = extract_window(noisy, t, cfg.window);
    PreparedBlind p = prepare_blind_window(w, priors, cfg);
    // Center joint input from the original noisy frame: inference applies
    // no recorruption.
    const Tensor center_z = joint_concat(p.center_baseline, w.center_frame());
    const Tensor pred =
        run_nonblind(st, center_z, p.inputs, pyramid_levels(p.pyramids));
    Tensor out = p.center_baseline;
    out.add_(pred);
    return out;
}

// --- Trainer ------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& cfg, const Dataset* data)
    : cfg_(cfg), data_(data), preproc_(data, make_priors(cfg.priors)),
      samples_(data, &preproc_, &cfg_) {
    data_->validate();
    if (cfg_.stage != 1 && cfg_.stage != 2) throw ConfigError("training.stage must be 1 or 2");
    if (cfg_.stacked && cfg_.stage == 2)
        throw ConfigError("stacked baseline wiring only exists for stage 1");
    if (cfg_.batch < 1 || cfg_.iters < 1) throw ConfigError("training: batch and iters must be >= 1");

    const int ch = data_->train_noisy[0].channels();
    const int per_frame = cfg_.joint_inputs ? 2 * ch : ch;
    cfg_.arch.data_ch = ch;
    cfg_.arch.window = cfg_.window;
    cfg_.arch.stacked_input = cfg_.stacked;
    cfg_.arch.input_ch = cfg_.stacked ? (cfg_.window - 1) * per_frame : per_frame;
    cfg_.arch.validate();
    if (cfg_.patch % (1 << (cfg_.arch.levels - 1)) != 0)
        throw ConfigError("training.patch must be divisible by 2^(levels-1)");

    if (cfg_.stage == 2) {
        if (cfg_.anchor_mode == AnchorMode::stage1) {
            if (cfg_.stage1_ckpt.empty())
                throw ConfigError("training.stage1_ckpt is required for stage 2");
            if (!fs::exists(cfg_.stage1_ckpt))
                throw ConfigError("training.stage1_ckpt: missing checkpoint " + cfg_.stage1_ckpt);
            stage1_ = load_model(cfg_.stage1_ckpt);
            if (stage1_->mode != Mode::blind)
                throw ConfigError("training.stage1_ckpt: checkpoint is not a blind estimator");
            if (stage1_->arch.window != cfg_.window)
                throw ConfigError("training.stage1_ckpt: window T mismatch");
        }
        model_ = ModelState::create(Mode::nonblind, cfg_.skip_stage2, cfg_.arch,
                                    hash_seed(cfg_.seed, 2));
    } else {
        model_ = ModelState::create(Mode::blind, cfg_.stacked ? SkipKind::direct : cfg_.skip_stage1,
                                    cfg_.arch, hash_seed(cfg_.seed, 1));
    }
    opt_ = AdamOptimizer(model_);
}

double Trainer::batch_loss_and_update(int iter) {
    ag::Tape<float> tape;
    auto bm = ag::bind_model(tape, model_, true);
    std::vector<ag::VarId> losses;
    for (int k = 0; k < cfg_.batch; ++k) {
        const auto d = samples_.draw(iter, k);
        ag::VarId pred;
        Tensor target;
        if (cfg_.stage == 1) {
            PreparedBlind p = samples_.blind_sample(d);
            target = std::move(p.target);
            if (cfg_.stacked) {
                pred = ag::forward_stacked(bm, tape.leaf(samples_.stacked_input(p)));
            } else {
                std::vector<ag::VarId> ins;
                for (auto& z : p.inputs) ins.push_back(tape.leaf(std::move(z)));
                std::vector<std::vector<ag::VarId>> flows;
                for (auto& pyr : p.pyramids) {
                    std::vector<ag::VarId> lv;
                    for (auto& f : pyr.levels) lv.push_back(tape.leaf(std::move(f)));
                    flows.push_back(std::move(lv));
                }
                pred = ag::forward_blind(bm, ins, flows);
            }
        } else {
            PreparedRefine p = samples_.refine_sample(d, stage1_ ? &*stage1_ : nullptr);
            target = std::move(p.target);
            ag::VarId center = tape.leaf(std::move(p.center_input));
            std::vector<ag::VarId> ins;
            for (auto& z : p.stage1_view.inputs) ins.push_back(tape.leaf(std::move(z)));
            std::vector<std::vector<ag::VarId>> flows;
            for (auto& pyr : p.pyramids) {
                std::vector<ag::VarId> lv;
                for (auto& f : pyr.levels) lv.push_back(tape.leaf(std::move(f)));
                flows.push_back(std::move(lv));
            }
            pred = ag::forward_nonblind(bm, center, ins, flows);
        }
        const ag::VarId tgt = tape.leaf(std::move(target));
        losses.push_back(cfg_.loss == LossKind::l1 ? ag::mean_abs(tape, pred, tgt)
                                                   : ag::mean_sq(tape, pred, tgt));
    }
    const ag::VarId loss = ag::mean_of(tape, losses);
    const double loss_val = static_cast<double>(tape.val(loss).data[0]);
    if (!std::isfinite(loss_val)) {
        const std::string dump = (fs::path(cfg_.out_dir) / "diverged.ckpt").string();
        fs::create_directories(cfg_.out_dir);
        save_checkpoint(dump, model_, opt_, iter);
        throw DivergenceError("loss diverged at iteration " + std::to_string(iter) +
                              ", state dumped to " + dump);
    }
    tape.backward(loss);

    std::vector<Tensor> grads;
    grads.reserve(model_.params.size());
    for (const auto& [name, t] : model_.params) {
        ag::VarId id = bm.v(name);
        if (tape.has_grad(id))
            grads.push_back(tape.grad(id));
        else
            grads.push_back(Tensor(t.shape));
    }
    opt_.step(model_, grads, cosine_lr(cfg_.lr, iter, cfg_.iters), cfg_.grad_clip);
    return loss_val;
}

double Trainer::step(int iter) { return batch_loss_and_update(iter); }

double Trainer::validate() const {
    if (!data_->has_clean || data_->val_noisy.empty()) return std::nan("");
    double acc = 0.0;
    int count = 0;
    for (std::size_t c = 0; c < data_->val_noisy.size(); ++c) {
        const auto& noisy = data_->val_noisy[c];
        const auto& clean = data_->val_clean[c];
        for (int t = 0; t < noisy.length(); t += cfg_.val_frame_step) {
            Tensor est = cfg_.stage == 1
                             ? stage1_estimate_frame(model_, noisy, t, preproc_.priors(), cfg_)
                             : refine_estimate_frame(model_, noisy, t, preproc_.priors(), cfg_);
            acc += psnr(est, clean.frames[static_cast<std::size_t>(t)]);
            ++count;
        }
    }
    return acc / count;
}

std::string Trainer::run() {
    fs::create_directories(cfg_.out_dir);
    std::ofstream log;
    if (cfg_.write_log) {
        log.open(fs::path(cfg_.out_dir) / ("stage" + std::to_string(cfg_.stage) + "_log.csv"));
        log << "iter,lr,loss,val_psnr\n";
    }
    const uint64_t priors_before = preproc_.priors().checksum();
    const uint64_t stage1_before = stage1_ ? stage1_->params_checksum() : 0;

    for (int iter = 0; iter < cfg_.iters; ++iter) {
        const double loss = batch_loss_and_update(iter);
        const bool val_now =
            (iter + 1) % cfg_.val_interval == 0 || iter + 1 == cfg_.iters;
        double vp = std::nan("");
        if (val_now) vp = validate();
        if (cfg_.write_log) {
            log << iter << "," << cosine_lr(cfg_.lr, iter, cfg_.iters) << "," << loss << ",";
            if (!std::isnan(vp)) log << vp;
            log << "\n";
        }
    }

    if (preproc_.priors().checksum() != priors_before)
        throw ModeError("frozen-prior violation: prior checksum changed during training");
    if (stage1_ && stage1_->params_checksum() != stage1_before)
        throw ModeError("frozen-theta violation: stage-1 parameters changed during stage 2");

    const std::string name =
        cfg_.ckpt_name.empty() ? ("stage" + std::to_string(cfg_.stage) + ".ckpt") : cfg_.ckpt_name;
    const std::string path = (fs::path(cfg_.out_dir) / name).string();
    save_checkpoint(path, model_, opt_, cfg_.iters);
    return path;
}

std::string run_training(const TrainConfig& cfg, const Dataset& data) {
    Trainer tr(cfg, &data);
    return tr.run();
}

}  // namespace f2r
