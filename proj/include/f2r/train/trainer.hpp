#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <optional>
#include <string>
#include <vector>

#include "f2r/model/backbone.hpp"
#include "f2r/priors/denoiser.hpp"
#include "f2r/priors/flow.hpp"
#include "f2r/train/dataset.hpp"

namespace f2r {

struct PriorConfig {
    std::string denoiser = "classical";  // classical | identity | learned:<path>
    double smoother_sigma = 1.2;
    std::string flow = "ground_truth";   // ground_truth | block_matching
    int bm_radius = 8;
    int bm_block = 9;
};

struct PriorSet {
    std::shared_ptr<const DenoiserPrior> denoiser;
    std::shared_ptr<const FlowEstimatorPrior> flow;
    uint64_t checksum() const;
};

PriorSet make_priors(const PriorConfig& cfg);

enum class LossKind { l1, l2 };
enum class AnchorMode { stage1, denoiser };  // `denoiser` is the stage-2-alone ablation

struct TrainConfig {
    int stage = 1;
    LossKind loss = LossKind::l1;
    double lr = 3e-4;
    int iters = 2000;
    int batch = 4;
    int window = 5;  // T
    int patch = 32;
    uint64_t seed = 1;
    double grad_clip = 1.0;
    int val_interval = 200;
    int val_frame_step = 2;
    std::string stage1_ckpt;  // required for stage 2
    std::string out_dir = ".";
    std::string ckpt_name;  // default stage<k>.ckpt

    ArchConfig arch;  // data_ch/input_ch/window are filled in from the data
    SkipKind skip_stage1 = SkipKind::faam;
    SkipKind skip_stage2 = SkipKind::fdam;
    bool joint_inputs = true;  // false: raw-frame ablation inputs
    bool stacked = false;      // channel-stacked baseline wiring (direct skips)
    AnchorMode anchor_mode = AnchorMode::stage1;

    PriorConfig priors;
    bool write_log = true;
};

// lr0 * (1 + cos(pi * k / total)) / 2, annealed to zero.
double cosine_lr(double lr0, int iter, int total);

class AdamOptimizer {
public:
    AdamOptimizer() = default;
    explicit AdamOptimizer(const ModelState& st);
    void step(ModelState& st, const std::vector<Tensor>& grads, double lr, double clip_norm);
    int iterations() const { return t_; }

    void write(BinWriter& w) const;
    static AdamOptimizer read(BinReader& r);

private:
    std::vector<Tensor> m_, v_;
    int t_ = 0;
};

// Stage-1 temporally consistent estimate and its provenance.
struct AnchorFrame {
    Tensor x_hat_s1;
    std::string seq_id;
    int center_source = -1;
    int crop_y = 0, crop_x = 0;
    uint64_t stage1_checksum = 0;
};

// Inputs for one blind forward, assembled per the Stage-1 preprocessing.
struct PreparedBlind {
    std::vector<Tensor> inputs;           // per neighbor, window order
    std::vector<FlowPyramid> pyramids;    // per neighbor
    Tensor target;                        // r_t (joint) or y_t (raw ablation)
    Tensor center_baseline;               // x_hat(y_t)
    std::vector<int> materialized;        // window slots turned into inputs (audit hook)
};

struct PreparedRefine {
    PreparedBlind stage1_view;            // neighbor inputs identical to Stage 1
    AnchorFrame anchor;
    Tensor recorruption_noise;            // n' as embedded in y'_t
    Tensor center_noisy;                  // y'_t
    Tensor center_input;                  // z'_t
    std::vector<FlowPyramid> pyramids;    // V' per neighbor
    Tensor target;                        // r'_t
};

// Builds z_i / flow pyramids for the T-1 neighbors of a window; the center
// frame contributes only the supervision target. Baselines are denoised
// from the window frames themselves (full-frame windows give the
// deployment preprocessing; the trainer substitutes cache-backed slices).
PreparedBlind prepare_blind_window(const TemporalWindow& w, const PriorSet& priors,
                                   const TrainConfig& cfg);

AnchorFrame compute_anchor(const ModelState& blind_state, const TemporalWindow& w,
                           const PriorSet& priors, const TrainConfig& cfg);

// Same assembly with caller-supplied flow pyramids (used by the blindness
// audit, which freezes the prior conditioning while varying the center).
PreparedBlind prepare_blind_window_with_flows(const TemporalWindow& w, const PriorSet& priors,
                                              const TrainConfig& cfg,
                                              const std::vector<FlowPyramid>& pyramids);

// Replaces the window center with anchor + n', leaving every neighbor
// frame untouched. The returned noise is the field actually embedded in
// y'_t (y'_t - x_hat_s1), so downstream identities are exact.
std::pair<TemporalWindow, Tensor> recorrupt_window(const TemporalWindow& w,
                                                   const AnchorFrame& anchor,
                                                   const NoiseModel& model, uint64_t seed);

// Frame-wise denoised baselines cached per (clip, frame); training samples
// slice these so patches see the same preprocessing as full-frame
// inference.
class Preproc {
public:
    Preproc(const Dataset* data, PriorSet priors);
    const Tensor& baseline(bool val, int clip, int frame) const;
    // Full-frame flow src->dst sliced to a crop; block-matching fields are
    // cached per pair.
    Tensor flow_sliced(bool val, int clip, int src, int dst, int y0, int x0, int h, int w) const;
    const PriorSet& priors() const { return priors_; }
    const Dataset& data() const { return *data_; }

private:
    const Dataset* data_;
    PriorSet priors_;
    mutable std::vector<std::vector<std::optional<Tensor>>> cache_[2];
    mutable std::map<std::tuple<int, int, int, int>, Tensor> flow_cache_;
    mutable std::mutex mu_;
};

// One training example: deterministic draw + assembly.
class SampleFactory {
public:
    SampleFactory(const Dataset* data, const Preproc* preproc, const TrainConfig* cfg);

    struct Draw {
        int clip = 0;
        int t = 0;
        int crop_y = 0, crop_x = 0;
        uint64_t seed = 0;
        TemporalWindow window;  // cropped noisy window
    };

    Draw draw(int iter, int k) const;
    PreparedBlind blind_sample(const Draw& d) const;
    PreparedRefine refine_sample(const Draw& d, const ModelState* stage1) const;
    Tensor stacked_input(const PreparedBlind& p) const;

private:
    const Dataset* data_;
    const Preproc* preproc_;
    const TrainConfig* cfg_;
};

class Trainer {
public:
    Trainer(const TrainConfig& cfg, const Dataset* data);

    // Runs the configured stage end to end; returns the checkpoint path.
    std::string run();

    // Single optimizer step over one batch at iteration `iter`; exposed for
    // tests and the ablation runner.
    double step(int iter);

    double validate() const;  // mean PSNR on the validation clips
    const ModelState& model() const { return model_; }
    ModelState& model_mut() { return model_; }
    const PriorSet& priors() const { return preproc_.priors(); }
    const SampleFactory& samples() const { return samples_; }
    const ModelState* stage1_state() const { return stage1_ ? &*stage1_ : nullptr; }

private:
    TrainConfig cfg_;
    const Dataset* data_;
    Preproc preproc_;
    SampleFactory samples_;
    ModelState model_;
    std::optional<ModelState> stage1_;
    AdamOptimizer opt_;

    double batch_loss_and_update(int iter);
};

std::string run_training(const TrainConfig& cfg, const Dataset& data);

void save_checkpoint(const std::string& path, const ModelState& st, const AdamOptimizer& opt,
                     int iter);
struct Checkpoint {
    ModelState model;
    AdamOptimizer opt;
    int iter = 0;
};
Checkpoint load_checkpoint(const std::string& path);

// Full-frame Stage-1 estimate at frame t (the temporal anchor for joint
// inputs, the raw prediction for the ablation arms). Shared by validation,
// the ablation runner and the acceptance suite.
Tensor stage1_estimate_frame(const ModelState& st, const VideoSequence& noisy, int t,
                             const PriorSet& priors, const TrainConfig& cfg);

// Eq.-4 full-frame estimate: the Spatial Refiner applied to the original
// noisy joint inputs, residual added back onto D(y_t). No recorruption.
Tensor refine_estimate_frame(const ModelState& st, const VideoSequence& noisy, int t,
                             const PriorSet& priors, const TrainConfig& cfg);

}  // namespace f2r
