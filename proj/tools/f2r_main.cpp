// f2r: two-stage self-supervised video denoising pipeline driver.
// One config file drives every subcommand; --set key=value overrides.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "f2r/cli/config.hpp"
#include "f2r/core/image_io.hpp"
#include "f2r/eval/ablation.hpp"
#include "f2r/eval/audit.hpp"
#include "f2r/eval/metrics.hpp"
#include "f2r/infer/inference.hpp"
#include "f2r/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace f2r;

namespace {

struct RunContext {
    ConfigTree cfg;
    std::string run_dir;
    std::ofstream jsonl;

    void open(const std::string& subcommand) {
        const std::string root = cfg.get_str("output_root", "out");
        const std::string id = cfg.get_str("run_id", "run");
        run_dir = (fs::path(root) / id).string();
        fs::create_directories(run_dir);
        std::ofstream rc(fs::path(run_dir) / "config.resolved.toml");
        rc << cfg.dump();
        jsonl.open(fs::path(run_dir) / "run.log.jsonl", std::ios::app);
        log({{"event", "start"}, {"subcommand", subcommand}});
    }

    void log(json j) {
        j["ts"] = static_cast<double>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count()) /
            1000.0;
        jsonl << j.dump() << "\n";
        jsonl.flush();
    }
};

NoiseModel noise_from(const ConfigTree& c) {
    const std::string kind = c.get_str("noise.kind", "awgn");
    if (kind == "awgn") return NoiseModel::awgn(c.get_double("noise.sigma", 0.1));
    if (kind != "signal_dependent") throw ConfigError("noise.kind must be awgn or signal_dependent");
    const int iso = c.get_int("noise.iso", 0);
    const std::string table = c.get_str("noise.iso_table", "");
    if (!table.empty()) {
        std::stringstream ss(table);
        std::string entry;
        while (std::getline(ss, entry, ',')) {
            std::stringstream es(entry);
            std::string sid, sa, sb;
            if (!std::getline(es, sid, ':') || !std::getline(es, sa, ':') || !std::getline(es, sb))
                throw ConfigError("noise.iso_table entries must look like iso:a:b");
            if (std::stoi(sid) == iso)
                return NoiseModel::signal_dependent(std::stod(sa), std::stod(sb), iso);
        }
        throw ConfigError("noise.iso " + std::to_string(iso) + " not present in noise.iso_table");
    }
    return NoiseModel::signal_dependent(c.get_double("noise.shot_gain", 0.01),
                                        c.get_double("noise.read_var", 1e-4), iso);
}

DataConfig data_from(const ConfigTree& c) {
    DataConfig d;
    d.height = c.get_int("data.height", d.height);
    d.width = c.get_int("data.width", d.width);
    d.clip_len = c.get_int("data.clip_len", d.clip_len);
    d.clips = c.get_int("data.clips", d.clips);
    d.val_clips = c.get_int("data.val_clips", d.val_clips);
    d.channels = c.get_int("data.channels", d.channels);
    d.layout = c.get_str("data.layout", d.layout);
    d.cfa_phase = c.get_str("data.cfa_phase", d.cfa_phase);
    d.sprites = c.get_int("data.sprites", d.sprites);
    d.vel_min = c.get_double("data.vel_min", d.vel_min);
    d.vel_max = c.get_double("data.vel_max", d.vel_max);
    d.texture_cells = c.get_int("data.texture_cells", d.texture_cells);
    d.bg_cells = c.get_int("data.bg_cells", d.bg_cells);
    d.gen_seed = c.get_u64("data.gen_seed", d.gen_seed);
    d.noise_seed = c.get_u64("data.noise_seed", d.noise_seed);
    d.flow_radius = c.get_int("data.flow_radius", d.flow_radius);
    d.window_T = c.get_int("data.window_T", d.window_T);
    d.patch = c.get_int("data.patch", d.patch);
    return d;
}

PriorConfig priors_from(const ConfigTree& c) {
    PriorConfig p;
    p.denoiser = c.get_str("prior.denoiser", p.denoiser);
    p.smoother_sigma = c.get_double("prior.smoother_sigma", p.smoother_sigma);
    p.flow = c.get_str("prior.flow", p.flow);
    p.bm_radius = c.get_int("prior.bm_radius", p.bm_radius);
    p.bm_block = c.get_int("prior.bm_block", p.bm_block);
    return p;
}

ArchConfig arch_from(const ConfigTree& c) {
    ArchConfig a;
    a.base_ch = c.get_int("model.channels", 16);
    a.levels = c.get_int("model.levels", a.levels);
    a.cap_mult = c.get_int("model.cap_mult", a.cap_mult);
    a.faam_ratio = c.get_int("model.faam_ratio", a.faam_ratio);
    a.faam_spatial_k = c.get_int("model.faam_spatial_kernel", a.faam_spatial_k);
    a.dcn_k = c.get_int("model.dcn_kernel", a.dcn_k);
    a.dcn_groups = c.get_int("model.dcn_groups", a.dcn_groups);
    a.offset_clamp = c.get_double("model.offset_clamp", a.offset_clamp);
    a.lrelu_slope = c.get_double("model.lrelu_slope", a.lrelu_slope);
    return a;
}

TrainConfig train_from(const ConfigTree& c, int stage, RunContext& ctx) {
    TrainConfig t;
    t.stage = stage;
    const std::string loss = c.get_str("training.loss", "l1");
    if (loss == "l1")
        t.loss = LossKind::l1;
    else if (loss == "l2")
        t.loss = LossKind::l2;
    else
        throw ConfigError("training.loss must be l1 or l2");
    t.lr = c.get_double("training.lr", t.lr);
    t.iters = c.get_int("training.iters", t.iters);
    t.batch = c.get_int("training.batch", t.batch);
    t.window = c.get_int("data.window_T", t.window);
    t.patch = c.get_int("data.patch", t.patch);
    t.seed = c.get_u64("seed", t.seed);
    t.grad_clip = c.get_double("training.grad_clip", t.grad_clip);
    t.val_interval = c.get_int("training.val_interval", t.val_interval);
    t.val_frame_step = c.get_int("training.val_frame_step", t.val_frame_step);
    t.stage1_ckpt = c.get_str("training.stage1_ckpt", "");
    t.ckpt_name = c.get_str("training.ckpt", "");
    t.arch = arch_from(c);
    t.priors = priors_from(c);
    t.out_dir = ctx.run_dir;
    return t;
}

std::string dataset_dir(const ConfigTree& c, const RunContext& ctx) {
    const std::string d = c.get_str("data.dir", "");
    if (!d.empty()) return d;
    return (fs::path(ctx.run_dir) / "data").string();
}

VideoSequence load_clip_frames(const std::string& dir, const std::string& layout,
                               const std::string& cfa) {
    VideoSequence seq;
    seq.id = fs::path(dir).filename().string();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        Tensor frame = read_image(f.string());
        seq.frames.push_back(layout == "rgbg" ? pack_rgbg_frame(frame, cfa) : std::move(frame));
    }
    if (layout == "rgbg") seq.layout = Layout::rgbg_packed;
    seq.validate();
    return seq;
}

int cmd_gen_data(RunContext& ctx) {
    const DataConfig dc = data_from(ctx.cfg);
    dc.scene_spec().validate();
    const std::string dir = dataset_dir(ctx.cfg, ctx);
    export_dataset(dc, dir);
    ctx.log({{"event", "gen-data"}, {"dir", dir}});
    std::cerr << "dataset written to " << dir << "\n";
    return 0;
}

int cmd_train_prior(RunContext& ctx) {
    LearnedDenoiser::TrainOptions opt;
    opt.channels = ctx.cfg.get_int("data.channels", 3);
    opt.iters = ctx.cfg.get_int("prior.train_iters", opt.iters);
    opt.hidden = ctx.cfg.get_int("prior.train_hidden", opt.hidden);
    opt.layers = ctx.cfg.get_int("prior.train_layers", opt.layers);
    opt.noise_sigma = ctx.cfg.get_double("prior.train_sigma", opt.noise_sigma);
    opt.seed = ctx.cfg.get_u64("prior.train_seed", opt.seed);
    const LearnedDenoiser d = LearnedDenoiser::train(opt);
    const std::string out =
        ctx.cfg.get_str("prior.out", (fs::path(ctx.run_dir) / "denoiser.prior").string());
    d.save(out);
    ctx.log({{"event", "train-prior"}, {"checkpoint", out},
             {"checksum", std::to_string(d.param_checksum())}});
    std::cerr << "denoiser prior written to " << out << "\n";
    return 0;
}

int cmd_train(RunContext& ctx, int stage) {
    const NoiseModel noise = noise_from(ctx.cfg);
    const Dataset ds = load_dataset(dataset_dir(ctx.cfg, ctx), noise,
                                    ctx.cfg.get_u64("data.noise_seed", 77));
    TrainConfig tc = train_from(ctx.cfg, stage, ctx);
    Trainer tr(tc, &ds);
    const std::string ckpt = tr.run();
    const double val = tr.validate();
    ctx.log({{"event", "train"}, {"stage", stage}, {"checkpoint", ckpt}, {"val_psnr", val}});
    std::cerr << "stage " << stage << " checkpoint: " << ckpt;
    if (!std::isnan(val)) std::cerr << "  (val PSNR " << val << " dB)";
    std::cerr << "\n";
    return 0;
}

int cmd_infer(RunContext& ctx) {
    const std::string ckpt = ctx.cfg.require_str("inference.checkpoint");
    if (!fs::exists(ckpt))
        throw ConfigError("inference.checkpoint: missing checkpoint " + ckpt);
    const ModelState refiner = load_refiner(ckpt);

    InferenceConfig ic;
    ic.window = refiner.arch.window;
    ic.tile = ctx.cfg.get_int("inference.tile", 0);
    ic.tile_overlap = ctx.cfg.get_int("inference.tile_overlap", 16);
    ic.max_flow_px = ctx.cfg.get_int("inference.max_flow", 8);
    ic.priors = priors_from(ctx.cfg);
    const PriorSet priors = make_priors(ic.priors);

    VideoSequence noisy;
    const std::string noisy_dir = ctx.cfg.get_str("inference.noisy_dir", "");
    if (!noisy_dir.empty()) {
        noisy = load_clip_frames(noisy_dir, ctx.cfg.get_str("data.layout", "srgb"),
                                 ctx.cfg.get_str("data.cfa_phase", "rggb"));
    } else {
        const NoiseModel noise = noise_from(ctx.cfg);
        const Dataset ds = load_dataset(dataset_dir(ctx.cfg, ctx), noise,
                                        ctx.cfg.get_u64("data.noise_seed", 77));
        const std::string clip = ctx.cfg.get_str("inference.clip", "val0");
        const VideoSequence* found = nullptr;
        for (const auto& s : ds.val_noisy)
            if (s.id == clip) found = &s;
        for (const auto& s : ds.train_noisy)
            if (s.id == clip) found = &s;
        if (!found) throw ConfigError("inference.clip: no clip '" + clip + "' in the dataset");
        noisy = *found;
    }

    const VideoSequence out = denoise_video(refiner, noisy, priors, ic);
    const std::string out_dir = (fs::path(ctx.run_dir) / "denoised" / noisy.id).string();
    export_video(out_dir, out, ctx.cfg.get_int("inference.bit_depth", 16),
                 ctx.cfg.get_str("data.cfa_phase", "rggb"),
                 ctx.cfg.get_bool("inference.demosaic", false));
    ctx.log({{"event", "infer"}, {"frames", out.length()}, {"output", out_dir}});
    std::cerr << "denoised " << out.length() << " frames -> " << out_dir << "\n";
    return 0;
}

int cmd_eval(RunContext& ctx) {
    const std::string test = ctx.cfg.require_str("eval.test_dir");
    const std::string ref = ctx.cfg.require_str("eval.ref_dir");
    const VideoSequence a = load_clip_frames(test, "srgb", "rggb");
    const VideoSequence b = load_clip_frames(ref, "srgb", "rggb");
    if (a.length() != b.length()) throw InputError("eval: sequences differ in length");
    json frames = json::array();
    double pacc = 0.0, sacc = 0.0;
    for (int t = 0; t < a.length(); ++t) {
        const double p = psnr(a.frames[static_cast<std::size_t>(t)], b.frames[static_cast<std::size_t>(t)]);
        const double s = ssim(a.frames[static_cast<std::size_t>(t)], b.frames[static_cast<std::size_t>(t)]);
        frames.push_back({{"frame", t}, {"psnr", psnr_is_inf(p) ? 1e9 : p}, {"ssim", s}});
        pacc += p;
        sacc += s;
    }
    json rec;
    rec["test_dir"] = test;
    rec["ref_dir"] = ref;
    rec["frames"] = frames;
    rec["mean_psnr"] = pacc / a.length();
    rec["mean_ssim"] = sacc / a.length();
    const std::string out = (fs::path(ctx.run_dir) / "metrics.json").string();
    std::ofstream os(out);
    os << rec.dump(2) << "\n";
    std::cout << "PSNR " << pacc / a.length() << " dB  SSIM " << sacc / a.length() << "\n";
    ctx.log({{"event", "eval"}, {"mean_psnr", pacc / a.length()}, {"mean_ssim", sacc / a.length()}});
    return 0;
}

int cmd_ablate(RunContext& ctx) {
    AblationConfig ac;
    ac.suite = parse_suite(ctx.cfg.get_str("ablate.suite", "stages"));
    ac.seeds = ctx.cfg.get_int("ablate.seeds", 3);
    ac.data = data_from(ctx.cfg);
    ac.noise = noise_from(ctx.cfg);
    ac.base = train_from(ctx.cfg, 1, ctx);
    ac.base.iters = ctx.cfg.get_int("ablate.iters", ac.base.iters);
    ac.base.batch = ctx.cfg.get_int("ablate.batch", ac.base.batch);
    ac.base.patch = ctx.cfg.get_int("ablate.patch", ac.base.patch);
    ac.base.write_log = false;
    ac.out_dir = (fs::path(ctx.run_dir) / "report").string();
    const auto sizes = ctx.cfg.get_list("ablate.window_sizes", {3, 5, 7, 9});
    ac.window_sizes.clear();
    for (double v : sizes) ac.window_sizes.push_back(static_cast<int>(v));
    if (ac.suite == Suite::window_T)
        ac.data.window_T = *std::max_element(ac.window_sizes.begin(), ac.window_sizes.end());

    const AblationReport rep = run_ablation(ac);
    std::cout << "suite " << suite_name(rep.suite) << "\n";
    for (const auto& arm : rep.arm_order) {
        if (rep.mean_psnr.count(arm))
            std::cout << "  " << arm << ": " << rep.mean_psnr.at(arm) << " dB (mean of "
                      << ac.seeds << " seeds)\n";
        else
            std::cout << "  " << arm << ": FAILED\n";
    }
    ctx.log({{"event", "ablate"}, {"suite", suite_name(rep.suite)},
             {"report", ac.out_dir + "/" + suite_name(rep.suite)}});
    return 0;
}

int cmd_audit(RunContext& ctx) {
    const NoiseModel noise = noise_from(ctx.cfg);
    DataConfig dc = data_from(ctx.cfg);
    dc.clips = 1;
    dc.val_clips = 0;
    const Dataset ds = build_synthetic_dataset(dc, noise);
    const PriorSet priors = make_priors(priors_from(ctx.cfg));
    const int trials = ctx.cfg.get_int("audit.trials", 20);
    const int windows = ctx.cfg.get_int("audit.windows", 5);

    ArchConfig arch = arch_from(ctx.cfg);
    arch.window = dc.window_T;
    arch.data_ch = ds.train_noisy[0].channels();
    arch.input_ch = 2 * arch.data_ch;
    std::vector<std::pair<std::string, ModelState>> states;
    states.emplace_back("random-init",
                        ModelState::create(Mode::blind, SkipKind::faam, arch, 0xa0d17));
    const std::string ckpt = ctx.cfg.get_str("audit.checkpoint", "");
    if (!ckpt.empty()) states.emplace_back("checkpoint", load_model(ckpt));

    bool ok = true;
    for (const auto& [label, st] : states) {
        double worst = 0.0;
        for (int wi = 0; wi < windows; ++wi) {
            const auto& seq = ds.train_noisy[0];
            TemporalWindow w = extract_window(seq, 2 + wi % std::max(1, seq.length() - 4),
                                              st.arch.window);
            worst = std::max(worst,
                             blindness_audit(st, w, priors, trials, hash_seed(0xb11d, wi)));
        }
        const bool pass = worst == 0.0;
        ok = ok && pass;
        std::cout << (pass ? "PASS" : "FAIL") << " blindness(" << label
                  << "): max deviation " << worst << "\n";
    }
    // frozen priors: checksums must be stable across instantiations
    const PriorSet again = make_priors(priors_from(ctx.cfg));
    const bool frozen = priors.checksum() == again.checksum();
    ok = ok && frozen;
    std::cout << (frozen ? "PASS" : "FAIL") << " frozen-prior checksum: "
              << priors.checksum() << "\n";
    ctx.log({{"event", "audit"}, {"pass", ok}});
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"F2R self-supervised video denoising pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gen-data", "generate the synthetic dataset (clips + ground-truth flow)"},
        {"train-prior", "pretrain the learned image-denoiser prior"},
        {"train-stage1", "train the blind temporal estimator"},
        {"train-stage2", "train the non-blind spatial refiner"},
        {"infer", "deploy the spatial refiner on a noisy clip"},
        {"eval", "PSNR/SSIM between two frame directories"},
        {"ablate", "run an ablation suite"},
        {"audit", "blindness + frozen-prior checks"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "config file (TOML subset)")->required();
        sub->add_option("--set", sets, "override, e.g. --set training.iters=500");
        std::string footer = "config keys read by this subcommand:\n";
        for (const auto& k : subcommand_keys().at(name)) footer += "  " + k + "\n";
        sub->footer(footer);
        subs[name] = sub;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        RunContext ctx;
        ctx.cfg = ConfigTree::parse_file(config_path);
        for (const auto& s : sets) ctx.cfg.apply_override(s);
        ctx.cfg.validate_keys(config_schema());

        const std::string sub = app.get_subcommands().front()->get_name();
        ctx.open(sub);
        int rc = 2;
        if (sub == "gen-data") rc = cmd_gen_data(ctx);
        else if (sub == "train-prior") rc = cmd_train_prior(ctx);
        else if (sub == "train-stage1") rc = cmd_train(ctx, 1);
        else if (sub == "train-stage2") rc = cmd_train(ctx, 2);
        else if (sub == "infer") rc = cmd_infer(ctx);
        else if (sub == "eval") rc = cmd_eval(ctx);
        else if (sub == "ablate") rc = cmd_ablate(ctx);
        else if (sub == "audit") rc = cmd_audit(ctx);
        ctx.log({{"event", "end"}, {"exit", rc}});
        return rc;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
