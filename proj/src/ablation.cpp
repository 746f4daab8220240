#include "f2r/eval/ablation.hpp"

#include <algorithm>
#include <functional>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "f2r/eval/metrics.hpp"
#include "f2r/eval/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace f2r {

Suite parse_suite(const std::string& name) {
    if (name == "stages") return Suite::stages;
    if (name == "components") return Suite::components;
    if (name == "alignment_pairing") return Suite::alignment_pairing;
    if (name == "window_T") return Suite::window_T;
    throw ConfigError("ablate.suite: unknown suite '" + name + "'");
}

std::string suite_name(Suite s) {
    switch (s) {
        case Suite::stages: return "stages";
        case Suite::components: return "components";
        case Suite::alignment_pairing: return "alignment_pairing";
        default: return "window_T";
    }
}

namespace {

struct EvalOut {
    double psnr = 0.0, ssim = 0.0;
    std::vector<double> frame_psnr;  // mean over clips per frame index
};

EvalOut eval_frames(const Dataset& ds,
                    const std::function<Tensor(const VideoSequence&, int)>& estimate) {
    EvalOut out;
    const int len = ds.val_noisy[0].length();
    out.frame_psnr.assign(static_cast<std::size_t>(len), 0.0);
    double pacc = 0.0, sacc = 0.0;
    int count = 0;
    for (std::size_t c = 0; c < ds.val_noisy.size(); ++c) {
        for (int t = 0; t < ds.val_noisy[c].length(); ++t) {
            const Tensor est = estimate(ds.val_noisy[c], t);
            const Tensor& ref = ds.val_clean[c].frames[static_cast<std::size_t>(t)];
            const double p = psnr(est, ref);
            pacc += p;
            sacc += ssim(est, ref);
            out.frame_psnr[static_cast<std::size_t>(t)] += p;
            ++count;
        }
    }
    out.psnr = pacc / count;
    out.ssim = sacc / count;
    for (auto& v : out.frame_psnr) v /= static_cast<double>(ds.val_noisy.size());
    return out;
}

EvalOut eval_stage1(const ModelState& st, const Dataset& ds, const PriorSet& priors,
                    const TrainConfig& cfg) {
    return eval_frames(ds, [&](const VideoSequence& seq, int t) {
        return stage1_estimate_frame(st, seq, t, priors, cfg);
    });
}

EvalOut eval_stage2(const ModelState& st, const Dataset& ds, const PriorSet& priors,
                    const TrainConfig& cfg) {
    return eval_frames(ds, [&](const VideoSequence& seq, int t) {
        return refine_estimate_frame(st, seq, t, priors, cfg);
    });
}

EvalOut eval_denoiser_only(const Dataset& ds, const PriorSet& priors) {
    return eval_frames(ds, [&](const VideoSequence& seq, int t) {
        return denoise_frame(*priors.denoiser, seq.frames[static_cast<std::size_t>(t)]);
    });
}

struct SuiteRunner {
    const AblationConfig& cfg;
    AblationReport& rep;
    Dataset ds;
    int seed;

    TrainConfig arm_config(const std::string& arm) const {
        TrainConfig t = cfg.base;
        t.seed = hash_seed(cfg.base.seed, static_cast<uint64_t>(seed));
        t.out_dir = (fs::path(cfg.out_dir) / suite_name(cfg.suite) /
                     ("seed" + std::to_string(seed)) / arm)
                        .string();
        t.write_log = true;
        return t;
    }

    void record(const std::string& arm, const EvalOut& e) {
        rep.rows.push_back({arm, seed, e.psnr, e.ssim, false, ""});
        auto& curve = rep.frame_psnr[arm];
        if (curve.empty()) curve.assign(e.frame_psnr.size(), 0.0);
        for (std::size_t i = 0; i < curve.size(); ++i) curve[i] += e.frame_psnr[i] / cfg.seeds;
    }

    void record_failure(const std::string& arm, const std::string& what) {
        rep.rows.push_back({arm, seed, 0.0, 0.0, true, what});
    }

    template <class Fn>
    void arm(const std::string& name, Fn&& fn) {
        if (std::find(rep.arm_order.begin(), rep.arm_order.end(), name) == rep.arm_order.end())
            rep.arm_order.push_back(name);
        try {
            record(name, fn());
        } catch (const std::exception& e) {
            record_failure(name, e.what());
        }
    }

    void run_stages() {
        const PriorSet priors = make_priors(cfg.base.priors);
        arm("d_only", [&] { return eval_denoiser_only(ds, priors); });

        std::string ckpt1;
        arm("stage1_only", [&] {
            TrainConfig t1 = arm_config("stage1");
            t1.stage = 1;
            Trainer tr(t1, &ds);
            ckpt1 = tr.run();
            return eval_stage1(tr.model(), ds, priors, t1);
        });
        arm("stage2_alone", [&] {
            TrainConfig t2 = arm_config("stage2_alone");
            t2.stage = 2;
            t2.anchor_mode = AnchorMode::denoiser;
            t2.stage1_ckpt.clear();
            Trainer tr(t2, &ds);
            tr.run();
            return eval_stage2(tr.model(), ds, priors, t2);
        });
        arm("full", [&] {
            if (ckpt1.empty()) throw ConfigError("stage-1 arm failed, no checkpoint for 'full'");
            TrainConfig t2 = arm_config("full");
            t2.stage = 2;
            t2.stage1_ckpt = ckpt1;
            Trainer tr(t2, &ds);
            tr.run();
            return eval_stage2(tr.model(), ds, priors, t2);
        });
    }

    void run_components() {
        const PriorSet priors = make_priors(cfg.base.priors);
        auto train_eval = [&](const std::string& name, bool stacked, bool joint) {
            arm(name, [&] {
                TrainConfig t = arm_config(name);
                t.stage = 1;
                t.stacked = stacked;
                t.joint_inputs = joint;
                Trainer tr(t, &ds);
                tr.run();
                return eval_stage1(tr.model(), ds, priors, t);
            });
        };
        train_eval("baseline", true, false);
        train_eval("flow_guided", false, false);
        train_eval("joint_inputs", true, true);
        train_eval("both", false, true);
    }

    void run_alignment_pairing() {
        const PriorSet priors = make_priors(cfg.base.priors);
        std::map<std::string, std::string> stage1_ckpts;
        auto stage1_with = [&](SkipKind skip) -> std::string {
            const std::string key = std::string(to_string(skip));
            auto it = stage1_ckpts.find(key);
            if (it != stage1_ckpts.end()) return it->second;
            TrainConfig t1 = arm_config("stage1_" + key);
            t1.stage = 1;
            t1.skip_stage1 = skip;
            Trainer tr(t1, &ds);
            const std::string ckpt = tr.run();
            stage1_ckpts.emplace(key, ckpt);
            return ckpt;
        };
        auto pair_arm = [&](const std::string& name, SkipKind s1, SkipKind s2) {
            arm(name, [&] {
                TrainConfig t2 = arm_config(name);
                t2.stage = 2;
                t2.skip_stage2 = s2;
                t2.stage1_ckpt = stage1_with(s1);
                Trainer tr(t2, &ds);
                tr.run();
                return eval_stage2(tr.model(), ds, priors, t2);
            });
        };
        pair_arm("faam_faam", SkipKind::faam, SkipKind::faam);
        pair_arm("fdam_fdam", SkipKind::fdam, SkipKind::fdam);
        pair_arm("faam_fdam", SkipKind::faam, SkipKind::fdam);
    }

    void run_window() {
        const PriorSet priors = make_priors(cfg.base.priors);
        for (int T : cfg.window_sizes) {
            arm("T=" + std::to_string(T), [&] {
                TrainConfig t1 = arm_config("T" + std::to_string(T));
                t1.stage = 1;
                t1.window = T;
                Trainer tr(t1, &ds);
                tr.run();
                return eval_stage1(tr.model(), ds, priors, t1);
            });
        }
    }
};

}  // namespace

AblationReport run_ablation(const AblationConfig& cfg) {
    AblationReport rep;
    rep.suite = cfg.suite;
    for (int seed = 0; seed < cfg.seeds; ++seed) {
        DataConfig dc = cfg.data;
        // fixed scenes, fresh noise realization per seed
        dc.noise_seed = hash_seed(cfg.data.noise_seed, static_cast<uint64_t>(seed));
        if (cfg.suite == Suite::window_T)
            dc.window_T = *std::max_element(cfg.window_sizes.begin(), cfg.window_sizes.end());
        SuiteRunner runner{cfg, rep, build_synthetic_dataset(dc, cfg.noise), seed};
        switch (cfg.suite) {
            case Suite::stages: runner.run_stages(); break;
            case Suite::components: runner.run_components(); break;
            case Suite::alignment_pairing: runner.run_alignment_pairing(); break;
            case Suite::window_T: runner.run_window(); break;
        }
    }
    for (const auto& arm : rep.arm_order) {
        double pa = 0.0, sa = 0.0;
        int n = 0;
        for (const auto& r : rep.rows)
            if (r.arm == arm && !r.failed) {
                pa += r.psnr;
                sa += r.ssim;
                ++n;
            }
        if (n > 0) {
            rep.mean_psnr[arm] = pa / n;
            rep.mean_ssim[arm] = sa / n;
        }
    }
    write_report(rep, (fs::path(cfg.out_dir) / suite_name(cfg.suite)).string(), cfg.plots);
    return rep;
}

void write_report(const AblationReport& rep, const std::string& dir, bool plots) {
    fs::create_directories(dir);
    {
        std::ofstream csv(fs::path(dir) / "results.csv");
        csv << "suite,arm,seed,psnr,ssim,status\n";
        for (const auto& r : rep.rows)
            csv << suite_name(rep.suite) << "," << r.arm << "," << r.seed << "," << r.psnr << ","
                << r.ssim << "," << (r.failed ? "FAILED" : "ok") << "\n";
        for (const auto& arm : rep.arm_order)
            if (rep.mean_psnr.count(arm))
                csv << suite_name(rep.suite) << "," << arm << ",mean," << rep.mean_psnr.at(arm)
                    << "," << rep.mean_ssim.at(arm) << ",ok\n";
    }
    {
        json j;
        j["suite"] = suite_name(rep.suite);
        json rows = json::array();
        for (const auto& r : rep.rows) {
            json jr;
            jr["arm"] = r.arm;
            jr["seed"] = r.seed;
            jr["psnr"] = r.psnr;
            jr["ssim"] = r.ssim;
            jr["failed"] = r.failed;
            if (r.failed) jr["error"] = r.error;
            rows.push_back(jr);
        }
        j["rows"] = rows;
        j["mean_psnr"] = rep.mean_psnr;
        j["mean_ssim"] = rep.mean_ssim;
        std::ofstream os(fs::path(dir) / "results.json");
        os << j.dump(2) << "\n";
    }
    if (plots && !rep.mean_psnr.empty()) {
        fs::create_directories(fs::path(dir) / "plots");
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& arm : rep.arm_order)
            if (rep.mean_psnr.count(arm)) {
                labels.push_back(arm);
                values.push_back(rep.mean_psnr.at(arm));
            }
        render_bar_chart((fs::path(dir) / "plots" / "psnr_bars.png").string(),
                         suite_name(rep.suite) + " mean PSNR", labels, values);
        std::vector<PlotSeries> series;
        for (const auto& arm : rep.arm_order) {
            auto it = rep.frame_psnr.find(arm);
            if (it != rep.frame_psnr.end() && it->second.size() >= 2)
                series.push_back({arm, it->second});
        }
        if (!series.empty())
            render_line_chart((fs::path(dir) / "plots" / "frame_psnr.png").string(),
                              "per-frame PSNR", series);
    }
}

}  // namespace f2r
