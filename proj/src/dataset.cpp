#include "f2r/train/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "f2r/core/errors.hpp"
#include "f2r/core/image_io.hpp"
#include "f2r/core/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace f2r {

SceneSpec DataConfig::scene_spec() const {
    SceneSpec s;
    const bool raw = layout == "rgbg";
    // Raw scenes are generated as full-resolution Bayer mosaics and packed
    // to half resolution afterwards.
    s.height = raw ? height * 2 : height;
    s.width = raw ? width * 2 : width;
    s.length = clip_len;
    s.channels = raw ? 1 : channels;
    s.sprites = sprites;
    s.vel_min = vel_min;
    s.vel_max = vel_max;
    s.texture_cells = texture_cells;
    s.bg_cells = bg_cells;
    s.check_window_T = window_T;
    s.check_patch = patch;
    return s;
}

void Dataset::validate() const {
    if (train_noisy.empty()) throw ConfigError("dataset: no training clips");
    for (const auto& c : train_noisy) c.validate();
    if (has_clean && train_clean.size() != train_noisy.size())
        throw ConfigError("dataset: clean/noisy clip count mismatch");
}

namespace {

// Packed-domain motion: the sprite states scaled by one half give the
// exact analytic flow on the RGBG grid.
std::shared_ptr<AnalyticSceneFlow> half_scale_flow(const AnalyticSceneFlow& full) {
    std::vector<AnalyticSceneFlow::Sprite> sprites = full.sprites();
    for (auto& s : sprites) {
        s.x0 *= 0.5;
        s.y0 *= 0.5;
        s.vx *= 0.5;
        s.vy *= 0.5;
        s.w *= 0.5;
        s.h *= 0.5;
    }
    return std::make_shared<AnalyticSceneFlow>(full.frame_count(), full.height() / 2,
                                               full.width() / 2, std::move(sprites));
}

VideoSequence make_clip(const DataConfig& cfg, uint64_t seed, const std::string& id) {
    SyntheticClip clip = generate_synthetic(cfg.scene_spec(), seed);
    clip.clean.id = id;
    if (cfg.layout == "rgbg") {
        VideoSequence packed = pack_rgbg(clip.clean, cfg.cfa_phase);
        packed.gt_flow = half_scale_flow(*clip.flow);
        packed.id = id;
        return packed;
    }
    return clip.clean;
}

}  // namespace

Dataset build_synthetic_dataset(const DataConfig& cfg, const NoiseModel& noise) {
    noise.validate();
    Dataset ds;
    ds.noise = noise;
    for (int i = 0; i < cfg.clips + cfg.val_clips; ++i) {
        const bool val = i >= cfg.clips;
        VideoSequence clean = make_clip(cfg, hash_seed(cfg.gen_seed, static_cast<uint64_t>(i)),
                                        (val ? "val" : "clip") + std::to_string(val ? i - cfg.clips : i));
        VideoSequence noisy = corrupt(clean, noise, hash_seed(cfg.noise_seed, static_cast<uint64_t>(i)));
        if (val) {
            ds.val_clean.push_back(clean);
            ds.val_noisy.push_back(std::move(noisy));
        } else {
            ds.train_clean.push_back(clean);
            ds.train_noisy.push_back(std::move(noisy));
        }
    }
    ds.validate();
    return ds;
}

void export_dataset(const DataConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    json meta;
    meta["layout"] = cfg.layout;
    meta["cfa_phase"] = cfg.cfa_phase;
    meta["channels"] = cfg.layout == "rgbg" ? 4 : cfg.channels;
    meta["height"] = cfg.height;
    meta["width"] = cfg.width;
    meta["clip_len"] = cfg.clip_len;
    meta["flow_radius"] = cfg.flow_radius;
    meta["bit_depth"] = 16;
    meta["clean"] = true;
    json clips = json::array();

    for (int i = 0; i < cfg.clips + cfg.val_clips; ++i) {
        const bool val = i >= cfg.clips;
        const std::string id =
            (val ? "val" : "clip") + std::to_string(val ? i - cfg.clips : i);
        VideoSequence seq = make_clip(cfg, hash_seed(cfg.gen_seed, static_cast<uint64_t>(i)), id);
        const fs::path cdir = fs::path(dir) / "clips" / id;
        fs::create_directories(cdir);
        const bool raw = cfg.layout == "rgbg";
        for (int f = 0; f < seq.length(); ++f) {
            char name[32];
            std::snprintf(name, sizeof(name), "%05d.png", f);
            // packed clips are stored as their Bayer mosaics so files stay
            // ordinary grayscale images
            const Tensor frame =
                raw ? unpack_rgbg_frame(seq.frames[static_cast<std::size_t>(f)], cfg.cfa_phase)
                    : seq.frames[static_cast<std::size_t>(f)];
            write_image((cdir / name).string(), frame, 16);
        }
        const fs::path fdir = fs::path(dir) / "flows" / id;
        const fs::path odir = fs::path(dir) / "occ" / id;
        fs::create_directories(fdir);
        fs::create_directories(odir);
        for (int t = 0; t < seq.length(); ++t)
            for (int s = std::max(0, t - cfg.flow_radius);
                 s <= std::min(seq.length() - 1, t + cfg.flow_radius); ++s) {
                if (s == t) continue;
                const std::string pair = std::to_string(s) + "_" + std::to_string(t);
                write_flo((fdir / (pair + ".flo")).string(), seq.gt_flow->flow(s, t));
                write_image((odir / (pair + ".png")).string(), seq.gt_flow->occlusion(s, t), 8);
            }
        json jc;
        jc["id"] = id;
        jc["len"] = seq.length();
        jc["role"] = val ? "val" : "train";
        clips.push_back(jc);
    }
    meta["clips"] = clips;
    std::ofstream os(fs::path(dir) / "meta.json");
    os << meta.dump(2) << "\n";
    if (!os) throw IoError("failed writing dataset meta to " + dir);
}

FileFlowStore::FileFlowStore(std::string dir, int frames, int height, int width, int radius)
    : dir_(std::move(dir)), frames_(frames), height_(height), width_(width), radius_(radius) {}

Tensor FileFlowStore::flow(int src, int dst) const {
    if (src < 0 || src >= frames_ || dst < 0 || dst >= frames_)
        throw InputError("flow store: frame index out of range");
    if (src == dst) return Tensor({2, height_, width_});
    if (std::abs(src - dst) > radius_)
        throw InputError("flow store: pair " + std::to_string(src) + "->" + std::to_string(dst) +
                         " beyond exported radius " + std::to_string(radius_));
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = cache_.find({src, dst});
        if (it != cache_.end()) return it->second;
    }
    Tensor f = read_flo(dir_ + "/" + std::to_string(src) + "_" + std::to_string(dst) + ".flo");
    std::lock_guard<std::mutex> lk(mu_);
    return cache_.emplace(std::make_pair(src, dst), std::move(f)).first->second;
}

Tensor FileFlowStore::occlusion(int src, int dst) const {
    if (src == dst) return Tensor({1, height_, width_});
    // stored next to the flows, 8-bit masks
    std::string occ_dir = dir_;
    const auto pos = occ_dir.rfind("/flows/");
    if (pos != std::string::npos) occ_dir.replace(pos, 7, "/occ/");
    Tensor m = read_image(occ_dir + "/" + std::to_string(src) + "_" + std::to_string(dst) + ".png");
    for (auto& v : m.data) v = v > 0.5f ? 1.0f : 0.0f;
    return m;
}

Dataset load_dataset(const std::string& dir, const NoiseModel& noise, uint64_t noise_seed) {
    const fs::path meta_path = fs::path(dir) / "meta.json";
    std::ifstream is(meta_path);
    if (!is) throw ConfigError("dataset: missing " + meta_path.string() + " (run gen-data first)");
    json meta;
    is >> meta;

    Dataset ds;
    ds.noise = noise;
    const std::string layout = meta.value("layout", "srgb");
    const std::string cfa = meta.value("cfa_phase", "rggb");
    const int radius = meta.value("flow_radius", 0);
    const bool clean_source = meta.value("clean", true);
    ds.has_clean = clean_source;

    int clip_index = 0;
    for (const auto& jc : meta.at("clips")) {
        const std::string id = jc.at("id");
        const int len = jc.at("len");
        const std::string role = jc.value("role", "train");
        VideoSequence seq;
        seq.id = id;
        for (int f = 0; f < len; ++f) {
            char name[32];
            std::snprintf(name, sizeof(name), "%05d.png", f);
            Tensor frame = read_image((fs::path(dir) / "clips" / id / name).string());
            seq.frames.push_back(layout == "rgbg" ? pack_rgbg_frame(frame, cfa) : std::move(frame));
        }
        seq.layout = layout == "rgbg" ? Layout::rgbg_packed : Layout::srgb;
        const fs::path fdir = fs::path(dir) / "flows" / id;
        if (fs::exists(fdir) && radius > 0)
            seq.gt_flow = std::make_shared<FileFlowStore>(fdir.string(), len, seq.height(),
                                                          seq.width(), radius);
        seq.validate();

        if (clean_source) {
            VideoSequence noisy =
                corrupt(seq, noise, hash_seed(noise_seed, static_cast<uint64_t>(clip_index)));
            if (role == "val") {
                ds.val_clean.push_back(seq);
                ds.val_noisy.push_back(std::move(noisy));
            } else {
                ds.train_clean.push_back(seq);
                ds.train_noisy.push_back(std::move(noisy));
            }
        } else {
            seq.noise_meta = noise;
            if (role == "val")
                ds.val_noisy.push_back(seq);
            else
                ds.train_noisy.push_back(seq);
        }
        ++clip_index;
    }
    ds.validate();
    return ds;
}

}  // namespace f2r
