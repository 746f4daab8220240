#include "f2r/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace f2r {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

std::string unquote(const std::string& v, const std::string& where) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    if (!v.empty() && (v.front() == '"' || v.back() == '"'))
        throw ConfigError(where + ": unbalanced quotes in '" + v + "'");
    return v;
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
    return true;
}

}  // namespace

ConfigTree ConfigTree::parse_string(const std::string& text, const std::string& origin) {
    ConfigTree t;
    t.origin_ = origin;
    std::istringstream is(text);
    std::string line, prefix;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(where + ": unterminated section header");
            prefix = trim(s.substr(1, s.size() - 2));
            if (!valid_key(prefix)) throw ConfigError(where + ": bad section name '" + prefix + "'");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (!valid_key(key)) throw ConfigError(where + ": bad key '" + key + "'");
        if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        if (t.values_.count(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
        t.values_[full] = unquote(value, where);
        t.lines_[full] = lineno;
    }
    return t;
}

ConfigTree ConfigTree::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_string(ss.str(), path);
}

void ConfigTree::apply_override(const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + key_value + "'");
    const std::string key = trim(key_value.substr(0, eq));
    if (!valid_key(key)) throw ConfigError("--set: bad key '" + key + "'");
    values_[key] = trim(key_value.substr(eq + 1));
    lines_[key] = 0;
}

bool ConfigTree::has(const std::string& key) const { return values_.count(key) != 0; }

int ConfigTree::line_of(const std::string& key) const {
    auto it = lines_.find(key);
    return it == lines_.end() ? 0 : it->second;
}

std::string ConfigTree::get_str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string ConfigTree::require_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || it->second.empty())
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

double ConfigTree::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(origin_ + ":" + std::to_string(line_of(key)) + ": key '" + key +
                          "' is not a number: '" + it->second + "'");
    }
}

int ConfigTree::get_int(const std::string& key, int fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ConfigError(origin_ + ": key '" + key + "' must be an integer");
    return i;
}

uint64_t ConfigTree::get_u64(const std::string& key, uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (...) {
        throw ConfigError(origin_ + ": key '" + key + "' is not an unsigned integer");
    }
}

bool ConfigTree::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError(origin_ + ": key '" + key + "' must be true or false");
}

std::vector<double> ConfigTree::get_list(const std::string& key,
                                         const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = trim(it->second);
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw ConfigError(origin_ + ": key '" + key + "' must be an array like [1, 2]");
    v = v.substr(1, v.size() - 2);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError(origin_ + ": bad array element '" + item + "' in '" + key + "'");
        }
    }
    return out;
}

void ConfigTree::validate_keys(const std::map<std::string, std::string>& known) const {
    for (const auto& [k, v] : values_) {
        if (!known.count(k))
            throw ConfigError(origin_ + ":" + std::to_string(line_of(k)) + ": unknown key '" + k +
                              "'");
    }
}

std::string ConfigTree::dump() const {
    // group by section for readability
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    for (const auto& [k, v] : values_) {
        const auto dot = k.rfind('.');
        if (dot == std::string::npos)
            sections[""].emplace_back(k, v);
        else
            sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
    }
    std::ostringstream os;
    for (const auto& [sec, kvs] : sections) {
        if (!sec.empty()) os << "[" << sec << "]\n";
        for (const auto& [k, v] : kvs) {
            const bool numeric = !v.empty() && v.find_first_not_of("0123456789.eE+-[] ,") ==
                                                   std::string::npos;
            const bool boolean = v == "true" || v == "false";
            if (numeric || boolean)
                os << k << " = " << v << "\n";
            else
                os << k << " = \"" << v << "\"\n";
        }
        os << "\n";
    }
    return os.str();
}

namespace {

std::map<std::string, std::string> build_schema() {
    std::map<std::string, std::string> s;
    s["run_id"] = "run identifier; artifacts land under <output_root>/<run_id>/";
    s["output_root"] = "artifact root directory";
    s["seed"] = "master seed for training draws";

    s["data.height"] = "frame height";
    s["data.width"] = "frame width";
    s["data.clip_len"] = "frames per clip";
    s["data.clips"] = "training clip count";
    s["data.val_clips"] = "held-out clip count";
    s["data.channels"] = "channels for srgb scenes";
    s["data.layout"] = "srgb | rgbg";
    s["data.cfa_phase"] = "rggb | bggr | grbg | gbrg";
    s["data.sprites"] = "moving sprites per scene";
    s["data.vel_min"] = "min sprite speed, px/frame";
    s["data.vel_max"] = "max sprite speed, px/frame";
    s["data.texture_cells"] = "sprite texture grid cells";
    s["data.bg_cells"] = "background texture grid cells";
    s["data.gen_seed"] = "scene generation seed";
    s["data.noise_seed"] = "dataset corruption seed";
    s["data.flow_radius"] = "largest |i-t| with exported flow";
    s["data.window_T"] = "temporal window T";
    s["data.patch"] = "training crop size";
    s["data.dir"] = "dataset directory (gen-data writes, training reads)";

    s["noise.kind"] = "awgn | signal_dependent";
    s["noise.sigma"] = "awgn standard deviation";
    s["noise.shot_gain"] = "signal-dependent a (variance = a*x + b)";
    s["noise.read_var"] = "signal-dependent b";
    s["noise.iso"] = "active ISO label";
    s["noise.iso_table"] = "per-ISO profiles, e.g. \"1600:0.01:0.0001,3200:0.02:0.0002\"";

    s["prior.denoiser"] = "classical | identity | learned:<path>";
    s["prior.smoother_sigma"] = "classical smoother kernel sigma";
    s["prior.flow"] = "ground_truth | block_matching";
    s["prior.bm_radius"] = "block-matching search radius";
    s["prior.bm_block"] = "block-matching block size";
    s["prior.train_iters"] = "train-prior iterations";
    s["prior.train_hidden"] = "train-prior hidden width";
    s["prior.train_layers"] = "train-prior conv layers";
    s["prior.train_sigma"] = "train-prior noise sigma";
    s["prior.train_seed"] = "train-prior seed";
    s["prior.out"] = "train-prior output checkpoint path";

    s["model.channels"] = "feature width C";
    s["model.levels"] = "U-Net levels";
    s["model.cap_mult"] = "channel growth cap (C * cap)";
    s["model.faam_ratio"] = "channel-attention reduction ratio";
    s["model.faam_spatial_kernel"] = "spatial-attention kernel";
    s["model.dcn_kernel"] = "deformable kernel size";
    s["model.dcn_groups"] = "deformable groups";
    s["model.offset_clamp"] = "residual offset clamp (px)";
    s["model.lrelu_slope"] = "activation negative slope";

    s["training.loss"] = "l1 | l2";
    s["training.lr"] = "initial learning rate";
    s["training.iters"] = "iterations";
    s["training.batch"] = "batch size";
    s["training.grad_clip"] = "global gradient-norm clip, 0 disables";
    s["training.val_interval"] = "iterations between validation points";
    s["training.val_frame_step"] = "validate every k-th frame";
    s["training.stage1_ckpt"] = "stage-1 checkpoint consumed by stage 2";
    s["training.ckpt"] = "checkpoint filename override";

    s["inference.checkpoint"] = "spatial-refiner checkpoint";
    s["inference.input"] = "dataset directory holding the clip";
    s["inference.clip"] = "clip id under <input>/clips/";
    s["inference.noisy_dir"] = "raw noisy frame directory (skips corruption)";
    s["inference.tile"] = "spatial tile size, 0 = whole frame";
    s["inference.tile_overlap"] = "tile overlap in pixels";
    s["inference.max_flow"] = "expected flow bound for the overlap check";
    s["inference.bit_depth"] = "export bit depth (8 or 16)";
    s["inference.demosaic"] = "write naive demosaic previews for rgbg";

    s["eval.test_dir"] = "frame directory under test";
    s["eval.ref_dir"] = "reference frame directory";

    s["ablate.suite"] = "stages | components | alignment_pairing | window_T";
    s["ablate.seeds"] = "seeds per arm";
    s["ablate.iters"] = "per-stage iterations per arm";
    s["ablate.batch"] = "batch size per arm";
    s["ablate.patch"] = "crop size per arm";
    s["ablate.window_sizes"] = "window_T suite sizes, e.g. [3, 5, 7, 9]";

    s["audit.trials"] = "center perturbations per window";
    s["audit.windows"] = "audited windows";
    s["audit.checkpoint"] = "optional trained stage-1 checkpoint to audit";
    return s;
}

std::map<std::string, std::vector<std::string>> build_subcommand_keys() {
    std::map<std::string, std::vector<std::string>> m;
    const std::vector<std::string> common = {"run_id", "output_root", "seed"};
    auto with = [&](std::initializer_list<const char*> prefixes) {
        std::vector<std::string> keys = common;
        for (const auto& [k, v] : config_schema())
            for (const char* p : prefixes)
                if (k.rfind(p, 0) == 0) keys.push_back(k);
        return keys;
    };
    m["gen-data"] = with({"data."});
    m["train-prior"] = with({"prior."});
    m["train-stage1"] = with({"data.", "noise.", "prior.", "model.", "training."});
    m["train-stage2"] = with({"data.", "noise.", "prior.", "model.", "training."});
    m["infer"] = with({"data.", "noise.", "prior.", "inference."});
    m["eval"] = with({"eval."});
    m["ablate"] = with({"data.", "noise.", "prior.", "model.", "training.", "ablate."});
    m["audit"] = with({"data.", "noise.", "prior.", "model.", "audit."});
    return m;
}

}  // namespace

const std::map<std::string, std::string>& config_schema() {
    static const auto s = build_schema();
    return s;
}

const std::map<std::string, std::vector<std::string>>& subcommand_keys() {
    static const auto m = build_subcommand_keys();
    return m;
}

}  // namespace f2r
