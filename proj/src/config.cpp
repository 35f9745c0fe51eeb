#include "dyenet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dyenet/errors.hpp"

namespace dyenet {

const std::vector<Config::Entry>& Config::registry() {
    static const std::vector<Entry> table = {
        {"feat.width", "32", "feature channels d_feat of the backbone output"},
        {"feat.depth", "4", "conv blocks in the backbone; first 3 stride 2, rest dilated stride 1"},
        {"proposals.mode", "frame-diff", "proposal source: frame-diff | gt-jitter | exhaustive-grid"},
        {"proposals.diff_threshold", "0.05", "frame-diff: per-pixel [0,1] change threshold"},
        {"proposals.jitter_scale", "0.1", "gt-jitter: relative scale/offset noise amplitude"},
        {"proposals.grid_sizes", "16,32", "exhaustive-grid: comma-separated square anchor sizes"},
        {"proposals.grid_stride", "16", "exhaustive-grid: anchor stride in pixels"},
        {"reid.rho", "0.7", "cosine threshold rho_reid for accepting starting points"},
        {"reid.embed_dim", "256", "embedding dimensionality d_embed"},
        {"reid.roi_m", "14", "RoIAlign output resolution m"},
        {"reid.tau", "0.1", "OIM loss temperature"},
        {"reid.mu", "0.5", "OIM lookup-table momentum"},
        {"reid.width", "32", "channels of the reid head conv layers"},
        {"remp.theta_abort", "0.1", "abort when warped mask area < theta * starting mask area"},
        {"remp.box_margin", "0.2", "box dilation per side as a fraction of box diagonal"},
        {"remp.hidden_dim", "32", "recurrent hidden state channels d"},
        {"remp.attention", "on", "region attention gate (off = ablation)"},
        {"link.theta_skip", "0.8", "skip starting points with mask IoU >= theta against tracklets"},
        {"link.theta_agree", "0.5", "shared-frame IoU below this is a linking contradiction"},
        {"infer.rho_expand", "-1", "template-expansion threshold; -1 means use reid.rho"},
        {"infer.max_iters", "4", "hard cap on Re-ID/Re-MP iterations"},
        {"infer.reid", "on", "off = propagation-only ablation (first-frame starts only)"},
        {"infer.seed", "1", "RNG seed for stochastic proposal modes at inference"},
        {"flow.mode", "ground-truth", "flow source: ground-truth | block-match | zero"},
        {"metrics.boundary_tol", "1", "boundary F-measure tolerance in pixels (Chebyshev)"},
        {"train.lambda", "1.0", "loss weight: L = L_reid + lambda*(L_mask + L_remp)"},
        {"train.lr", "0.001", "initial learning rate"},
        {"train.lr_drop_factor", "10", "divide lr by this at every drop"},
        {"train.lr_drop_every", "0", "steps between lr drops; 0 = iterations/3"},
        {"train.momentum", "0.9", "SGD momentum"},
        {"train.weight_decay", "0.0005", "SGD weight decay"},
        {"train.iterations", "2000", "total SGD steps"},
        {"train.batch_videos", "2", "videos sampled per batch"},
        {"train.frames_per_video", "2", "frames sampled per video"},
        {"train.unroll", "1", "teacher-forced propagation steps per L_remp sample (1..3)"},
        {"train.seed", "1", "RNG seed for init and batch sampling"},
        {"train.use_reid", "on", "include L_reid (off freezes reid-only parameters)"},
        {"train.use_mask", "on", "include L_mask"},
        {"train.use_remp", "on", "include L_remp (off freezes remp-only parameters)"},
    };
    return table;
}

namespace {

const std::string* find_default(const std::string& key) {
    for (const auto& e : Config::registry())
        if (e.key == key) return &e.def;
    return nullptr;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        cfg.parse_line(line, path + ":" + std::to_string(lineno));
    }
    return cfg;
}

void Config::parse_line(const std::string& line, const std::string& where) {
    std::string s = line;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) return;
    size_t eq = s.find('=');
    require(eq != std::string::npos, "config " + where + ": expected key=value, got '" + s + "'");
    set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
    require(find_default(key) != nullptr, "config: unknown key '" + key + "'");
    values_[key] = value;
}

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const std::string* def = find_default(key);
    require(def != nullptr, "config: unknown key '" + key + "'");
    return *def;
}

double Config::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    require(end && *end == '\0' && end != s.c_str(),
            "config: key '" + key + "' is not a number: '" + s + "'");
    return v;
}

int Config::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    require(end && *end == '\0' && end != s.c_str(),
            "config: key '" + key + "' is not an integer: '" + s + "'");
    return static_cast<int>(v);
}

bool Config::get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "on" || s == "true" || s == "1") return true;
    if (s == "off" || s == "false" || s == "0") return false;
    throw ContractViolation("config: key '" + key + "' is not a boolean: '" + s + "'");
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    const std::string s = get_string(key);
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        char* end = nullptr;
        long v = std::strtol(item.c_str(), &end, 10);
        require(end && *end == '\0', "config: key '" + key + "' has a non-integer item '" + item + "'");
        out.push_back(static_cast<int>(v));
    }
    require(!out.empty(), "config: key '" + key + "' is an empty list");
    return out;
}

}  // namespace dyenet
