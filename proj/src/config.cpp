#include "dsteer/config.hpp"

#include "dsteer/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dsteer {

namespace {

const std::vector<std::string> kSections{"problem", "grid", "time", "solver", "mc", "output", "bench"};

std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

struct Cursor {
    std::size_t line;
    std::size_t col;
};

double to_double(const std::string& key, const std::string& v, Cursor at) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ParseError("key '" + key + "' expects a number, got '" + v + "'", at.line, at.col);
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v, Cursor at) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ParseError("key '" + key + "' expects a nonnegative integer, got '" + v + "'", at.line, at.col);
    return out;
}

bool to_bool(const std::string& key, const std::string& v, Cursor at) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError("key '" + key + "' expects true or false, got '" + v + "'", at.line, at.col);
}

void assign(RunConfig& c, const std::string& key, const std::string& v, Cursor at) {
    auto num = [&] { return to_double(key, v, at); };
    auto count = [&] { return static_cast<std::size_t>(to_uint(key, v, at)); };
    if (key == "preset") c.preset = v;
    else if (key == "x_min") c.x_min = num();
    else if (key == "x_max") c.x_max = num();
    else if (key == "dx") c.dx = num();
    else if (key == "t0") c.t0 = num();
    else if (key == "horizon") c.horizon = num();
    else if (key == "dt") c.dt = num();
    else if (key == "sigma") c.sigma = num();
    else if (key == "paths") c.paths = count();
    else if (key == "mc_dt") c.mc_dt = num();
    else if (key == "seed") c.seed = to_uint(key, v, at);
    else if (key == "jobs") c.jobs = static_cast<int>(to_uint(key, v, at));
    else if (key == "particles") c.particles = count();
    else if (key == "frame_stride") c.frame_stride = count();
    else if (key == "tol_scale") c.tol_scale = num();
    else if (key == "omega") c.omega = num();
    else if (key == "stationary") c.stationary = to_bool(key, v, at);
    else if (key == "damping") c.damping = num();
    else if (key == "max_iters") c.max_iters = count();
    else if (key == "tol") c.tol = num();
    else if (key == "out") c.out = v;
    else throw ParseError("unknown key '" + key + "'", at.line, at.col);
}

}  // namespace

std::vector<std::string> config_keys() {
    return {"preset", "x_min",     "x_max",        "dx",        "t0",    "horizon",    "dt",
            "sigma",  "paths",     "mc_dt",        "seed",      "jobs",  "particles",  "frame_stride",
            "tol_scale", "omega",  "stationary",   "damping",   "max_iters", "tol",    "out"};
}

RunConfig parse_config_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find_first_of("#;");
        const std::string line = trim(hash == std::string::npos ? std::string_view(raw) : std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const std::size_t col = raw.find_first_not_of(" \t") + 1;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", line_no, col);
            const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
            if (std::find(kSections.begin(), kSections.end(), name) == kSections.end())
                throw ParseError("unknown section '" + name + "'", line_no, col);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line_no, col);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ParseError("missing key before '='", line_no, col);
        const std::size_t value_col = raw.find('=') + 2;
        if (value.empty()) throw ParseError("key '" + key + "' has no value", line_no, value_col);
        assign(cfg, key, value, Cursor{line_no, col});
        cfg.echo.emplace_back(key, value);
    }
    validate(cfg);
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot open config file '" + path.string() + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config_string(buf.str());
}

void validate(const RunConfig& c) {
    auto positive = [](const char* field, const std::optional<double>& v) {
        if (v && !(*v > 0.0 && std::isfinite(*v))) throw ValidationError(field, "must be positive");
    };
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), c.preset) == names.end())
        throw ValidationError("preset", "unknown preset '" + c.preset + "'");
    positive("dx", c.dx);
    positive("dt", c.dt);
    positive("mc_dt", c.mc_dt);
    positive("sigma", c.sigma);
    if (c.x_min && c.x_max && !(*c.x_max > *c.x_min)) throw ValidationError("x_max", "must exceed x_min");
    if (c.t0 && c.horizon && !(*c.horizon > *c.t0)) throw ValidationError("horizon", "must exceed t0");
    if (c.paths == 0) throw ValidationError("paths", "must be at least 1");
    if (c.particles == 0) throw ValidationError("particles", "must be at least 1");
    if (c.frame_stride == 0) throw ValidationError("frame_stride", "must be at least 1");
    if (!(c.tol_scale > 0.0)) throw ValidationError("tol_scale", "must be positive");
    if (!(c.omega > 0.0 && c.omega < 2.0)) throw ValidationError("omega", "must lie in (0, 2)");
    if (!(c.damping > 0.0 && c.damping <= 1.0)) throw ValidationError("damping", "must lie in (0, 1]");
    if (c.max_iters == 0) throw ValidationError("max_iters", "must be at least 1");
    if (!(c.tol > 0.0)) throw ValidationError("tol", "must be positive");
}

Preset resolve_preset(const RunConfig& cfg) {
    validate(cfg);
    Preset p = make_preset(cfg.preset);
    const double x_min = cfg.x_min.value_or(p.grid.x_min());
    const double x_max = cfg.x_max.value_or(p.grid.x_max());
    if (!(x_max > x_min)) throw ValidationError("x_max", "must exceed x_min");
    if (cfg.x_min || cfg.x_max || cfg.dx) p.grid = Grid1D::with_spacing(x_min, x_max, cfg.dx.value_or(p.grid.dx()));
    const double t0 = cfg.t0.value_or(p.time_grid.t0());
    const double t1 = cfg.horizon.value_or(p.time_grid.t1());
    if (!(t1 > t0)) throw ValidationError("horizon", "must exceed t0");
    if (cfg.t0 || cfg.horizon || cfg.dt) p.time_grid = TimeGrid::with_step(t0, t1, cfg.dt.value_or(p.time_grid.dt()));
    if (cfg.sigma) {
        const double s = *cfg.sigma;
        p.spec.diffusion = [s](double) { return s; };
    }
    return p;
}

}  // namespace dsteer
