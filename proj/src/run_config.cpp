#include "codcast/run_config.hpp"

#include "codcast/codio.hpp"
#include "codcast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace codcast {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

int to_int(std::string_view key, std::string_view v) {
    int out = 0;
    const auto s = trim(v);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw InvalidConfig("config: '" + std::string(key) + "' expects an integer, got '" + s + "'");
    }
    return out;
}

double to_double(std::string_view key, std::string_view v) {
    try {
        return codio::parse_double(trim(v));
    } catch (const Error&) {
        throw InvalidConfig("config: '" + std::string(key) + "' expects a number, got '" +
                            trim(v) + "'");
    }
}

bool to_bool(std::string_view key, std::string_view v) {
    const auto s = trim(v);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw InvalidConfig("config: '" + std::string(key) + "' expects a boolean, got '" + s + "'");
}

std::string fmt(double v) { return codio::format_double(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Entry {
    std::function<void(RunConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Get>
Entry num(Get g) {
    Entry e;
    e.set = [g](RunConfig& c, std::string_view k, std::string_view v) {
        if constexpr (std::is_same_v<T, int>) g(c) = to_int(k, v);
        else if constexpr (std::is_same_v<T, bool>) g(c) = to_bool(k, v);
        else g(c) = to_double(k, v);
    };
    e.get = [g](const RunConfig& c) { return fmt(g(const_cast<RunConfig&>(c))); };
    return e;
}

const std::map<std::string, Entry, std::less<>>& table() {
    static const std::map<std::string, Entry, std::less<>> t = [] {
        std::map<std::string, Entry, std::less<>> m;
        m["spectral.Nx"] = num<int>([](RunConfig& c) -> int& { return c.spectral.Nx; });
        m["spectral.Ny"] = num<int>([](RunConfig& c) -> int& { return c.spectral.Ny; });
        m["spectral.nu"] = num<double>([](RunConfig& c) -> double& { return c.spectral.nu; });
        m["spectral.dt"] = num<double>([](RunConfig& c) -> double& { return c.spectral.dt; });
        m["spectral.raster"] = num<int>([](RunConfig& c) -> int& { return c.spectral_raster; });
        m["dg.Kx"] = num<int>([](RunConfig& c) -> int& { return c.dg_Kx; });
        m["dg.Ky"] = num<int>([](RunConfig& c) -> int& { return c.dg_Ky; });
        m["dg.N"] = num<int>([](RunConfig& c) -> int& { return c.dg_N; });
        m["dg.cfl"] = num<double>([](RunConfig& c) -> double& { return c.dg.cfl; });
        m["dg.inflow"] = num<double>([](RunConfig& c) -> double& { return c.dg.inflow_value; });
        m["dg.flux"] = Entry{
            [](RunConfig& c, std::string_view, std::string_view v) {
                c.dg.flux = dg::flux_variant_from_string(trim(v));
            },
            [](const RunConfig& c) { return dg::to_string(c.dg.flux); }};
        m["flow.levels"] = num<int>([](RunConfig& c) -> int& { return c.flow.levels; });
        m["flow.alpha"] = num<double>([](RunConfig& c) -> double& { return c.flow.alpha; });
        m["flow.charbonnier_eps"] = num<double>([](RunConfig& c) -> double& { return c.flow.charbonnier_eps; });
        m["flow.warp_iters"] = num<int>([](RunConfig& c) -> int& { return c.flow.warp_iters; });
        m["flow.irls_iters"] = num<int>([](RunConfig& c) -> int& { return c.flow.irls_iters; });
        m["flow.solver_iters"] = num<int>([](RunConfig& c) -> int& { return c.flow.solver_iters; });
        m["flow.solver_tol"] = num<double>([](RunConfig& c) -> double& { return c.flow.solver_tol; });
        m["flow.sor_omega"] = num<double>([](RunConfig& c) -> double& { return c.flow.sor_omega; });
        m["flow.median_radius"] = num<int>([](RunConfig& c) -> int& { return c.flow.median_radius; });
        m["preprocess.percentile"] = num<double>([](RunConfig& c) -> double& { return c.preprocess.percentile; });
        m["fit.max_iterations"] = num<int>([](RunConfig& c) -> int& { return c.fit_max_iterations; });
        m["fit.grad_tol"] = num<double>([](RunConfig& c) -> double& { return c.fit_grad_tol; });
        m["fit.precondition"] = num<bool>([](RunConfig& c) -> bool& { return c.fit_precondition; });
        m["io.input"] = Entry{
            [](RunConfig& c, std::string_view, std::string_view v) { c.io_input = trim(v); },
            [](const RunConfig& c) { return c.io_input; }};
        m["io.truth"] = Entry{
            [](RunConfig& c, std::string_view, std::string_view v) { c.io_truth = trim(v); },
            [](const RunConfig& c) { return c.io_truth; }};
        m["io.output"] = Entry{
            [](RunConfig& c, std::string_view, std::string_view v) { c.io_output = trim(v); },
            [](const RunConfig& c) { return c.io_output; }};
        m["forecast.horizon"] = num<int>([](RunConfig& c) -> int& { return c.forecast_horizon; });
        m["forecast.cadence"] = num<int>([](RunConfig& c) -> int& { return c.forecast_cadence; });
        m["synth.scenario"] = Entry{
            [](RunConfig& c, std::string_view, std::string_view v) {
                c.synth.scenario = synth::scenario_from_string(trim(v));
            },
            [](const RunConfig& c) { return synth::to_string(c.synth.scenario); }};
        m["synth.frames"] = num<int>([](RunConfig& c) -> int& { return c.synth.frames; });
        m["synth.nx"] = num<int>([](RunConfig& c) -> int& { return c.synth.frame.nx; });
        m["synth.ny"] = num<int>([](RunConfig& c) -> int& { return c.synth.frame.ny; });
        m["synth.speed"] = num<double>([](RunConfig& c) -> double& { return c.synth.speed; });
        m["synth.direction"] = num<double>([](RunConfig& c) -> double& { return c.synth.direction_deg; });
        m["synth.omega"] = num<double>([](RunConfig& c) -> double& { return c.synth.omega; });
        m["synth.shear"] = num<double>([](RunConfig& c) -> double& { return c.synth.shear; });
        m["synth.tg_amplitude"] = num<double>([](RunConfig& c) -> double& { return c.synth.tg_amplitude; });
        m["synth.tg_n"] = num<int>([](RunConfig& c) -> int& { return c.synth.tg_n; });
        m["synth.tg_m"] = num<int>([](RunConfig& c) -> int& { return c.synth.tg_m; });
        m["synth.nu"] = num<double>([](RunConfig& c) -> double& { return c.synth.nu; });
        m["synth.blobs"] = num<int>([](RunConfig& c) -> int& { return c.synth.blobs; });
        m["synth.blob_scale"] = num<double>([](RunConfig& c) -> double& { return c.synth.blob_scale_km; });
        m["synth.peak"] = num<double>([](RunConfig& c) -> double& { return c.synth.peak_cod; });
        m["synth.seed"] = Entry{
            [](RunConfig& c, std::string_view k, std::string_view v) {
                const int s = to_int(k, v);
                if (s < 0) throw InvalidConfig("config: synth.seed must be non-negative");
                c.synth.seed = static_cast<std::uint64_t>(s);
            },
            [](const RunConfig& c) { return std::to_string(c.synth.seed); }};
        return m;
    }();
    return t;
}

} // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
    const auto it = table().find(trim(key));
    if (it == table().end()) throw InvalidConfig("config: unknown key '" + std::string(key) + "'");
    it->second.set(*this, it->first, value);
    if (it->first == "synth.nx" || it->first == "synth.ny") {
        synth.frame = geo::GeoFrame::from_bounds(-140.0, -124.0, 39.0, 51.0, synth.frame.nx,
                                                 synth.frame.ny);
    }
}

void RunConfig::apply_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto s = trim(line);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config line " + std::to_string(lineno) + ": expected key = value");
        }
        set(s.substr(0, eq), std::string_view(s).substr(eq + 1));
    }
}

void RunConfig::load(const std::filesystem::path& path) { apply_text(codio::read_file_bytes(path)); }

void RunConfig::validate() const {
    spectral.validate();
    if (spectral_raster <= std::max(spectral.Nx, spectral.Ny)) {
        throw InvalidConfig("config: spectral.raster must exceed Nx and Ny");
    }
    if (dg_Kx < 1 || dg_Ky < 1) throw InvalidConfig("config: dg.Kx and dg.Ky must be positive");
    if (dg_N < 1) throw InvalidOrder("config: dg.N must be at least 1");
    dg.validate();
    flow.validate();
    preprocess.validate();
    if (fit_max_iterations < 0) throw InvalidConfig("config: fit.max_iterations must be >= 0");
    if (forecast_cadence <= 0) throw InvalidConfig("config: forecast.cadence must be positive");
    if (forecast_horizon < 0 || forecast_horizon % forecast_cadence != 0) {
        throw InvalidConfig("config: forecast.horizon must be a non-negative multiple of the cadence");
    }
    synth.validate();
}

std::string RunConfig::dump() const {
    std::string out;
    for (const auto& [k, e] : table()) out += k + " = " + e.get(*this) + "\n";
    return out;
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& kv : table()) out.push_back(kv.first);
    return out;
}

namespace {

bool wildcard(std::string_view pat, std::string_view s) {
    std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
    while (i < s.size()) {
        if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
            ++p;
            ++i;
        } else if (p < pat.size() && pat[p] == '*') {
            star = p++;
            mark = i;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            i = ++mark;
        } else {
            return false;
        }
    }
    while (p < pat.size() && pat[p] == '*') ++p;
    return p == pat.size();
}

} // namespace

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
    namespace fs = std::filesystem;
    const fs::path p(pattern);
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    const std::string name = p.filename().string();
    std::vector<fs::path> out;
    if (name.find_first_of("*?") == std::string::npos) {
        if (fs::exists(p)) out.push_back(p);
        return out;
    }
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && wildcard(name, e.path().filename().string())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace codcast
