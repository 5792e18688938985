#include "codcast/pipeline.hpp"

#include "codcast/codio.hpp"
#include "codcast/dgadvect.hpp"
#include "codcast/errors.hpp"
#include "codcast/optflow.hpp"
#include "codcast/preprocess.hpp"
#include "codcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace codcast::pipeline {

namespace fs = std::filesystem;

double rmape(const ScalarGrid& truth, const ScalarGrid& pred,
             std::span<const std::size_t> excluded) {
    if (!truth.same_shape(pred) || truth.values.size() != pred.values.size()) {
        throw ShapeMismatch("rmape: truth and prediction differ in shape");
    }
    std::vector<char> skip(truth.values.size(), 0);
    for (auto k : excluded) {
        if (k >= skip.size()) throw ShapeMismatch("rmape: mask index out of range");
        skip[k] = 1;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < truth.values.size(); ++k) {
        const double t = truth.values[k];
        if (skip[k] || !std::isfinite(t)) continue;
        const double p = std::isfinite(pred.values[k]) ? pred.values[k] : 0.0;
        num += std::abs(t - p);
        den += std::abs(t);
    }
    if (!(den > 0.0)) throw ZeroDenominator("rmape: truth vanishes on the evaluated pixels");
    return 100.0 * num / den;
}

std::vector<FlowField> estimate_flows(const std::vector<ScalarGrid>& frames,
                                      const RunConfig& cfg) {
    if (frames.size() < 2) throw InvalidConfig("flow estimation needs at least two frames");
    for (std::size_t k = 1; k < frames.size(); ++k) {
        if (!frames[k].same_shape(frames[0]) || !(frames[k].frame == frames[0].frame)) {
            throw ShapeMismatch("frames do not share the same raster");
        }
        if (frames[k].timestamp <= frames[k - 1].timestamp) {
            throw InvalidConfig("frame timestamps must be strictly increasing");
        }
    }
    std::vector<FlowField> out;
    for (std::size_t k = 1; k < frames.size(); ++k) {
        const auto pair = preprocess::prepare_pair(frames[k - 1], frames[k], cfg.preprocess);
        auto est = optflow::estimate_flow(pair.prev, pair.next, cfg.flow);
        FlowField f = std::move(est.flow);
        f.units = FlowUnits::pixels_per_frame;
        f.t_prev = frames[k - 1].timestamp;
        f.t_next = frames[k].timestamp;
        f.frame = frames[k].frame;
        out.push_back(std::move(f));
    }
    return out;
}

SpectralSetup spectral_setup(const geo::GeoFrame& frame, const RunConfig& cfg,
                             std::int64_t epoch) {
    const auto box = geo::planar_bounds(frame);
    SpectralSetup s;
    s.cfg = cfg.spectral;
    s.cfg.Lx = box.width();
    s.cfg.Ly = box.height();
    s.cfg.validate();
    s.x0 = box.x_min;
    s.y0 = box.y_min;
    s.rnx = s.rny = cfg.spectral_raster;
    s.epoch = epoch;
    return s;
}

namespace {

double bilinear_finite(const std::vector<double>& f, int nx, int ny, double fi, double fj) {
    fi = std::clamp(fi, 0.0, static_cast<double>(nx - 1));
    fj = std::clamp(fj, 0.0, static_cast<double>(ny - 1));
    const int i0 = std::min(static_cast<int>(fi), std::max(nx - 2, 0));
    const int j0 = std::min(static_cast<int>(fj), std::max(ny - 2, 0));
    const int i1 = std::min(i0 + 1, nx - 1), j1 = std::min(j0 + 1, ny - 1);
    const double a = fi - i0, b = fj - j0;
    auto val = [&](int i, int j) {
        const double x = f[static_cast<std::size_t>(j) * nx + i];
        return std::isfinite(x) ? x : 0.0;
    };
    return (1 - a) * (1 - b) * val(i0, j0) + a * (1 - b) * val(i1, j0) +
           (1 - a) * b * val(i0, j1) + a * b * val(i1, j1);
}

FlowField to_kmh(const FlowField& f) {
    if (f.units == FlowUnits::km_per_hour) return f;
    geo::GeoFrame frame = f.frame;
    frame.nx = f.nx;
    frame.ny = f.ny;
    return geo::flow_pixels_to_kmh(f, frame, static_cast<double>(f.t_next - f.t_prev));
}

double hours_since(std::int64_t t, std::int64_t epoch) {
    return static_cast<double>(t - epoch) / 60.0;
}

} // namespace

assimilate::FlowObservations to_observations(const std::vector<FlowField>& flows,
                                             const SpectralSetup& setup) {
    assimilate::FlowObservations obs;
    obs.rnx = setup.rnx;
    obs.rny = setup.rny;
    for (const auto& raw : flows) {
        const FlowField f = to_kmh(raw);
        geo::GeoFrame frame = f.frame;
        frame.nx = f.nx;
        frame.ny = f.ny;
        const auto ref = geo::lonlat_to_xy(frame, frame.lon_min, frame.lat_min);
        std::vector<double> fi(static_cast<std::size_t>(setup.rnx)), fj(static_cast<std::size_t>(setup.rny));
        for (int i = 0; i < setup.rnx; ++i) {
            fi[static_cast<std::size_t>(i)] =
                geo::xy_to_pixel(frame, setup.x0 + i * setup.cfg.Lx / setup.rnx, ref.y).first;
        }
        for (int j = 0; j < setup.rny; ++j) {
            fj[static_cast<std::size_t>(j)] =
                geo::xy_to_pixel(frame, ref.x, setup.y0 + j * setup.cfg.Ly / setup.rny).second;
        }
        assimilate::FlowSnapshot s;
        s.t = 0.5 * (hours_since(f.t_prev, setup.epoch) + hours_since(f.t_next, setup.epoch));
        s.u.resize(static_cast<std::size_t>(setup.rnx) * setup.rny);
        s.v.resize(s.u.size());
        for (int j = 0; j < setup.rny; ++j) {
            for (int i = 0; i < setup.rnx; ++i) {
                const auto k = static_cast<std::size_t>(j) * setup.rnx + i;
                s.u[k] = bilinear_finite(f.u, f.nx, f.ny, fi[static_cast<std::size_t>(i)], fj[static_cast<std::size_t>(j)]);
                s.v[k] = bilinear_finite(f.v, f.nx, f.ny, fi[static_cast<std::size_t>(i)], fj[static_cast<std::size_t>(j)]);
            }
        }
        obs.snapshots.push_back(std::move(s));
    }
    return obs;
}

FitOutput fit_flows(const std::vector<FlowField>& flows, const RunConfig& cfg) {
    if (flows.empty()) throw UsageError("fit needs at least one flow field");
    FitOutput out;
    out.model.setup = spectral_setup(flows.front().frame, cfg, flows.front().t_prev);
    const auto obs = to_observations(flows, out.model.setup);
    const auto init = assimilate::initial_guess(obs, out.model.setup.cfg);
    assimilate::FitOptions opts;
    opts.lbfgs.max_iterations = cfg.fit_max_iterations;
    opts.lbfgs.grad_tol = cfg.fit_grad_tol;
    opts.precondition = cfg.fit_precondition;
    out.report = assimilate::fit_lbfgs(obs, out.model.setup.cfg, init, opts);
    out.model.fit = out.report.params;
    return out;
}

std::string encode_params(const ModelParams& m) {
    using codio::format_double;
    const auto& c = m.setup.cfg;
    std::string s = "SPEC 1\n";
    s += "nx " + std::to_string(c.Nx) + "\n";
    s += "ny " + std::to_string(c.Ny) + "\n";
    s += "lx " + format_double(c.Lx) + "\n";
    s += "ly " + format_double(c.Ly) + "\n";
    s += "nu " + format_double(c.nu) + "\n";
    s += "dt " + format_double(c.dt) + "\n";
    s += "origin " + format_double(m.setup.x0) + " " + format_double(m.setup.y0) + "\n";
    s += "raster " + std::to_string(m.setup.rnx) + " " + std::to_string(m.setup.rny) + "\n";
    s += "epoch " + std::to_string(m.setup.epoch) + "\n";
    s += "time " + format_double(m.fit.q_hat.time) + "\n";
    s += "mean " + format_double(m.fit.u_bar) + " " + format_double(m.fit.v_bar) + "\n";
    s += "end\n";
    if (m.fit.q_hat.coeffs.size() != c.modes()) throw DimensionError("params: coefficient count");
    for (Eigen::Index k = 0; k < m.fit.q_hat.coeffs.size(); ++k) {
        codio::append_f64_le(s, m.fit.q_hat.coeffs[k].real());
        codio::append_f64_le(s, m.fit.q_hat.coeffs[k].imag());
    }
    return s;
}

ModelParams decode_params(std::string_view bytes) {
    ModelParams m;
    std::size_t pos = 0;
    auto next_line = [&]() {
        const auto e = bytes.find('\n', pos);
        if (e == std::string_view::npos) throw FormatError("params: truncated header");
        const auto line = std::string(bytes.substr(pos, e - pos));
        pos = e + 1;
        return line;
    };
    if (next_line() != "SPEC 1") throw FormatError("params: missing 'SPEC 1' magic");
    auto& c = m.setup.cfg;
    for (;;) {
        const auto line = next_line();
        if (line == "end") break;
        std::istringstream in(line);
        std::string key, a, b;
        in >> key >> a;
        in >> b;
        try {
            if (key == "nx") c.Nx = std::stoi(a);
            else if (key == "ny") c.Ny = std::stoi(a);
            else if (key == "lx") c.Lx = codio::parse_double(a);
            else if (key == "ly") c.Ly = codio::parse_double(a);
            else if (key == "nu") c.nu = codio::parse_double(a);
            else if (key == "dt") c.dt = codio::parse_double(a);
            else if (key == "origin") { m.setup.x0 = codio::parse_double(a); m.setup.y0 = codio::parse_double(b); }
            else if (key == "raster") { m.setup.rnx = std::stoi(a); m.setup.rny = std::stoi(b); }
            else if (key == "epoch") m.setup.epoch = std::stoll(a);
            else if (key == "time") m.fit.q_hat.time = codio::parse_double(a);
            else if (key == "mean") { m.fit.u_bar = codio::parse_double(a); m.fit.v_bar = codio::parse_double(b); }
            else throw FormatError("params: unknown header key '" + key + "'");
        } catch (const std::logic_error&) {
            throw FormatError("params: malformed header line '" + line + "'");
        }
    }
    c.validate();
    const auto payload = bytes.size() - pos;
    const auto want = static_cast<std::size_t>(c.modes()) * 16;
    if (payload % 8 != 0) throw IOError("params: payload ends inside a value");
    if (payload != want) throw DimensionError("params: payload does not match nx/ny");
    m.fit.q_hat.coeffs.resize(c.modes());
    for (int k = 0; k < c.modes(); ++k) {
        const char* p = bytes.data() + pos + static_cast<std::size_t>(k) * 16;
        m.fit.q_hat.coeffs[k] = {codio::load_f64_le(p), codio::load_f64_le(p + 8)};
    }
    return m;
}

void write_params(const ModelParams& m, const fs::path& path) {
    codio::write_file_bytes(path, encode_params(m));
}

ModelParams read_params(const fs::path& path) { return decode_params(codio::read_file_bytes(path)); }

std::vector<ScalarGrid> advect_ticks(const ScalarGrid& latest, const dg::VelocitySampler& sampler,
                                     double t_latest_hours, const RunConfig& cfg) {
    const int ticks = cfg.forecast_horizon / cfg.forecast_cadence;
    if (ticks == 0) return {latest};
    geo::GeoFrame frame = latest.frame;
    frame.nx = latest.nx;
    frame.ny = latest.ny;
    const dg::DGMesh mesh(dg::domain_of(frame), cfg.dg_Kx, cfg.dg_Ky, cfg.dg_N, dg::Wiring::boundary);
    dg::DGField field = dg::grid_to_dg(latest, mesh, 0.0);
    std::vector<ScalarGrid> out;
    double t = t_latest_hours;
    for (int k = 1; k <= ticks; ++k) {
        const double t1 = t_latest_hours + k * cfg.forecast_cadence / 60.0;
        field = dg::advect(field, sampler, mesh, t, t1, cfg.dg);
        t = t1;
        ScalarGrid g = dg::dg_to_grid(field, mesh, frame);
        g.timestamp = latest.timestamp + static_cast<std::int64_t>(k) * cfg.forecast_cadence;
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<ScalarGrid> forecast_nse(const ScalarGrid& latest, const ModelParams& model,
                                     const RunConfig& cfg) {
    const auto& setup = model.setup;
    const double t_latest = hours_since(latest.timestamp, setup.epoch);
    const double t_end = t_latest + cfg.forecast_horizon / 60.0;
    const double t0 = model.fit.q_hat.time;
    const int nsteps = std::max(0, static_cast<int>(std::ceil((t_end - t0) / setup.cfg.dt - 1e-9)));
    const spectral::MeanFlow mean{model.fit.u_bar, model.fit.v_bar};
    const auto traj = spectral::integrate_steps(model.fit.q_hat, mean, setup.cfg, nsteps);
    std::vector<spectral::SpectralState> states;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        states.push_back({traj[k], t0 + static_cast<double>(k) * setup.cfg.dt});
    }
    const dg::TrajectorySampler sampler(std::move(states), mean, setup.cfg, setup.x0, setup.y0);
    return advect_ticks(latest, sampler, t_latest, cfg);
}

std::vector<ScalarGrid> forecast_persistence(const ScalarGrid& latest, const RunConfig& cfg) {
    const int ticks = cfg.forecast_horizon / cfg.forecast_cadence;
    if (ticks == 0) return {latest};
    std::vector<ScalarGrid> out;
    for (int k = 1; k <= ticks; ++k) {
        ScalarGrid g = latest;
        g.timestamp = latest.timestamp + static_cast<std::int64_t>(k) * cfg.forecast_cadence;
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<ScalarGrid> forecast_frozen_flow(const ScalarGrid& latest, const FlowField& flow,
                                             const RunConfig& cfg) {
    FlowField kmh = to_kmh(flow);
    const dg::FrozenFlowSampler sampler(std::move(kmh));
    return advect_ticks(latest, sampler, 0.0, cfg);
}

std::string format_date(std::int64_t minutes) {
    std::int64_t days = minutes >= 0 ? minutes / 1440 : -((-minutes + 1439) / 1440);
    // Civil date from days since 1970-01-01.
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const std::int64_t doe = days - era * 146097;
    const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = yoe + era * 400;
    const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::int64_t mp = (5 * doy + 2) / 153;
    const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
    const std::int64_t mo = mp < 10 ? mp + 3 : mp - 9;
    if (mo <= 2) ++y;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lld", static_cast<long long>(y),
                  static_cast<long long>(mo), static_cast<long long>(d));
    return buf;
}

std::string format_clock(std::int64_t minutes) {
    const std::int64_t m = ((minutes % 1440) + 1440) % 1440;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(m / 60),
                  static_cast<long long>(m % 60));
    return buf;
}

namespace {

std::string display_name(const std::string& method) {
    if (method == "nse") return "NSE";
    if (method == "persistence") return "Persistence";
    if (method == "optical_flow") return "Optical flow";
    return method;
}

} // namespace

std::string format_table(std::string_view date, const std::vector<std::string>& rows,
                         const std::vector<std::string>& methods,
                         const std::vector<std::vector<double>>& values) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header{"Date: " + std::string(date)};
    for (const auto& m : methods) header.push_back(display_name(m));
    cells.push_back(header);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<std::string> line{rows[r]};
        for (std::size_t m = 0; m < methods.size(); ++m) {
            line.push_back(std::to_string(std::llround(values.at(m).at(r))));
        }
        cells.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    }
    std::string out;
    for (const auto& line : cells) {
        std::string s;
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c > 0) s += " | ";
            s += line[c];
            if (c + 1 < line.size()) s.append(width[c] - line[c].size(), ' ');
        }
        out += s + "\n";
    }
    return out;
}

std::string ForecastReport::table() const {
    std::vector<std::string> rows;
    for (auto t : timestamps) rows.push_back(format_clock(t));
    return format_table(timestamps.empty() ? format_date(issue_time) : format_date(timestamps.front()),
                        rows, methods, rmape);
}

std::string ForecastReport::records() const {
    std::string out;
    for (std::size_t k = 0; k < timestamps.size(); ++k) {
        for (std::size_t m = 0; m < methods.size(); ++m) {
            out += std::to_string(timestamps[k] - issue_time) + " " + methods[m] + " " +
                   codio::format_double(rmape[m][k]) + "\n";
        }
    }
    return out;
}

ForecastReport evaluate(const std::vector<ScalarGrid>& truth,
                        const std::vector<MethodSeries>& methods, std::int64_t issue_time,
                        double percentile) {
    ForecastReport rep;
    rep.issue_time = issue_time;
    for (const auto& m : methods) {
        if (m.grids.size() != truth.size()) {
            throw AlignmentError("evaluate: method '" + m.name + "' has " +
                                 std::to_string(m.grids.size()) + " grids for " +
                                 std::to_string(truth.size()) + " truth frames");
        }
        for (std::size_t k = 0; k < truth.size(); ++k) {
            if (m.grids[k].timestamp != truth[k].timestamp) {
                throw AlignmentError("evaluate: method '" + m.name + "' tick " + std::to_string(k) +
                                     " is not aligned with the truth timestamp");
            }
        }
        rep.methods.push_back(m.name);
        rep.rmape.emplace_back();
    }
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const auto mask = preprocess::outlier_mask(truth[k], percentile);
        rep.timestamps.push_back(truth[k].timestamp);
        rep.mask_sizes.push_back(mask.size());
        for (std::size_t m = 0; m < methods.size(); ++m) {
            rep.rmape[m].push_back(rmape(truth[k], methods[m].grids[k], mask));
        }
    }
    return rep;
}

std::vector<ScalarGrid> read_frames(const std::string& pattern) {
    std::vector<ScalarGrid> out;
    for (const auto& p : expand_glob(pattern)) out.push_back(codio::read_grid(p));
    std::stable_sort(out.begin(), out.end(),
                     [](const ScalarGrid& a, const ScalarGrid& b) { return a.timestamp < b.timestamp; });
    return out;
}

namespace {

std::string numbered(const std::string& stem, std::size_t k, const std::string& ext = ".codg") {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%02zu", k);
    return stem + buf + ext;
}

void write_text(const fs::path& path, const std::string& text) { codio::write_file_bytes(path, text); }

} // namespace

PipelineResult run_pipeline(const RunConfig& cfg_in, const fs::path& out) {
    RunConfig cfg = cfg_in;
    cfg.synth.horizon_minutes = cfg.forecast_horizon;
    cfg.synth.cadence_minutes = cfg.forecast_cadence;
    cfg.validate();
    const bool write = !out.empty();
    PipelineResult res;

    if (cfg.io_input.empty()) {
        auto data = synth::generate(cfg.synth);
        res.frames = std::move(data.observed);
        res.truth = std::move(data.truth);
        if (write) {
            for (std::size_t k = 0; k < data.true_flows.size(); ++k) {
                codio::write_flow(data.true_flows[k], out / "truth" / numbered("velocity", k));
            }
        }
    } else {
        res.frames = read_frames(cfg.io_input);
        if (!cfg.io_truth.empty()) res.truth = read_frames(cfg.io_truth);
    }
    if (res.frames.size() < 2) throw InvalidConfig("pipeline needs at least two input frames");
    if (write) {
        for (std::size_t k = 0; k < res.frames.size(); ++k) {
            codio::write_grid(res.frames[k], out / "frames" / numbered("frame", k));
        }
        for (std::size_t k = 0; k < res.truth.size(); ++k) {
            codio::write_grid(res.truth[k], out / "truth" / numbered("truth", k));
        }
    }

    res.flows = estimate_flows(res.frames, cfg);
    res.fit = fit_flows(res.flows, cfg);
    const ScalarGrid& latest = res.frames.back();
    res.forecasts.push_back({"nse", forecast_nse(latest, res.fit.model, cfg)});
    res.forecasts.push_back({"persistence", forecast_persistence(latest, cfg)});
    res.forecasts.push_back({"optical_flow", forecast_frozen_flow(latest, res.flows.back(), cfg)});

    if (write) {
        for (std::size_t k = 0; k < res.flows.size(); ++k) {
            codio::write_flow(res.flows[k], out / "flows" / numbered("flow", k));
        }
        write_params(res.fit.model, out / "params.spec");
        std::ostringstream log;
        res.fit.report.write_log(log);
        write_text(out / "fit.log", log.str());
        for (const auto& m : res.forecasts) {
            for (std::size_t k = 0; k < m.grids.size(); ++k) {
                codio::write_grid(m.grids[k], out / "forecast" / numbered(m.name, k));
            }
        }
        write_text(out / "config.txt", cfg.dump());
    }

    if (!res.truth.empty() && cfg.forecast_horizon > 0) {
        res.report = evaluate(res.truth, res.forecasts, latest.timestamp, cfg.preprocess.percentile);
        res.evaluated = true;
        if (write) {
            write_text(out / "report.txt", res.report.table());
            write_text(out / "report.records", res.report.records());
        }
    }
    return res;
}

} // namespace codcast::pipeline
