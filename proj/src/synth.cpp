#include "codcast/synth.hpp"

#include "codcast/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace codcast::synth {

namespace {

constexpr double kPi = std::numbers::pi;

geo::PlanarBox box_of(const ScenarioParams& p) { return geo::planar_bounds(p.frame); }

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct TaylorGreen {
    double kx, ky, a, decay;
};

TaylorGreen taylor_green(const ScenarioParams& p) {
    const auto box = box_of(p);
    const double kx = 2.0 * kPi * p.tg_n / box.width();
    const double ky = 2.0 * kPi * p.tg_m / box.height();
    return {kx, ky, p.tg_amplitude / std::max(kx, ky), p.nu * (kx * kx + ky * ky)};
}

geo::Velocity drift(const ScenarioParams& p) {
    const double a = p.direction_deg * kPi / 180.0;
    return {p.speed * std::cos(a), p.speed * std::sin(a)};
}

} // namespace

Scenario scenario_from_string(const std::string& name) {
    if (name == "translate") return Scenario::translate;
    if (name == "rotate") return Scenario::rotate;
    if (name == "taylor_green_transport") return Scenario::taylor_green_transport;
    if (name == "shear") return Scenario::shear;
    throw UnknownScenario("unknown scenario '" + name + "'");
}

std::string to_string(Scenario s) {
    switch (s) {
    case Scenario::translate: return "translate";
    case Scenario::rotate: return "rotate";
    case Scenario::taylor_green_transport: return "taylor_green_transport";
    case Scenario::shear: return "shear";
    }
    return "unknown";
}

geo::GeoFrame desk_frame() { return geo::GeoFrame::from_bounds(-140.0, -124.0, 39.0, 51.0, 128, 128); }

void ScenarioParams::validate() const {
    frame.validate();
    if (frames < 1) throw InvalidConfig("synth: at least one frame is required");
    if (cadence_minutes <= 0) throw InvalidConfig("synth: cadence must be positive");
    if (horizon_minutes < 0 || horizon_minutes % cadence_minutes != 0) {
        throw InvalidConfig("synth: horizon must be a non-negative multiple of the cadence");
    }
    if (blobs < 0 || !(blob_scale_km > 0.0)) throw InvalidConfig("synth: invalid blob settings");
    if (tg_n < 0 || tg_m < 0 || (tg_n == 0 && tg_m == 0)) {
        throw InvalidConfig("synth: Taylor-Green modes must not both vanish");
    }
    if (nu < 0.0) throw InvalidConfig("synth: nu must be non-negative");
}

std::vector<Blob> make_blobs(const ScenarioParams& p) {
    const auto box = box_of(p);
    std::mt19937_64 rng(p.seed);
    std::vector<Blob> out;
    for (int k = 0; k < p.blobs; ++k) {
        Blob b{};
        b.x = box.x_min + box.width() * (0.15 + 0.7 * unit_uniform(rng));
        b.y = box.y_min + box.height() * (0.15 + 0.7 * unit_uniform(rng));
        b.sigma = p.blob_scale_km * (0.5 + unit_uniform(rng));
        b.amplitude = p.peak_cod * (0.5 + 0.5 * unit_uniform(rng));
        out.push_back(b);
    }
    return out;
}

geo::Velocity velocity(const ScenarioParams& p, double x, double y, double t) {
    const auto box = box_of(p);
    const double xc = 0.5 * (box.x_min + box.x_max), yc = 0.5 * (box.y_min + box.y_max);
    switch (p.scenario) {
    case Scenario::translate: return drift(p);
    case Scenario::rotate: return {-p.omega * (y - yc), p.omega * (x - xc)};
    case Scenario::shear: return {p.shear * (y - yc), 0.0};
    case Scenario::taylor_green_transport: {
        const auto tg = taylor_green(p);
        const auto d = drift(p);
        const double xr = x - box.x_min - d.u * t, yr = y - box.y_min - d.v * t;
        const double e = tg.a * std::exp(-tg.decay * t);
        return {d.u + e * tg.ky * std::sin(tg.kx * xr) * std::cos(tg.ky * yr),
                d.v - e * tg.kx * std::cos(tg.kx * xr) * std::sin(tg.ky * yr)};
    }
    }
    return {0.0, 0.0};
}

geo::PlanarPoint trace_back(const ScenarioParams& p, double x, double y, double t) {
    const auto box = box_of(p);
    const double xc = 0.5 * (box.x_min + box.x_max), yc = 0.5 * (box.y_min + box.y_max);
    switch (p.scenario) {
    case Scenario::translate: {
        const auto d = drift(p);
        return {x - d.u * t, y - d.v * t};
    }
    case Scenario::rotate: {
        const double c = std::cos(p.omega * t), s = std::sin(p.omega * t);
        const double dx = x - xc, dy = y - yc;
        return {xc + c * dx + s * dy, yc - s * dx + c * dy};
    }
    case Scenario::shear: return {x - p.shear * (y - yc) * t, y};
    case Scenario::taylor_green_transport: {
        const int steps = std::max(1, static_cast<int>(std::ceil(t * 60.0)));
        const double h = -t / steps;
        double px = x, py = y, s = t;
        for (int k = 0; k < steps; ++k) {
            const auto k1 = velocity(p, px, py, s);
            const auto k2 = velocity(p, px + 0.5 * h * k1.u, py + 0.5 * h * k1.v, s + 0.5 * h);
            const auto k3 = velocity(p, px + 0.5 * h * k2.u, py + 0.5 * h * k2.v, s + 0.5 * h);
            const auto k4 = velocity(p, px + h * k3.u, py + h * k3.v, s + h);
            px += h / 6.0 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u);
            py += h / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
            s += h;
        }
        return {px, py};
    }
    }
    return {x, y};
}

double concentration(const ScenarioParams& p, const std::vector<Blob>& blobs, double x,
                     double y, double t) {
    const auto q = t == 0.0 ? geo::PlanarPoint{x, y} : trace_back(p, x, y, t);
    double c = 0.0;
    for (const auto& b : blobs) {
        const double dx = q.x - b.x, dy = q.y - b.y;
        c += b.amplitude * std::exp(-0.5 * (dx * dx + dy * dy) / (b.sigma * b.sigma));
    }
    return c;
}

ScalarGrid render(const ScenarioParams& p, const std::vector<Blob>& blobs, double t) {
    ScalarGrid g(p.frame.nx, p.frame.ny);
    g.frame = p.frame;
    g.timestamp = p.start_minutes + static_cast<std::int64_t>(std::llround(t * 60.0));
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const auto q = geo::lonlat_to_xy(p.frame, p.frame.lon_at(i), p.frame.lat_at(j));
            g.at(i, j) = concentration(p, blobs, q.x, q.y, t);
        }
    }
    return g;
}

FlowField velocity_field(const ScenarioParams& p, double t) {
    FlowField f(p.frame.nx, p.frame.ny);
    f.frame = p.frame;
    f.units = FlowUnits::km_per_hour;
    f.t_prev = f.t_next = p.start_minutes + static_cast<std::int64_t>(std::llround(t * 60.0));
    for (int j = 0; j < f.ny; ++j) {
        for (int i = 0; i < f.nx; ++i) {
            const auto q = geo::lonlat_to_xy(p.frame, p.frame.lon_at(i), p.frame.lat_at(j));
            const auto w = velocity(p, q.x, q.y, t);
            f.u[f.index(i, j)] = w.u;
            f.v[f.index(i, j)] = w.v;
        }
    }
    return f;
}

Dataset generate(const ScenarioParams& p) {
    p.validate();
    const auto blobs = make_blobs(p);
    Dataset d;
    const double cad = p.cadence_minutes / 60.0;
    for (int k = 0; k < p.frames; ++k) {
        d.observed.push_back(render(p, blobs, k * cad));
        d.true_flows.push_back(velocity_field(p, k * cad));
    }
    const int ticks = p.horizon_minutes / p.cadence_minutes;
    for (int k = 1; k <= ticks; ++k) {
        d.truth.push_back(render(p, blobs, (p.frames - 1 + k) * cad));
    }
    return d;
}

} // namespace codcast::synth
