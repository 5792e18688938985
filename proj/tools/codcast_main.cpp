// codcast: COD nowcasting from satellite frames.

#include "codcast/codio.hpp"
#include "codcast/errors.hpp"
#include "codcast/pipeline.hpp"
#include "codcast/run_config.hpp"
#include "codcast/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace codcast;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Run configuration file (section.key = value)");
    cmd->add_option("--set", c.sets, "Override a configuration key: key=value")
        ->allow_extra_args(false);
    cmd->add_option("--out", c.out, "Output directory");
}

RunConfig make_config(const Common& c) {
    RunConfig cfg;
    if (!c.config.empty()) cfg.load(c.config);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Common& c, const RunConfig& cfg) {
    return c.out.empty() ? fs::path(cfg.io_output) : fs::path(c.out);
}

std::vector<fs::path> expand_all(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        auto m = expand_glob(in);
        if (m.empty()) throw UsageError("no file matches '" + in + "'");
        out.insert(out.end(), m.begin(), m.end());
    }
    return out;
}

std::string numbered(const std::string& stem, std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%02zu", k);
    return stem + buf + ".codg";
}

void write_series(const std::vector<ScalarGrid>& grids, const fs::path& dir, const std::string& stem) {
    for (std::size_t k = 0; k < grids.size(); ++k) codio::write_grid(grids[k], dir / numbered(stem, k));
}

std::vector<ScalarGrid> read_grids(const std::vector<std::string>& inputs) {
    std::vector<ScalarGrid> out;
    for (const auto& p : expand_all(inputs)) out.push_back(codio::read_grid(p));
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cloud optical depth nowcasting: optical flow, spectral fit, dG transport"};
    app.require_subcommand(1);

    Common c_synth, c_flow, c_fit, c_fc, c_base, c_eval, c_pipe;

    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic frame sequence with ground truth");
    add_common(synth_cmd, c_synth);
    std::string scenario;
    synth_cmd->add_option("--scenario", scenario, "translate | rotate | taylor_green_transport | shear");

    auto* flow_cmd = app.add_subcommand("flow", "Estimate flows between consecutive frames");
    add_common(flow_cmd, c_flow);
    std::vector<std::string> flow_inputs;
    flow_cmd->add_option("frames", flow_inputs, "Frame files or globs")->required();

    auto* fit_cmd = app.add_subcommand("fit", "Fit the spectral model to flow fields");
    add_common(fit_cmd, c_fit);
    std::vector<std::string> fit_inputs;
    fit_cmd->add_option("flows", fit_inputs, "Flow files or globs");

    auto* fc_cmd = app.add_subcommand("forecast", "Advect the latest frame with the fitted model");
    add_common(fc_cmd, c_fc);
    std::string fc_params, fc_frame;
    fc_cmd->add_option("--params", fc_params, "Fitted parameter file")->required();
    fc_cmd->add_option("--frame", fc_frame, "Latest frame")->required();

    auto* base_cmd = app.add_subcommand("baselines", "Persistence and frozen-flow forecasts");
    add_common(base_cmd, c_base);
    std::string base_frame, base_flow;
    base_cmd->add_option("--frame", base_frame, "Latest frame")->required();
    base_cmd->add_option("--flow", base_flow, "Last flow field")->required();

    auto* eval_cmd = app.add_subcommand("eval", "rMAPE of forecast sequences against truth");
    add_common(eval_cmd, c_eval);
    std::vector<std::string> eval_truth, eval_methods;
    long long issue = 0;
    bool have_issue = false;
    eval_cmd->add_option("--truth", eval_truth, "Truth frame files or globs")->required();
    eval_cmd->add_option("--method", eval_methods, "name=glob of a forecast sequence")->required();
    eval_cmd->add_option("--issue", issue, "Issue time (minutes); default one cadence before the first truth frame")
        ->each([&](const std::string&) { have_issue = true; });

    auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage and evaluate");
    add_common(pipe_cmd, c_pipe);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) {
            RunConfig cfg = make_config(c_synth);
            if (!scenario.empty()) cfg.set("synth.scenario", scenario);
            cfg.synth.horizon_minutes = cfg.forecast_horizon;
            cfg.synth.cadence_minutes = cfg.forecast_cadence;
            const auto out = out_dir(c_synth, cfg);
            const auto data = synth::generate(cfg.synth);
            write_series(data.observed, out / "frames", "frame");
            write_series(data.truth, out / "truth", "truth");
            for (std::size_t k = 0; k < data.true_flows.size(); ++k) {
                codio::write_flow(data.true_flows[k], out / "truth" / numbered("velocity", k));
            }
            std::cout << "wrote " << data.observed.size() << " frames and " << data.truth.size()
                      << " truth frames to " << out.string() << "\n";
        } else if (flow_cmd->parsed()) {
            const RunConfig cfg = make_config(c_flow);
            const auto out = out_dir(c_flow, cfg);
            const auto flows = pipeline::estimate_flows(read_grids(flow_inputs), cfg);
            for (std::size_t k = 0; k < flows.size(); ++k) codio::write_flow(flows[k], out / numbered("flow", k));
            std::cout << "wrote " << flows.size() << " flows to " << out.string() << "\n";
        } else if (fit_cmd->parsed()) {
            const RunConfig cfg = make_config(c_fit);
            if (fit_inputs.empty()) throw UsageError("fit needs at least one flow file");
            std::vector<FlowField> flows;
            for (const auto& p : expand_all(fit_inputs)) flows.push_back(codio::read_flow(p));
            std::stable_sort(flows.begin(), flows.end(),
                             [](const auto& a, const auto& b) { return a.t_prev < b.t_prev; });
            const auto out = out_dir(c_fit, cfg);
            const auto fit = pipeline::fit_flows(flows, cfg);
            pipeline::write_params(fit.model, out / "params.spec");
            std::ostringstream log;
            fit.report.write_log(log);
            codio::write_file_bytes(out / "fit.log", log.str());
            std::cout << "fit " << fit.report.status << " after " << fit.report.iterations
                      << " iterations, J = " << fit.report.J_history.back() << "\n";
        } else if (fc_cmd->parsed()) {
            const RunConfig cfg = make_config(c_fc);
            const auto out = out_dir(c_fc, cfg);
            const auto grids = pipeline::forecast_nse(codio::read_grid(fc_frame),
                                                      pipeline::read_params(fc_params), cfg);
            write_series(grids, out, "nse");
            std::cout << "wrote " << grids.size() << " forecast grids to " << out.string() << "\n";
        } else if (base_cmd->parsed()) {
            const RunConfig cfg = make_config(c_base);
            const auto out = out_dir(c_base, cfg);
            const auto latest = codio::read_grid(base_frame);
            write_series(pipeline::forecast_persistence(latest, cfg), out, "persistence");
            write_series(pipeline::forecast_frozen_flow(latest, codio::read_flow(base_flow), cfg), out,
                         "optical_flow");
            std::cout << "wrote baselines to " << out.string() << "\n";
        } else if (eval_cmd->parsed()) {
            const RunConfig cfg = make_config(c_eval);
            const auto truth = read_grids(eval_truth);
            if (truth.empty()) throw UsageError("eval needs truth frames");
            std::vector<pipeline::MethodSeries> methods;
            for (const auto& m : eval_methods) {
                const auto eq = m.find('=');
                if (eq == std::string::npos) throw UsageError("--method expects name=glob");
                methods.push_back({m.substr(0, eq), read_grids({m.substr(eq + 1)})});
            }
            const std::int64_t issue_time =
                have_issue ? issue : truth.front().timestamp - cfg.forecast_cadence;
            const auto rep = pipeline::evaluate(truth, methods, issue_time, cfg.preprocess.percentile);
            const auto out = out_dir(c_eval, cfg);
            codio::write_file_bytes(out / "report.txt", rep.table());
            codio::write_file_bytes(out / "report.records", rep.records());
            std::cout << rep.table();
        } else if (pipe_cmd->parsed()) {
            const RunConfig cfg = make_config(c_pipe);
            const auto out = out_dir(c_pipe, cfg);
            const auto res = pipeline::run_pipeline(cfg, out);
            std::cout << "fit " << res.fit.report.status << " after " << res.fit.report.iterations
                      << " iterations\n";
            if (res.evaluated) std::cout << res.report.table();
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidConfig& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownScenario& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
