#ifndef SCOREMIX_TOOLS_CLI_HPP
#define SCOREMIX_TOOLS_CLI_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <scoremix/scoremix.hpp>

namespace scoremix::cli {

/// JSON config files for CLI11: a flat object of option long names.
class ConfigJSON : public CLI::Config {
    /// Numeric strings become JSON numbers so the echo keeps full precision.
    static nlohmann::json typed(const std::string& s) {
        if (s == "{}") return nlohmann::json::array();
        if (auto v = detail::parse_double(s)) {
            if (std::nearbyint(*v) == *v && std::abs(*v) < 9.0e15 && s.find_first_of(".eE") == std::string::npos)
                return static_cast<long long>(*v);
            return *v;
        }
        return s;
    }

    const CLI::App* root_ = nullptr;

public:
    /// Flat keys are routed to the subcommand selected on the command line.
    explicit ConfigJSON(const CLI::App* root = nullptr) : root_(root) {}

    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        nlohmann::json j = nlohmann::json::object();
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            const std::string name = opt->get_lnames()[0];
            if (opt->get_type_size() != 0) {
                if (opt->count() == 1) {
                    j[name] = typed(opt->results().at(0));
                } else if (opt->count() > 1) {
                    nlohmann::json arr = nlohmann::json::array();
                    for (const auto& r : opt->results()) arr.push_back(typed(r));
                    j[name] = arr;
                } else if (default_also && !opt->get_default_str().empty() && opt->get_default_str() != "{}") {
                    j[name] = typed(opt->get_default_str());
                }
            } else if (opt->count() > 0 || default_also) {
                j[name] = opt->count() > 0;
            }
        }
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("JSON config must be an object");
        std::vector<std::string> parents;
        if (root_ != nullptr && !root_->get_subcommands().empty()) parents.push_back(root_->get_subcommands().front()->get_name());
        std::vector<CLI::ConfigItem> items;
        for (auto it = j.begin(); it != j.end(); ++it) {
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            const auto scalar = [&](const nlohmann::json& v) -> std::string {
                if (v.is_string()) return v.get<std::string>();
                if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
                if (v.is_number()) return v.dump();
                throw CLI::ConversionError("unsupported value for '" + it.key() + "'");
            };
            if (it->is_array()) {
                for (const auto& v : *it) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(*it));
            }
            items.push_back(std::move(item));
        }
        return items;
    }
};

struct ModelArgs {
    std::string a1;
    std::string a2;
    std::string dataset;
    double density = 200.0;
    std::vector<double> lambdas{0.5};
    double T = 1.0;
    double eps = 0.0;
};

struct Inputs {
    EmpiricalMeasure mu1;
    EmpiricalMeasure mu2;
    nlohmann::json provenance;
};

inline void add_model_options(CLI::App* sub, ModelArgs& m, bool lambda_list) {
    sub->add_option("--a1", m.a1, "first dataset (CSV or JSON)");
    sub->add_option("--a2", m.a2, "second dataset (CSV or JSON)");
    sub->add_option("--dataset", m.dataset, "built-in dataset pair")->check(CLI::IsMember({"line", "plane", "segments"}));
    sub->add_option("--density", m.density, "samples per unit length for the segments dataset")->check(CLI::PositiveNumber);
    if (lambda_list) {
        sub->add_option("--lambda", m.lambdas, "mixing parameters")->delimiter(',');
    } else {
        sub->add_option("--lambda", m.lambdas, "mixing parameter")->expected(1);
    }
    sub->add_option("--T", m.T, "generation horizon")->check(CLI::PositiveNumber);
    sub->add_option("--eps", m.eps, "noise level")->check(CLI::NonNegativeNumber);
}

inline Inputs load_inputs(const ModelArgs& m) {
    Inputs in;
    if (!m.dataset.empty()) {
        if (!m.a1.empty() || !m.a2.empty()) throw InvalidArgument("--dataset excludes --a1/--a2");
        auto pair = datasets::builtin_pair(m.dataset, m.density);
        in.mu1 = std::move(pair.first);
        in.mu2 = std::move(pair.second);
        in.provenance = {{"dataset", m.dataset},
                         {"density", m.density},
                         {"a1_sha1", git_blob_sha1(to_json(in.mu1).dump())},
                         {"a2_sha1", git_blob_sha1(to_json(in.mu2).dump())}};
        return in;
    }
    if (m.a1.empty() || m.a2.empty()) throw InvalidArgument("give --a1 and --a2, or --dataset");
    in.mu1 = load_measure(m.a1);
    in.mu2 = load_measure(m.a2);
    in.provenance = {{"a1", m.a1}, {"a2", m.a2}, {"a1_sha1", git_blob_sha1(read_file(m.a1))}, {"a2_sha1", git_blob_sha1(read_file(m.a2))}};
    return in;
}

inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

inline nlohmann::json sidecar(const CLI::App* sub, const std::string& command, const Inputs& in) {
    return {{"command", command}, {"config", nlohmann::json::parse(sub->config_to_str(true, false))}, {"inputs", in.provenance}};
}

/// Greedy clustering of points within `radius`, in input order.
inline nlohmann::json cluster_summary(const std::vector<Vec>& pts, double radius) {
    std::vector<Vec> centers;
    std::vector<std::size_t> counts;
    for (const auto& p : pts) {
        std::size_t c = 0;
        while (c < centers.size() && (centers[c] - p).norm() > radius) ++c;
        if (c == centers.size()) {
            centers.push_back(p);
            counts.push_back(0);
        }
        ++counts[c];
    }
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t c = 0; c < centers.size(); ++c) out.push_back({{"center", to_json(centers[c])}, {"count", counts[c]}});
    return out;
}

/// Default similarity-time horizon for the limit inclusion; the error decays like exp(-tau/2).
inline constexpr double kLimitHorizon = 30.0;

struct SimulateArgs {
    ModelArgs model;
    std::string mode = "ode";
    std::vector<double> x0;
    std::size_t z0_grid = 0;
    std::size_t n_paths = 0;
    double gaussian_std = 1.0;
    std::vector<double> mean;
    std::string starts_file;
    std::vector<double> lower;
    std::vector<double> upper;
    double dtau = 1e-2;
    double t_min = kDefaultTimeFloor;
    double tau_max = 0.0;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    double sliding_tol = 1e-7;
    std::string method = "euler";
    std::string sliding = "project";
    double cluster_radius = 1e-3;
    std::string out = "out";
};

inline int cmd_simulate(const CLI::App* sub, const SimulateArgs& a, std::ostream& out) {
    const Inputs in = load_inputs(a.model);
    if (a.model.lambdas.size() != 1) throw InvalidArgument("simulate takes a single --lambda");
    const MixedScoreModel model(in.mu1, in.mu2, a.model.lambdas.front(), a.model.T, a.model.eps);
    const auto d = model.dim();

    IntegratorConfig cfg = IntegratorConfig::for_horizon(model.T, a.t_min);
    cfg.dtau = a.dtau;
    if (a.tau_max > 0.0) {
        cfg.tau_max = a.tau_max;
    } else if (a.mode == "limit") {
        cfg.tau_max = kLimitHorizon;
    }
    cfg.seed = a.seed;
    cfg.sliding_tol = a.sliding_tol;
    cfg.method = a.method == "rk4" ? StepMethod::rk4 : StepMethod::euler;
    cfg.sliding = a.sliding == "chatter" ? SlidingMode::chatter : SlidingMode::project;

    SamplerSpec sampler;
    std::size_t n_paths = 1;
    const int sources = !a.x0.empty() + (a.z0_grid > 0) + (a.n_paths > 0) + !a.starts_file.empty();
    if (sources != 1) throw InvalidArgument("give exactly one of --x0, --z0-grid, --n-paths, --starts");
    if (!a.x0.empty()) {
        if (a.x0.size() != d) throw DimensionMismatch(d, a.x0.size());
        sampler.kind = SamplerKind::file;
        sampler.points = {to_vec(a.x0)};
    } else if (a.z0_grid > 0) {
        sampler.kind = SamplerKind::grid;
        auto box = default_search_box(model);
        sampler.lower = a.lower.empty() ? box.first : to_vec(a.lower);
        sampler.upper = a.upper.empty() ? box.second : to_vec(a.upper);
        sampler.grid_n = a.z0_grid;
    } else if (a.n_paths > 0) {
        sampler.kind = SamplerKind::gaussian;
        sampler.mean = a.mean.empty() ? Vec::Zero(static_cast<Eigen::Index>(d)) : to_vec(a.mean);
        sampler.stddev = a.gaussian_std;
        n_paths = a.n_paths;
    } else {
        const auto pts = load_measure(a.starts_file);
        sampler.kind = SamplerKind::file;
        for (std::size_t k = 0; k < pts.size(); ++k) sampler.points.emplace_back(pts.point(k));
    }

    std::vector<Trajectory> paths;
    if (a.mode == "physical") {
        const std::size_t steps = a.steps > 0 ? a.steps : static_cast<std::size_t>(std::max<long long>(1, std::llround(std::log(model.T / a.t_min) / a.dtau)));
        for (const auto& x : sample_initial_states(sampler, d, n_paths, cfg.seed)) paths.push_back(simulate_physical_ode(model, x, a.t_min, steps));
    } else {
        const TrajectoryMode mode = a.mode == "ode" ? TrajectoryMode::similarity_ode
                                    : a.mode == "sde" ? TrajectoryMode::similarity_sde
                                                      : TrajectoryMode::limit_inclusion;
        paths = ensemble(model, sampler, n_paths, cfg, mode);
    }

    const std::filesystem::path dir(a.out);
    nlohmann::json meta = sidecar(sub, "simulate", in);
    nlohmann::json summaries = nlohmann::json::array();
    std::vector<Vec> terminals;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        char name[40];
        std::snprintf(name, sizeof name, "trajectory_%04zu.csv", i);
        std::ostringstream csv;
        write_trajectory_csv(csv, paths[i]);
        write_text(dir / name, csv.str());
        nlohmann::json s = trajectory_summary(paths[i]);
        s["file"] = name;
        summaries.push_back(s);
        terminals.push_back(paths[i].terminal());
        out << "terminal";
        for (Eigen::Index j = 0; j < paths[i].terminal().size(); ++j) out << ' ' << format_double(paths[i].terminal()[j]);
        out << '\n';
    }
    meta["trajectories"] = summaries;
    if (paths.size() > 1) meta["limit_clusters"] = cluster_summary(terminals, a.cluster_radius);
    write_json(dir / "metadata.json", meta);
    return 0;
}

struct PotentialArgs {
    ModelArgs model;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t res = 101;
    double t = 1e-4;
    std::string out = "out";
};

inline int cmd_potential(const CLI::App* sub, const PotentialArgs& a, std::ostream& out) {
    const Inputs in = load_inputs(a.model);
    if (a.model.lambdas.size() != 1) throw InvalidArgument("potential takes a single --lambda");
    const MixedScoreModel model(in.mu1, in.mu2, a.model.lambdas.front(), a.model.T, a.model.eps);
    const auto d = model.dim();
    if (d > 2) throw InvalidArgument("potential grids support d <= 2");
    if (a.res < 2) throw InvalidArgument("--res must be at least 2");
    auto box = default_search_box(model);
    SamplerSpec grid;
    grid.kind = SamplerKind::grid;
    grid.lower = a.lower.empty() ? box.first : to_vec(a.lower);
    grid.upper = a.upper.empty() ? box.second : to_vec(a.upper);
    grid.grid_n = a.res;
    const auto pts = sample_initial_states(grid, d, 0, 0);

    std::ostringstream csv;
    for (std::size_t j = 0; j < d; ++j) csv << 'x' << j << ',';
    csv << "phi,F,nd1,nd2";
    for (std::size_t j = 0; j < d; ++j) csv << ",field" << j;
    csv << '\n';
    double max_gap = 0.0;
    for (const auto& x : pts) {
        const double p = phi(model, x);
        const double F = rescaled_potential(model, x, a.t);
        max_gap = std::max(max_gap, std::abs(p - F));
        const auto nd = nd_indicator(model, x);
        const Vec field = limiting_field(model, x);
        for (Eigen::Index j = 0; j < x.size(); ++j) csv << format_double(x[j]) << ',';
        csv << format_double(p) << ',' << format_double(F) << ',' << nd.in_nd1 << ',' << nd.in_nd2;
        for (Eigen::Index j = 0; j < field.size(); ++j) csv << ',' << format_double(field[j]);
        csv << '\n';
    }
    const std::filesystem::path dir(a.out);
    write_text(dir / "potential.csv", csv.str());
    nlohmann::json meta = sidecar(sub, "potential", in);
    meta["points"] = pts.size();
    meta["max_phi_F_gap"] = max_gap;
    write_json(dir / "metadata.json", meta);
    out << "points " << pts.size() << " max |Phi - F| " << format_double(max_gap) << '\n';
    return 0;
}

struct MinimizersArgs {
    ModelArgs model;
    std::size_t max_active = 3;
    std::size_t grid_n = 12;
    bool no_descent = false;
    std::string sweep_csv;
    std::string out = "out";
};

inline int cmd_minimizers(const CLI::App* sub, const MinimizersArgs& a, std::ostream& out) {
    const Inputs in = load_inputs(a.model);
    EnumerationOptions opts;
    opts.max_active = a.max_active;
    opts.grid_n = a.grid_n;
    opts.descent = !a.no_descent;
    nlohmann::json all = nlohmann::json::array();
    std::ostringstream sweep;
    sweep << "lambda,index";
    for (std::size_t j = 0; j < in.mu1.dim(); ++j) sweep << ",x" << j;
    sweep << ",classification,phi\n";
    for (double lam : a.model.lambdas) {
        const MixedScoreModel model(in.mu1, in.mu2, lam, a.model.T, a.model.eps);
        const auto res = enumerate_critical_points(model, opts);
        nlohmann::json entry = to_json(res);
        entry["lambda"] = lam;
        all.push_back(entry);
        std::size_t idx = 0;
        for (const auto& r : res.records) {
            out << "lambda " << format_double(lam) << ' ' << to_string(r.classification);
            for (Eigen::Index j = 0; j < r.x_star.size(); ++j) out << ' ' << format_double(r.x_star[j]);
            out << '\n';
            if (!r.is_local_min()) continue;
            sweep << format_double(lam) << ',' << idx++;
            for (Eigen::Index j = 0; j < r.x_star.size(); ++j) sweep << ',' << format_double(r.x_star[j]);
            sweep << ',' << to_string(r.classification) << ',' << format_double(r.phi_value) << '\n';
        }
    }
    const std::filesystem::path dir(a.out);
    write_json(dir / "minimizers.json", all);
    if (!a.sweep_csv.empty()) write_text(dir / a.sweep_csv, sweep.str());
    write_json(dir / "metadata.json", sidecar(sub, "minimizers", in));
    return 0;
}

struct VerifyArgs {
    ModelArgs model;
    std::vector<std::string> suites;
    std::uint64_t seed = 0;
    std::size_t mc_paths = 10000;
    bool details = false;
    std::string out = "out";
};

inline int cmd_verify(const CLI::App* sub, const VerifyArgs& a, std::ostream& out) {
    if (a.suites.empty()) throw CLI::ValidationError("--suite", "at least one suite is required");
    const Inputs in = load_inputs(a.model);
    if (a.model.lambdas.size() != 1) throw InvalidArgument("verify takes a single --lambda");
    const MixedScoreModel model(in.mu1, in.mu2, a.model.lambdas.front(), a.model.T, a.model.eps);
    SuiteOptions opts;
    opts.seed = a.seed;
    opts.mc_paths = a.mc_paths;
    const std::filesystem::path dir(a.out);
    bool all_pass = true;
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& name : a.suites) {
        const SuiteResult res = run_suite(name, model, opts);
        nlohmann::json j = {{"suite", name}, {"pass", res.pass}, {"hard_gate", res.hard_gate}};
        nlohmann::json reps = nlohmann::json::array();
        for (const auto& r : res.reports) reps.push_back(to_json(r, a.details));
        j["reports"] = reps;
        nlohmann::json fits = nlohmann::json::array();
        for (const auto& f : res.fits) fits.push_back(to_json(f));
        j["fits"] = fits;
        write_json(dir / ("report_" + name + ".json"), j);
        if (res.hard_gate && !res.pass) all_pass = false;
        out << name << ' ' << (res.pass ? "PASS" : "FAIL") << (res.hard_gate ? "" : " (informational)") << '\n';
        summary.push_back({{"suite", name}, {"pass", res.pass}, {"hard_gate", res.hard_gate}});
    }
    nlohmann::json meta = sidecar(sub, "verify", in);
    meta["summary"] = summary;
    write_json(dir / "metadata.json", meta);
    return all_pass ? 0 : 1;
}

/// Entry point; returns 0 on success, 1 on runtime or numerical failure, 2 on usage errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Mixed heat-flow score dynamics and their limiting distance potential"};
    app.require_subcommand(1);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.config_formatter(std::make_shared<ConfigJSON>(&app));
    app.set_config("--config", "", "JSON file of option values for the chosen subcommand");
    app.fallthrough();

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "integrate trajectories");
    s->option_defaults()->always_capture_default();
    add_model_options(s, sim.model, false);
    s->add_option("--mode", sim.mode, "dynamics")->check(CLI::IsMember({"ode", "sde", "physical", "limit"}));
    s->add_option("--x0", sim.x0, "single start")->delimiter(',');
    s->add_option("--z0-grid", sim.z0_grid, "grid starts per axis over the box");
    s->add_option("--n-paths", sim.n_paths, "Gaussian starts");
    s->add_option("--gaussian-std", sim.gaussian_std, "standard deviation of Gaussian starts")->check(CLI::PositiveNumber);
    s->add_option("--mean", sim.mean, "mean of Gaussian starts")->delimiter(',');
    s->add_option("--starts", sim.starts_file, "CSV or JSON file of starts")->check(CLI::ExistingFile);
    s->add_option("--lower", sim.lower, "grid box lower corner")->delimiter(',');
    s->add_option("--upper", sim.upper, "grid box upper corner")->delimiter(',');
    s->add_option("--dtau", sim.dtau, "similarity-time step")->check(CLI::PositiveNumber);
    s->add_option("--t-min", sim.t_min, "terminal physical time")->check(CLI::PositiveNumber);
    s->add_option("--tau-max", sim.tau_max, "similarity-time horizon (default log(T/t_min), 30 for limit)");
    s->add_option("--steps", sim.steps, "physical mode step count");
    s->add_option("--seed", sim.seed, "noise seed");
    s->add_option("--sliding-tol", sim.sliding_tol, "interface detection tolerance");
    s->add_option("--method", sim.method, "step method")->check(CLI::IsMember({"euler", "rk4"}));
    s->add_option("--sliding", sim.sliding, "interface handling")->check(CLI::IsMember({"project", "chatter"}));
    s->add_option("--cluster-radius", sim.cluster_radius, "radius for grouping terminal states");
    s->add_option("--out", sim.out, "output directory");

    PotentialArgs pot;
    auto* p = app.add_subcommand("potential", "tabulate Phi, F, ND indicators and the limiting field on a grid");
    p->option_defaults()->always_capture_default();
    add_model_options(p, pot.model, false);
    p->add_option("--lower", pot.lower, "box lower corner")->delimiter(',');
    p->add_option("--upper", pot.upper, "box upper corner")->delimiter(',');
    p->add_option("--res", pot.res, "grid points per axis");
    p->add_option("--t", pot.t, "time for F")->check(CLI::PositiveNumber);
    p->add_option("--out", pot.out, "output directory");

    MinimizersArgs mins;
    auto* m = app.add_subcommand("minimizers", "enumerate critical points of Phi for each lambda");
    m->option_defaults()->always_capture_default();
    add_model_options(m, mins.model, true);
    m->add_option("--max-active", mins.max_active, "bound on tie-set sizes");
    m->add_option("--grid-n", mins.grid_n, "probe and descent starts per axis");
    m->add_flag("--no-descent", mins.no_descent, "skip the descent pass");
    m->add_option("--sweep-csv", mins.sweep_csv, "file name for the lambda sweep table");
    m->add_option("--out", mins.out, "output directory");

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "run verification suites");
    v->option_defaults()->always_capture_default();
    add_model_options(v, ver.model, false);
    v->add_option("--suite", ver.suites, "suites to run")->delimiter(',')->check(CLI::IsMember(suite_names()));
    v->add_option("--seed", ver.seed, "seed for sampled checks");
    v->add_option("--mc-paths", ver.mc_paths, "paths for the Monte-Carlo check");
    v->add_flag("--details", ver.details, "include per-sample records");
    v->add_option("--out", ver.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
        return 2;
    }

    try {
        if (s->parsed()) return cmd_simulate(s, sim, out);
        if (p->parsed()) return cmd_potential(p, pot, out);
        if (m->parsed()) return cmd_minimizers(m, mins, out);
        return cmd_verify(v, ver, out);
    } catch (const CLI::Error& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const LoadError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace scoremix::cli

#endif  // SCOREMIX_TOOLS_CLI_HPP
