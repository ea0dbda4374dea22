#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tloho/inference.hpp"
#include "tloho/io.hpp"
#include "tloho/model.hpp"
#include "tloho/sampler.hpp"
#include "tloho/shrinkage.hpp"
#include "tloho/simulate.hpp"

namespace tloho::cli {

enum ExitCode : int { ok = 0, failure = 1, usage = 2, io = 3, data = 4, config = 5 };

namespace detail {

inline void ensure_directory(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

inline std::string join(const std::string& dir, const std::string& file)
{
    return (std::filesystem::path(dir) / file).string();
}

struct FitArgs {
    std::string graph, x, y, config, out;
    bool normal_means = false;
    std::optional<double> tau0, c;
    std::optional<long> iters, burnin, thin;
    std::optional<int> chains;
    std::optional<std::uint64_t> seed;
    int index_base = 0;
};

struct SummarizeArgs {
    std::string draws, out, truth, plot_data, x_test, y_test;
    double level = 0.9;
};

struct SimulateArgs {
    std::string out, beta;
    int side = 30, n_train = 100, n_test = 1000;
    double theta = 0.0, snr = 4.0;
    std::uint64_t seed = 1;
};

struct BfCurveArgs {
    std::string out;
    std::vector<std::string> scenarios;
    std::optional<double> n1, n2;
    double t_max = 20.0, t_step = 0.1;
};

inline int fit(const FitArgs& a, std::ostream& out)
{
    if (a.normal_means == !a.x.empty()) throw CLI::ValidationError("fit", "give exactly one of --x and --normal-means");
    RunConfig rc = a.config.empty() ? RunConfig{} : read_config(a.config);
    if (a.tau0) rc.hyper.tau0 = *a.tau0;
    if (a.c) rc.hyper.c = *a.c;
    if (a.iters) rc.schedule.iters = *a.iters;
    if (a.burnin) rc.schedule.burnin = *a.burnin;
    if (a.thin) rc.schedule.thin = *a.thin;
    if (a.chains) rc.chains = *a.chains;
    if (a.seed) rc.seed = *a.seed;
    rc.hyper.validate();
    rc.schedule.validate();
    if (rc.chains < 1) throw ConfigError("chains must be at least 1");
    if (rc.schedule.iters < rc.schedule.thin) throw ConfigError("iters must be at least thin so that a draw is kept");

    VectorXd y = read_vector_csv(a.y);
    const Dataset data = a.normal_means ? Dataset::normal_means(std::move(y)) : Dataset(read_matrix_csv(a.x), std::move(y));
    const Graph g = read_edge_list(a.graph, data.p(), a.index_base);

    const auto chains = run_chains(data, g, rc.hyper, rc.schedule, rc.seed, rc.chains);
    ensure_directory(a.out);
    write_draws_csv(join(a.out, "draws.csv"), chains);

    std::vector<Draw> all;
    std::map<std::string, AcceptanceStats> acc;
    double runtime = 0.0;
    for (const auto& c : chains) {
        all.insert(all.end(), c.draws.begin(), c.draws.end());
        for (const auto& [k, s] : c.acceptance) {
            acc[k].proposed += s.proposed;
            acc[k].accepted += s.accepted;
        }
        runtime = std::max(runtime, c.runtime_seconds);
    }
    const Summary s = summarize_draws(all);
    nlohmann::json j = summary_json(s);
    nlohmann::json rates = nlohmann::json::object();
    for (const auto& [k, st] : acc) rates[k] = {{"proposed", st.proposed}, {"accepted", st.accepted}, {"rate", st.rate()}};
    j["acceptance"] = rates;
    j["settings"] = {{"tau0", rc.hyper.tau0},       {"c", rc.hyper.c},
                     {"move_probs", rc.hyper.move_probs}, {"mh_step_tau", rc.hyper.mh_step_tau},
                     {"iters", rc.schedule.iters},  {"burnin", rc.schedule.burnin},
                     {"thin", rc.schedule.thin},    {"chains", rc.chains},
                     {"seed", rc.seed},             {"normal_means", a.normal_means}};
    write_json(join(a.out, "summary.json"), j);

    out << "draws: " << all.size() << " from " << rc.chains << " chain(s), p = " << g.num_vertices()
        << ", n_c = " << g.num_components() << '\n';
    int k = 0;
    for (int l : s.dahl_labels) k = std::max(k, l + 1);
    out << "Dahl estimate: K = " << k << '\n';
    for (const auto& [name, st] : acc) out << "acceptance " << name << ": " << st.rate() << '\n';
    out << "runtime: " << runtime << " s\n";
    return ok;
}

inline int summarize(const SummarizeArgs& a, std::ostream& out)
{
    if (a.x_test.empty() != a.y_test.empty()) throw CLI::ValidationError("summarize", "--x-test and --y-test go together");
    const auto draws = read_draws_csv(a.draws);
    if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    const Summary s = summarize_draws(draws, a.level);
    nlohmann::json j = summary_json(s);

    if (!a.truth.empty()) {
        const Partition truth = read_labels(a.truth);
        if (truth.num_vertices() != static_cast<int>(s.dahl_labels.size()))
            throw DataError("truth has " + std::to_string(truth.num_vertices()) + " labels, draws have " +
                            std::to_string(s.dahl_labels.size()) + " vertices");
        const double ri = rand_index(Partition(s.dahl_labels), truth);
        j["rand_index"] = ri;
        out << "rand_index: " << format_double(ri) << '\n';
    }
    if (!a.x_test.empty()) {
        const MatrixXd xt = read_matrix_csv(a.x_test);
        const VectorXd yt = read_vector_csv(a.y_test);
        if (xt.cols() != static_cast<Eigen::Index>(s.beta.median.size()) || xt.rows() != yt.size())
            throw DataError("test design is " + std::to_string(xt.rows()) + " x " + std::to_string(xt.cols()) +
                            ", expected " + std::to_string(yt.size()) + " x " + std::to_string(s.beta.median.size()));
        const double e = mspe(Eigen::Map<const VectorXd>(s.beta.median.data(), xt.cols()), xt, yt);
        j["mspe"] = e;
        out << "mspe: " << format_double(e) << '\n';
    }
    if (!a.plot_data.empty()) {
        auto f = open_output(a.plot_data);
        f << "vertex,dahl_label,beta_median,beta_lower,beta_upper\n";
        for (std::size_t v = 0; v < s.dahl_labels.size(); ++v)
            f << v << ',' << s.dahl_labels[v] << ',' << format_double(s.beta.median[v]) << ','
              << format_double(s.beta.lower[v]) << ',' << format_double(s.beta.upper[v]) << '\n';
        if (!f) throw IoError("write to '" + a.plot_data + "' failed");
    }
    if (a.out.empty()) {
        out << j.dump(2) << '\n';
    } else {
        ensure_directory(a.out);
        write_json(join(a.out, "summary.json"), j);
    }
    return ok;
}

inline int simulate(const SimulateArgs& a, std::ostream& out)
{
    SimConfig cfg;
    cfg.lattice_side = a.side;
    cfg.n_train = a.n_train;
    cfg.n_test = a.n_test;
    cfg.theta = a.theta;
    cfg.snr = a.snr;
    cfg.seed = a.seed;
    if (!a.beta.empty()) {
        const VectorXd b = read_vector_csv(a.beta);
        cfg.true_beta_spec = "file";
        cfg.true_beta.assign(b.data(), b.data() + b.size());
    }
    auto rng = make_rng(cfg.seed);
    const SyntheticData d = generate_synthetic(cfg, rng);

    ensure_directory(a.out);
    write_edge_list(join(a.out, "graph.txt"), d.graph);
    write_matrix_csv(join(a.out, "x.csv"), d.x_train);
    write_matrix_csv(join(a.out, "y.csv"), d.y_train);
    write_matrix_csv(join(a.out, "x_test.csv"), d.x_test);
    write_matrix_csv(join(a.out, "y_test.csv"), d.y_test);
    write_vector_csv(join(a.out, "beta.csv"), d.beta);
    write_labels(join(a.out, "truth.csv"), d.truth);
    nlohmann::json j = {{"lattice_side", cfg.lattice_side}, {"n_train", cfg.n_train}, {"n_test", cfg.n_test},
                        {"theta", cfg.theta},               {"snr", cfg.snr},         {"seed", cfg.seed},
                        {"sigma2", d.sigma2},               {"true_K", d.truth.num_clusters()},
                        {"true_beta", cfg.true_beta_spec}};
    write_json(join(a.out, "sim.json"), j);
    std::size_t zeros = 0;
    for (double b : d.beta) zeros += b == 0.0;
    out << "p = " << d.beta.size() << ", zero fraction = " << static_cast<double>(zeros) / d.beta.size()
        << ", true K = " << d.truth.num_clusters() << ", sigma2 = " << d.sigma2 << '\n';
    return ok;
}

inline int bf_curve_cmd(const BfCurveArgs& a, std::ostream& out)
{
    if (!(a.t_step > 0.0) || !(a.t_max >= 0.0)) throw ConfigError("need t-step > 0 and t-max >= 0");
    std::vector<BfScenario> scenarios;
    const auto defaults = default_bf_scenarios();
    if (a.n1 || a.n2) {
        if (!(a.n1 && a.n2)) throw ConfigError("--n1 and --n2 go together");
        scenarios.push_back({"custom", *a.n1, *a.n2});
    }
    for (const auto& name : a.scenarios) {
        auto it = std::find_if(defaults.begin(), defaults.end(), [&](const BfScenario& s) { return s.name == name; });
        if (it == defaults.end()) throw ConfigError("invalid scenario '" + name + "'");
        scenarios.push_back(*it);
    }
    if (scenarios.empty()) scenarios = defaults;
    for (const auto& s : scenarios) {
        try {
            TwoSampleStat{0.0, s.n1, s.n2}.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("invalid scenario '" + s.name + "': " + e.what());
        }
    }

    const long steps = std::lround(std::floor(a.t_max / a.t_step + 1e-9));
    std::vector<double> grid;
    for (long i = 0; i <= steps; ++i) grid.push_back(static_cast<double>(i) * a.t_step);

    std::ostringstream csv;
    csv << "scenario,n1,n2,nu,n_delta,tau1,tau2,t,bf_normal,bf_horseshoe\n";
    for (const auto& s : scenarios) {
        const auto [tau1, tau2] = scale_match(s.n1, s.n2);
        const TwoSampleStat proto{0.0, s.n1, s.n2};
        for (const auto& pt : bf_curve(s, grid, tau1, tau2))
            csv << s.name << ',' << format_double(s.n1) << ',' << format_double(s.n2) << ','
                << format_double(s.nu()) << ',' << format_double(proto.n_delta()) << ',' << format_double(tau1)
                << ',' << format_double(tau2) << ',' << format_double(pt.t) << ',' << format_double(pt.normal)
                << ',' << format_double(pt.horseshoe) << '\n';
    }
    if (a.out.empty()) {
        out << csv.str();
    } else {
        auto f = open_output(a.out);
        f << csv.str();
        if (!f) throw IoError("write to '" + a.out + "' failed");
    }
    return ok;
}

} // namespace detail

/* Entry point shared by the executable and the tests. Exit codes: 0 success,
 * 2 usage, 3 file I/O, 4 bad data, 5 bad configuration, 1 anything else. */
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Tree-based low-rank horseshoe regression"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    detail::FitArgs fa;
    auto* fit = app.add_subcommand("fit", "run the sampler and write draws.csv and summary.json");
    fit->add_option("--graph", fa.graph, "edge list file")->required();
    fit->add_option("--x", fa.x, "design matrix CSV (n x p)");
    fit->add_option("--y", fa.y, "response CSV")->required();
    fit->add_flag("--normal-means", fa.normal_means, "model the response directly (X = I)");
    fit->add_option("--config", fa.config, "JSON config file");
    fit->add_option("--tau0", fa.tau0, "scale of the half-Cauchy prior on tau");
    fit->add_option("--c", fa.c, "geometric penalty on the number of clusters");
    fit->add_option("--iters", fa.iters, "iterations after burn-in");
    fit->add_option("--burnin", fa.burnin, "burn-in iterations");
    fit->add_option("--thin", fa.thin, "keep every thin-th draw");
    fit->add_option("--chains", fa.chains, "independent chains, one thread each");
    fit->add_option("--seed", fa.seed, "random seed");
    fit->add_option("--out", fa.out, "output directory")->required();
    fit->add_option("--index-base", fa.index_base, "first vertex id in the edge list")->check(CLI::IsMember({0, 1}));

    detail::SummarizeArgs sa;
    auto* sum = app.add_subcommand("summarize", "summarize a draws.csv file");
    sum->add_option("--draws", sa.draws, "draws CSV written by fit")->required();
    sum->add_option("--out", sa.out, "output directory for summary.json (stdout if omitted)");
    sum->add_option("--level", sa.level, "credible interval level");
    sum->add_option("--rand-index", sa.truth, "true labels; prints the Rand index of the Dahl estimate");
    sum->add_option("--plot-data", sa.plot_data, "per-vertex estimates CSV");
    sum->add_option("--x-test", sa.x_test, "test design for MSPE");
    sum->add_option("--y-test", sa.y_test, "test response for MSPE");

    detail::SimulateArgs ma;
    auto* sim = app.add_subcommand("simulate", "generate a lattice regression data set");
    sim->add_option("--out", ma.out, "output directory")->required();
    sim->add_option("--side", ma.side, "lattice side length");
    sim->add_option("--n-train", ma.n_train, "training sample size");
    sim->add_option("--n-test", ma.n_test, "test sample size");
    sim->add_option("--theta", ma.theta, "range of the exp(-d/theta) predictor kernel; 0 for independent");
    sim->add_option("--snr", ma.snr, "signal-to-noise ratio");
    sim->add_option("--beta", ma.beta, "true coefficient CSV instead of the built-in image");
    sim->add_option("--seed", ma.seed, "random seed");

    detail::BfCurveArgs ba;
    auto* bf = app.add_subcommand("bf-curve", "Bayes factor curves under normal and horseshoe priors");
    bf->add_option("--out", ba.out, "output CSV (stdout if omitted)");
    bf->add_option("--scenario", ba.scenarios, "scenario name, e.g. unbalanced_nu5 (default: all)");
    bf->add_option("--n1", ba.n1, "custom first group size");
    bf->add_option("--n2", ba.n2, "custom second group size");
    bf->add_option("--t-max", ba.t_max, "largest |t| on the grid");
    bf->add_option("--t-step", ba.t_step, "grid spacing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return ok;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return ok;
    } catch (const CLI::CallForVersion& e) {
        app.exit(e, out, err);
        return ok;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return usage;
    }

    try {
        if (*fit) return detail::fit(fa, out);
        if (*sum) return detail::summarize(sa, out);
        if (*sim) return detail::simulate(ma, out);
        if (*bf) return detail::bf_curve_cmd(ba, out);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return io;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return config;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return data;
    } catch (const PartitionError& e) {
        err << "error: " << e.what() << '\n';
        return data;
    } catch (const InferenceError& e) {
        err << "error: " << e.what() << '\n';
        return data;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
    return usage;
}

} // namespace tloho::cli
