// adfq: command-line front end for the belief update, its oracles and the
// tabular experiments.
//
//   adfq update-demo [--prior-mean 0 --prior-var 1 --next-means -2,-2,4.5 ...]
//   adfq solve --domain loop --slip 0
//   adfq convergence --domain arms --arms 10 --seed 1
//   adfq learn --domain loop --agents adfq --policy ts --seed 1
//   adfq oracle-check --trials 1000 --seed 7
//
// Every option can also come from a flat `key = value` file given with
// --config; options on the command line win.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adfq/adfq.hpp"
#include "adfq/harness.hpp"
#include "adfq/oracles.hpp"
#include "adfq/problems.hpp"

namespace fs = std::filesystem;
using namespace adfq;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad number '") + item + "' in " + what);
        }
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Rewrites `--config FILE` into `--key=value` tokens placed straight after
/// the subcommand, so anything given later on the command line overrides it.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::string path;
    std::size_t at = 0, width = 0;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1], at = i, width = 2;
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9), at = i, width = 1;
            break;
        }
    }
    if (width == 0) return args;
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(at), args.begin() + static_cast<std::ptrdiff_t>(at + width));

    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::vector<std::string> injected;
    for (const auto& item : CLI::ConfigINI().from_config(in)) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == "default"))
            throw ConfigError("config file " + path + ": sections are not supported (" + item.fullname() + ")");
        std::string value;
        for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
        injected.push_back("--" + item.name + "=" + value);
    }
    const std::size_t insert_at = args.size() > 1 ? 2 : 1;
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), injected.begin(), injected.end());
    return args;
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(10) << x;
    return os.str();
}

// ---------------------------------------------------------------------------
// update-demo

struct DemoOptions {
    double prior_mean = 0.0;
    double prior_var = 1.0;
    std::string next_means = "-2,-2,4.5";
    std::string next_vars = "2,0.5,0.5";
    double r = 0.0;
    double gamma = 0.9;
    double sigma_w = 0.0;
    bool terminal = false;
};

int run_update_demo(const DemoOptions& o) {
    UpdateProblem p;
    p.prior = {o.prior_mean, o.prior_var};
    p.r = o.r;
    p.gamma = o.gamma;
    p.sigma_w = o.sigma_w;
    p.terminal = o.terminal;
    const auto means = parse_doubles(o.next_means, "--next-means");
    const auto vars = parse_doubles(o.next_vars, "--next-vars");
    if (means.size() != vars.size()) throw ConfigError("--next-means and --next-vars differ in length");
    if (means.empty() && !o.terminal) throw ConfigError("need at least one next-state action");
    if (!(o.prior_var > 0.0)) throw ConfigError("--prior-var must be positive");
    if (!(o.gamma >= 0.0 && o.gamma < 1.0)) throw ConfigError("--gamma must lie in [0, 1)");
    if (!(o.sigma_w >= 0.0)) throw ConfigError("--sigma-w must be nonnegative");
    for (std::size_t b = 0; b < means.size(); ++b) {
        if (!(vars[b] > 0.0)) throw ConfigError("--next-vars entries must be positive");
        p.next.push_back({means[b], vars[b]});
    }

    const UpdateResult u = adfq_update(p);
    std::cout << "prior          mean=" << fmt(p.prior.mean) << " var=" << fmt(p.prior.variance) << "\n";
    std::cout << "transition     r=" << fmt(p.r) << " gamma=" << fmt(p.gamma) << " sigma_w=" << fmt(p.sigma_w)
              << (p.terminal ? " terminal" : "") << "\n\n";
    std::cout << std::left << std::setw(4) << "b" << std::setw(16) << "m" << std::setw(16) << "v" << std::setw(16)
              << "c" << std::setw(16) << "mu_bar" << std::setw(16) << "var_bar" << std::setw(16) << "mu_star"
              << std::setw(16) << "var_star" << std::setw(16) << "log_k_star" << "weight\n";
    for (const auto& br : u.branches) {
        const auto& c = br.components;
        std::cout << std::setw(4) << br.b + 1 << std::setw(16) << fmt(c.m) << std::setw(16) << fmt(c.v) << std::setw(16)
                  << fmt(c.c) << std::setw(16) << fmt(c.mu_bar) << std::setw(16) << fmt(c.var_bar) << std::setw(16)
                  << fmt(br.mu_star) << std::setw(16) << fmt(br.var_star) << std::setw(16) << fmt(br.log_k_star)
                  << fmt(br.weight) << "\n";
    }
    std::cout << "\nadfq           mean=" << fmt(u.new_mean) << " var=" << fmt(u.new_variance) << "\n";
    try {
        const auto q = quadrature_moments(p);
        std::cout << "quadrature     mean=" << fmt(q.mean) << " var=" << fmt(q.variance) << "\n";
    } catch (const std::exception& e) {
        std::cout << "quadrature     unavailable: " << e.what() << "\n";
    }
    if (!p.single_target() && p.next.size() == 2) {
        const auto e = exact_two_action_moments(p);
        std::cout << "exact          mean=" << fmt(e.mean) << " var=" << fmt(e.variance) << "\n";
    }
    if (!p.next.empty() || p.terminal) {
        const auto L = qlearning_limit_target(p);
        std::cout << "q-learning lim mean=" << fmt(L.mean) << " alpha=" << fmt(L.alpha) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// domains and experiments

struct DomainOptions {
    std::string domain = "loop";
    double slip = 0.0;
    std::string maze_file;
    std::size_t arms = 2;
};

DomainSpec make_domain_spec(const DomainOptions& o) {
    DomainSpec d;
    try {
        d.kind = parse_domain_kind(o.domain);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    d.slip = o.slip;
    d.n_arms = o.arms;
    if (!o.maze_file.empty()) d.maze_text = read_file(o.maze_file);
    if (d.kind == DomainKind::kLoop && !(o.slip >= 0.0 && o.slip <= 0.5)) throw ConfigError("--slip must lie in [0, 0.5] for loop");
    if (d.kind == DomainKind::kMaze && !(o.slip >= 0.0 && o.slip <= 1.0)) throw ConfigError("--slip must lie in [0, 1]");
    if (d.kind == DomainKind::kArms && o.arms < 2) throw ConfigError("--arms must be at least 2");
    try {
        (void)make_domain(d);
    } catch (const MazeParseError& e) {
        throw ConfigError(e.what());
    }
    return d;
}

void add_domain_options(CLI::App* app, DomainOptions& o) {
    app->add_option("--domain", o.domain, "loop, maze or arms")->capture_default_str();
    app->add_option("--slip", o.slip, "probability of executing a different action than chosen")->capture_default_str();
    app->add_option("--maze", o.maze_file, "maze layout file (#, ., S, G, F); built-in layout when empty");
    app->add_option("--arms", o.arms, "number of arms for the arms domain")->capture_default_str();
}

int run_solve(const DomainOptions& o) {
    const DomainSpec d = make_domain_spec(o);
    const TabularMdp mdp = make_domain(d);
    const ActionValues q = optimal_q(mdp);
    std::cout << "state,action,q\n";
    for (StateId s = 0; s < mdp.n_states(); ++s)
        for (ActionId a = 0; a < mdp.n_actions(); ++a) std::cout << s << ',' << a << ',' << detail::format_double(q(s, a)) << '\n';
    return 0;
}

struct ExperimentOptions {
    DomainOptions domain;
    std::string agents;
    std::string policy = "egreedy";
    double epsilon = 0.1;
    double temperature = 1.0;
    std::size_t horizon = 10000;
    std::size_t eval_every = 0;
    std::size_t eval_episodes = 1;
    std::size_t trials = 10;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string sigma_w = "auto";
    double init_var = kDefaultInitialVariance;
    double init_mean_lo = 0.0;
    double init_mean_hi = 1.0;
    double var_floor = kDefaultVarianceFloor;
    std::size_t quad_points = 2001;
    double alpha0 = 0.5;
    double n0 = 100.0;
    std::string output;
    bool timing = false;
};

void add_experiment_options(CLI::App* app, ExperimentOptions& o) {
    add_domain_options(app, o.domain);
    app->add_option("--agents", o.agents, "comma list of adfq, adfq-numeric, qlearning")->capture_default_str();
    app->add_option("--horizon", o.horizon, "learning steps per trial")->capture_default_str();
    app->add_option("--eval-every", o.eval_every, "steps between records; 0 means horizon/100")->capture_default_str();
    app->add_option("--eval-episodes", o.eval_episodes, "greedy rollouts averaged per record")->capture_default_str();
    app->add_option("--trials", o.trials, "independent trials")->capture_default_str();
    app->add_option("--seed", o.seed, "base seed for every random stream (required)");
    app->add_option("--jobs", o.jobs, "trials run in parallel; output does not depend on it")->capture_default_str();
    app->add_option("--sigma-w", o.sigma_w, "likelihood noise std; auto is 0 on deterministic domains, 0.01 otherwise")
        ->capture_default_str();
    app->add_option("--init-var", o.init_var, "initial belief variance")->capture_default_str();
    app->add_option("--init-mean-lo", o.init_mean_lo, "initial means are uniform on [lo, hi)")->capture_default_str();
    app->add_option("--init-mean-hi", o.init_mean_hi, "initial means are uniform on [lo, hi)")->capture_default_str();
    app->add_option("--var-floor", o.var_floor, "lower bound on belief variances")->capture_default_str();
    app->add_option("--quad-points", o.quad_points, "grid size for adfq-numeric")->capture_default_str();
    app->add_option("--alpha0", o.alpha0, "q-learning rate scale")->capture_default_str();
    app->add_option("--n0", o.n0, "q-learning rate offset: alpha_t = alpha0 (n0 + 1) / (n0 + t)")->capture_default_str();
    app->add_option("--output", o.output, "output directory (default $ADFQ_OUTPUT_DIR, else ./results)");
    app->add_flag("--timing", o.timing, "fill wall_ms; makes output run dependent");
}

ExperimentConfig make_experiment_config(const ExperimentOptions& o, const CLI::App* app) {
    if (app->count("--seed") == 0) throw ConfigError("--seed is required");
    ExperimentConfig c;
    c.domain = make_domain_spec(o.domain);
    c.agents.clear();
    try {
        for (const auto& a : split_list(o.agents)) c.agents.push_back(parse_agent_kind(a));
        c.policy.kind = parse_policy_kind(o.policy);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    c.policy.epsilon = o.epsilon;
    c.policy.temperature = o.temperature;
    c.horizon = o.horizon;
    c.eval_every = o.eval_every;
    c.eval_episodes = o.eval_episodes;
    c.n_trials = o.trials;
    c.seed = o.seed;
    c.jobs = o.jobs == 0 ? 1 : o.jobs;
    c.record_wall_time = o.timing;
    if (o.sigma_w != "auto") {
        const auto v = parse_doubles(o.sigma_w, "--sigma-w");
        if (v.size() != 1) throw ConfigError("--sigma-w takes one number or auto");
        c.sigma_w = v[0];
    }
    c.params.init.variance = o.init_var;
    c.params.init.mean_lo = o.init_mean_lo;
    c.params.init.mean_hi = o.init_mean_hi;
    c.params.variance_floor = o.var_floor;
    c.params.quadrature_points = o.quad_points;
    c.params.alpha0 = o.alpha0;
    c.params.n0 = o.n0;
    if (o.quad_points < 1001) throw ConfigError("--quad-points must be at least 1001");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("ADFQ_OUTPUT_DIR"); env && *env) return env;
    return "results";
}

void write_runs(const ExperimentConfig& c, const std::vector<AgentRun>& runs, const std::string& policy, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& run : runs) {
        const std::string stem = run_file_stem(c.domain, run.agent, policy);
        const fs::path raw = dir / (stem + ".csv");
        const fs::path mean = dir / (stem + "_mean.csv");
        std::ofstream out(raw, std::ios::binary);
        write_records_csv(out, run.records);
        std::ofstream mout(mean, std::ios::binary);
        write_mean_csv(mout, average_over_trials(run.records));
        if (!out || !mout) throw std::runtime_error("failed writing " + raw.string());
        const auto& last = run.records.back();
        double final_rmse = 0.0, final_ret = 0.0;
        std::size_t n = 0;
        for (const auto& r : run.records)
            if (r.step == last.step) final_rmse += r.rmse, final_ret += r.greedy_return, ++n;
        std::cout << raw.string() << "  final rmse=" << fmt(final_rmse / n) << " greedy_return=" << fmt(final_ret / n) << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ADFQ: Bayesian Q-learning by assumed density filtering"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_help_all_flag("--help-all", "help for every subcommand");
    app.add_option("--config", "flat key = value file; command-line options override it");

    DemoOptions demo;
    auto* demo_cmd = app.add_subcommand("update-demo", "one belief update with per-branch diagnostics");
    demo_cmd->add_option("--prior-mean", demo.prior_mean, "mean of Q(s, a)")->capture_default_str();
    demo_cmd->add_option("--prior-var", demo.prior_var, "variance of Q(s, a)")->capture_default_str();
    demo_cmd->add_option("--next-means", demo.next_means, "comma list of next-state means")->capture_default_str();
    demo_cmd->add_option("--next-vars", demo.next_vars, "comma list of next-state variances")->capture_default_str();
    demo_cmd->add_option("--reward", demo.r, "observed reward")->capture_default_str();
    demo_cmd->add_option("--gamma", demo.gamma, "discount")->capture_default_str();
    demo_cmd->add_option("--sigma-w", demo.sigma_w, "likelihood noise std")->capture_default_str();
    demo_cmd->add_flag("--terminal", demo.terminal, "next state is terminal");

    DomainOptions solve;
    auto* solve_cmd = app.add_subcommand("solve", "print Q* of a domain as CSV");
    add_domain_options(solve_cmd, solve);

    ExperimentOptions conv;
    conv.domain.domain = "arms";
    conv.agents = "adfq,qlearning";
    conv.trials = 5;
    conv.horizon = 5000;
    auto* conv_cmd = app.add_subcommand("convergence", "RMSE to Q* on fixed uniform-random trajectories");
    add_experiment_options(conv_cmd, conv);

    ExperimentOptions learn;
    learn.agents = "adfq";
    auto* learn_cmd = app.add_subcommand("learn", "online learning with periodic greedy evaluation");
    add_experiment_options(learn_cmd, learn);
    learn_cmd->add_option("--policy", learn.policy, "egreedy, boltzmann, ts or uniform")->capture_default_str();
    learn_cmd->add_option("--epsilon", learn.epsilon, "exploration rate for egreedy")->capture_default_str();
    learn_cmd->add_option("--temperature", learn.temperature, "boltzmann temperature")->capture_default_str();

    std::size_t oc_trials = 1000;
    std::uint64_t oc_seed = 0;
    auto* oracle_cmd = app.add_subcommand("oracle-check", "random sweep of the analytic update against the oracles");
    oracle_cmd->add_option("--trials", oc_trials, "random configurations")->capture_default_str();
    oracle_cmd->add_option("--seed", oc_seed, "seed (required)");

    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << "\n" << app.help();
        return kExitConfig;
    }

    try {
        if (*demo_cmd) return run_update_demo(demo);
        if (*solve_cmd) return run_solve(solve);
        if (*conv_cmd) {
            const auto c = make_experiment_config(conv, conv_cmd);
            write_runs(c, run_convergence(c), "uniform", output_dir(conv.output));
            return 0;
        }
        if (*learn_cmd) {
            const auto c = make_experiment_config(learn, learn_cmd);
            write_runs(c, run_learning(c), to_string(c.policy.kind), output_dir(learn.output));
            return 0;
        }
        if (*oracle_cmd) {
            if (oracle_cmd->count("--seed") == 0) throw ConfigError("--seed is required");
            if (oc_trials == 0) throw ConfigError("--trials must be positive");
            Rng rng(derive_seed(oc_seed, {tag(Stream::kOracle)}));
            ProblemRanges ranges;
            double max_adfq_mean = 0.0, max_adfq_var = 0.0, max_exact_mean = 0.0, max_exact_var = 0.0;
            std::size_t n_two = 0, within = 0;
            for (std::size_t t = 0; t < oc_trials; ++t) {
                const UpdateProblem p = sample_problem(rng, ranges);
                const auto q = quadrature_moments(p);
                const auto u = adfq_update(p);
                const double em = std::abs(u.new_mean - q.mean) / std::max(std::abs(q.mean), 1.0);
                max_adfq_mean = std::max(max_adfq_mean, em);
                max_adfq_var = std::max(max_adfq_var, std::abs(u.new_variance - q.variance) / q.variance);
                within += em < 0.05;
                if (p.next.size() == 2) {
                    ++n_two;
                    const auto e = exact_two_action_moments(p);
                    max_exact_mean = std::max(max_exact_mean, std::abs(e.mean - q.mean) / std::max(std::abs(q.mean), 1.0));
                    max_exact_var = std::max(max_exact_var, std::abs(e.variance - q.variance) / q.variance);
                }
            }
            std::cout << "configurations           " << oc_trials << "\n";
            std::cout << "adfq vs quadrature       max rel mean err " << fmt(max_adfq_mean) << "  max rel var err "
                      << fmt(max_adfq_var) << "  mean err < 5% in " << within << "\n";
            std::cout << "exact vs quadrature      max rel mean err " << fmt(max_exact_mean) << "  max rel var err "
                      << fmt(max_exact_var) << "  over " << n_two << " two-action cases\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
