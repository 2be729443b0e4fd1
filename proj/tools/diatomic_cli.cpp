// Command-line front end: loads an MDP (or a distribution for `avar`), runs one
// solver and writes trace.csv and result.json into the output directory.

#include "diatomic/diatomic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace diatomic;

struct RunConfig {
    std::string command;
    std::string input;
    double alpha = 0.5;
    std::optional<double> gamma;
    double tol = 1e-10;
    std::size_t max_iter = 10'000;
    std::string policy = "uniform";
    std::string nu0 = "uniform";
    std::size_t k = 30;
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string dump_lp;
    std::string init;
    double prune_eps = 0.0;
};

class Csv {
public:
    Csv(const std::filesystem::path& path, const std::string& header) : out_(path, std::ios::binary) {
        if (!out_) throw ParseError(path.string(), 0, 0, "cannot write file");
        out_ << std::setprecision(17) << header << "\n";
    }
    template <class... Fields>
    void row(const Fields&... fields) {
        std::size_t i = 0;
        ((out_ << (i++ ? "," : "") << fields), ...);
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

Json table_json(const Mdp& mdp, const QTable& q) {
    Json out = Json::object();
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : mdp.actions(x)) out[mdp.state_names()[x]][mdp.action_names()[a]] = q(x, a);
    }
    return out;
}

Json state_json(const Mdp& mdp, const std::vector<double>& v) {
    Json out = Json::object();
    for (StateId x = 0; x < mdp.n_states(); ++x) out[mdp.state_names()[x]] = v[x];
    return out;
}

Json action_sets_json(const Mdp& mdp, const std::vector<std::vector<ActionId>>& sets) {
    Json out = Json::object();
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        Json list = Json::array();
        for (ActionId a : sets[x]) list.push_back(mdp.action_names()[a]);
        out[mdp.state_names()[x]] = list;
    }
    return out;
}

Json policy_json(const Mdp& mdp, const Policy& policy) {
    Json out = Json::object();
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : policy.support(x)) out[mdp.state_names()[x]][mdp.action_names()[a]] = policy(x, a);
    }
    return out;
}

IterationControl budgeted(const RunConfig& cfg) { return {cfg.tol, cfg.max_iter, false}; }

Mdp load_input_mdp(const RunConfig& cfg) {
    Mdp mdp = load_mdp(cfg.input);
    return cfg.gamma ? mdp.with_gamma(*cfg.gamma) : mdp;
}

void finish(const RunConfig& cfg, Json result) {
    result["command"] = cfg.command;
    save_json((std::filesystem::path(cfg.out) / "result.json").string(), result);
}

int run_eval(const RunConfig& cfg) {
    const Mdp mdp = load_input_mdp(cfg);
    const Policy policy = parse_policy(mdp, cfg.policy);
    Csv trace(std::filesystem::path(cfg.out) / "trace.csv", "iter,x,a,q,residual");
    auto fp = iterate_to_fixed_point(
        QTable(mdp.n_states(), mdp.n_actions(), 0.0),
        [&](const QTable& q) { return bellman_policy_op(mdp, policy, q); },
        [](const QTable& l, const QTable& r) { return sup_distance(l, r); }, budgeted(cfg),
        [&](std::size_t iter, const QTable& q, double residual) {
            for (StateId x = 0; x < mdp.n_states(); ++x) {
                for (ActionId a : mdp.actions(x)) {
                    trace.row(iter, mdp.state_names()[x], mdp.action_names()[a], q(x, a), residual);
                }
            }
        },
        "policy evaluation");
    finish(cfg, {{"q", table_json(mdp, fp.value)},
                 {"v", state_json(mdp, state_values(fp.value, policy))},
                 {"residual", fp.residual},
                 {"iterations", fp.iterations},
                 {"converged", fp.converged}});
    std::cout << "policy evaluation: " << fp.iterations << " iterations, residual " << fp.residual << "\n";
    return 0;
}

int run_spe(const RunConfig& cfg) {
    const Mdp mdp = load_input_mdp(cfg);
    const Policy policy = parse_policy(mdp, cfg.policy);
    const SpeResult result = spe(mdp, policy, cfg.alpha, budgeted(cfg), true, threads_from_env());
    Csv trace(std::filesystem::path(cfg.out) / "trace.csv", "iter,x,a,q1,q2,residual");
    for (const SpeStep& step : result.trace) {
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            for (ActionId a : mdp.actions(x)) {
                trace.row(step.iteration, mdp.state_names()[x], mdp.action_names()[a], step.value.q1(x, a),
                          step.value.q2(x, a), step.residual);
            }
        }
    }
    const auto [v1, v2] = bavar_state_values(policy, result.value);
    finish(cfg, {{"alpha", cfg.alpha},
                 {"q1", table_json(mdp, result.value.q1)},
                 {"q2", table_json(mdp, result.value.q2)},
                 {"v1", state_json(mdp, v1)},
                 {"v2", state_json(mdp, v2)},
                 {"alpha_coherent", is_alpha_coherent(mdp, policy, result.value, 1e-8)},
                 {"residual", result.residual},
                 {"iterations", result.iterations},
                 {"converged", result.converged}});
    std::cout << "spe: " << result.iterations << " iterations, residual " << result.residual << "\n";
    return 0;
}

int run_dbo(const RunConfig& cfg) {
    const Mdp mdp = load_input_mdp(cfg);
    const Policy policy = parse_policy(mdp, cfg.policy);
    const DiscreteDist init = cfg.init.empty() ? DiscreteDist::dirac(0.0) : load_dist(cfg.init);
    Csv trace(std::filesystem::path(cfg.out) / "trace.csv", "iter,x,a,value,prob");
    auto dump = [&](std::size_t iter, const DistFunction& mu) {
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            for (ActionId a : mdp.actions(x)) {
                for (const Atom& atom : mu(x, a).atoms()) {
                    trace.row(iter, mdp.state_names()[x], mdp.action_names()[a], atom.value, atom.prob);
                }
            }
        }
    };
    DistFunction mu = constant_dist_function(mdp, init);
    dump(0, mu);
    mu = dbo_iterate(mdp, policy, std::move(mu), cfg.k, {cfg.prune_eps, FissionOptions{}.atom_cap, threads_from_env()},
                     dump);
    Json entries = Json::object();
    for (StateId x = 0; x < mdp.n_states(); ++x) {
        for (ActionId a : mdp.actions(x)) {
            const DiscreteDist& d = mu(x, a);
            entries[mdp.state_names()[x]][mdp.action_names()[a]] = {{"atoms", d.size()},
                                                                   {"expectation", expectation(d)},
                                                                   {"avar_left", avar_left(d, cfg.alpha)},
                                                                   {"avar_right", avar_right(d, 1.0 - cfg.alpha)}};
        }
    }
    finish(cfg, {{"k", cfg.k},
                 {"alpha", cfg.alpha},
                 {"prune_eps", cfg.prune_eps},
                 {"tail_bound", fission_tail_bound(mdp, cfg.k)},
                 {"entries", entries}});
    std::cout << "dbo: " << cfg.k << " steps, " << total_atoms(mu) << " atoms\n";
    return 0;
}

int run_control(const RunConfig& cfg, ControlMode mode) {
    const Mdp mdp = load_input_mdp(cfg);
    const ControlResult result = svi(mdp, mode, cfg.alpha, budgeted(cfg), true);
    Csv trace(std::filesystem::path(cfg.out) / "trace.csv", "iter,x,a,q1,q2,residual");
    for (const ControlStep& step : result.trace) {
        for (StateId x = 0; x < mdp.n_states(); ++x) {
            for (ActionId a : mdp.actions(x)) {
                trace.row(step.iteration, mdp.state_names()[x], mdp.action_names()[a], step.q1(x, a), step.q2(x, a),
                          step.residual);
            }
        }
    }
    finish(cfg, {{"mode", to_string(mode)},
                 {"alpha", cfg.alpha},
                 {"q1", table_json(mdp, result.q1)},
                 {"q2", table_json(mdp, result.q2)},
                 {"v_star", state_json(mdp, result.v_star)},
                 {"action_sets", action_sets_json(mdp, result.action_sets)},
                 {"representative_policy", policy_json(mdp, representative_policy(mdp, result))},
                 {"residual", result.residual},
                 {"iterations", result.iterations},
                 {"converged", result.converged}});
    std::cout << to_string(mode) << " svi: " << result.iterations << " iterations, residual " << result.residual
              << "\n";
    return 0;
}

int run_robust(const RunConfig& cfg) {
    const Mdp mdp = load_input_mdp(cfg);
    const Policy policy = parse_policy(mdp, cfg.policy);
    const WorstBestResult wb = worst_best_case(mdp, policy, cfg.alpha);
    Json kernel = Json::array();
    bool member = false;
    if (wb.kernel) {
        member = in_uncertainty_set(mdp, cfg.alpha, *wb.kernel).member;
        for (std::size_t s = 0; s < wb.kernel->n_augmented(); ++s) {
            for (ActionId a : policy.support(original_state(s))) {
                for (std::size_t t = 0; t < wb.kernel->n_augmented(); ++t) {
                    const double p = (*wb.kernel)(s, a, t);
                    if (p == 0.0) continue;
                    auto name = [&](std::size_t u) {
                        return mdp.state_names()[original_state(u)] + (is_worst_substate(u) ? "_worst" : "_best");
                    };
                    kernel.push_back({{"from", name(s)}, {"action", mdp.action_names()[a]}, {"to", name(t)}, {"p", p}});
                }
            }
        }
    }
    finish(cfg, {{"alpha", cfg.alpha},
                 {"worst", state_json(mdp, wb.v_worst)},
                 {"best", state_json(mdp, wb.v_best)},
                 {"spe_v1", state_json(mdp, wb.spe_v1)},
                 {"spe_v2", state_json(mdp, wb.spe_v2)},
                 {"max_deviation", wb.max_deviation},
                 {"common_kernel", wb.common_kernel},
                 {"tied", wb.tied},
                 {"candidates", wb.candidates},
                 {"kernel_in_uncertainty_set", member},
                 {"kernel", kernel}});
    std::cout << "robust-verify: max deviation " << wb.max_deviation << " over " << wb.candidates << " kernels\n";
    if (wb.max_deviation > 1e-7 || !wb.common_kernel || !member) {
        std::cerr << "robust-verify: worst/best values disagree with SPE\n";
        return 3;
    }
    return 0;
}

int run_risky_lp(const RunConfig& cfg) {
    const Mdp mdp = load_input_mdp(cfg);
    const std::vector<double> nu0 = parse_weights(cfg.nu0, mdp.n_states());
    const DualityReport report = duality_gap_check(mdp, cfg.alpha, nu0);
    if (!cfg.dump_lp.empty()) {
        const auto v_star = optimal_values(mdp);
        std::ofstream primal(cfg.dump_lp, std::ios::binary);
        std::ofstream dual(cfg.dump_lp + ".dual", std::ios::binary);
        if (!primal || !dual) throw ParseError(cfg.dump_lp, 0, 0, "cannot write file");
        write_lp_text(primal, build_risky_primal(mdp, cfg.alpha, nu0, v_star).lp);
        write_lp_text(dual, build_risky_dual(mdp, cfg.alpha, nu0, v_star).lp);
    }
    Json support = Json::array();
    for (const auto& e : report.dual_support) {
        support.push_back({{"x", mdp.state_names()[e.x]}, {"a", mdp.action_names()[e.a]}, {"sigma", e.sigma}, {"p", e.mass}});
    }
    finish(cfg, {{"alpha", cfg.alpha},
                 {"nu0", nu0},
                 {"primal_objective", report.primal_objective},
                 {"dual_objective", report.dual_objective},
                 {"gap", report.gap},
                 {"v1_lp", state_json(mdp, report.v1_lp)},
                 {"v1_svi", state_json(mdp, report.v1_svi)},
                 {"max_v1_deviation", report.max_v1_deviation},
                 {"primal_rows", report.primal_rows},
                 {"dual_support", support},
                 {"passed", report.passed}});
    std::cout << std::setprecision(12) << "primal " << report.primal_objective << "\ndual " << report.dual_objective
              << "\ngap " << report.gap << "\n";
    for (StateId x = 0; x < mdp.n_states(); ++x) std::cout << "V1(" << mdp.state_names()[x] << ") " << report.v1_lp[x] << "\n";
    if (!report.passed) {
        std::cerr << "risky-lp: duality gap or SVI agreement check failed\n";
        return 3;
    }
    return 0;
}

int run_avar(const RunConfig& cfg) {
    const DiscreteDist d = load_dist(cfg.input);
    const double left = avar_left(d, cfg.alpha);
    const double right = avar_right(d, 1.0 - cfg.alpha);
    finish(cfg, {{"alpha", cfg.alpha}, {"avar_left", left}, {"avar_right", right}, {"expectation", expectation(d)}});
    std::cout << std::setprecision(17) << "(" << left << ", " << right << ")\n";
    return 0;
}

int dispatch(const RunConfig& cfg) {
    if (!(cfg.tol > 0.0)) throw DomainError("--tol must be positive");
    detail::check_level(cfg.alpha, "--alpha");
    std::filesystem::create_directories(cfg.out);
    if (cfg.command == "eval") return run_eval(cfg);
    if (cfg.command == "spe") return run_spe(cfg);
    if (cfg.command == "dbo") return run_dbo(cfg);
    if (cfg.command == "safe") return run_control(cfg, ControlMode::safe);
    if (cfg.command == "risky") return run_control(cfg, ControlMode::risky);
    if (cfg.command == "robust-verify") return run_robust(cfg);
    if (cfg.command == "risky-lp") return run_risky_lp(cfg);
    return run_avar(cfg);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diatomic distributional dynamic programming on tabular MDPs"};
    app.require_subcommand(1);
    RunConfig cfg;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"eval", "risk-neutral policy evaluation"},
        {"spe", "sorted policy evaluation (left/right AVaR fixed point)"},
        {"dbo", "k steps of the distributional Bellman operator from delta_0"},
        {"safe", "safe sorted value iteration"},
        {"risky", "risky sorted value iteration"},
        {"robust-verify", "brute-force worst/best case over permutation kernels"},
        {"risky-lp", "primal and dual linear programs of risky control"},
        {"avar", "left and right AVaR of a distribution file"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("input", cfg.input, name == "avar" ? "distribution JSON file" : "MDP JSON file")->required();
        sub->add_option("--alpha", cfg.alpha, "risk level in (0, 1)")->capture_default_str();
        sub->add_option("--gamma", cfg.gamma, "override the discount of the MDP file");
        sub->add_option("--tol", cfg.tol, "sup-norm stopping tolerance")->capture_default_str();
        sub->add_option("--max-iter", cfg.max_iter, "iteration budget")->capture_default_str();
        sub->add_option("--policy", cfg.policy, "uniform, always:<action> or a JSON table")->capture_default_str();
        sub->add_option("--nu0", cfg.nu0, "initial weights: uniform, JSON array or comma list")->capture_default_str();
        sub->add_option("--k", cfg.k, "number of distributional Bellman steps")->capture_default_str();
        sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
        sub->add_option("--out", cfg.out, "output directory")->capture_default_str();
        sub->add_option("--dump-lp", cfg.dump_lp, "write the risky LPs in plain-text form to this path");
        sub->add_option("--init", cfg.init, "initial distribution file for dbo (default delta_0)");
        sub->add_option("--prune-eps", cfg.prune_eps, "drop atoms lighter than this after each dbo step")
            ->capture_default_str();
        sub->callback([&cfg, name] { cfg.command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return dispatch(cfg);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << "\n";
        return 3;
    } catch (const PropertyFailure& e) {
        std::cerr << "property failure: " << e.what() << "\n";
        return 3;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const StructuralError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << "\n";
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "resource limit: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
