#include "commands.hpp"

#include "itdre/csv.hpp"
#include "itdre/ensemble.hpp"
#include "itdre/errors.hpp"
#include "itdre/model_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <ostream>

namespace itdre::cli {

namespace {

using json = nlohmann::json;

LossFamily family_or_throw(const std::string& name, const char* flag) {
    const auto f = parse_family(name);
    if (!f) {
        throw InvalidConfig(fmt::format("{}: unknown loss family '{}'", flag, name));
    }
    return *f;
}

SampleWeighting weighting_or_throw(const std::string& name) {
    const auto w = parse_weighting(name);
    if (!w) {
        throw InvalidConfig(fmt::format("--weighting: unknown weighting '{}'", name));
    }
    return *w;
}

KernelSpec make_kernel(const KernelOptions& k, const Points& x_p, const Points& x_q) {
    if (k.kernel == "gaussian") {
        if (k.bandwidth < 0.0) {
            throw InvalidConfig("--bandwidth: must be >= 0 (0 selects the median heuristic)");
        }
        return KernelSpec::gaussian(k.bandwidth > 0.0 ? k.bandwidth : median_bandwidth(stack(x_p, x_q)));
    }
    if (k.kernel == "sobolev") {
        if (x_p.cols() != 1) {
            throw InvalidConfig("--kernel sobolev: needs one-dimensional data");
        }
        return KernelSpec::periodic_sobolev(k.order);
    }
    throw InvalidConfig(fmt::format("--kernel: unknown kernel '{}'", k.kernel));
}

std::string emit(const Globals& g, RunRecord& rec, const std::string& name) {
    rec.outputs.push_back(name);
    return (g.out_dir / name).string();
}

void write_mixture_dataset(const MixturePairProblem& problem, const Points& x_p, const Points& x_q, const Globals& g,
                           RunRecord& rec) {
    write_dataset_csv(emit(g, rec, "dataset.csv"), x_p, x_q);
    std::ofstream out(emit(g, rec, "exact_ratio.csv"), std::ios::binary);
    out << "row,label,beta\n";
    std::size_t row = 0;
    auto dump = [&](const Points& x, int label) {
        const Eigen::VectorXd beta = problem.exact_ratios(x);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out << ++row << ',' << label << ',' << format_double(beta[i]) << '\n';
        }
    };
    dump(x_p, 1);
    dump(x_q, -1);
}

json mixture_json(const GaussianMixture& m) {
    json comps = json::array();
    for (std::size_t j = 0; j < m.components(); ++j) {
        const auto& mu = m.means()[j];
        const auto& cov = m.covariances()[j];
        comps.push_back({{"weight", m.weights()[j]},
                         {"mean", std::vector<double>(mu.data(), mu.data() + mu.size())},
                         {"covariance", std::vector<double>(cov.data(), cov.data() + cov.size())}});
    }
    return comps;
}

}  // namespace

int cmd_generate(const GenerateOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
    if (o.samples < 0) {
        throw InvalidConfig("--samples: must be >= 0");
    }
    std::filesystem::create_directories(g.out_dir);
    rec.seeds.push_back(g.seed);
    const auto n = static_cast<std::size_t>(o.samples);
    json manifest = {{"seed", g.seed}, {"generator", o.kind}, {"exact_ratio_available", true}};
    if (o.kind == "geometric" || o.kind == "saturation") {
        if (o.kind == "geometric" && o.dimension < 1) {
            throw InvalidConfig("--dimension: must be >= 1");
        }
        if (o.kind == "saturation" && (o.components < 1 || o.components > 3)) {
            throw InvalidConfig("--components: must be 1, 2 or 3");
        }
        const MixturePairProblem problem =
            o.kind == "geometric" ? make_geometric_problem(g.seed, o.dimension) : make_saturation_problem(o.components);
        const Points x_p = problem.p.sample(n, derive_seed(g.seed, 1));
        const Points x_q = problem.q.sample(n, derive_seed(g.seed, 2));
        write_mixture_dataset(problem, x_p, x_q, g, rec);
        manifest["parameters"] = {{"samples_per_class", o.samples},
                                  {"dimension", problem.dimension()},
                                  {"p", mixture_json(problem.p)},
                                  {"q", mixture_json(problem.q)}};
        if (o.kind == "saturation") {
            manifest["parameters"]["components"] = o.components;
        }
    } else if (o.kind == "regularity") {
        if (o.grid_size < 512) {
            throw InvalidConfig("--grid-size: must be >= 512");
        }
        RegularityProblem problem;
        try {
            problem = make_regularity_problem(o.alpha, o.r, static_cast<std::size_t>(o.grid_size));
        } catch (const UnsupportedOrder& e) {
            throw InvalidConfig(fmt::format("--alpha/--r: {}", e.what()));
        }
        const auto count_p = static_cast<std::size_t>(std::llround(problem.pi * static_cast<double>(n)));
        const auto [x_p, x_q] = sample_regularity(problem, count_p, n - count_p, g.seed);
        write_dataset_csv(emit(g, rec, "dataset.csv"), x_p, x_q);
        std::ofstream grid(emit(g, rec, "grid.csv"), std::ios::binary);
        grid << "x,f_h,eta,p,q,beta\n";
        for (std::size_t i = 0; i < problem.grid.size(); ++i) {
            grid << format_double(problem.grid[i]) << ',' << format_double(problem.f_h[i]) << ','
                 << format_double(problem.eta[i]) << ',' << format_double(problem.p[i]) << ','
                 << format_double(problem.q[i]) << ',' << format_double(problem.beta[i]) << '\n';
        }
        manifest["parameters"] = {{"samples", o.samples},      {"alpha", o.alpha},
                                  {"r", o.r},                  {"grid_size", o.grid_size},
                                  {"score_order", problem.score_order}, {"pi", problem.pi},
                                  {"count_p", count_p},        {"count_q", n - count_p}};
    } else {
        throw InvalidConfig(fmt::format("--kind: unknown dataset kind '{}'", o.kind));
    }
    write_json(emit(g, rec, "dataset.manifest.json"), manifest);
    out << fmt::format("wrote {} files to {}\n", rec.outputs.size(), g.out_dir.string());
    return 0;
}

int cmd_fit(const FitOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
    const Dataset data = read_dataset_csv(o.data);
    const LossFamily family = family_or_throw(o.family, "--family");
    if (!(o.lambda > 0.0)) {
        throw InvalidConfig("--lambda: must be positive");
    }
    if (o.t < 1) {
        throw InvalidConfig("--t: must be >= 1");
    }
    CgOptions cg;
    cg.weighting = weighting_or_throw(o.weighting);
    cg.target_eps = o.target_eps;
    cg.max_cg_iterations = o.max_cg_iterations;
    const KernelSpec kernel = make_kernel(o.kernel, data.x_p, data.x_q);
    std::filesystem::create_directories(g.out_dir);
    const TrainingSet train(data.x_p, data.x_q, kernel);
    try {
        const FitResult res = fit(train, family, o.lambda, o.t, cg);
        save_model(res.model(), emit(g, rec, "model.json"));
        json report = report_to_json(res.report);
        report.erase("wall_seconds");
        write_json(emit(g, rec, "fit_report.json"), report);
        out << report.dump(2) << '\n';
    } catch (const LineSearchFailure& e) {
        const json partial = {{"error", e.what()}, {"iteration", e.iteration()}, {"cg_iteration", e.cg_iteration()}};
        write_json(emit(g, rec, "fit_report.json"), partial);
        out << partial.dump(2) << '\n';
        return 1;
    }
    return 0;
}

int cmd_select(const SelectOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
    const Dataset data = read_dataset_csv(o.data);
    const LossFamily family = family_or_throw(o.family, "--family");
    SelectionConfig cfg;
    cfg.lambda_grid = o.lambda_grid;
    cfg.t_grid = o.t_grid;
    cfg.fractions = o.split;
    cfg.seed = g.seed;
    cfg.cg.weighting = weighting_or_throw(o.weighting);
    rec.seeds.push_back(g.seed);
    const SplitData split = split_data(data.x_p, data.x_q, cfg);
    const KernelSpec kernel = make_kernel(o.kernel, split.p_train, split.q_train);
    SelectionResult res = pick(evaluate_grid(split, family, kernel, cfg));
    res.seed = g.seed;
    std::filesystem::create_directories(g.out_dir);
    save_model(res.model, emit(g, rec, "model.json"));
    const json doc = selection_to_json(res);
    write_json(emit(g, rec, "selection.json"), doc);
    out << doc["chosen"].dump() << '\n';
    return 0;
}

int cmd_benchmark(const BenchmarkOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
    GeometricConfig cfg;
    cfg.dataset_count = o.datasets;
    cfg.sample_count = o.samples;
    if (o.seeds < 1) {
        throw InvalidConfig("--seeds: must be >= 1");
    }
    cfg.seeds = seed_range(g.seed, static_cast<std::size_t>(o.seeds));
    cfg.dimension = o.dimension;
    cfg.dataset_seed = g.seed;
    cfg.families.clear();
    for (const auto& f : o.families) {
        cfg.families.push_back(family_or_throw(f, "--families"));
    }
    cfg.lambda_grid = o.lambda_grid;
    cfg.t_grid = o.t_grid;
    cfg.validate();
    const GeometricResult res = run_geometric_benchmark(cfg);
    write_geometric(res, g.out_dir);
    for (const char* f : {"geometric_table.csv", "geometric_cells.csv", "geometric_table.manifest.json"}) {
        rec.outputs.push_back(f);
    }
    rec.seeds = cfg.seeds;
    for (auto f : cfg.families) {
        out << fmt::format("{}: non-iterated {:.6g}, iterated {:.6g}\n", to_string(f), res.average(f, false),
                           res.average(f, true));
    }
    return 0;
}

int cmd_rate_study(const RateStudyOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
    RateStudyConfig cfg;
    cfg.alpha = o.alpha;
    cfg.r = o.r;
    cfg.t_values = o.t_values;
    cfg.sizes = o.sizes;
    if (o.seeds < 1) {
        throw InvalidConfig("--seeds: must be >= 1");
    }
    cfg.seeds = seed_range(g.seed, static_cast<std::size_t>(o.seeds));
    cfg.c_values = o.c_values;
    if (o.grid_size < 512) {
        throw InvalidConfig("--grid-size: must be >= 512");
    }
    cfg.grid_size = static_cast<std::size_t>(o.grid_size);
    cfg.family = family_or_throw(o.family, "--family");
    if (o.link == "prior_adjusted") {
        cfg.link = LinkMode::prior_adjusted;
    } else if (o.link == "plain") {
        cfg.link = LinkMode::plain;
    } else {
        throw InvalidConfig(fmt::format("--link: unknown link mode '{}'", o.link));
    }
    cfg.bootstrap_resamples = o.bootstrap;
    cfg.bootstrap_seed = g.seed;
    try {
        cfg.validate();
    } catch (const UnsupportedOrder& e) {
        throw InvalidConfig(fmt::format("--alpha/--r: {}", e.what()));
    }
    const RateStudyResult res = run_rate_study(cfg);
    write_rate_study(res, g.out_dir);
    for (const char* f : {"rate_study.csv", "rate_slopes.json", "rate_study.manifest.json"}) {
        rec.outputs.push_back(f);
    }
    rec.seeds = cfg.seeds;
    for (const auto& c : res.best) {
        out << fmt::format("t={}: c={:g} slope={:.4f} [{:.4f}, {:.4f}]\n", c.t, c.c, c.fit.slope, c.ci_low, c.ci_high);
    }
    return 0;
}

int cmd_saturation(const SaturationOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
    SaturationConfig cfg;
    cfg.components = o.components;
    cfg.sizes = o.sizes;
    if (o.seeds < 1) {
        throw InvalidConfig("--seeds: must be >= 1");
    }
    cfg.seeds = seed_range(g.seed, static_cast<std::size_t>(o.seeds));
    cfg.lambda_grid = o.lambda_grid;
    cfg.t_grid = o.t_grid;
    cfg.bootstrap_resamples = o.bootstrap;
    cfg.bootstrap_seed = g.seed;
    cfg.validate();
    const SaturationResult res = run_mixture_saturation_study(cfg);
    write_saturation(res, g.out_dir);
    for (const char* f : {"saturation_study.csv", "saturation_summary.json", "saturation_study.manifest.json"}) {
        rec.outputs.push_back(f);
    }
    rec.seeds = cfg.seeds;
    for (int c : cfg.components) {
        out << fmt::format("components={}: mean improvement {:.6g} (validation), {:.6g} (tuned lambda)\n", c,
                           res.mean_improvement(c), res.mean_improvement(c, SaturationProtocol::tuned));
    }
    return 0;
}

int cmd_ensemble(const EnsembleOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
    if (o.candidates.empty() || o.labels.empty()) {
        throw InvalidConfig("--candidates and --labels are required");
    }
    CandidateFiles files;
    for (const auto& c : o.candidates) {
        files.candidate_files.emplace_back(c);
    }
    files.labels_file = o.labels;
    if (!o.weights.empty()) {
        files.weights_file = o.weights;
    } else if (!o.model.empty() && !o.features.empty()) {
        files.ratio_model = load_model(o.model);
        files.features_file = o.features;
    } else {
        throw InvalidConfig("--weights or --model with --features is required");
    }
    EnsembleProblem problem = ingest_candidates(files);
    problem.rcond_grid = o.rcond;
    const auto trunc = parse_truncation(o.truncation);
    if (!trunc) {
        throw InvalidConfig(fmt::format("--truncation: unknown mode '{}'", o.truncation));
    }
    problem.truncation = *trunc;
    const EnsembleWeights w = solve_ensemble(problem);

    EnsembleEvaluation ev;
    if (!o.target_candidates.empty()) {
        if (o.target_labels.empty()) {
            throw InvalidConfig("--target-labels is required with --target-candidates");
        }
        CandidateFiles target;
        for (const auto& c : o.target_candidates) {
            target.candidate_files.emplace_back(c);
        }
        target.labels_file = o.target_labels;
        target.require_weights = false;
        const EnsembleProblem tp = ingest_candidates(target);
        ev = evaluate_ensemble(w, tp.candidates, tp.labels);
    } else {
        ev = evaluate_ensemble(w, problem.candidates, problem.labels);
    }
    std::filesystem::create_directories(g.out_dir);
    const json doc = ensemble_to_json(w, ev);
    write_json(emit(g, rec, "ensemble.json"), doc);
    out << fmt::format("averaged accuracy {:.6g}\n", ev.averaged_accuracy);
    return 0;
}

}  // namespace itdre::cli
