#include "itdre/cli.hpp"

#include "commands.hpp"
#include "json_config.hpp"

#include "itdre/csv.hpp"
#include "itdre/errors.hpp"
#include "itdre/parallel.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <sodium.h>

#include <chrono>
#include <functional>
#include <ostream>

#ifndef ITDRE_VERSION
#define ITDRE_VERSION "0.0.0"
#endif

namespace itdre::cli {

namespace {

using json = nlohmann::json;

const CLI::Validator kEvenAlpha(
    [](std::string& s) -> std::string {
        int v = 0;
        try {
            v = std::stoi(s);
        } catch (const std::exception&) {
            return "must be an integer";
        }
        if (v < 2 || v % 2 != 0) {
            return fmt::format("must be an even integer >= 2, got {}", s);
        }
        return {};
    },
    "EVEN>=2");

void add_kernel_flags(CLI::App* sub, KernelOptions& k) {
    sub->add_option("--kernel", k.kernel, "Kernel: gaussian or sobolev")
        ->check(CLI::IsMember({"gaussian", "sobolev"}))
        ->capture_default_str();
    sub->add_option("--bandwidth", k.bandwidth, "Gaussian bandwidth; 0 uses the median heuristic")
        ->capture_default_str();
    sub->add_option("--order", k.order, "Periodic Sobolev kernel order (even, 2..10)")->capture_default_str();
}

const auto kFamilies = CLI::IsMember({"kulsif", "lr", "exp", "sq"});

std::string sha256_hex(const std::string& text) {
    unsigned char digest[crypto_hash_sha256_BYTES];
    crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(text.data()), text.size());
    char hex[crypto_hash_sha256_BYTES * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
    return hex;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    if (sodium_init() < 0) {
        err << "error: libsodium failed to initialize\n";
        return kExitRuntime;
    }
    CLI::App app{"Density-ratio estimation with iterated regularization", "itdre"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file; flags override its keys");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", ITDRE_VERSION);

    Globals g;
    std::string out_dir = "out";
    app.add_option("--seed", g.seed, "Global seed")->capture_default_str();
    app.add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads; 0 uses all cores, 1 runs serially")->capture_default_str();
    app.add_flag("--verbose", g.verbose, "Log progress to stderr");

    std::function<int(RunRecord&)> action;

    GenerateOptions gen;
    auto* s_gen = app.add_subcommand("generate", "Write a synthetic dataset with known density ratio");
    s_gen->add_option("--kind", gen.kind, "geometric, saturation or regularity")
        ->check(CLI::IsMember({"geometric", "saturation", "regularity"}))
        ->capture_default_str();
    s_gen->add_option("--samples", gen.samples, "Samples per class (total for regularity)")->capture_default_str();
    s_gen->add_option("--dimension", gen.dimension, "Dimension of the geometric problem")->capture_default_str();
    s_gen->add_option("--components", gen.components, "P components for the saturation problem")->capture_default_str();
    s_gen->add_option("--alpha", gen.alpha, "Regularity benchmark kernel order")->check(kEvenAlpha)->capture_default_str();
    s_gen->add_option("--r", gen.r, "Regularity index")->capture_default_str();
    s_gen->add_option("--grid-size", gen.grid_size, "Evaluation grid size")->capture_default_str();
    s_gen->callback([&] { action = [&](RunRecord& rec) { return cmd_generate(gen, g, rec, out); }; });

    FitOptions fit;
    auto* s_fit = app.add_subcommand("fit", "Fit one model and print its report");
    s_fit->add_option("--data", fit.data, "Dataset CSV (label,x1,...,xd)")->required();
    s_fit->add_option("--family", fit.family, "Loss family")->check(kFamilies)->capture_default_str();
    s_fit->add_option("--lambda", fit.lambda, "Regularization parameter")->capture_default_str();
    s_fit->add_option("--t", fit.t, "Number of Tikhonov iterations")->capture_default_str();
    add_kernel_flags(s_fit, fit.kernel);
    s_fit->add_option("--weighting", fit.weighting, "pooled or class_balanced")
        ->check(CLI::IsMember({"pooled", "class_balanced"}))
        ->capture_default_str();
    s_fit->add_option("--target-eps", fit.target_eps, "Target accuracy of the CG solver")->capture_default_str();
    s_fit->add_option("--max-cg-iterations", fit.max_cg_iterations, "CG iteration cap per sub-problem")
        ->capture_default_str();
    s_fit->callback([&] { action = [&](RunRecord& rec) { return cmd_fit(fit, g, rec, out); }; });

    SelectOptions sel;
    auto* s_sel = app.add_subcommand("select", "Choose lambda and t on a validation split");
    s_sel->add_option("--data", sel.data, "Dataset CSV (label,x1,...,xd)")->required();
    s_sel->add_option("--family", sel.family, "Loss family")->check(kFamilies)->capture_default_str();
    add_kernel_flags(s_sel, sel.kernel);
    s_sel->add_option("--lambda-grid", sel.lambda_grid, "Lambda candidates")->delimiter(',')->capture_default_str();
    s_sel->add_option("--t-grid", sel.t_grid, "Iteration-count candidates")->delimiter(',')->capture_default_str();
    s_sel->add_option("--split", sel.split, "Train/val[/test] fractions")->delimiter(',')->capture_default_str();
    s_sel->add_option("--weighting", sel.weighting, "pooled or class_balanced")
        ->check(CLI::IsMember({"pooled", "class_balanced"}))
        ->capture_default_str();
    s_sel->callback([&] { action = [&](RunRecord& rec) { return cmd_select(sel, g, rec, out); }; });

    BenchmarkOptions bench;
    auto* s_bench = app.add_subcommand("benchmark", "Gaussian-mixture benchmark table");
    s_bench->add_option("--datasets", bench.datasets, "Number of random problems")->capture_default_str();
    s_bench->add_option("--samples", bench.samples, "Samples per class")->capture_default_str();
    s_bench->add_option("--seeds", bench.seeds, "Sample draws per problem")->capture_default_str();
    s_bench->add_option("--dimension", bench.dimension, "Data dimension")->capture_default_str();
    s_bench->add_option("--families", bench.families, "Loss families")
        ->delimiter(',')
        ->check(kFamilies)
        ->capture_default_str();
    s_bench->add_option("--lambda-grid", bench.lambda_grid, "Lambda candidates")->delimiter(',')->capture_default_str();
    s_bench->add_option("--t-grid", bench.t_grid, "Iteration-count candidates")->delimiter(',')->capture_default_str();
    s_bench->callback([&] { action = [&](RunRecord& rec) { return cmd_benchmark(bench, g, rec, out); }; });

    RateStudyOptions rate;
    auto* s_rate = app.add_subcommand("rate-study", "Error against sample size on the known-regularity problem");
    s_rate->add_option("--alpha", rate.alpha, "Kernel order")->check(kEvenAlpha)->capture_default_str();
    s_rate->add_option("--r", rate.r, "Regularity index")->capture_default_str();
    s_rate->add_option("--t-values", rate.t_values, "Iteration counts to report")->delimiter(',')->capture_default_str();
    s_rate->add_option("--sizes", rate.sizes, "Increasing sample sizes")->delimiter(',')->capture_default_str();
    s_rate->add_option("--seeds", rate.seeds, "Seeds per size")->capture_default_str();
    s_rate->add_option("--c-values", rate.c_values, "Lambda schedule constants")->delimiter(',')->capture_default_str();
    s_rate->add_option("--grid-size", rate.grid_size, "Evaluation grid size")->capture_default_str();
    s_rate->add_option("--family", rate.family, "Loss family")->check(kFamilies)->capture_default_str();
    s_rate->add_option("--link", rate.link, "prior_adjusted or plain")
        ->check(CLI::IsMember({"prior_adjusted", "plain"}))
        ->capture_default_str();
    s_rate->add_option("--bootstrap", rate.bootstrap, "Bootstrap resamples for slope intervals")->capture_default_str();
    s_rate->callback([&] { action = [&](RunRecord& rec) { return cmd_rate_study(rate, g, rec, out); }; });

    SaturationOptions sat;
    auto* s_sat = app.add_subcommand("saturation-study", "One-dimensional mixture study, KuLSIF against iterated KuLSIF");
    s_sat->add_option("--components", sat.components, "Component counts (1..3)")->delimiter(',')->capture_default_str();
    s_sat->add_option("--sizes", sat.sizes, "Samples per class")->delimiter(',')->capture_default_str();
    s_sat->add_option("--seeds", sat.seeds, "Seeds per cell")->capture_default_str();
    s_sat->add_option("--lambda-grid", sat.lambda_grid, "Lambda candidates")->delimiter(',')->capture_default_str();
    s_sat->add_option("--t-grid", sat.t_grid, "Iteration-count candidates")->delimiter(',')->capture_default_str();
    s_sat->add_option("--bootstrap", sat.bootstrap, "Bootstrap resamples")->capture_default_str();
    s_sat->callback([&] { action = [&](RunRecord& rec) { return cmd_saturation(sat, g, rec, out); }; });

    EnsembleOptions ens;
    auto* s_ens = app.add_subcommand("ensemble", "Importance-weighted least-squares ensemble");
    s_ens->add_option("--candidates", ens.candidates, "Candidate prediction CSVs (sample_id,c1,...)")->delimiter(',');
    s_ens->add_option("--labels", ens.labels, "Source labels CSV (sample_id,label)");
    s_ens->add_option("--weights", ens.weights, "Importance weights CSV (sample_id,weight)");
    s_ens->add_option("--model", ens.model, "Ratio model JSON used when no weights file is given");
    s_ens->add_option("--features", ens.features, "Source features CSV (sample_id,x1,...) for --model");
    s_ens->add_option("--target-candidates", ens.target_candidates, "Target candidate CSVs")->delimiter(',');
    s_ens->add_option("--target-labels", ens.target_labels, "Target labels CSV");
    s_ens->add_option("--rcond", ens.rcond, "Relative singular value cutoffs")->delimiter(',')->capture_default_str();
    s_ens->add_option("--truncation", ens.truncation, "after_weighting or before_weighting")
        ->check(CLI::IsMember({"after_weighting", "before_weighting"}))
        ->capture_default_str();
    s_ens->callback([&] { action = [&](RunRecord& rec) { return cmd_ensemble(ens, g, rec, out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << ITDRE_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    g.out_dir = out_dir;
    set_thread_count(g.threads);

    std::string sub_name;
    for (const CLI::App* sub : app.get_subcommands()) {
        sub_name = sub->get_name();
    }
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    int code = kExitOk;
    try {
        if (g.verbose) {
            err << fmt::format("itdre {}: seed {} threads {}\n", sub_name, g.seed, thread_count());
        }
        code = action(rec);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        // InvalidInput, InvalidConfig, UnsupportedOrder, DegenerateBandwidth, DegenerateWeights
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        code = kExitRuntime;
    }

    json config = json::parse(app.config_to_str(true, false));
    config.erase("config");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json manifest = {{"subcommand", sub_name},
                           {"version", ITDRE_VERSION},
                           {"config", config},
                           {"config_hash", sha256_hex(config.dump())},
                           {"seeds", rec.seeds},
                           {"threads", thread_count()},
                           {"outputs", rec.outputs},
                           {"exit_code", code},
                           {"wall_seconds", wall}};
    try {
        std::filesystem::create_directories(g.out_dir);
        write_json(g.out_dir / "run-manifest.json", manifest);
    } catch (const std::exception& e) {
        err << "error: cannot write run manifest: " << e.what() << '\n';
        return kExitRuntime;
    }
    return code;
}

}  // namespace itdre::cli
