#pragma once

#include "itdre/experiments.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace itdre::cli {

struct Globals {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    unsigned threads = 0;
    bool verbose = false;
};

/// Filled in by a command: files it wrote and seeds it used.
struct RunRecord {
    std::vector<std::string> outputs;
    nlohmann::json seeds = nlohmann::json::array();
};

struct GenerateOptions {
    std::string kind = "geometric";
    int samples = 1000;
    int dimension = 50;
    int components = 1;
    int alpha = 2;
    double r = 1.25;
    int grid_size = 4096;
};

struct KernelOptions {
    std::string kernel = "gaussian";
    double bandwidth = 0.0;  // 0: median heuristic on the training points
    int order = 2;
};

struct FitOptions {
    std::string data;
    std::string family = "kulsif";
    double lambda = 1.0;
    int t = 1;
    KernelOptions kernel;
    std::string weighting = "pooled";
    double target_eps = 1e-6;
    int max_cg_iterations = 500;
};

struct SelectOptions {
    std::string data;
    std::string family = "kulsif";
    KernelOptions kernel;
    std::vector<double> lambda_grid = default_lambda_grid();
    std::vector<int> t_grid = default_t_grid();
    std::vector<double> split = {0.64, 0.16, 0.20};
    std::string weighting = "pooled";
};

struct BenchmarkOptions {
    int datasets = 5;
    int samples = 1000;
    int seeds = 5;
    int dimension = 10;
    std::vector<std::string> families = {"kulsif"};
    std::vector<double> lambda_grid = default_lambda_grid();
    std::vector<int> t_grid = default_t_grid();
};

struct RateStudyOptions {
    int alpha = 2;
    double r = 1.25;
    std::vector<int> t_values = {1, 8};
    std::vector<int> sizes = {250, 500, 1000, 2000, 4000};
    int seeds = 10;
    std::vector<double> c_values = {0.1, 1.0, 10.0};
    int grid_size = 4096;
    std::string family = "lr";
    std::string link = "prior_adjusted";
    int bootstrap = 200;
};

struct SaturationOptions {
    std::vector<int> components = {1, 2, 3};
    std::vector<int> sizes = {200, 400, 800};
    int seeds = 10;
    std::vector<double> lambda_grid = saturation_lambda_grid();
    std::vector<int> t_grid = default_t_grid();
    int bootstrap = 200;
};

struct EnsembleOptions {
    std::vector<std::string> candidates;
    std::string labels;
    std::string weights;
    std::string model;
    std::string features;
    std::vector<std::string> target_candidates;
    std::string target_labels;
    std::vector<double> rcond = {1e-4, 1e-3, 1e-2, 1e-1};
    std::string truncation = "after_weighting";
};

int cmd_generate(const GenerateOptions& o, const Globals& g, RunRecord& rec, std::ostream& out);
int cmd_fit(const FitOptions& o, const Globals& g, RunRecord& rec, std::ostream& out);
int cmd_select(const SelectOptions& o, const Globals& g, RunRecord& rec, std::ostream& out);
int cmd_benchmark(const BenchmarkOptions& o, const Globals& g, RunRecord& rec, std::ostream& out);
int cmd_rate_study(const RateStudyOptions& o, const Globals& g, RunRecord& rec, std::ostream& out);
int cmd_saturation(const SaturationOptions& o, const Globals& g, RunRecord& rec, std::ostream& out);
int cmd_ensemble(const EnsembleOptions& o, const Globals& g, RunRecord& rec, std::ostream& out);

}  // namespace itdre::cli
