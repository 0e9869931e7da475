/*
 * Copyright 2026 The emgsa Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// emgsa: synthetic cross-subject EMG gesture benchmark.
//
// Subcommands: generate, features, eval, sweep, project, tsne, stats.
// Every command is a pure function of (input files, flags, seed); a JSON run
// manifest is written beside the outputs. Exit codes: 0 success, 1 usage,
// 2 data/format, 3 numeric.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emgsa/eval.hpp"
#include "emgsa/model_io.hpp"
#include "emgsa/synth.hpp"
#include "emgsa/tsne.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace emgsa;

struct Manifest {
    json body;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    Manifest(const std::string& command, std::uint64_t seed) {
        body["command"] = command;
        body["version"] = kVersion;
        body["seed"] = seed;
        body["config"] = json::object();
        body["outputs"] = json::array();
    }
    template <typename T>
    void config(const std::string& key, const T& value) {
        body["config"][key] = value;
    }
    void output(const std::string& path) { body["outputs"].push_back(path); }
    void write(const std::string& path) {
        body["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream out(path);
        if (!out) throw FormatError("cannot open '" + path + "' for writing");
        out << body.dump(2) << "\n";
    }
};

FileFormat parse_format(const std::string& s) {
    if (s == "binary") return FileFormat::binary;
    if (s == "csv") return FileFormat::csv;
    throw ArgumentError("unknown format '" + s + "' (expected binary or csv)");
}

ReductionMethod parse_method(const std::string& s) {
    if (s == "pca") return ReductionMethod::pca;
    if (s == "kpca") return ReductionMethod::kpca;
    if (s == "ica") return ReductionMethod::ica;
    if (s == "tsvd") return ReductionMethod::tsvd;
    throw ArgumentError("unknown reduction method '" + s + "'");
}

KernelSpec::Kind parse_kernel(const std::string& s) {
    if (s == "linear") return KernelSpec::Kind::linear;
    if (s == "cosine") return KernelSpec::Kind::cosine;
    if (s == "polynomial") return KernelSpec::Kind::polynomial;
    throw ArgumentError("unknown kernel '" + s + "'");
}

bool parse_switch(const std::string& s, const char* flag) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw ArgumentError(std::string(flag) + " expects on or off");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (const auto& field : detail::split_line(s)) out.push_back(static_cast<int>(detail::parse_int(field, "--dims")));
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& field : detail::split_line(s)) out.push_back(detail::parse_double(field, "--sigma-grid"));
    return out;
}

// Flags shared by the commands that consume (or synthesize) a feature matrix.
struct InputOptions {
    std::string in_path;
    std::string features_path;
    std::string format = "auto";
    double zc_threshold = 0.0;
    double wamp_threshold = 0.01;
    CohortConfig cohort;

    void add_to(CLI::App* cmd, bool with_cohort = true) {
        cmd->add_option("--in", in_path, "input dataset (binary or csv)");
        cmd->add_option("--features", features_path, "precomputed feature csv (overrides --in)");
        cmd->add_option("--format", format, "input dataset format: auto|binary|csv")->default_val("auto");
        cmd->add_option("--zc-threshold", zc_threshold, "zero-crossing threshold (mV)")->default_val(0.0);
        cmd->add_option("--wamp-threshold", wamp_threshold, "Wilson amplitude threshold (mV)")->default_val(0.01);
        if (with_cohort) {
            cmd->add_option("--subjects", cohort.n_subjects, "synthetic cohort subjects")->default_val(14);
            cmd->add_option("--windows-per-gesture", cohort.windows_per_gesture, "windows per (subject, gesture)")
                ->default_val(150);
            cmd->add_option("--gain-spread", cohort.gain_spread, "per-channel gain spread")->default_val(1.0);
            cmd->add_option("--shift-strength", cohort.shift_strength, "electrode shift mixing strength")
                ->default_val(0.5);
            cmd->add_option("--activation-jitter", cohort.activation_jitter, "per-subject activation jitter")
                ->default_val(0.15);
        }
    }

    FeatureConfig feature_config() const {
        FeatureConfig fc;
        fc.zc_threshold = zc_threshold;
        fc.wamp_threshold = wamp_threshold;
        return fc;
    }

    /// Features from --features, --in, or the seeded synthetic cohort.
    FeatureMatrix load(std::uint64_t seed, Manifest& manifest) {
        manifest.config("zc_threshold", zc_threshold);
        manifest.config("wamp_threshold", wamp_threshold);
        if (!features_path.empty()) {
            manifest.config("features", features_path);
            return load_features_csv(features_path);
        }
        if (!in_path.empty()) {
            manifest.config("in", in_path);
            const Dataset d = format == "auto" ? load_dataset_auto(in_path) : load_dataset(in_path, parse_format(format));
            return extract_matrix(d, feature_config());
        }
        cohort.seed = seed;
        manifest.config("cohort", json::parse("{}"));
        manifest.body["config"]["cohort"] = {{"n_subjects", cohort.n_subjects},
                                             {"windows_per_gesture", cohort.windows_per_gesture},
                                             {"gain_spread", cohort.gain_spread},
                                             {"shift_strength", cohort.shift_strength},
                                             {"activation_jitter", cohort.activation_jitter},
                                             {"seed", cohort.seed}};
        return synth_feature_matrix(cohort, feature_config());
    }
};

struct PipelineOptions {
    std::string mode = "cross_baseline";
    std::string dims = "10";
    std::string reduction = "kpca";
    std::string kernel = "cosine";
    int hidden = -1;
    std::string standardize = "auto";
    std::string l2 = "auto";
    double lambda = -1.0;
    std::string sigma_grid;
    int n_basis = 100;
    int folds = 10;
    std::string stratified = "on";
    std::string kpca_exact = "on";
    int max_train_refs = 2000;
    int jobs = 0;
    bool dims_explicit = false;  // baseline modes get the default reduction attached when --dims is user-set

    void add_to(CLI::App* cmd, const std::string& default_dims) {
        dims = default_dims;
        cmd->add_option("--mode", mode, "pipeline mode")->required();
        cmd->add_option("--dims", dims, "subspace dimensions (comma list for sweep)")->default_val(default_dims);
        cmd->add_option("--reduction", reduction, "reduction method: pca|kpca|ica|tsvd")->default_val("kpca");
        cmd->add_option("--kernel", kernel, "kpca kernel: linear|cosine|polynomial")->default_val("cosine");
        cmd->add_option("--hidden", hidden, "MLP hidden units (default 100 intra / 10 cross)")->default_val(-1);
        cmd->add_option("--standardize", standardize, "z-score before the reduction: on|off")->default_val("auto");
        cmd->add_option("--l2", l2, "L2 row normalization (sa_kpca/coral/kliep): on|off")->default_val("auto");
        cmd->add_option("--lambda", lambda, "CORAL ridge (negative = scale-aware default)")->default_val(-1.0);
        cmd->add_option("--sigma-grid", sigma_grid, "KLIEP sigma grid, comma list (default: median heuristic)");
        cmd->add_option("--n-basis", n_basis, "KLIEP basis count")->default_val(100);
        cmd->add_option("--folds", folds, "intra-subject CV folds")->default_val(10);
        cmd->add_option("--stratified", stratified, "stratify CV folds by gesture: on|off")->default_val("on");
        cmd->add_option("--kpca-exact", kpca_exact, "exact primal route for linear/cosine kpca: on|off")
            ->default_val("on");
        cmd->add_option("--max-train-refs", max_train_refs, "kpca Gram row cap")->default_val(2000);
        cmd->add_option("--jobs", jobs, "parallel units (0 = machine parallelism)")->default_val(0);
    }

    PipelineSpec build(std::uint64_t seed, int at_dims, Manifest& manifest) const {
        PipelineSpec spec = make_pipeline_spec(pipeline_mode_from_string(mode), at_dims);
        if (spec.reduction) {
            spec.reduction->method = parse_method(reduction);
            spec.reduction->kernel.kind = parse_kernel(kernel);
            spec.reduction->dims = at_dims;
        } else if (dims_explicit) {
            // An explicit --dims on a baseline sweeps/evaluates it inside the
            // requested subspace (pooled-source for cross, per-fold for intra).
            ReductionSpec r;
            r.method = parse_method(reduction);
            r.kernel.kind = parse_kernel(kernel);
            r.dims = at_dims;
            spec.reduction = r;
            if (standardize == "auto" && r.method != ReductionMethod::kpca) spec.standardize = true;
        }
        if (hidden > 0) spec.mlp.hidden_units = hidden;
        if (standardize != "auto") spec.standardize = parse_switch(standardize, "--standardize");
        if (l2 != "auto") spec.l2_preprocess = parse_switch(l2, "--l2");
        spec.coral_lambda = lambda;
        if (!sigma_grid.empty()) spec.kliep_sigma_grid = parse_double_list(sigma_grid);
        spec.kliep_n_basis = n_basis;
        spec.kfolds = folds;
        spec.stratified_folds = parse_switch(stratified, "--stratified");
        spec.kpca_exact_primal = parse_switch(kpca_exact, "--kpca-exact");
        spec.kpca_max_train_refs = max_train_refs;
        spec.jobs = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
        spec.seed = seed;

        manifest.config("mode", mode);
        manifest.config("dims", at_dims);
        manifest.config("reduction", reduction);
        manifest.config("kernel", kernel);
        manifest.config("hidden", spec.mlp.hidden_units);
        manifest.config("standardize", spec.standardize);
        manifest.config("l2", spec.l2_preprocess);
        manifest.config("lambda", spec.coral_lambda);
        manifest.config("n_basis", spec.kliep_n_basis);
        manifest.config("folds", spec.kfolds);
        manifest.config("stratified", spec.stratified_folds);
        manifest.config("kpca_exact", spec.kpca_exact_primal);
        manifest.config("max_train_refs", spec.kpca_max_train_refs);
        manifest.config("jobs", spec.jobs);
        return spec;
    }
};

int run_generate(const std::string& out, const std::string& format, const std::string& config_in,
                 const std::string& config_out, CohortConfig cohort, std::uint64_t seed, CLI::App* cmd) {
    if (!config_in.empty()) {
        std::ifstream in(config_in);
        if (!in) throw FormatError("cannot open '" + config_in + "' for reading");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CohortConfig from_file = parse_cohort_config(text);
        // Explicit flags override file values.
        if (cmd->count("--subjects") == 0) cohort.n_subjects = from_file.n_subjects;
        if (cmd->count("--windows-per-gesture") == 0) cohort.windows_per_gesture = from_file.windows_per_gesture;
        if (cmd->count("--gain-spread") == 0) cohort.gain_spread = from_file.gain_spread;
        if (cmd->count("--shift-strength") == 0) cohort.shift_strength = from_file.shift_strength;
        if (cmd->count("--activation-jitter") == 0) cohort.activation_jitter = from_file.activation_jitter;
        if (cmd->count("--seed") == 0) seed = from_file.seed;
    }
    cohort.seed = seed;
    cohort.validate();

    Manifest manifest("generate", seed);
    manifest.config("out", out);
    manifest.config("format", format);
    manifest.config("n_subjects", cohort.n_subjects);
    manifest.config("windows_per_gesture", cohort.windows_per_gesture);
    manifest.config("gain_spread", cohort.gain_spread);
    manifest.config("shift_strength", cohort.shift_strength);
    manifest.config("activation_jitter", cohort.activation_jitter);

    const Dataset d = generate_cohort(cohort);
    save_dataset(d, out, parse_format(format));
    manifest.output(out);
    if (!config_out.empty()) {
        std::ofstream cfg(config_out);
        if (!cfg) throw FormatError("cannot open '" + config_out + "' for writing");
        cfg << serialize_cohort_config(cohort);
        manifest.output(config_out);
    }
    manifest.write(out + ".manifest.json");
    return 0;
}

int run_features(InputOptions& input, const std::string& out, std::uint64_t seed) {
    Manifest manifest("features", seed);
    manifest.config("out", out);
    const FeatureMatrix m = input.load(seed, manifest);
    save_features_csv(m, out);
    manifest.output(out);
    manifest.write(out + ".manifest.json");
    return 0;
}

int run_eval(InputOptions& input, PipelineOptions& pipeline, const std::string& out_dir, std::uint64_t seed) {
    Manifest manifest("eval", seed);
    std::filesystem::create_directories(out_dir);
    const FeatureMatrix x = input.load(seed, manifest);
    const auto dims = parse_int_list(pipeline.dims);
    if (dims.size() != 1) throw ArgumentError("eval expects a single --dims value (use sweep for a list)");
    const PipelineSpec spec = pipeline.build(seed, dims[0], manifest);
    const ExperimentResult result = run_pipeline(x, spec);
    const std::string results_path = (std::filesystem::path(out_dir) / "results.csv").string();
    write_results_csv({result}, results_path, /*append_mean=*/true);
    manifest.output(results_path);
    manifest.body["mean_accuracy"] = result.mean_accuracy;
    manifest.body["mean_macro_f1"] = result.mean_macro_f1;
    manifest.write((std::filesystem::path(out_dir) / "manifest.json").string());
    std::cout << result.method << " mean accuracy " << result.mean_accuracy << "\n";
    return 0;
}

int run_sweep(InputOptions& input, PipelineOptions& pipeline, const std::string& out_dir, std::uint64_t seed) {
    Manifest manifest("sweep", seed);
    std::filesystem::create_directories(out_dir);
    const FeatureMatrix x = input.load(seed, manifest);
    const auto dims = parse_int_list(pipeline.dims);
    if (dims.empty()) throw ArgumentError("sweep needs at least one --dims value");
    std::vector<ExperimentResult> curve;
    for (int d : dims) {
        const PipelineSpec spec = pipeline.build(seed, d, manifest);
        curve.push_back(run_pipeline(x, spec));
        const std::string per_d = (std::filesystem::path(out_dir) / ("results_d" + std::to_string(d) + ".csv")).string();
        write_results_csv({curve.back()}, per_d, /*append_mean=*/true);
        manifest.output(per_d);
    }
    manifest.body["config"]["dims"] = pipeline.dims;
    const std::string curve_path = (std::filesystem::path(out_dir) / "curve.csv").string();
    write_summary_csv(curve, curve_path);
    manifest.output(curve_path);
    manifest.write((std::filesystem::path(out_dir) / "manifest.json").string());
    for (const auto& r : curve) std::cout << r.method << " d=" << r.dims << " mean accuracy " << r.mean_accuracy << "\n";
    return 0;
}

int run_project(InputOptions& input, const std::string& method, const std::string& kernel, int dims,
                const std::string& standardize, const std::string& out, std::uint64_t seed) {
    Manifest manifest("project", seed);
    manifest.config("method", method);
    manifest.config("kernel", kernel);
    manifest.config("dims", dims);
    manifest.config("out", out);
    const FeatureMatrix x = input.load(seed, manifest);

    FeatureMatrix fit_input = x;
    std::optional<Standardizer> std_state;
    const ReductionMethod m = parse_method(method);
    const bool want_standardize =
        standardize == "auto" ? (m != ReductionMethod::kpca) : parse_switch(standardize, "--standardize");
    manifest.config("standardize", want_standardize);
    if (want_standardize) {
        std_state = Standardizer::fit(x.values);
        fit_input = std_state->apply(x);
    }
    Projection proj;
    switch (m) {
        case ReductionMethod::pca: proj = fit_pca(fit_input, dims); break;
        case ReductionMethod::tsvd: proj = fit_tsvd(fit_input, dims); break;
        case ReductionMethod::ica: proj = fit_ica(fit_input, dims, derive_seed(seed, {0x70726f6aULL})); break;
        case ReductionMethod::kpca: {
            KernelSpec k;
            k.kind = parse_kernel(kernel);
            if (k.kind == KernelSpec::Kind::polynomial) {
                KpcaOptions opts;
                opts.seed = derive_seed(seed, {0x70726f6aULL});
                proj = fit_kpca(fit_input, k, dims, opts);
            } else {
                proj = fit_kpca_primal(fit_input, k, dims);
            }
            break;
        }
    }
    save_scores_csv(project(proj, fit_input), out);
    manifest.output(out);
    manifest.write(out + ".manifest.json");
    return 0;
}

int run_tsne(InputOptions& input, int dims, const std::string& kernel, const TsneConfig& cfg, int max_points,
             const std::string& out, std::uint64_t seed) {
    Manifest manifest("tsne", seed);
    manifest.config("dims", dims);
    manifest.config("kernel", kernel);
    manifest.config("perplexity", cfg.perplexity);
    manifest.config("iterations", cfg.iterations);
    manifest.config("learning_rate", cfg.learning_rate);
    manifest.config("early_exaggeration", cfg.early_exaggeration);
    manifest.config("max_points", max_points);
    manifest.config("out", out);
    const FeatureMatrix x = input.load(seed, manifest);

    KernelSpec k;
    k.kind = parse_kernel(kernel);
    const Projection proj = k.kind == KernelSpec::Kind::polynomial
                                ? fit_kpca(x, k, dims, {2000, derive_seed(seed, {0x74736e32ULL})})
                                : fit_kpca_primal(x, k, dims);
    FeatureMatrix subspace = project(proj, x);
    if (subspace.rows() > max_points) {
        subspace = subspace.take_rows(
            detail::stratified_subsample(subspace, max_points, derive_seed(seed, {0x74736e33ULL})));
    }
    TsneConfig tsne_cfg = cfg;
    tsne_cfg.seed = derive_seed(seed, {0x74736e34ULL});
    const TsneResult r = tsne_embed(subspace, tsne_cfg);
    if (r.size_warning) {
        std::cerr << "emgsa: warning: fewer than 3*perplexity points; embedding may be unstable\n";
    }
    FeatureMatrix coords;
    coords.values = r.embedding;
    coords.labels = r.labels;
    coords.subjects = r.subjects;
    save_scores_csv(coords, out);
    manifest.output(out);

    const std::string kl_path = out + ".kl.csv";
    std::ofstream kl(kl_path);
    if (!kl) throw FormatError("cannot open '" + kl_path + "' for writing");
    kl << "iteration,kl_divergence\n";
    for (const auto& [it, value] : r.kl_trace) kl << it << ',' << detail::format_double(value) << "\n";
    manifest.output(kl_path);
    manifest.write(out + ".manifest.json");
    return 0;
}

int run_stats(const std::vector<std::string>& results_files, double alpha, const std::string& out_dir,
              std::uint64_t seed) {
    Manifest manifest("stats", seed);
    manifest.config("alpha", alpha);
    std::filesystem::create_directories(out_dir);
    std::vector<ExperimentResult> results;
    for (const auto& file : results_files) {
        manifest.config("results", json(results_files));
        for (auto& r : load_results_csv(file)) results.push_back(std::move(r));
    }
    const RankTable table = rank_methods(results);
    const std::string ranks_path = (std::filesystem::path(out_dir) / "ranks.csv").string();
    const std::string nemenyi_path = (std::filesystem::path(out_dir) / "nemenyi.csv").string();
    write_rank_csv(table, ranks_path);
    write_nemenyi_csv(table, alpha, nemenyi_path);
    manifest.output(ranks_path);
    manifest.output(nemenyi_path);
    manifest.write((std::filesystem::path(out_dir) / "manifest.json").string());

    const Vector mean = table.mean_ranks();
    const double cd = nemenyi_cd(static_cast<int>(table.methods.size()), static_cast<int>(table.blocks.size()), alpha);
    std::cout << "critical difference (alpha=" << alpha << "): " << cd << "\n";
    for (std::size_t j = 0; j < table.methods.size(); ++j) {
        std::cout << table.methods[j] << " mean rank " << mean(static_cast<Eigen::Index>(j)) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emgsa: synthetic cross-subject EMG gesture benchmark"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "master seed; every random stream derives from it")->default_val(0);

    // generate
    auto* generate = app.add_subcommand("generate", "generate a synthetic cohort dataset");
    std::string gen_out, gen_format = "binary", gen_config_in, gen_config_out;
    CohortConfig gen_cohort;
    generate->add_option("--out", gen_out, "output dataset path")->required();
    generate->add_option("--format", gen_format, "binary|csv")->default_val("binary");
    generate->add_option("--config", gen_config_in, "key=value cohort config file");
    generate->add_option("--config-out", gen_config_out, "write the resolved config");
    generate->add_option("--subjects", gen_cohort.n_subjects, "cohort subjects")->default_val(14);
    generate->add_option("--windows-per-gesture", gen_cohort.windows_per_gesture, "windows per (subject, gesture)")
        ->default_val(150);
    generate->add_option("--gain-spread", gen_cohort.gain_spread, "per-channel gain spread")->default_val(1.0);
    generate->add_option("--shift-strength", gen_cohort.shift_strength, "electrode shift strength")->default_val(0.5);
    generate->add_option("--activation-jitter", gen_cohort.activation_jitter, "activation jitter")->default_val(0.15);

    // features
    auto* features = app.add_subcommand("features", "extract the 56-dim feature matrix");
    InputOptions feat_input;
    std::string feat_out;
    feat_input.add_to(features);
    features->add_option("--out", feat_out, "output feature csv")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "run one experiment pipeline");
    InputOptions eval_input;
    PipelineOptions eval_pipeline;
    std::string eval_out_dir = ".";
    eval_input.add_to(eval);
    eval_pipeline.add_to(eval, "10");
    eval->add_option("--out-dir", eval_out_dir, "output directory")->default_val(".");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run a pipeline over a dimension grid");
    InputOptions sweep_input;
    PipelineOptions sweep_pipeline;
    std::string sweep_out_dir = ".";
    sweep_input.add_to(sweep);
    sweep_pipeline.add_to(sweep, "2,5,10,15,20,30,56");
    sweep->add_option("--out-dir", sweep_out_dir, "output directory")->default_val(".");

    // project
    auto* project_cmd = app.add_subcommand("project", "fit a projection on all samples and export coordinates");
    InputOptions proj_input;
    std::string proj_method = "kpca", proj_kernel = "cosine", proj_standardize = "auto", proj_out;
    int proj_dims = 2;
    proj_input.add_to(project_cmd);
    project_cmd->add_option("--method", proj_method, "pca|kpca|ica|tsvd")->default_val("kpca");
    project_cmd->add_option("--kernel", proj_kernel, "linear|cosine|polynomial")->default_val("cosine");
    project_cmd->add_option("--dims", proj_dims, "projection dimensions")->default_val(2);
    project_cmd->add_option("--standardize", proj_standardize, "on|off (default: off for kpca, on otherwise)")
        ->default_val("auto");
    project_cmd->add_option("--out", proj_out, "output csv")->required();

    // tsne
    auto* tsne_cmd = app.add_subcommand("tsne", "embed the common kpca subspace with exact t-SNE");
    InputOptions tsne_input;
    TsneConfig tsne_cfg;
    std::string tsne_kernel = "cosine", tsne_out;
    int tsne_dims = 10, tsne_max_points = 3000;
    tsne_input.add_to(tsne_cmd);
    tsne_cmd->add_option("--dims", tsne_dims, "common subspace dimensions")->default_val(10);
    tsne_cmd->add_option("--kernel", tsne_kernel, "subspace kernel")->default_val("cosine");
    tsne_cmd->add_option("--perplexity", tsne_cfg.perplexity, "t-SNE perplexity")->default_val(30.0);
    tsne_cmd->add_option("--iterations", tsne_cfg.iterations, "gradient iterations")->default_val(1000);
    tsne_cmd->add_option("--learning-rate", tsne_cfg.learning_rate, "learning rate")->default_val(200.0);
    tsne_cmd->add_option("--exaggeration", tsne_cfg.early_exaggeration, "early exaggeration factor")
        ->default_val(12.0);
    tsne_cmd->add_option("--max-points", tsne_max_points, "subsample cap before embedding")->default_val(3000);
    tsne_cmd->add_option("--out", tsne_out, "output csv")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "Friedman/Nemenyi ranking over per-unit result csvs");
    std::vector<std::string> stats_results;
    double stats_alpha = 0.05;
    std::string stats_out_dir = ".";
    stats->add_option("--results", stats_results, "per-unit results csv files")->required()->expected(-1);
    stats->add_option("--alpha", stats_alpha, "significance level: 0.05 or 0.10")->default_val(0.05);
    stats->add_option("--out-dir", stats_out_dir, "output directory")->default_val(".");

    for (auto* sub : {generate, features, eval, sweep, project_cmd, tsne_cmd, stats}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "emgsa: " << e.what() << "\n";
        return 1;
    }

    try {
        if (generate->parsed()) return run_generate(gen_out, gen_format, gen_config_in, gen_config_out, gen_cohort, seed, generate);
        if (features->parsed()) return run_features(feat_input, feat_out, seed);
        if (eval->parsed()) {
            eval_pipeline.dims_explicit = eval->count("--dims") > 0;
            return run_eval(eval_input, eval_pipeline, eval_out_dir, seed);
        }
        if (sweep->parsed()) {
            sweep_pipeline.dims_explicit = true;
            return run_sweep(sweep_input, sweep_pipeline, sweep_out_dir, seed);
        }
        if (project_cmd->parsed())
            return run_project(proj_input, proj_method, proj_kernel, proj_dims, proj_standardize, proj_out, seed);
        if (tsne_cmd->parsed()) return run_tsne(tsne_input, tsne_dims, tsne_kernel, tsne_cfg, tsne_max_points, tsne_out, seed);
        if (stats->parsed()) return run_stats(stats_results, stats_alpha, stats_out_dir, seed);
        std::cerr << "emgsa: no subcommand\n";
        return 1;
    } catch (const ArgumentError& e) {
        std::cerr << "emgsa: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "emgsa: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "emgsa: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "emgsa: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "emgsa: " << e.what() << "\n";
        return 2;
    }
}
