// afb: dataset generation, segmentation, evaluation, bank benchmarks,
// memory-policy ablation and scorer training.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "afb/bench.hpp"
#include "afb/errors.hpp"
#include "afb/experiment.hpp"
#include "afb/parallel.hpp"
#include "afb/run_config.hpp"

namespace fs = std::filesystem;
using namespace afb;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;   // key=value

    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", path, "key = value run configuration file");
        cmd->add_option("--set", overrides, "override one config key (key=value), repeatable");
    }

    PipelineConfig load() const {
        PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_run_config(path);
        for (const std::string& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            apply_run_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

struct GenerateArgs {
    std::string out;
    SceneSpec spec;
    std::string motion = "linear";
};

int cmd_generate(GenerateArgs& a) {
    a.spec.motion = parse_motion(a.motion);
    a.spec.validate();
    generate_to_dir(a.spec, a.out);
    std::cout << "wrote " << a.spec.frames << " frames to " << a.out << "\n";
    return kOk;
}

struct RunArgs {
    std::string data, out, policy, scorer;
    ConfigArgs config;
    bool no_timing = false;
};

int cmd_run(const RunArgs& a) {
    PipelineConfig cfg = a.config.load();
    if (!a.policy.empty()) cfg.policy = parse_memory_policy(a.policy);
    if (!a.scorer.empty()) cfg.refine.scorer = load_scorer(a.scorer);
    const DatasetReader data(a.data);
    run_dataset(data, cfg, a.out, !a.no_timing);
    std::cout << "segmented " << data.size() - 1 << " frames into " << a.out << "\n";
    return kOk;
}

struct EvalArgs {
    std::string pred, gt, report;
};

int cmd_eval(const EvalArgs& a) {
    const nlohmann::json j = evaluate_dirs(a.pred, a.gt).to_json();
    if (!a.report.empty()) write_json(a.report, j);
    std::cout << j.dump(2) << "\n";
    return kOk;
}

struct BenchArgs {
    std::string stream = "clustered";
    std::string budget;
    ConfigArgs config;
    BenchConfig bench;
    bool no_timing = false;
};

int cmd_bench(BenchArgs& a) {
    BenchConfig cfg = a.bench;
    cfg.stream = parse_bench_stream(a.stream);
    if (!a.config.path.empty() || !a.config.overrides.empty()) cfg.bank = a.config.load().bank;
    if (!a.budget.empty()) {
        PipelineConfig tmp;
        apply_run_config_key(tmp, "budget", a.budget);
        cfg.bank.budget = tmp.bank.budget;
    }
    const BenchReport r = run_bench(cfg);
    nlohmann::json j = r.to_json(!a.no_timing);
    j["stream"] = to_string(cfg.stream);
    std::cout << j.dump(2) << "\n";
    return kOk;
}

struct AblateArgs {
    std::string data, variants, out;
    ConfigArgs config;
};

int cmd_ablate(const AblateArgs& a) {
    const PipelineConfig base = a.config.load();
    std::vector<AblationVariant> variants;
    if (a.variants.empty()) {
        variants = all_variants();
    } else {
        std::stringstream ss(a.variants);
        for (std::string name; std::getline(ss, name, ',');) {
            if (!name.empty()) variants.push_back(parse_variant(name));
        }
        if (variants.empty()) throw ConfigError("--variants names no variant");
    }
    const DatasetReader data(a.data);
    const auto rows = run_ablation(data, base, variants);
    std::printf("%-20s %8s %8s %8s\n", "variant", "J&F-M", "J-M", "F-M");
    for (const AblationRow& r : rows) {
        std::printf("%-20s %8.4f %8.4f %8.4f\n", r.variant.name().c_str(), r.scores.jf_mean, r.scores.j_agg.mean,
                    r.scores.f_agg.mean);
    }
    if (!a.out.empty()) write_json(a.out, ablation_json(rows));
    return kOk;
}

struct TrainArgs {
    std::string data, out;
    ConfigArgs config;
    std::size_t steps = 50;
    std::size_t frames = 8;
    double lr = 5.0;
    double w = 1.0;
    double b = 0.0;
    bool check_grad = false;
};

/// Largest relative error between analytic and central-difference gradients.
double gradient_check(const std::vector<RefineSample>& data, RefineConfig rc, double lambda_u) {
    const ScorerGrad g = scorer_loss_with_grad(data, rc, lambda_u);
    const double h = 1e-6;
    auto loss_at = [&](double dw, double db) {
        RefineConfig c = rc;
        c.scorer.w += dw;
        c.scorer.b += db;
        return scorer_loss_with_grad(data, c, lambda_u).loss;
    };
    const double fw = (loss_at(h, 0) - loss_at(-h, 0)) / (2 * h);
    const double fb = (loss_at(0, h) - loss_at(0, -h)) / (2 * h);
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); };
    std::printf("grad w: analytic %.9g numeric %.9g\n", g.dw, fw);
    std::printf("grad b: analytic %.9g numeric %.9g\n", g.db, fb);
    return std::max(rel(g.dw, fw), rel(g.db, fb));
}

int cmd_train_scorer(const TrainArgs& a) {
    PipelineConfig cfg = a.config.load();
    const DatasetReader data(a.data);
    const auto samples = collect_refine_samples(data, cfg, a.frames);
    RefineConfig rc = cfg.refine;
    rc.scorer = Scorer::trainable(a.w, a.b);
    if (a.check_grad) {
        const double err = gradient_check(samples, rc, cfg.lambda_u);
        std::printf("max relative error %.3g\n", err);
        if (!(err < 1e-4)) {
            std::cerr << "error: gradient check failed\n";
            return kInternal;
        }
    }
    const TrainResult r = train_scorer(samples, rc, cfg.lambda_u, a.steps, a.lr);
    for (std::size_t i = 0; i < r.loss_curve.size(); ++i) std::printf("step %zu loss %.9f\n", i, r.loss_curve[i]);
    nlohmann::json j = scorer_json(r.scorer);
    j["loss_curve"] = r.loss_curve;
    j["rejected_steps"] = r.rejected_steps;
    j["samples"] = samples.size();
    write_json(a.out, j);
    std::printf("w = %.9g, b = %.9g\n", r.scorer.w, r.scorer.b);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive feature bank video segmentation on synthetic videos"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "worker threads (default: AFB_THREADS or 1)")
        ->envname("AFB_THREADS")
        ->check(CLI::PositiveNumber);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "render a synthetic video dataset");
    g->add_option("--out", gen.out, "output directory")->required();
    g->add_option("--width", gen.spec.width)->check(CLI::Range(16, 4096));
    g->add_option("--height", gen.spec.height)->check(CLI::Range(16, 4096));
    g->add_option("--objects", gen.spec.num_objects)->check(CLI::Range(1, 5));
    g->add_option("--frames", gen.spec.frames)->check(CLI::PositiveNumber);
    g->add_option("--seed", gen.spec.seed);
    g->add_option("--drift", gen.spec.drift, "appearance drift per frame")->check(CLI::NonNegativeNumber);
    g->add_option("--motion", gen.motion)->check(CLI::IsMember({"static", "linear", "sinusoidal"}));
    g->add_flag("--occlusion", gen.spec.occlusion, "objects share the frame and may cross");

    RunArgs run;
    auto* r = app.add_subcommand("run", "segment a dataset from its first-frame annotation");
    r->add_option("--data", run.data, "dataset directory")->required();
    r->add_option("--out", run.out, "output directory (masks/, stats.jsonl)")->required();
    r->add_option("--policy", run.policy)->check(CLI::IsMember({"afb", "first", "latest", "first_latest", "first_latest5"}));
    r->add_option("--scorer", run.scorer, "scorer params JSON from train-scorer");
    r->add_flag("--no-timing", run.no_timing, "omit runtime_ms so stats are reproducible");
    run.config.add_to(r);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "score predicted masks against ground truth");
    e->add_option("--pred", ev.pred, "run or masks directory")->required();
    e->add_option("--gt", ev.gt, "dataset directory")->required();
    e->add_option("--report", ev.report, "write the JSON report here too");

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "stream synthetic features through one bank");
    b->add_option("--stream", bench.stream)->check(CLI::IsMember({"clustered", "drifting", "uniform"}));
    b->add_option("--features-per-frame", bench.bench.features_per_frame)->check(CLI::PositiveNumber);
    b->add_option("--frames", bench.bench.frames)->check(CLI::PositiveNumber);
    b->add_option("--budget", bench.budget, "entries, or 'inf'");
    b->add_option("--clusters", bench.bench.clusters)->check(CLI::PositiveNumber);
    b->add_option("--sigma", bench.bench.sigma, "noise norm around a cluster centre")->check(CLI::NonNegativeNumber);
    b->add_option("--rotation", bench.bench.rotation, "drifting stream: radians per frame");
    b->add_option("--queries", bench.bench.queries)->check(CLI::PositiveNumber);
    b->add_option("--seed", bench.bench.seed);
    b->add_flag("--no-timing", bench.no_timing, "omit throughput fields");
    bench.config.add_to(b);

    AblateArgs abl;
    auto* a = app.add_subcommand("ablate", "compare memory policies with and without refinement");
    a->add_option("--data", abl.data, "dataset directory")->required();
    a->add_option("--variants", abl.variants, "comma list of <policy>+urr / <policy>-urr (default: all)");
    a->add_option("--out", abl.out, "write the table as JSON here too");
    abl.config.add_to(a);

    TrainArgs tr;
    auto* t = app.add_subcommand("train-scorer", "fit the affine refinement scorer");
    t->add_option("--data", tr.data, "dataset directory")->required();
    t->add_option("--out", tr.out, "params JSON")->required();
    t->add_option("--steps", tr.steps);
    t->add_option("--lr", tr.lr)->check(CLI::NonNegativeNumber);
    t->add_option("--frames", tr.frames, "training frames sampled evenly")->check(CLI::PositiveNumber);
    t->add_option("--w", tr.w, "initial weight");
    t->add_option("--b", tr.b, "initial bias");
    t->add_flag("--check-grad", tr.check_grad, "compare analytic and finite-difference gradients first");
    tr.config.add_to(t);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUsage;
    }
    if (threads > 0) set_num_threads(threads);

    try {
        if (g->parsed()) return cmd_generate(gen);
        if (r->parsed()) return cmd_run(run);
        if (e->parsed()) return cmd_eval(ev);
        if (b->parsed()) return cmd_bench(bench);
        if (a->parsed()) return cmd_ablate(abl);
        if (t->parsed()) return cmd_train_scorer(tr);
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kUsage;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kData;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kData;
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << "\n";
        return kInternal;
    }
    return kUsage;
}
