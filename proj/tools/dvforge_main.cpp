// dv-forge: build token-level vision labels for OCR-style training data,
// render label-first documents, and exercise the losses on a small
// autoregressive model.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dvforge/pipelines.hpp"
#include "dvforge/util.hpp"
#include "dvforge/version.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::int64_t seed = -1; // < 0 keeps the config value
    int workers = 0;        // 0 keeps the config value
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config, "INI config file; defaults apply when absent")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "override run.seed");
    sub->add_option("--workers", c.workers, "override run.workers");
}

dvforge::ToolConfig load_config(const CommonOpts& c) {
    dvforge::ToolConfig cfg = c.config.empty() ? dvforge::ToolConfig{}
                                               : dvforge::ToolConfig::load(c.config);
    if (c.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(c.seed);
        cfg.render.seed = cfg.seed;
        cfg.toy.seed = cfg.seed;
    }
    if (c.workers > 0) {
        cfg.workers = c.workers;
    }
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dv-forge: token-level vision labels and the desk-scale model that checks them"};
    app.set_version_flag("--version", std::string(dvforge::kToolVersion));
    app.require_subcommand(1);

    CommonOpts common;

    auto* align = app.add_subcommand("align", "map OCR word boxes to visual-token labels");
    dvforge::AlignArgs align_args;
    add_common(align, common);
    align->add_option("--ocr", align_args.ocr, "OCR jsonl (image dims + word boxes)")
        ->required()
        ->check(CLI::ExistingFile);
    align->add_option("--qa", align_args.qa, "question/answer jsonl")
        ->required()
        ->check(CLI::ExistingFile);
    align->add_option("--vocab", align_args.vocab, "token<TAB>id vocabulary; byte-level when absent")
        ->check(CLI::ExistingFile);
    align->add_option("--out", align_args.out_dir, "output directory")->required();

    auto* render = app.add_subcommand("render", "draw documents whose labels are known by construction");
    dvforge::RenderArgs render_args;
    add_common(render, common);
    render->add_option("--docs", render_args.docs, "documents jsonl")->check(CLI::ExistingFile);
    render->add_flag("--synth", render_args.synth, "generate a synthetic corpus per [synth]");
    render->add_option("--vocab", render_args.vocab, "vocabulary; byte-level when absent")
        ->check(CLI::ExistingFile);
    render->add_option("--out", render_args.out_dir, "output directory")->required();

    auto* stats = app.add_subcommand("stats", "corpus label statistics");
    dvforge::StatsArgs stats_args;
    add_common(stats, common);
    stats->add_option("--samples", stats_args.samples, "samples jsonl")
        ->required()
        ->check(CLI::ExistingFile);
    stats->add_option("--vocab", stats_args.vocab, "vocabulary; byte-level when absent")
        ->check(CLI::ExistingFile);
    stats->add_option("--out", stats_args.out_dir, "also write stats.json here");

    auto* losscheck = app.add_subcommand("losscheck", "self-check the loss definitions");
    add_common(losscheck, common);

    auto* train = app.add_subcommand("train", "train the desk-scale model on a rendered corpus");
    dvforge::TrainArgs train_args;
    add_common(train, common);
    train->add_option("--data", train_args.data_dir, "directory with samples.jsonl and images")
        ->required()
        ->check(CLI::ExistingDirectory);
    train->add_option("--out", train_args.out_dir, "output directory")->required();

    auto* probe = app.add_subcommand("probe", "print top-k ids at every visual token");
    dvforge::ProbeArgs probe_args;
    add_common(probe, common);
    probe->add_option("--params", probe_args.params, "trained parameters")
        ->required()
        ->check(CLI::ExistingFile);
    probe->add_option("--data", probe_args.data_dir, "directory with samples.jsonl and images")
        ->required()
        ->check(CLI::ExistingDirectory);
    probe->add_option("--sample", probe_args.sample_id, "sample id; first sample when absent");
    probe->add_option("--top-k", probe_args.top_k, "ids per token")->default_val(5);

    auto* eval = app.add_subcommand("eval", "score the model on OCR-style tasks");
    dvforge::EvalArgs eval_args;
    add_common(eval, common);
    eval->add_option("--params", eval_args.params, "trained parameters")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--task", eval_args.task, "contextual | noncontextual | extraction")
        ->required();
    eval->add_option("--corpus", eval_args.corpus,
                     "docs jsonl (extraction), word frequency tsv (noncontextual), or line corpus (contextual)")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--out", eval_args.out_dir, "output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "re-render one corpus across token budgets and score each");
    dvforge::SweepArgs sweep_args;
    add_common(sweep, common);
    sweep->add_option("--params", sweep_args.params, "trained parameters")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--docs", sweep_args.docs, "documents jsonl")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--out", sweep_args.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        dvforge::ToolConfig cfg = load_config(common);
        if (align->parsed()) {
            dvforge::run_align(cfg, align_args);
        } else if (render->parsed()) {
            dvforge::run_render(cfg, render_args);
        } else if (stats->parsed()) {
            dvforge::run_stats(cfg, stats_args, std::cout);
        } else if (losscheck->parsed()) {
            return dvforge::run_losscheck(cfg, std::cout) == 0 ? 0 : 1;
        } else if (train->parsed()) {
            dvforge::run_train(cfg, train_args, std::cout);
        } else if (probe->parsed()) {
            dvforge::run_probe(cfg, probe_args, std::cout);
        } else if (eval->parsed()) {
            dvforge::run_eval(cfg, eval_args, std::cout);
        } else if (sweep->parsed()) {
            dvforge::run_sweep(cfg, sweep_args, std::cout);
        }
    } catch (const dvforge::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
