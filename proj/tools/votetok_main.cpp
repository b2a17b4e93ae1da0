// Command-line surface: every subcommand reads one JSON config, derives all
// randomness from its seed, and writes machine-readable outputs plus a run
// manifest under the output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "votetok/experiment.hpp"
#include "votetok/version.hpp"
#include "votetok/vote_analysis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace votetok;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out_dir;
    int workers = 0;
};

ExperimentConfig load_config_or_exit(const GlobalArgs& args) {
    std::vector<std::string> violations;
    ExperimentConfig cfg;
    if (args.config_path.empty()) {
        cfg = parse_experiment_config("{}", violations);
    } else {
        cfg = load_experiment_config(args.config_path, violations);
    }
    if (!violations.empty()) {
        const json err = {{"error", "invalid config"}, {"violations", violations}};
        std::cerr << err.dump(2) << "\n";
        std::exit(2);
    }
    if (args.seed) cfg.seed = *args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.workers > 0) cfg.eval_workers = args.workers;
    return cfg;
}

void cmd_synth(const GlobalArgs& args) {
    ExperimentConfig cfg = load_config_or_exit(args);
    resolve_noise_pools(cfg);
    const auto train_corpus = make_train_corpus(cfg);
    const auto eval_corpus = make_eval_corpus(cfg);
    const std::string train_dir = (fs::path(cfg.out_dir) / "corpus").string();
    const std::string eval_dir = (fs::path(cfg.out_dir) / "eval_corpus").string();
    write_corpus(train_corpus, train_dir);
    write_corpus(eval_corpus, eval_dir);
    write_run_manifest(cfg, "synth",
                       {train_dir + "/manifest.jsonl", eval_dir + "/manifest.jsonl",
                        cfg.pools.train_dir, cfg.pools.ood_dir});
    std::cout << "wrote " << train_corpus.size() << " train and " << eval_corpus.size()
              << " eval utterances under " << cfg.out_dir << "\n";
}

void cmd_perturb(const GlobalArgs& args, const std::string& in_path, const std::string& out_path,
                 const std::string& kind, double intensity) {
    ExperimentConfig cfg = load_config_or_exit(args);
    resolve_noise_pools(cfg);
    std::vector<PerturbationSpec> specs = cfg.noise_aware.specs;
    if (!kind.empty()) {
        PerturbationSpec one;
        one.kind = perturbation_kind_from_string(kind);
        one.intensity_lo = one.intensity_hi = intensity;
        if (one.kind == PerturbationKind::kRealNoise) one.noise_pool = cfg.pools.train_dir;
        one.validate();
        specs = {one};
    }
    const NoisePoolMap pools = load_noise_pools(specs);
    const Waveform w = load_wav(in_path);
    Rng rng(derive_seed(cfg.seed, "perturb"));
    const auto [out, applied] = perturb(w, specs, rng, pools);
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? "."
                               : fs::path(out_path).parent_path().string());
    save_wav(out, out_path);
    const json rec = {{"kind", to_string(applied.kind)},
                      {"realized_intensity", applied.realized_intensity},
                      {"noise_clip_id", applied.noise_clip_id},
                      {"clip_offset", applied.clip_offset},
                      {"draw_seed", applied.draw_seed}};
    std::ofstream(out_path + ".applied.json") << rec.dump(2) << "\n";
    std::cout << rec.dump(2) << "\n";
}

void cmd_train(const GlobalArgs& args) {
    ExperimentConfig cfg = load_config_or_exit(args);
    resolve_noise_pools(cfg);
    fs::create_directories(cfg.out_dir);
    const TrainArtifacts art = run_training(cfg);
    const std::string ckpt = (fs::path(cfg.out_dir) / "checkpoint.json").string();
    const std::string history = (fs::path(cfg.out_dir) / "history.csv").string();
    save_checkpoint(art.model, ckpt);
    write_history_csv(art.result.history, history);
    write_run_manifest(cfg, "train", {ckpt, history});
    if (!art.result.history.empty()) {
        const auto& last = art.result.history.back();
        std::printf("epoch %d  total %.4f  task %.4f  val_acc %.4f\n", last.epoch,
                    last.mean_loss.total, last.mean_loss.task, last.val_frame_accuracy);
    }
}

void cmd_tokenize(const GlobalArgs& args, const std::string& ckpt_path, const std::string& wav_path,
                  const std::string& manifest_path) {
    ExperimentConfig cfg = load_config_or_exit(args);
    const std::string ckpt =
        ckpt_path.empty() ? (fs::path(cfg.out_dir) / "checkpoint.json").string() : ckpt_path;
    const Model model = load_checkpoint(ckpt);

    std::vector<std::pair<std::string, std::vector<TokenId>>> seqs;
    if (!wav_path.empty()) {
        seqs.emplace_back(fs::path(wav_path).stem().string(),
                          model.tokenize(load_wav(wav_path), cfg.features));
    } else if (!manifest_path.empty()) {
        for (const auto& utt : load_corpus(manifest_path))
            seqs.emplace_back(utt.utterance_id, model.tokenize(utt.waveform, cfg.features));
    } else {
        throw std::runtime_error("tokenize: pass --wav or --manifest");
    }
    fs::create_directories(cfg.out_dir);
    const std::string out = (fs::path(cfg.out_dir) / "tokens.jsonl").string();
    write_tokens_jsonl(seqs, model.cfg.quantizer.code_dim, out);
    write_run_manifest(cfg, "tokenize", {out});
    std::cout << "wrote " << seqs.size() << " token sequences to " << out << "\n";
}

void cmd_eval(const GlobalArgs& args, const std::string& ckpt_path) {
    ExperimentConfig cfg = load_config_or_exit(args);
    resolve_noise_pools(cfg);
    const std::string ckpt =
        ckpt_path.empty() ? (fs::path(cfg.out_dir) / "checkpoint.json").string() : ckpt_path;
    const Model model = load_checkpoint(ckpt);
    const RobustnessReport report = run_eval(cfg, model);
    fs::create_directories(cfg.out_dir);
    const std::string report_json = (fs::path(cfg.out_dir) / "report.json").string();
    const std::string report_csv = (fs::path(cfg.out_dir) / "report.csv").string();
    write_report_json(report, report_json);
    write_report_csv(report, report_csv);
    write_run_manifest(cfg, "eval", {report_json, report_csv});
    for (const auto& row : report.rows)
        std::printf("%-10s UED %6.2f%% +- %.2f  (n=%d)\n", row.name.c_str(), row.mean_ued,
                    row.stddev_ued, row.count);
    std::printf("average UED %.2f%%  clean FER %.2f%%\n", report.average_ued,
                report.clean_frame_error_rate);
}

void cmd_vote_analyze(const GlobalArgs& args, int n, int d, std::vector<double> ps, int64_t trials) {
    const uint64_t seed = args.seed.value_or(1);
    const int workers = args.workers > 0 ? args.workers : 1;
    if (ps.empty()) ps = {0.05, 0.1, 0.2};
    json out = json::array();
    for (double p : ps) {
        const FlipModel model{n, d, p};
        const FlipModel single{1, d, p};
        const auto mc = monte_carlo_survival(model, trials, seed, workers);
        const double override_rate = majority_override_rate(model, trials, seed, workers);
        out.push_back({{"n", n},
                       {"d", d},
                       {"p", p},
                       {"analytic_survival", token_survival_prob(model)},
                       {"single_branch_survival", token_survival_prob(single)},
                       {"mc_survival", mc.estimate},
                       {"mc_stderr", mc.stderr_},
                       {"trials", trials},
                       {"majority_override_rate", override_rate}});
    }
    std::cout << out.dump(2) << "\n";
    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        std::ofstream(fs::path(args.out_dir) / "vote_analysis.json") << out.dump(2) << "\n";
    }
}

void cmd_replay_case(const std::string& fixture, const std::string& out_dir) {
    const CaseTable table = load_case_table(fixture);
    const auto voted = replay_case(table);
    json out = json::array();
    for (size_t i = 0; i < voted.size(); ++i) {
        const auto& pos = table.positions[i];
        int wrong = 0;
        for (TokenId v : pos.voters) wrong += v != pos.reference;
        out.push_back({{"position", pos.position},
                       {"reference", pos.reference},
                       {"voted", voted[i]},
                       {"voters_wrong", wrong},
                       {"recovered", voted[i] == pos.reference}});
        std::printf("position %-4d voted %-6u reference %-6u (%d/%zu voters wrong)%s\n",
                    pos.position, voted[i], pos.reference, wrong, pos.voters.size(),
                    voted[i] == pos.reference ? "" : "  MISMATCH");
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "replay_case.json") << out.dump(2) << "\n";
    }
}

void cmd_params(int n, int hidden_dim, int d) {
    std::printf("%-4s %-14s %-14s\n", "n", "quantizer", "increment");
    int64_t prev = 0;
    for (int i = 1; i <= n; i += 2) {
        const int64_t count = voter_param_overhead(i, hidden_dim, d);
        if (i == 1)
            std::printf("%-4d %-14lld %-14s\n", i, static_cast<long long>(count), "-");
        else
            std::printf("%-4d %-14lld %-14lld\n", i, static_cast<long long>(count),
                        static_cast<long long>(count - prev));
        prev = count;
    }
}

void cmd_ablate(const GlobalArgs& args, int seeds, const std::string& voters_csv) {
    ExperimentConfig cfg = load_config_or_exit(args);
    std::vector<int> voters;
    if (!voters_csv.empty()) {
        size_t pos = 0;
        while (pos < voters_csv.size()) {
            size_t comma = voters_csv.find(',', pos);
            if (comma == std::string::npos) comma = voters_csv.size();
            voters.push_back(std::stoi(voters_csv.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    const std::string out_dir = (fs::path(cfg.out_dir) / "ablation").string();
    const AblationSummary summary = run_ablation(
        cfg, voters, seeds, out_dir,
        [](const std::string& what) { std::cout << "running " << what << "\n"; });
    write_run_manifest(cfg, "ablate", {out_dir + "/ablation_summary.csv"});
    std::printf("%-16s %-10s %-10s\n", "variant", "avg UED%", "clean FER%");
    std::set<std::string> seen;
    for (const auto& run : summary.runs) {
        if (!seen.insert(run.variant).second) continue;
        std::printf("%-16s %-10.2f %-10.2f\n", run.variant.c_str(),
                    summary.mean_avg_ued(run.variant), summary.mean_clean_fer(run.variant));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noise-robust speech tokenization experiments"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "experiment config (JSON)")->configurable(false);
    app.add_option("--seed", args.seed, "override the config seed");
    app.add_option("--out", args.out_dir, "override the output directory");
    app.add_option("--workers", args.workers, "worker threads for eval / vote-analyze");

    auto* synth = app.add_subcommand("synth", "generate the synthetic corpus and noise pools");

    auto* pert = app.add_subcommand("perturb", "perturb one WAV file");
    std::string pert_in, pert_out, pert_kind;
    double pert_intensity = 0.0;
    pert->add_option("--in", pert_in, "input WAV")->required();
    pert->add_option("--out-wav", pert_out, "output WAV")->required();
    pert->add_option("--kind", pert_kind, "force one kind (gaussian|pink|brown|bitcrush|real)");
    pert->add_option("--intensity", pert_intensity, "intensity for --kind (SNR dB or bit depth)");

    auto* train_cmd = app.add_subcommand("train", "train a tokenizer from the config");

    auto* tok = app.add_subcommand("tokenize", "tokenize audio with a trained checkpoint");
    std::string tok_ckpt, tok_wav, tok_manifest;
    tok->add_option("--ckpt", tok_ckpt, "checkpoint path (default <out>/checkpoint.json)");
    tok->add_option("--wav", tok_wav, "a single WAV file");
    tok->add_option("--manifest", tok_manifest, "a corpus manifest.jsonl");

    auto* eval_cmd = app.add_subcommand("eval", "robustness report for a trained checkpoint");
    std::string eval_ckpt;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path (default <out>/checkpoint.json)");

    auto* vote = app.add_subcommand("vote-analyze", "voting error-correction oracles");
    int va_n = 5, va_d = 13;
    int64_t va_trials = 100000;
    std::vector<double> va_p;
    vote->add_option("--n", va_n, "branch count (odd)");
    vote->add_option("--d", va_d, "code dimension");
    vote->add_option("--p", va_p, "per-bit flip probability (repeatable)");
    vote->add_option("--trials", va_trials, "Monte Carlo trials");

    auto* replay = app.add_subcommand("replay-case", "replay a recorded voting case table");
    std::string fixture;
    replay->add_option("--fixture", fixture, "case table JSON")->required();

    auto* params_cmd = app.add_subcommand("params", "quantizer parameter overhead table");
    int pr_n = 7, pr_hidden = 1280, pr_d = 13;
    params_cmd->add_option("--n", pr_n, "max branch count");
    params_cmd->add_option("--D", pr_hidden, "hidden dim");
    params_cmd->add_option("--d", pr_d, "code dim");

    auto* ablate = app.add_subcommand("ablate", "sequential ablation study from one config");
    int ab_seeds = 3;
    std::string ab_voters;
    ablate->add_option("--seeds", ab_seeds, "seed replicates per variant");
    ablate->add_option("--voters", ab_voters, "extra full-model voter counts, e.g. 3,7");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) cmd_synth(args);
        if (pert->parsed()) cmd_perturb(args, pert_in, pert_out, pert_kind, pert_intensity);
        if (train_cmd->parsed()) cmd_train(args);
        if (tok->parsed()) cmd_tokenize(args, tok_ckpt, tok_wav, tok_manifest);
        if (eval_cmd->parsed()) cmd_eval(args, eval_ckpt);
        if (vote->parsed()) cmd_vote_analyze(args, va_n, va_d, va_p, va_trials);
        if (replay->parsed()) cmd_replay_case(fixture, args.out_dir);
        if (params_cmd->parsed()) cmd_params(pr_n, pr_hidden, pr_d);
        if (ablate->parsed()) cmd_ablate(args, ab_seeds, ab_voters);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
